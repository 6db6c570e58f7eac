//! Rasterization oracle for rectangle overlap.
//!
//! Builds rectangle corners from `(x, y, h, w, theta)` on its own and counts
//! grid cells whose centers fall inside, one scanline at a time. Area is cell
//! count × cell area.

#[derive(Clone, Copy, Debug)]
pub struct Rect5 {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub w: f64,
    pub theta_deg: f64,
}

pub fn corners(r: Rect5) -> [(f64, f64); 4] {
    let t = r.theta_deg.to_radians();
    let (ux, uy) = (t.cos() * r.w / 2.0, t.sin() * r.w / 2.0);
    let (vx, vy) = (-t.sin() * r.h / 2.0, t.cos() * r.h / 2.0);
    [
        (r.x - ux - vx, r.y - uy - vy),
        (r.x + ux - vx, r.y + uy - vy),
        (r.x + ux + vx, r.y + uy + vy),
        (r.x - ux + vx, r.y - uy + vy),
    ]
}

/// x-extent of a convex polygon along the horizontal line at `y`.
fn span(poly: &[(f64, f64)], y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (ymin, ymax) = (a.1.min(b.1), a.1.max(b.1));
        if y < ymin || y > ymax || ymin == ymax {
            continue;
        }
        let x = a.0 + (b.0 - a.0) * (y - a.1) / (b.1 - a.1);
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Number of cell centers `(k + 0.5)·cell` inside `[lo, hi]`.
fn centers_in(lo: f64, hi: f64, cell: f64) -> i64 {
    let first = ((lo / cell) - 0.5).ceil() as i64;
    let last = ((hi / cell) - 0.5).floor() as i64;
    (last - first + 1).max(0)
}

pub struct Overlap {
    pub area_a: f64,
    pub area_b: f64,
    pub intersection: f64,
}

impl Overlap {
    pub fn jaccard(&self) -> f64 {
        let union = self.area_a + self.area_b - self.intersection;
        if union <= 0.0 { 0.0 } else { self.intersection / union }
    }
}

pub fn overlap(a: Rect5, b: Rect5, cell: f64) -> Overlap {
    let (pa, pb) = (corners(a), corners(b));
    let ys = pa.iter().chain(&pb).map(|p| p.1);
    let ymin = ys.clone().fold(f64::INFINITY, f64::min);
    let ymax = ys.fold(f64::NEG_INFINITY, f64::max);
    let (mut ca, mut cb, mut ci) = (0i64, 0i64, 0i64);
    let mut row = (ymin / cell).floor() as i64;
    while (row as f64) * cell <= ymax {
        let y = (row as f64 + 0.5) * cell;
        let sa = span(&pa, y);
        let sb = span(&pb, y);
        if let Some((l, h)) = sa {
            ca += centers_in(l, h, cell);
        }
        if let Some((l, h)) = sb {
            cb += centers_in(l, h, cell);
        }
        if let (Some((la, ha)), Some((lb, hb))) = (sa, sb) {
            ci += centers_in(la.max(lb), ha.min(hb), cell);
        }
        row += 1;
    }
    let cell_area = cell * cell;
    Overlap {
        area_a: ca as f64 * cell_area,
        area_b: cb as f64 * cell_area,
        intersection: ci as f64 * cell_area,
    }
}

pub fn jaccard(a: Rect5, b: Rect5, cell: f64) -> f64 {
    overlap(a, b, cell).jaccard()
}

fn inside(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
    })
}

/// Cell-by-cell point-in-polygon count; slow, used to validate `overlap`.
pub fn brute_intersection(a: Rect5, b: Rect5, cell: f64) -> f64 {
    let (pa, pb) = (corners(a), corners(b));
    let all: Vec<_> = pa.iter().chain(&pb).collect();
    let bound = |f: fn(&(f64, f64)) -> f64, g: fn(f64, f64) -> f64, init| all.iter().map(|p| f(p)).fold(init, g);
    let (x0, x1) = (bound(|p| p.0, f64::min, f64::INFINITY), bound(|p| p.0, f64::max, f64::NEG_INFINITY));
    let (y0, y1) = (bound(|p| p.1, f64::min, f64::INFINITY), bound(|p| p.1, f64::max, f64::NEG_INFINITY));
    let mut count = 0u64;
    for r in (y0 / cell).floor() as i64..=(y1 / cell).ceil() as i64 {
        for c in (x0 / cell).floor() as i64..=(x1 / cell).ceil() as i64 {
            let p = ((c as f64 + 0.5) * cell, (r as f64 + 0.5) * cell);
            if inside(&pa, p) && inside(&pb, p) {
                count += 1;
            }
        }
    }
    count as f64 * cell * cell
}
