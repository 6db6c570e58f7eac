use super::PreprocessError;
use crate::geometry::Point;
use crate::raster::Raster;

/// A square crop and the source position of its top-left cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch<T> {
    pub raster: Raster<T>,
    /// Source `(col, row)` of patch cell `(0, 0)`; negative when padded.
    pub origin: (i64, i64),
}

/// Square crop of side `patch_size` centered on `center`; cells outside the
/// source take `fill`.
pub fn extract_patch<T: Copy>(
    src: &Raster<T>,
    center: Point,
    patch_size: usize,
    fill: T,
) -> Result<Patch<T>, PreprocessError> {
    if patch_size == 0 {
        return Err(PreprocessError::Config("patch_size must be positive".into()));
    }
    let (w, h) = (src.width() as f64, src.height() as f64);
    if !(center.x >= 0.0 && center.y >= 0.0 && center.x < w && center.y < h) {
        return Err(PreprocessError::OutOfBounds(format!(
            "patch center ({}, {}) outside a {}x{} image",
            center.x,
            center.y,
            src.height(),
            src.width()
        )));
    }
    let half = patch_size as f64 / 2.0;
    let origin = ((center.x - half).round() as i64, (center.y - half).round() as i64);
    Ok(Patch {
        raster: crop(src, origin, patch_size, fill),
        origin,
    })
}

/// `size × size` window at `origin`, padded with `fill`.
pub(crate) fn crop<T: Copy>(src: &Raster<T>, origin: (i64, i64), size: usize, fill: T) -> Raster<T> {
    let ch = src.channels();
    let mut out = Raster::filled(size, size, ch, fill);
    for r in 0..size {
        let sr = origin.1 + r as i64;
        if sr < 0 || sr >= src.height() as i64 {
            continue;
        }
        for c in 0..size {
            let sc = origin.0 + c as i64;
            if sc < 0 || sc >= src.width() as i64 {
                continue;
            }
            for k in 0..ch {
                out.set(r, c, k, src.get(sr as usize, sc as usize, k));
            }
        }
    }
    out
}

/// Corner-aligned source coordinate of output index `i`.
#[inline]
fn source_coord(i: usize, n_out: usize, n_in: usize) -> f64 {
    if n_out == 1 {
        (n_in as f64 - 1.0) / 2.0
    } else {
        i as f64 * (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
    }
}

/// Bilinear resize to `size × size` with corner-aligned sampling: output
/// corners coincide with source corners.
pub fn resize_bilinear(src: &Raster<f64>, size: usize) -> Result<Raster<f64>, PreprocessError> {
    if src.width() == 0 || src.height() == 0 || size == 0 {
        return Err(PreprocessError::Shape("resize needs non-empty source and target".into()));
    }
    let ch = src.channels();
    let mut out = Raster::filled(size, size, ch, 0.0);
    let taps = |n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..size)
            .map(|i| {
                let s = source_coord(i, size, n_in);
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let (rows, cols) = (taps(src.height()), taps(src.width()));
    for (r, &(r0, r1, fy)) in rows.iter().enumerate() {
        for (c, &(c0, c1, fx)) in cols.iter().enumerate() {
            for k in 0..ch {
                let top = lerp(src.get(r0, c0, k), src.get(r0, c1, k), fx);
                let bottom = lerp(src.get(r1, c0, k), src.get(r1, c1, k), fx);
                out.set(r, c, k, lerp(top, bottom, fy));
            }
        }
    }
    Ok(out)
}

/// `a + t·(b − a)`, exact when `a == b`.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        a
    } else {
        a + t * (b - a)
    }
}

/// Bilinear sample at fractional source `(x, y)`; zero outside the raster.
fn sample_zero_padded(src: &Raster<f64>, x: f64, y: f64, k: usize) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |r: f64, c: f64| {
        if r < 0.0 || c < 0.0 || r >= src.height() as f64 || c >= src.width() as f64 {
            0.0
        } else {
            src.get(r as usize, c as usize, k)
        }
    };
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1.0) * fx;
    let bottom = at(y0 + 1.0, x0) * (1.0 - fx) + at(y0 + 1.0, x0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// `size × size` view of a `side`-pixel square centered on `center` and
/// rotated by `theta_deg`, so the output's horizontal axis runs along θ.
pub fn extract_oriented_patch(
    src: &Raster<f64>,
    center: Point,
    theta_deg: f64,
    side: f64,
    size: usize,
) -> Result<Raster<f64>, PreprocessError> {
    if !(side > 0.0) || size == 0 {
        return Err(PreprocessError::Config("oriented patch needs positive side and size".into()));
    }
    let (s, c) = theta_deg.to_radians().sin_cos();
    let step = side / size as f64;
    let mut out = Raster::filled(size, size, src.channels(), 0.0);
    for r in 0..size {
        let v = (r as f64 + 0.5) * step - side / 2.0;
        for col in 0..size {
            let u = (col as f64 + 0.5) * step - side / 2.0;
            // pixel centers sit at integer coordinates in the source
            let x = center.x + c * u - s * v;
            let y = center.y + s * u + c * v;
            for k in 0..src.channels() {
                out.set(r, col, k, sample_zero_padded(src, x, y, k));
            }
        }
    }
    Ok(out)
}
