//! Raised-bar scenes with perpendicular-grasp labels.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::cornell::RgbdSample;
use crate::geometry::{GraspRect, Point};
use crate::raster::{DepthMap, Raster};

pub const MIN_SIZE: usize = 32;

/// Plate height and opening of the synthetic gripper as fractions of the
/// image side.
const GRIPPER_H: f64 = 0.125;
const GRIPPER_W: f64 = 0.3125;

const BACKGROUND_DEPTH: f64 = 1000.0;

/// The rendered bar: long axis along `theta` degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub center: Point,
    pub length: f64,
    pub thickness: f64,
    pub theta: f64,
    pub height: f64,
    pub color: [u8; 3],
}

impl Bar {
    fn axes(&self) -> ((f64, f64), (f64, f64)) {
        let (s, c) = self.theta.to_radians().sin_cos();
        ((c, s), (-s, c))
    }

    /// Coordinates of `p` along and across the bar.
    fn local(&self, p: Point) -> (f64, f64) {
        let ((ux, uy), (vx, vy)) = self.axes();
        let (dx, dy) = (p.x - self.center.x, p.y - self.center.y);
        (dx * ux + dy * uy, dx * vx + dy * vy)
    }

    pub fn contains(&self, p: Point) -> bool {
        let (u, v) = self.local(p);
        u.abs() <= self.length / 2.0 && v.abs() <= self.thickness / 2.0
    }

    fn at(&self, u: f64, v: f64) -> Point {
        let ((ux, uy), (vx, vy)) = self.axes();
        Point::new(self.center.x + u * ux + v * vx, self.center.y + u * uy + v * vy)
    }

    pub fn corners(&self) -> [Point; 4] {
        let (l, t) = (self.length / 2.0, self.thickness / 2.0);
        [self.at(-l, -t), self.at(l, -t), self.at(l, t), self.at(-l, t)]
    }

    fn inside(&self, size: usize) -> bool {
        let max = size as f64 - 1.0;
        self.corners().iter().all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= max && p.y <= max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub sample: RgbdSample,
    pub bar: Bar,
    /// Seed of the whole batch; the scene's stream is its index.
    pub seed: u64,
}

struct Archetype {
    length: f64,
    thickness: f64,
    height: f64,
    color: [u8; 3],
}

fn archetype(rng: &mut ChaCha8Rng, size: f64) -> Archetype {
    // one strong channel, one weak, one free: never close to the gray background
    let mut color = [0u8; 3];
    let strong = rng.gen_range(0..3);
    let weak = (strong + rng.gen_range(1..3)) % 3;
    color[strong] = rng.gen_range(200..=255);
    color[weak] = rng.gen_range(0..=60);
    color[3 - strong - weak] = rng.gen_range(0..=255);
    Archetype {
        length: rng.gen_range(0.45..0.65) * size,
        thickness: rng.gen_range(0.12..0.2) * size,
        height: rng.gen_range(15.0..40.0),
        color,
    }
}

pub fn archetype_count(n: usize) -> usize {
    (n / 10).max(5)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic scenes: scene `i` draws from its own stream of `seed` and
/// uses bar archetype `i mod max(5, n/10)`, whose id is its object id.
pub fn gen_synthetic(n: usize, size: usize, seed: u64) -> Result<Vec<SyntheticScene>, BenchError> {
    if n == 0 {
        return Err(BenchError::Config("synthetic scene count must be positive".into()));
    }
    if size < MIN_SIZE {
        return Err(BenchError::Config(format!("synthetic image size must be at least {MIN_SIZE}, got {size}")));
    }
    let mut arch_rng = rng_for(seed, u64::MAX);
    let archetypes: Vec<Archetype> = (0..archetype_count(n)).map(|_| archetype(&mut arch_rng, size as f64)).collect();
    Ok((0..n)
        .map(|i| {
            let k = i % archetypes.len();
            scene(i, &archetypes[k], k, size, seed)
        })
        .collect())
}

fn scene(i: usize, arch: &Archetype, k: usize, size: usize, seed: u64) -> SyntheticScene {
    let mut rng = rng_for(seed, i as u64);
    let s = size as f64;
    let mid = (s - 1.0) / 2.0;
    let theta = rng.gen_range(0.0..180.0);
    let jitter = s / 16.0;
    let mut bar = Bar {
        center: Point::new(mid, mid),
        length: arch.length,
        thickness: arch.thickness,
        theta,
        height: arch.height,
        color: arch.color,
    };
    for _ in 0..20 {
        let c = Point::new(mid + rng.gen_range(-jitter..=jitter), mid + rng.gen_range(-jitter..=jitter));
        let moved = Bar { center: c, ..bar };
        if moved.inside(size) {
            bar = moved;
            break;
        }
    }

    let gray: f64 = rng.gen_range(60.0..140.0);
    let (tilt_x, tilt_y) = (rng.gen_range(-5.0..5.0) / s, rng.gen_range(-5.0..5.0) / s);
    let mut rgb = Raster::filled(size, size, 3, 0u8);
    let mut values = Raster::filled(size, size, 1, 0.0);
    let mut missing = Raster::filled(size, size, 1, false);
    for r in 0..size {
        for c in 0..size {
            let p = Point::new(c as f64, r as f64);
            let on_bar = bar.contains(p);
            for ch in 0..3 {
                let base = if on_bar { bar.color[ch] as f64 } else { gray };
                let v = base + rng.gen_range(-25.0..=25.0);
                rgb.set(r, c, ch, v.round().clamp(0.0, 255.0) as u8);
            }
            let ground = BACKGROUND_DEPTH + tilt_x * c as f64 + tilt_y * r as f64 + rng.gen_range(-0.5..0.5);
            values.set(r, c, 0, if on_bar { ground + bar.height } else { ground });
        }
    }
    if rng.gen_bool(0.3) {
        for _ in 0..rng.gen_range(1..=3) {
            let (hh, hw) = (rng.gen_range(1..=size / 16), rng.gen_range(1..=size / 16));
            let (r0, c0) = (rng.gen_range(0..size - hh), rng.gen_range(0..size - hw));
            for r in r0..r0 + hh {
                for c in c0..c0 + hw {
                    values.set(r, c, 0, 0.0);
                    missing.set(r, c, 0, true);
                }
            }
        }
    }

    let (positive_grasps, negative_grasps) = grasps(&bar, size);
    SyntheticScene {
        sample: RgbdSample {
            id: format!("{i:04}"),
            object_id: format!("bar{k:02}"),
            rgb,
            depth: DepthMap { values, missing },
            positive_grasps,
            negative_grasps,
        },
        bar,
        seed,
    }
}

/// Gripper extents used for every synthetic grasp.
pub fn synthetic_gripper(size: usize) -> (f64, f64) {
    (GRIPPER_H * size as f64, GRIPPER_W * size as f64)
}

fn in_image(p: Point, size: usize) -> bool {
    let max = size as f64 - 1.0;
    p.x >= 0.0 && p.y >= 0.0 && p.x <= max && p.y <= max
}

/// Positives close across the bar at steps of half a plate height along
/// it. Negatives: a parallel grasp at the center, a perpendicular grasp
/// beside the bar and one beyond a tip.
fn grasps(bar: &Bar, size: usize) -> (Vec<GraspRect>, Vec<GraspRect>) {
    let (h, w) = synthetic_gripper(size);
    let rect = |p: Point, theta: f64| GraspRect::new(p.x, p.y, h, w, theta).expect("positive extents");
    let across = bar.theta + 90.0;

    let reach = (bar.length / 2.0 - h / 2.0 - 1.0).max(0.0);
    let step = h / 2.0;
    let k = (reach / step).floor() as i64;
    let positives = (-k..=k).map(|j| rect(bar.at(j as f64 * step, 0.0), across)).collect();

    let mut negatives = vec![rect(bar.center, bar.theta)];
    let side = bar.thickness / 2.0 + w / 2.0 + 3.0;
    if let Some(p) = [bar.at(0.0, side), bar.at(0.0, -side)].into_iter().find(|&p| in_image(p, size)) {
        negatives.push(rect(p, across));
    }
    let tip = bar.length / 2.0 + h / 2.0 + 3.0;
    if let Some(p) = [bar.at(tip, 0.0), bar.at(-tip, 0.0)].into_iter().find(|&p| in_image(p, size)) {
        negatives.push(rect(p, across));
    }
    (positives, negatives)
}

fn rect_lines(g: &GraspRect) -> String {
    // p1→p2 is a plate edge, p2→p3 runs along the opening
    let [c0, c1, c2, c3] = g.corners();
    [c3, c0, c1, c2].iter().map(|p| format!("{} {}\n", p.x, p.y)).collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

/// Writes scenes as a Cornell tree: `pcdNNNNr.png`, `pcdNNNN.txt`,
/// `pcdNNNNcpos.txt`, `pcdNNNNcneg.txt` and an `object_ids.txt` map.
pub fn write_cornell_layout(scenes: &[SyntheticScene], out: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut ids = String::new();
    for scene in scenes {
        let s = &scene.sample;
        let file = |suffix: &str| out.join(format!("pcd{}{suffix}", s.id));
        let png = file("r.png");
        let img = image::RgbImage::from_raw(s.width() as u32, s.height() as u32, s.rgb.data().to_vec())
            .expect("rgb raster is w*h*3");
        img.save(&png).map_err(|e| io_err(&png, e))?;

        let cloud = file(".txt");
        let present = s.depth.missing.data().iter().filter(|&&m| !m).count();
        let mut text = format!(
            "# .PCD v.7 - Point Cloud Data file format\nVERSION .7\nFIELDS x y z index\nSIZE 4 4 4 4\nTYPE F F F U\nCOUNT 1 1 1 1\nWIDTH {present}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {present}\nDATA ascii\n"
        );
        for r in 0..s.height() {
            for c in 0..s.width() {
                if !s.depth.missing.get(r, c, 0) {
                    let index = r * s.width() + c;
                    text.push_str(&format!("{c} {r} {} {index}\n", s.depth.values.get(r, c, 0)));
                }
            }
        }
        fs::write(&cloud, text).map_err(|e| io_err(&cloud, e))?;

        for (suffix, set) in [("cpos", &s.positive_grasps), ("cneg", &s.negative_grasps)] {
            let path = file(&format!("{suffix}.txt"));
            let text: String = set.iter().map(rect_lines).collect();
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
        ids.push_str(&format!("{} {}\n", s.id, s.object_id));
    }
    let map = out.join("object_ids.txt");
    let mut f = fs::File::create(&map).map_err(|e| io_err(&map, e))?;
    f.write_all(ids.as_bytes()).map_err(|e| io_err(&map, e))?;
    Ok(())
}
