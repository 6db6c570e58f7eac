//! Small Cornell-layout trees written to temporary directories.

use std::fs;
use std::path::Path;

pub fn write_png(path: &Path, width: u32, height: u32) {
    let img = image::RgbImage::from_fn(width, height, |x, y| image::Rgb([x as u8, y as u8, 7]));
    img.save(path).unwrap();
}

/// Cloud covering every pixel except those in `holes`; depth = 100 + index.
pub fn write_cloud(path: &Path, width: usize, height: usize, holes: &[usize]) {
    let mut s = format!(
        "# .PCD v.7 - Point Cloud Data file format\nFIELDS x y z rgb index\nSIZE 4 4 4 4 4\nTYPE F F F F U\nCOUNT 1 1 1 1 1\nWIDTH {n}\nHEIGHT 1\nPOINTS {n}\nDATA ascii\n",
        n = width * height - holes.len()
    );
    for i in (0..width * height).filter(|i| !holes.contains(i)) {
        s.push_str(&format!("0.5 -0.5 {} 4.2e6 {i}\n", 100 + i));
    }
    fs::write(path, s).unwrap();
}

pub fn corner_lines(corners: &[(f64, f64)]) -> String {
    corners.iter().map(|(x, y)| format!("{x} {y}\n")).collect()
}

/// Writes all four files of one sample. Positives: one axis-aligned
/// rectangle; negatives: one rectangle plus one NaN quadruple.
pub fn write_sample(dir: &Path, id: &str, width: usize, height: usize) {
    fs::create_dir_all(dir).unwrap();
    write_png(&dir.join(format!("pcd{id}r.png")), width as u32, height as u32);
    write_cloud(&dir.join(format!("pcd{id}.txt")), width, height, &[1]);
    let pos = corner_lines(&[(1.0, 1.0), (1.0, 3.0), (5.0, 3.0), (5.0, 1.0)]);
    fs::write(dir.join(format!("pcd{id}cpos.txt")), pos).unwrap();
    let neg = corner_lines(&[(2.0, 2.0), (4.0, 2.0), (4.0, 3.0), (2.0, 3.0)]) + "NaN NaN\nNaN NaN\nNaN NaN\nNaN NaN\n";
    fs::write(dir.join(format!("pcd{id}cneg.txt")), neg).unwrap();
}

/// In-memory sample with patterned rgb, a depth ramp and optional holes.
pub fn memory_sample(width: usize, height: usize, holes: &[(usize, usize)]) -> graspnet::RgbdSample {
    use graspnet::{DepthMap, GraspRect, Raster};
    let rgb = Raster::from_vec(
        width,
        height,
        3,
        (0..width * height * 3).map(|i| (i * 37 % 256) as u8).collect(),
    )
    .unwrap();
    let mut values = Raster::from_vec(width, height, 1, (0..width * height).map(|i| 500.0 + i as f64).collect()).unwrap();
    let mut missing = Raster::filled(width, height, 1, false);
    for &(r, c) in holes {
        values.set(r, c, 0, 0.0);
        missing.set(r, c, 0, true);
    }
    let center = GraspRect::new(width as f64 / 2.0, height as f64 / 2.0, 4.0, 8.0, 30.0).unwrap();
    graspnet::RgbdSample {
        id: "0001".into(),
        object_id: "00".into(),
        rgb,
        depth: DepthMap { values, missing },
        positive_grasps: vec![center],
        negative_grasps: vec![GraspRect::new(1.0, 1.0, 4.0, 8.0, 120.0).unwrap()],
    }
}
