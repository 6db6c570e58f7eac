mod support;

use std::collections::HashMap;
use std::fs;

use graspnet::cornell::{
    load_dataset, make_splits, parse_rect_str, IdSource, LoadOptions, SplitMode,
};
use graspnet::geometry::rect_corners;
use graspnet::DataError;
use proptest::prelude::*;
use support::fixtures::{corner_lines, write_sample};

#[test]
fn two_complete_one_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(&dir.path().join("02"), "0207", 8, 6);
    write_sample(&dir.path().join("01"), "0105", 8, 6);
    fs::remove_file(dir.path().join("02/pcd0207cneg.txt")).unwrap();
    write_sample(&dir.path().join("01"), "0110", 8, 6);

    let loaded = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
    let ids: Vec<_> = loaded.samples.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["0105", "0110"]);
    let r = &loaded.report;
    assert_eq!(r.skipped_samples.len(), 1);
    assert_eq!(r.skipped_samples[0].id, "0207");
    assert!(r.skipped_samples[0].reason.contains("negative"));
    assert_eq!((r.positive_grasps, r.negative_grasps), (2, 2));
    assert_eq!((r.positive_quadruples, r.negative_quadruples), (2, 4));
    assert_eq!(r.skipped_nonfinite, 2);
    assert_eq!(r.object_id_source, IdSource::IdPrefix);

    let s = &loaded.samples[0];
    s.validate().unwrap();
    assert_eq!(s.object_id, "01");
    assert_eq!((s.width(), s.height()), (8, 6));
    assert_eq!(s.depth.missing_count(), 1);
    assert!(s.depth.missing.get(0, 1, 0));
    assert_eq!(s.depth.values.get(1, 0, 0), 108.0);
    assert_eq!(s.rgb.get(2, 3, 0), 3);
}

#[test]
fn mapping_file_overrides_prefix() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "0105", 8, 6);
    write_sample(dir.path(), "0110", 8, 6);
    fs::write(dir.path().join("object_ids.txt"), "105 mug extra columns\n").unwrap();
    let loaded = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.samples[0].object_id, "mug");
    assert_eq!(loaded.samples[1].object_id, "01");
    assert_eq!(loaded.report.object_id_fallbacks, 1);
    assert!(matches!(loaded.report.object_id_source, IdSource::MappingFile { .. }));
}

#[test]
fn empty_and_missing_roots() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(dir.path(), &LoadOptions::default()), Err(DataError::NoSamples(_))));
    let gone = dir.path().join("nope");
    assert!(matches!(load_dataset(&gone, &LoadOptions::default()), Err(DataError::Io { .. })));
}

#[test]
fn bad_rect_file_reports_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "0105", 8, 6);
    fs::write(dir.path().join("pcd0105cpos.txt"), "1 1\n1 3\n5 3\n").unwrap();
    let err = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err().to_string();
    assert!(err.contains("pcd0105cpos.txt:3"), "{err}");
}

fn rotated_corners(x: f64, y: f64, h: f64, w: f64, t: f64) -> [(f64, f64); 4] {
    let (s, c) = t.to_radians().sin_cos();
    let at = |u: f64, v: f64| (x + c * u - s * v, y + s * u + c * v);
    // p1→p2 spans h, p2→p3 spans w
    [at(-w / 2.0, h / 2.0), at(-w / 2.0, -h / 2.0), at(w / 2.0, -h / 2.0), at(w / 2.0, h / 2.0)]
}

fn same_point_set(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> bool {
    a.iter().all(|p| b.iter().any(|q| (p.0 - q.0).abs() < tol && (p.1 - q.1).abs() < tol))
}

proptest! {
    #[test]
    fn parse_then_corners_round_trip(x in 0.0..640.0f64, y in 0.0..480.0f64, h in 1.0..60.0f64, w in 1.0..60.0f64, t in -180.0..180.0f64) {
        let corners = rotated_corners(x, y, h, w, t);
        let parsed = parse_rect_str(&corner_lines(&corners), None).unwrap();
        prop_assert_eq!(parsed.rects.len(), 1);
        let back: Vec<_> = rect_corners(&parsed.rects[0]).vertices().iter().map(|p| (p.x, p.y)).collect();
        prop_assert!(same_point_set(&corners, &back, 1e-6), "{:?} vs {:?}", corners, back);
    }

    #[test]
    fn corner_order_rotation_keeps_the_rectangle(x in 0.0..640.0f64, y in 0.0..480.0f64, h in 1.0..60.0f64, w in 1.0..60.0f64, t in 0.0..180.0f64, shift in 1usize..4) {
        let corners = rotated_corners(x, y, h, w, t);
        let mut shifted = corners;
        shifted.rotate_left(shift);
        let a = parse_rect_str(&corner_lines(&corners), None).unwrap().rects[0];
        let b = parse_rect_str(&corner_lines(&shifted), None).unwrap().rects[0];
        prop_assert!((a.x() - b.x()).abs() < 1e-9 && (a.y() - b.y()).abs() < 1e-9);
        prop_assert!((a.h() * a.w() - b.h() * b.w()).abs() < 1e-6 * a.h() * a.w());
        // an odd shift swaps which edge is read as h
        let consistent = if shift % 2 == 0 {
            (a.h() - b.h()).abs() < 1e-6 && graspnet::geometry::angle_delta(a.theta(), b.theta()) < 1e-6
        } else {
            (a.h() - b.w()).abs() < 1e-6 && (graspnet::geometry::angle_delta(a.theta(), b.theta()) - 90.0).abs() < 1e-6
        };
        prop_assert!(consistent);
    }

    #[test]
    fn splits_partition_and_colocate(n in 5usize..80, objects in 5usize..20, seed in any::<u64>(), object_wise in any::<bool>()) {
        let items: Vec<(String, String)> = (0..n).map(|i| (format!("{i}"), format!("o{}", i % objects))).collect();
        let distinct = objects.min(n);
        let mode = if object_wise { SplitMode::ObjectWise } else { SplitMode::ImageWise };
        let plan = match make_splits(&items, mode, seed) {
            Ok(p) => p,
            Err(_) => { prop_assert!(object_wise && distinct < 5); return Ok(()); }
        };
        prop_assert!(plan.check(&items).is_ok());
        let mut count: HashMap<&str, usize> = HashMap::new();
        for id in plan.folds.iter().flatten() {
            *count.entry(id).or_default() += 1;
        }
        prop_assert_eq!(count.len(), n);
        prop_assert!(count.values().all(|&c| c == 1));
        if !object_wise {
            let sizes: Vec<_> = plan.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(&plan, &make_splits(&items, mode, seed).unwrap());
    }
}
