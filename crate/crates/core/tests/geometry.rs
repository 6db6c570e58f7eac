mod support;

use graspnet::geometry::{angle_delta, jaccard, rect_corners, rectangle_metric, select_best, MetricConfig};
use graspnet::GraspRect;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::raster_oracle::{self, Rect5};

fn r5(g: &GraspRect) -> Rect5 {
    Rect5 { x: g.x(), y: g.y(), h: g.h(), w: g.w(), theta_deg: g.theta() }
}

fn random_rect(rng: &mut ChaCha8Rng) -> GraspRect {
    GraspRect::new(
        rng.gen_range(0.0..100.0),
        rng.gen_range(0.0..100.0),
        rng.gen_range(1.0..40.0),
        rng.gen_range(1.0..40.0),
        rng.gen_range(0.0..180.0),
    )
    .unwrap()
}

#[test]
fn scanline_oracle_matches_brute_force_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (a, b) = (random_rect(&mut rng), random_rect(&mut rng).with_center(50.0, 50.0));
        let a = a.with_center(50.0 + rng.gen_range(-10.0..10.0), 50.0);
        let fast = raster_oracle::overlap(r5(&a), r5(&b), 0.25).intersection;
        let slow = raster_oracle::brute_intersection(r5(&a), r5(&b), 0.25);
        assert_eq!(fast, slow);
    }
}

#[test]
fn half_shifted_unit_squares() {
    let a = GraspRect::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
    let b = a.translated(0.5, 0.0);
    let inter = graspnet::geometry::convex_intersection_area(&a.to_polygon(), &b.to_polygon());
    assert!((inter - 0.5).abs() < 1e-12);
    let raster = raster_oracle::overlap(r5(&a), r5(&b), 0.01).intersection;
    assert!((raster - 0.5).abs() < 1e-2, "{raster}");
    assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn clipping_agrees_with_rasterization_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b) = (random_rect(&mut rng), random_rect(&mut rng));
        let err = (jaccard(&a, &b) - raster_oracle::jaccard(r5(&a), r5(&b), 0.05)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 2e-2, "worst disagreement {worst}");
}

#[test]
fn overlapping_pairs_agree_with_rasterization() {
    // uniform pairs are mostly disjoint; force overlap to exercise clipping
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let a = random_rect(&mut rng);
        let b = random_rect(&mut rng).with_center(a.x() + rng.gen_range(-5.0..5.0), a.y() + rng.gen_range(-5.0..5.0));
        let err = (jaccard(&a, &b) - raster_oracle::jaccard(r5(&a), r5(&b), 0.05)).abs();
        assert!(err < 2e-2, "{a:?} {b:?} err {err}");
    }
}

/// Moves a copy of `gt` rotated by `dtheta` along x until the Jaccard index
/// reaches `target`.
fn rotated_with_jaccard(gt: &GraspRect, dtheta: f64, target: f64) -> GraspRect {
    let rotated = GraspRect::new(gt.x(), gt.y(), gt.h(), gt.w(), gt.theta() + dtheta).unwrap();
    assert!(jaccard(gt, &rotated) > target);
    let (mut lo, mut hi) = (0.0, gt.w() + gt.h());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if jaccard(gt, &rotated.translated(mid, 0.0)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rotated.translated(lo, 0.0)
}

#[test]
fn constructed_thirty_percent_overlap_cases() {
    let gt = GraspRect::new(50.0, 50.0, 10.0, 30.0, 0.0).unwrap();
    let cfg = MetricConfig::default();
    for (dtheta, expect) in [(25.0, true), (35.0, false)] {
        let pred = rotated_with_jaccard(&gt, dtheta, 0.30);
        let oracle = raster_oracle::jaccard(r5(&pred), r5(&gt), 0.05);
        assert!((oracle - 0.30).abs() < 2e-2, "oracle {oracle}");
        assert!((angle_delta(pred.theta(), gt.theta()) - dtheta).abs() < 1e-9);
        assert_eq!(rectangle_metric(&pred, &[gt], &cfg).unwrap().success, expect, "dtheta {dtheta}");
    }
}

fn rect_strategy() -> impl Strategy<Value = GraspRect> {
    (0.0..100.0f64, 0.0..100.0f64, 1.0..40.0f64, 1.0..40.0f64, 0.0..180.0f64)
        .prop_map(|(x, y, h, w, t)| GraspRect::new(x, y, h, w, t).unwrap())
}

proptest! {
    #[test]
    fn jaccard_is_symmetric(a in rect_strategy(), b in rect_strategy()) {
        prop_assert!((jaccard(&a, &b) - jaccard(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn jaccard_in_unit_interval(a in rect_strategy(), b in rect_strategy()) {
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
    }

    #[test]
    fn self_jaccard_is_one(a in rect_strategy()) {
        prop_assert_eq!(jaccard(&a, &a), 1.0);
    }

    #[test]
    fn translation_invariance(a in rect_strategy(), b in rect_strategy(), dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
        let moved = jaccard(&a.translated(dx, dy), &b.translated(dx, dy));
        prop_assert!((jaccard(&a, &b) - moved).abs() < 1e-9);
    }

    #[test]
    fn rotation_invariance(a in rect_strategy(), b in rect_strategy(), px in 0.0..100.0f64, py in 0.0..100.0f64, deg in -360.0..360.0f64) {
        let pivot = graspnet::geometry::Point::new(px, py);
        let turned = jaccard(&a.rotated_about(pivot, deg), &b.rotated_about(pivot, deg));
        prop_assert!((jaccard(&a, &b) - turned).abs() < 1e-6);
    }

    #[test]
    fn corner_polygon_area_is_h_times_w(a in rect_strategy()) {
        let area = rect_corners(&a).area();
        prop_assert!((area - a.h() * a.w()).abs() <= 1e-9 * a.h() * a.w());
    }

    #[test]
    fn angle_delta_half_turn_periodicity(t in -720.0..720.0f64, k in -5i32..5) {
        prop_assert!(angle_delta(t, t + 180.0 * k as f64) < 1e-9);
    }

    #[test]
    fn angle_delta_range(a in -720.0..720.0f64, b in -720.0..720.0f64) {
        let d = angle_delta(a, b);
        prop_assert!((0.0..=90.0).contains(&d));
    }

    #[test]
    fn rectangle_metric_self_match(g in rect_strategy()) {
        let m = rectangle_metric(&g, &[g], &MetricConfig::default()).unwrap();
        prop_assert!(m.success);
        prop_assert_eq!(m.matched_index, Some(0));
    }

    #[test]
    fn select_best_argmax_invariance(scores in prop::collection::vec(-10.0..10.0f64, 1..20), scale in 0.1..10.0f64, shift in -5.0..5.0f64) {
        let rects: Vec<_> = (0..scores.len())
            .map(|i| GraspRect::new(i as f64, 0.0, 1.0, 1.0, 0.0).unwrap())
            .collect();
        let plain: Vec<_> = rects.iter().copied().zip(scores.iter().copied()).collect();
        let transformed: Vec<_> = rects.iter().copied().zip(scores.iter().map(|s| (s * scale + shift).exp())).collect();
        prop_assert_eq!(select_best(&plain).unwrap(), select_best(&transformed).unwrap());
    }
}
