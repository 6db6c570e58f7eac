use graspnet::bench::*;
use graspnet::config::RunConfig;
use graspnet::cornell::{load_dataset, LoadOptions, SplitMode};
use graspnet::geometry::{rectangle_metric, MetricConfig};
use graspnet::predictor::{build_model, BackboneSpec, Gripper, StageSpec, TrainedModel, Variant};
use graspnet::RgbdSample;

#[test]
fn generation_is_deterministic() {
    let a = gen_synthetic(100, 48, 17).unwrap();
    let b = gen_synthetic(100, 48, 17).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, gen_synthetic(100, 48, 18).unwrap());
    let objects: std::collections::BTreeSet<_> = a.iter().map(|s| s.sample.object_id.clone()).collect();
    assert_eq!(objects.len(), archetype_count(100));
}

#[test]
fn positives_self_pass_and_bar_is_raised() {
    let cfg = MetricConfig::default();
    for scene in gen_synthetic(60, 64, 3).unwrap() {
        let s = &scene.sample;
        for g in &s.positive_grasps {
            assert!(rectangle_metric(g, &[*g], &cfg).unwrap().success);
        }
        let (mut bar_min, mut ground_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..s.height() {
            for c in 0..s.width() {
                if s.depth.missing.get(r, c, 0) {
                    continue;
                }
                let d = s.depth.values.get(r, c, 0);
                if scene.bar.contains(graspnet::geometry::Point::new(c as f64, r as f64)) {
                    bar_min = bar_min.min(d);
                } else {
                    ground_max = ground_max.max(d);
                }
            }
        }
        assert!(bar_min > ground_max, "scene {}: {bar_min} vs {ground_max}", s.id);
        let theta = scene.bar.theta;
        assert!((0.0..180.0).contains(&theta));
    }
}

#[test]
fn written_layout_loads_back() {
    let scenes = gen_synthetic(12, 40, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_cornell_layout(&scenes, dir.path()).unwrap();
    let loaded = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.samples.len(), 12);
    for (scene, s) in scenes.iter().zip(&loaded.samples) {
        let want = &scene.sample;
        assert_eq!((&s.id, &s.object_id), (&want.id, &want.object_id));
        assert_eq!(s.rgb, want.rgb);
        assert_eq!(s.depth, want.depth);
        for (got, exp) in [(&s.positive_grasps, &want.positive_grasps), (&s.negative_grasps, &want.negative_grasps)] {
            assert_eq!(got.len(), exp.len());
            for (g, e) in got.iter().zip(exp.iter()) {
                let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
                assert!(close(g.x(), e.x()) && close(g.y(), e.y()) && close(g.h(), e.h()) && close(g.w(), e.w()));
                assert!(graspnet::geometry::angle_delta(g.theta(), e.theta()) < 1e-9, "{g:?} vs {e:?}");
            }
        }
    }
}

fn tiny(variant: Variant, mode: SplitMode) -> RunConfig {
    let mut cfg = RunConfig::desk(variant, 4);
    cfg.backbone_spec = BackboneSpec {
        stem_channels: 4,
        stem_stride: 2,
        stages: vec![StageSpec { blocks: 1, channels: 6, stride: 2 }],
    };
    cfg.head_spec.as_mut().unwrap().hidden = match variant {
        Variant::UniModal => vec![16],
        _ => vec![16, 8],
    };
    cfg.preprocessing.input_size = 32;
    cfg.stage1.epochs = 2;
    cfg.stage2.epochs = 1;
    cfg.synthetic = graspnet::config::SyntheticConfig { n: 25, size: 32, seed: 4 };
    cfg.split.mode = mode;
    cfg
}

fn strip_fps(mut v: serde_json::Value) -> serde_json::Value {
    v["fps"] = serde_json::Value::Null;
    v
}

#[test]
fn crossval_report_files_and_determinism() {
    let cfg = tiny(Variant::UniModal, SplitMode::ImageWise);
    let samples = DataSource::Synthetic.load(&cfg).unwrap();
    let run = run_crossval(&cfg, &samples, "synthetic").unwrap();
    let r = &run.report;
    assert_eq!(r.folds.len(), 5);
    assert_eq!(r.folds.iter().map(|f| f.n).sum::<usize>(), 25);
    let accs: Vec<f64> = r.folds.iter().map(|f| f.accuracy).collect();
    assert!((r.mean_accuracy - accs.iter().sum::<f64>() / 5.0).abs() < 1e-12);
    assert!(r.fps.mean > 0.0);
    let mut seen: Vec<&str> = run.outcomes.iter().map(|o| o.sample_id.as_str()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 25);

    let dir = tempfile::tempdir().unwrap();
    emit_report(r, &run.outcomes, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let parsed: EvalReport = serde_json::from_str(&text).unwrap();
    assert_eq!(&parsed, r);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    validate_report_json(&value).unwrap();
    let rows = csv::Reader::from_path(dir.path().join(&r.outcomes_csv_path)).unwrap().records().count();
    assert_eq!(rows, 25);
    let folds = csv::Reader::from_path(dir.path().join("fold_accuracy.csv")).unwrap().records().count();
    assert_eq!(folds, 5);

    let again = run_crossval(&cfg, &samples, "synthetic").unwrap();
    let a = strip_fps(serde_json::to_value(r).unwrap());
    let b = strip_fps(serde_json::to_value(&again.report).unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(run.outcomes, again.outcomes);

    let mut parallel = cfg.clone();
    parallel.parallel_folds = true;
    let par = run_crossval(&parallel, &samples, "synthetic").unwrap();
    assert_eq!(par.outcomes, run.outcomes);
}

#[test]
fn object_wise_crossval_keeps_objects_together() {
    let cfg = tiny(Variant::MultiModal, SplitMode::ObjectWise);
    let samples = DataSource::Synthetic.load(&cfg).unwrap();
    let run = run_crossval(&cfg, &samples, "synthetic").unwrap();
    assert!(run.report.split.objects_confined_to_one_fold);
    let object_of = |id: &str| samples.iter().find(|s| s.id == id).unwrap().object_id.clone();
    let mut fold_of = std::collections::HashMap::new();
    for o in &run.outcomes {
        let prev = *fold_of.entry(object_of(&o.sample_id)).or_insert(o.fold);
        assert_eq!(prev, o.fold);
    }
}

#[test]
fn graspability_crossval_counts_queries() {
    let cfg = tiny(Variant::Graspability, SplitMode::ImageWise);
    let samples = DataSource::Synthetic.load(&cfg).unwrap();
    let queries: usize = samples.iter().map(|s| s.positive_grasps.len() + s.negative_grasps.len()).sum();
    let run = run_crossval(&cfg, &samples, "synthetic").unwrap();
    assert_eq!(run.outcomes.len(), queries);
    assert!(run.outcomes.iter().all(|o| o.probability.is_some_and(|p| (0.0..=1.0).contains(&p))));
}

#[test]
fn bad_inputs_are_errors() {
    let cfg = tiny(Variant::UniModal, SplitMode::ImageWise);
    let few: Vec<RgbdSample> = DataSource::Synthetic.load(&cfg).unwrap().into_iter().take(3).collect();
    assert!(matches!(run_crossval(&cfg, &few, "synthetic"), Err(BenchError::Data(_))));
    let missing = DataSource::parse("/nonexistent/cornell");
    assert!(matches!(missing.load(&cfg), Err(BenchError::Data(_))));
}

fn untrained(variant: Variant, backbone: BackboneSpec) -> TrainedModel {
    let mut cfg = RunConfig::desk(variant, 0);
    cfg.backbone_spec = backbone;
    TrainedModel {
        model: build_model(&cfg.model_spec()).unwrap(),
        preprocess: cfg.preprocessing,
        gripper: Gripper { h: 8.0, w: 20.0 },
    }
}

#[test]
fn deeper_backbone_is_slower() {
    let samples: Vec<RgbdSample> = gen_synthetic(5, 64, 0).unwrap().into_iter().map(|s| s.sample).collect();
    let refs: Vec<&RgbdSample> = samples.iter().collect();
    let timing = graspnet::config::TimingConfig::default();
    let base = BackboneSpec::default();
    let shallow = time_inference(&untrained(Variant::UniModal, base.clone()), &refs, &timing).unwrap();
    let deep = time_inference(&untrained(Variant::UniModal, base.deepened()), &refs, &timing).unwrap();
    assert!(shallow.mean > 0.0 && deep.mean > 0.0);
    assert!(deep.mean < shallow.mean, "{} vs {}", deep.mean, shallow.mean);
    let short = graspnet::config::TimingConfig { warmup: 10, repeats: 99 };
    assert!(time_inference(&untrained(Variant::UniModal, base), &refs, &short).is_err());
}

#[test]
fn saved_model_predicts_like_the_original() {
    let cfg = tiny(Variant::UniModal, SplitMode::ImageWise);
    let samples = DataSource::Synthetic.load(&cfg).unwrap();
    let refs: Vec<&RgbdSample> = samples.iter().collect();
    let fitted = fit(&cfg, &refs, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_trained(dir.path(), &cfg, &fitted.trained).unwrap();
    let (loaded_cfg, loaded) = load_trained(dir.path()).unwrap();
    assert_eq!(loaded_cfg.variant, Variant::UniModal);
    assert_eq!(loaded.gripper, fitted.trained.gripper);
    use graspnet::predictor::GraspPredictor;
    for s in &samples[..5] {
        let (a, b) = (fitted.trained.predict(s).unwrap().rect, loaded.predict(s).unwrap().rect);
        // weights are stored as f32
        assert!((a.x() - b.x()).abs() < 1e-3 && (a.y() - b.y()).abs() < 1e-3, "{a:?} vs {b:?}");
        assert!(graspnet::geometry::angle_delta(a.theta(), b.theta()) < 1e-3);
    }
}
