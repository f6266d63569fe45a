use std::collections::BTreeSet;

use kehmode::eval::{
    downsample, grouped_splits, kfold, run_experiment, ConfusionMatrix, FoldClassifier, GroupKey,
    Grouping,
};
use kehmode::pipeline::{prepare_corpus, FeatureCache, PipelineConfig};
use kehmode::signal::{SegmentWindow, TraceMeta, VoltageTrace};
use kehmode::synthgen::{generate_traces, GeneratorConfig};
use kehmode::{Mode, Result};

struct Constant(usize);

impl FoldClassifier for Constant {
    fn name(&self) -> &str {
        "constant"
    }

    fn fit_predict(&self, _: &[Vec<f64>], _: &[usize], test_x: &[Vec<f64>], _: u64) -> Result<Vec<usize>> {
        Ok(vec![self.0; test_x.len()])
    }
}

fn small_corpus(traces_per_mode: usize) -> (Vec<SegmentWindow>, FeatureCache, PipelineConfig) {
    let gen = GeneratorConfig {
        traces_per_mode,
        trace_duration_s: 30.0,
        users: 2,
        ..GeneratorConfig::default()
    };
    let traces: Vec<VoltageTrace> = generate_traces(&gen).unwrap().into_iter().map(|g| g.trace).collect();
    let cfg = PipelineConfig { selected_count: 10, ..PipelineConfig::default() };
    let (_, windows) = prepare_corpus(&traces, &cfg).unwrap();
    let cache = FeatureCache::build(&windows, cfg.band_mode).unwrap();
    (windows, cache, cfg)
}

#[test]
fn confusion_accuracy_for_constant_and_perfect_predictions() {
    let mut constant = ConfusionMatrix::new(Mode::ALL.to_vec());
    let mut perfect = ConfusionMatrix::new(Mode::ALL.to_vec());
    for m in Mode::ALL {
        for _ in 0..7 {
            constant.add(m, Mode::ALL[0]).unwrap();
            perfect.add(m, m).unwrap();
        }
    }
    assert_eq!(constant.accuracy(), 0.2);
    assert_eq!(perfect.accuracy(), 1.0);
    assert_eq!(constant.row_sums(), vec![7; 5]);
}

#[test]
fn constant_classifier_scores_its_class_share() {
    let (windows, cache, cfg) = small_corpus(4);
    let plan = kfold(windows.len(), 5, 3).unwrap();
    let clfs: Vec<Box<dyn FoldClassifier>> = vec![Box::new(Constant(Mode::Bus.index()))];
    let res = run_experiment(&windows, &cache, &plan, &cfg, &clfs, 3).unwrap();
    let bus = windows.iter().filter(|w| w.meta.label == Some(Mode::Bus)).count();
    let report = &res.classifiers[0];
    assert_eq!(report.confusion.total(), windows.len() as u64);
    assert!((report.accuracy - bus as f64 / windows.len() as f64).abs() < 1e-12);
    assert_eq!(report.fold_accuracies.len(), 5);
    assert!(res.skipped.is_empty());
}

#[test]
fn kfold_partitions_every_index_once() {
    for (n, k) in [(10, 2), (23, 5), (100, 10), (7, 7)] {
        let plan = kfold(n, k, 9).unwrap();
        assert_eq!(plan.folds.len(), k);
        let mut seen = vec![0; n];
        for f in &plan.folds {
            let train: BTreeSet<_> = f.train.iter().collect();
            assert!(f.test.iter().all(|i| !train.contains(i)));
            assert_eq!(f.train.len() + f.test.len(), n);
            assert!(f.test.len() == n / k || f.test.len() == n / k + 1);
            f.test.iter().for_each(|i| seen[*i] += 1);
        }
        assert!(seen.iter().all(|c| *c == 1));
    }
    assert!(kfold(5, 1, 0).is_err());
    assert!(kfold(3, 4, 0).is_err());
    assert_eq!(kfold(50, 5, 1).unwrap(), kfold(50, 5, 1).unwrap());
}

#[test]
fn grouped_folds_hold_out_whole_groups() {
    let (windows, _, _) = small_corpus(4);
    let users = grouped_splits(&windows, GroupKey::User).unwrap();
    assert_eq!(users.grouping, Grouping::ByUser);
    assert_eq!(users.folds.len(), 2);
    let traces = grouped_splits(&windows, GroupKey::Trace).unwrap();
    assert_eq!(traces.folds.len(), 20);
    for f in &traces.folds {
        let g = f.group.as_deref().unwrap();
        assert!(f.test.iter().all(|i| windows[*i].meta.trace_id == g));
        assert!(f.train.iter().all(|i| windows[*i].meta.trace_id != g));
    }
}

#[test]
fn folds_missing_a_training_class_are_skipped() {
    let (mut windows, _, cfg) = small_corpus(4);
    // keep a single ferry trace so holding it out leaves no ferry training data
    windows.retain(|w| w.meta.label != Some(Mode::Ferry) || w.meta.trace_id == "ferry_000");
    let cache = FeatureCache::build(&windows, cfg.band_mode).unwrap();
    let plan = grouped_splits(&windows, GroupKey::Trace).unwrap();
    let clfs: Vec<Box<dyn FoldClassifier>> = vec![Box::new(Constant(0))];
    let res = run_experiment(&windows, &cache, &plan, &cfg, &clfs, 1).unwrap();
    assert_eq!(res.skipped.len(), 1);
    assert_eq!(res.skipped[0].group.as_deref(), Some("ferry_000"));
    assert_eq!(res.classifiers[0].fold_accuracies.len(), plan.folds.len() - 1);
}

#[test]
fn downsampling_composes() {
    let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
    let t = VoltageTrace::new(samples, 100.0, TraceMeta::default()).unwrap();
    for (a, b) in [(2, 2), (2, 5), (4, 1), (5, 2)] {
        let once = downsample(&t, a * b).unwrap();
        let twice = downsample(&downsample(&t, a).unwrap(), b).unwrap();
        assert_eq!(once.samples, twice.samples);
        assert_eq!(once.sampling_rate_hz, 100.0 / (a * b) as f64);
        assert_eq!(twice.sampling_rate_hz, once.sampling_rate_hz);
    }
    assert_eq!(downsample(&t, 1).unwrap().samples, t.samples);
    assert!(downsample(&t, 0).is_err());
}
