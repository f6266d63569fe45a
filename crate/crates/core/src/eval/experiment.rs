//! Fold-by-fold training and testing with per-fold feature refits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::baselines::{FoldClassifier, GaussianNb, Knn, LinearSvm};
use super::splits::{Grouping, SplitPlan};
use crate::classifier::{self, SrcConfig};
use crate::error::{Error, Result};
use crate::mode::Mode;
use crate::pipeline::{self, FeatureCache, PipelineConfig};
use crate::signal::SegmentWindow;

const MODULE: &str = "eval";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_list: Vec<Mode>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_list: Vec<Mode>) -> Self {
        let c = class_list.len();
        Self {
            class_list,
            counts: vec![vec![0; c]; c],
        }
    }

    fn position(&self, m: Mode) -> Result<usize> {
        self.class_list
            .iter()
            .position(|c| *c == m)
            .ok_or_else(|| Error::input(MODULE, format!("mode {m} is not in the class list")))
    }

    pub fn add(&mut self, truth: Mode, predicted: Mode) -> Result<()> {
        let (t, p) = (self.position(truth)?, self.position(predicted)?);
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        debug_assert_eq!(self.class_list, other.class_list);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }
}

/// Mean and Student-t 95% half-width; the half-width needs two or more values.
pub fn mean_ci95(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (0.0, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, Some(t * (var / n as f64).sqrt()))
}

/// The sparse representation classifier as a fold classifier. Labels are
/// `Mode::index()` values.
#[derive(Debug, Clone, Default)]
pub struct SrcFold {
    pub config: SrcConfig,
}

impl FoldClassifier for SrcFold {
    fn name(&self) -> &str {
        "src"
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
        _seed: u64,
    ) -> Result<Vec<usize>> {
        let labels: Vec<Mode> = train_y.iter().map(|&i| Mode::ALL[i]).collect();
        let groups = pipeline::group_by_class(train_x.to_vec(), &labels);
        let (model, notes) = classifier::train(&groups, &self.config)?;
        for w in notes.warnings {
            log::warn!("{w}");
        }
        test_x
            .iter()
            .map(|r| classifier::classify_lenient(&model, r).map(|c| c.predicted.index()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierChoice {
    Src,
    Svm,
    Knn,
    Nb,
}

impl ClassifierChoice {
    pub const ALL: [ClassifierChoice; 4] = [Self::Src, Self::Svm, Self::Knn, Self::Nb];

    pub fn build(self, src: &SrcConfig) -> Box<dyn FoldClassifier> {
        match self {
            Self::Src => Box::new(SrcFold { config: src.clone() }),
            Self::Svm => Box::new(LinearSvm::default()),
            Self::Knn => Box::new(Knn::default()),
            Self::Nb => Box::new(GaussianNb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub fold: usize,
    pub group: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub classifier: String,
    pub confusion: ConfusionMatrix,
    pub fold_accuracies: Vec<f64>,
    /// Pooled accuracy, trace(confusion) / total.
    pub accuracy: f64,
    pub mean_fold_accuracy: f64,
    pub ci95_half_width: Option<f64>,
}

impl ClassifierReport {
    fn new(classifier: String, class_list: Vec<Mode>) -> Self {
        Self {
            classifier,
            confusion: ConfusionMatrix::new(class_list),
            fold_accuracies: Vec::new(),
            accuracy: 0.0,
            mean_fold_accuracy: 0.0,
            ci95_half_width: None,
        }
    }

    fn finish(&mut self) {
        self.accuracy = self.confusion.accuracy();
        let (m, ci) = mean_ci95(&self.fold_accuracies);
        self.mean_fold_accuracy = m;
        self.ci95_half_width = ci;
    }

    /// Folds the results of another run of the same classifier into this one.
    pub fn absorb(&mut self, other: &ClassifierReport) {
        self.confusion.merge(&other.confusion);
        self.fold_accuracies.extend_from_slice(&other.fold_accuracies);
        self.finish();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub grouping: Grouping,
    pub folds_planned: usize,
    pub skipped: Vec<SkippedFold>,
    pub classifiers: Vec<ClassifierReport>,
}

/// Classes present among the windows, in `Mode::ALL` order.
pub fn classes_present(windows: &[SegmentWindow]) -> Result<Vec<Mode>> {
    let mut present = [false; Mode::ALL.len()];
    for w in windows {
        let m = w
            .meta
            .label
            .ok_or_else(|| Error::input(MODULE, "evaluation window without a label"))?;
        present[m.index()] = true;
    }
    Ok(Mode::ALL.into_iter().filter(|m| present[m.index()]).collect())
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64)
}

/// Runs every classifier on every fold of `plan`. Feature thresholds,
/// selection and normalization are refitted on each training side.
pub fn run_experiment(
    windows: &[SegmentWindow],
    cache: &FeatureCache,
    plan: &SplitPlan,
    config: &PipelineConfig,
    classifiers: &[Box<dyn FoldClassifier>],
    seed: u64,
) -> Result<ExperimentResult> {
    if cache.len() != windows.len() {
        return Err(Error::input(MODULE, "feature cache does not match the windows"));
    }
    plan.validate(windows.len(), None)?;
    let class_list = classes_present(windows)?;
    let labels: Vec<Mode> = windows.iter().map(|w| w.meta.label.unwrap()).collect();
    let mut reports: Vec<ClassifierReport> = classifiers
        .iter()
        .map(|c| ClassifierReport::new(c.name().to_string(), class_list.clone()))
        .collect();
    let mut skipped = Vec::new();
    for (f, fold) in plan.folds.iter().enumerate() {
        let train_classes: Vec<Mode> = {
            let mut seen = [false; Mode::ALL.len()];
            fold.train.iter().for_each(|&i| seen[labels[i].index()] = true);
            Mode::ALL.into_iter().filter(|m| seen[m.index()]).collect()
        };
        let skip = if fold.test.is_empty() {
            Some("empty test side".to_string())
        } else if train_classes != class_list {
            let missing: Vec<String> = class_list
                .iter()
                .filter(|m| !train_classes.contains(m))
                .map(Mode::to_string)
                .collect();
            Some(format!("training side lacks {}", missing.join(", ")))
        } else {
            None
        };
        if let Some(reason) = skip {
            log::warn!("fold {f} skipped: {reason}");
            skipped.push(SkippedFold {
                fold: f,
                group: fold.group.clone(),
                reason,
            });
            continue;
        }
        let train_refs: Vec<&SegmentWindow> = fold.train.iter().map(|&i| &windows[i]).collect();
        let (fitted, train_rows) = pipeline::fit_features(&train_refs, Some((cache, &fold.train)), config)?;
        let train_x: Vec<Vec<f64>> = train_rows.iter().map(|r| fitted.selection.project(r)).collect();
        let train_y: Vec<usize> = fold.train.iter().map(|&i| labels[i].index()).collect();
        let test_x: Vec<Vec<f64>> = fold
            .test
            .iter()
            .map(|&i| fitted.selection.project(&cache.row(i, &fitted.spec)))
            .collect();
        for (clf, report) in classifiers.iter().zip(reports.iter_mut()) {
            let pred = clf.fit_predict(&train_x, &train_y, &test_x, fold_seed(seed, f))?;
            let mut fold_cm = ConfusionMatrix::new(class_list.clone());
            for (&i, p) in fold.test.iter().zip(pred) {
                let predicted = *Mode::ALL
                    .get(p)
                    .ok_or_else(|| Error::input(MODULE, "classifier returned an unknown class"))?;
                fold_cm.add(labels[i], predicted)?;
            }
            report.fold_accuracies.push(fold_cm.accuracy());
            report.confusion.merge(&fold_cm);
        }
    }
    reports.iter_mut().for_each(ClassifierReport::finish);
    Ok(ExperimentResult {
        grouping: plan.grouping,
        folds_planned: plan.folds.len(),
        skipped,
        classifiers: reports,
    })
}
