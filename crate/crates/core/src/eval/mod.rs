//! Evaluation protocols: fold plans, comparison classifiers, the experiment
//! runner and report writers.

pub mod baselines;
pub mod experiment;
pub mod report;
pub mod splits;

pub use baselines::{FoldClassifier, GaussianNb, Knn, LinearSvm};
pub use experiment::{
    run_experiment, ClassifierChoice, ClassifierReport, ConfusionMatrix, ExperimentResult, SrcFold,
};
pub use report::{evaluate, EvalConfig, EvaluationReport, Protocol, SweepRow};
pub use splits::{downsample, grouped_splits, kfold, GroupKey, Grouping, SplitPlan};
