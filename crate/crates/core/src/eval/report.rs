//! Protocol driver and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, ClassifierChoice, ClassifierReport, SkippedFold};
use super::splits::{downsample, group_keys, grouped_by_keys, kfold, GroupKey, Grouping, SplitPlan};
use crate::error::{Error, Result};
use crate::mode::Mode;
use crate::pipeline::{self, FeatureCache, PipelineConfig};
use crate::signal::{SegmentWindow, VoltageTrace};

pub const REPORT_FORMAT_VERSION: u32 = 1;

const MODULE: &str = "eval";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Kfold,
    Trace,
    User,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kfold" => Ok(Self::Kfold),
            "trace" => Ok(Self::Trace),
            "user" => Ok(Self::User),
            _ => Err(Error::param(MODULE, format!("unknown protocol {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub folds: usize,
    /// Independent k-fold shuffles, seeded `seed`, `seed + 1`, ...
    pub repetitions: usize,
    pub classifiers: Vec<ClassifierChoice>,
    pub window_sweep_s: Vec<f64>,
    pub rate_sweep_hz: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Kfold,
            folds: 10,
            repetitions: 1,
            classifiers: ClassifierChoice::ALL.to_vec(),
            window_sweep_s: Vec::new(),
            rate_sweep_hz: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.protocol == Protocol::Kfold && self.folds < 2 {
            return Err(Error::param(MODULE, "k-fold needs at least 2 folds"));
        }
        if self.repetitions == 0 {
            return Err(Error::param(MODULE, "repetitions must be at least 1"));
        }
        if self.classifiers.is_empty() {
            return Err(Error::param(MODULE, "no classifiers requested"));
        }
        if self.window_sweep_s.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::param(MODULE, "window sweep values must be positive"));
        }
        if self.rate_sweep_hz.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::param(MODULE, "rate sweep values must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `window_seconds` or `sampling_rate_hz`.
    pub sweep: String,
    pub value: f64,
    pub classifier: String,
    pub accuracy: f64,
    pub mean_fold_accuracy: f64,
    pub ci95_half_width: Option<f64>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub protocol: Protocol,
    pub grouping: Grouping,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub eval: EvalConfig,
    pub stationary_threshold_v: f64,
    pub window_count: usize,
    pub class_list: Vec<Mode>,
    pub folds_planned: usize,
    pub skipped_folds: Vec<SkippedFold>,
    pub classifiers: Vec<ClassifierReport>,
    pub sweeps: Vec<SweepRow>,
}

fn plans(
    windows: &[SegmentWindow],
    eval: &EvalConfig,
    seed: u64,
) -> Result<(Grouping, Vec<(u64, SplitPlan)>)> {
    Ok(match eval.protocol {
        Protocol::Kfold => {
            let mut out = Vec::new();
            for r in 0..eval.repetitions {
                let s = seed.wrapping_add(r as u64);
                out.push((s, kfold(windows.len(), eval.folds, s)?));
            }
            (Grouping::RandomWindow, out)
        }
        Protocol::Trace | Protocol::User => {
            let (key, grouping) = if eval.protocol == Protocol::Trace {
                (GroupKey::Trace, Grouping::ByTrace)
            } else {
                (GroupKey::User, Grouping::ByUser)
            };
            let keys = group_keys(windows, key);
            let plan = grouped_by_keys(&keys, grouping)?;
            plan.validate(windows.len(), Some(&keys))?;
            (grouping, vec![(seed, plan)])
        }
    })
}

struct ProtocolOutcome {
    threshold: f64,
    window_count: usize,
    class_list: Vec<Mode>,
    grouping: Grouping,
    folds_planned: usize,
    skipped: Vec<SkippedFold>,
    classifiers: Vec<ClassifierReport>,
}

fn run_protocol(
    traces: &[VoltageTrace],
    config: &PipelineConfig,
    eval: &EvalConfig,
) -> Result<ProtocolOutcome> {
    let (threshold, windows) = pipeline::prepare_corpus(traces, config)?;
    if windows.is_empty() {
        return Err(Error::input(MODULE, "no windows survive preprocessing"));
    }
    let class_list = super::experiment::classes_present(&windows)?;
    if class_list.len() < 2 {
        return Err(Error::input(MODULE, "evaluation needs at least two modes"));
    }
    let cache = FeatureCache::build(&windows, config.band_mode)?;
    let classifiers: Vec<_> = eval.classifiers.iter().map(|c| c.build(&config.src)).collect();
    let (grouping, plans) = plans(&windows, eval, config.seed)?;
    let mut merged: Option<Vec<ClassifierReport>> = None;
    let mut skipped = Vec::new();
    let mut folds_planned = 0;
    for (seed, plan) in &plans {
        let r = run_experiment(&windows, &cache, plan, config, &classifiers, *seed)?;
        folds_planned += r.folds_planned;
        skipped.extend(r.skipped);
        match merged.as_mut() {
            None => merged = Some(r.classifiers),
            Some(m) => m.iter_mut().zip(&r.classifiers).for_each(|(a, b)| a.absorb(b)),
        }
    }
    Ok(ProtocolOutcome {
        threshold,
        window_count: windows.len(),
        class_list,
        grouping,
        folds_planned,
        skipped,
        classifiers: merged.unwrap_or_default(),
    })
}

fn sweep_rows(sweep: &str, value: f64, reports: &[ClassifierReport]) -> Vec<SweepRow> {
    reports
        .iter()
        .map(|r| SweepRow {
            sweep: sweep.to_string(),
            value,
            classifier: r.classifier.clone(),
            accuracy: r.accuracy,
            mean_fold_accuracy: r.mean_fold_accuracy,
            ci95_half_width: r.ci95_half_width,
            folds: r.fold_accuracies.len(),
        })
        .collect()
}

/// Integer factor that takes `from_hz` to `to_hz`.
pub fn downsample_factor(from_hz: f64, to_hz: f64) -> Result<usize> {
    let f = from_hz / to_hz;
    let rounded = f.round();
    if rounded < 1.0 || (f - rounded).abs() > 1e-9 * f {
        return Err(Error::param(
            MODULE,
            format!("{to_hz} Hz is not an integer division of {from_hz} Hz"),
        ));
    }
    Ok(rounded as usize)
}

/// Runs the configured protocol and any sweeps. Every sweep point reruns
/// the same protocol with one parameter changed.
pub fn evaluate(
    traces: &[VoltageTrace],
    config: &PipelineConfig,
    eval: &EvalConfig,
) -> Result<EvaluationReport> {
    config.validate()?;
    eval.validate()?;
    let main = run_protocol(traces, config, eval)?;
    let mut sweeps = Vec::new();
    for &t in &eval.window_sweep_s {
        let cfg = PipelineConfig {
            window_seconds: t,
            ..config.clone()
        };
        let r = run_protocol(traces, &cfg, eval)?;
        sweeps.extend(sweep_rows("window_seconds", t, &r.classifiers));
    }
    for &rate in &eval.rate_sweep_hz {
        let low = traces
            .iter()
            .map(|t| downsample(t, downsample_factor(t.sampling_rate_hz, rate)?))
            .collect::<Result<Vec<_>>>()?;
        let r = run_protocol(&low, config, eval)?;
        sweeps.extend(sweep_rows("sampling_rate_hz", rate, &r.classifiers));
    }
    Ok(EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        protocol: eval.protocol,
        grouping: main.grouping,
        seed: config.seed,
        pipeline: config.clone(),
        eval: eval.clone(),
        stationary_threshold_v: main.threshold,
        window_count: main.window_count,
        class_list: main.class_list,
        folds_planned: main.folds_planned,
        skipped_folds: main.skipped,
        classifiers: main.classifiers,
        sweeps,
    })
}

pub fn confusion_csv(report: &ClassifierReport) -> String {
    let cm = &report.confusion;
    let mut out = String::from("true\\predicted");
    for m in &cm.class_list {
        write!(out, ",{m}").unwrap();
    }
    out.push('\n');
    for (m, row) in cm.class_list.iter().zip(&cm.counts) {
        out.push_str(m.as_str());
        for c in row {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("sweep,value,classifier,accuracy,mean_fold_accuracy,ci95_half_width,folds\n");
    for r in rows {
        let ci = r.ci95_half_width.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.sweep, r.value, r.classifier, r.accuracy, r.mean_fold_accuracy, ci, r.folds
        )
        .unwrap();
    }
    out
}

/// Writes `report.json`, `confusion_<classifier>.csv` and, if any sweep ran,
/// `sweep.csv` into `dir`.
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::json("report", e))? + "\n";
    let path = dir.join("report.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    for c in &report.classifiers {
        let path = dir.join(format!("confusion_{}.csv", c.classifier));
        fs::write(&path, confusion_csv(c)).map_err(|e| Error::io(&path, e))?;
    }
    if !report.sweeps.is_empty() {
        let path = dir.join("sweep.csv");
        fs::write(&path, sweep_csv(&report.sweeps)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
