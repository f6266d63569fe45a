//! End-to-end chain: smooth, remove stops, window, extract, select, classify.
//!
//! [`TrainedModel`] is the on-disk model file: a single JSON document with the
//! pipeline configuration, calibrated stop threshold, feature recipe,
//! selection result, normalization statistics and stacked dictionary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassificationResult, SrcConfig, SrcModel};
use crate::error::{Error, Result};
use crate::features::{self, BandMode, FeatureSpec};
use crate::mode::Mode;
use crate::selection::{self, SelectionResult, DEFAULT_BIN_COUNT, DEFAULT_SELECTED};
use crate::signal::{self, SegmentWindow, ThresholdRule, VoltageTrace};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const MODULE: &str = "pipeline";

/// Moving-average span. Centered windows need an odd span, so the nearest
/// odd value below ten is used.
pub const DEFAULT_SPAN: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub span: usize,
    pub threshold: ThresholdRule,
    pub window_seconds: f64,
    pub overlap: f64,
    pub band_mode: BandMode,
    pub bin_count: usize,
    pub selected_count: usize,
    pub src: SrcConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            span: DEFAULT_SPAN,
            threshold: ThresholdRule::default(),
            window_seconds: 5.0,
            overlap: 0.1,
            band_mode: BandMode::PerBin,
            bin_count: DEFAULT_BIN_COUNT,
            selected_count: DEFAULT_SELECTED,
            src: SrcConfig::default(),
            seed: 7,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.span == 0 || self.span % 2 == 0 {
            return Err(Error::param("signal", format!("span must be odd, got {}", self.span)));
        }
        if let ThresholdRule::Fixed(v) | ThresholdRule::Percentile(v) = self.threshold {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param("signal", "threshold value must be positive"));
            }
        }
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(Error::param("signal", "window length must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::param("signal", "overlap must lie in [0, 1)"));
        }
        if self.bin_count < 2 {
            return Err(Error::param("selection", "bin count must be at least 2"));
        }
        if self.selected_count == 0 {
            return Err(Error::param("selection", "must select at least one feature"));
        }
        self.src.validate()
    }
}

/// Smooths every trace.
pub fn smooth_all(traces: &[VoltageTrace], span: usize) -> Result<Vec<VoltageTrace>> {
    traces.iter().map(|t| signal::moving_average(t, span)).collect()
}

/// Stop removal and windowing of an already smoothed trace.
pub fn windows_from_smoothed(
    smoothed: &VoltageTrace,
    threshold_v: f64,
    config: &PipelineConfig,
) -> Result<Vec<SegmentWindow>> {
    let mask = signal::detect_stationary(smoothed, threshold_v)?;
    let moving = signal::excise_stationary(smoothed, &mask)?;
    signal::segment(&moving, config.window_seconds, config.overlap)
}

/// Full preprocessing of one raw trace.
pub fn preprocess_trace(
    trace: &VoltageTrace,
    threshold_v: f64,
    config: &PipelineConfig,
) -> Result<Vec<SegmentWindow>> {
    let smoothed = signal::moving_average(trace, config.span)?;
    windows_from_smoothed(&smoothed, threshold_v, config)
}

/// Calibrates the stop threshold over a corpus and windows every trace.
/// Traces too short for stop detection contribute no windows.
pub fn prepare_corpus(
    traces: &[VoltageTrace],
    config: &PipelineConfig,
) -> Result<(f64, Vec<SegmentWindow>)> {
    config.validate()?;
    let smoothed = smooth_all(traces, config.span)?;
    let threshold = signal::calibrate_threshold(&smoothed, config.threshold)?;
    let mut windows = Vec::new();
    for s in &smoothed {
        match windows_from_smoothed(s, threshold, config) {
            Ok(w) => windows.extend(w),
            Err(Error::TraceTooShort { len, needed }) => {
                log::warn!("trace {}: {len} samples, need {needed}; skipped", s.meta.trace_id);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((threshold, windows))
}

/// Feature vectors for many windows with the threshold-dependent count
/// columns filled in per spec. Everything else is computed once.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    band_mode: BandMode,
    base: Vec<Vec<f64>>,
    sorted: Vec<Vec<f64>>,
}

const COUNT_COLUMNS: [usize; 3] = [4, 5, 6];

impl FeatureCache {
    pub fn build(windows: &[SegmentWindow], band_mode: BandMode) -> Result<Self> {
        let placeholder = FeatureSpec::new([0.0; 3], 0.0, 0.0, band_mode);
        let mut base = Vec::with_capacity(windows.len());
        let mut sorted = Vec::with_capacity(windows.len());
        for w in windows {
            base.push(features::extract_all(w, &placeholder)?.values);
            let mut s = w.samples.clone();
            s.sort_by(f64::total_cmp);
            sorted.push(s);
        }
        Ok(Self {
            band_mode,
            base,
            sorted,
        })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn row(&self, i: usize, spec: &FeatureSpec) -> Vec<f64> {
        debug_assert_eq!(spec.band_mode, self.band_mode);
        let mut row = self.base[i].clone();
        let s = &self.sorted[i];
        for (col, t) in COUNT_COLUMNS.iter().zip(spec.thresholds) {
            row[*col] = (s.len() - s.partition_point(|v| *v <= t)) as f64;
        }
        row
    }
}

/// Feature recipe and selection fitted on a set of training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub spec: FeatureSpec,
    pub selection: SelectionResult,
}

/// Class labels as dense indices in `Mode::ALL` order.
pub fn label_ids(labels: &[Mode]) -> Vec<usize> {
    labels.iter().map(|m| m.index()).collect()
}

/// Fits thresholds on `train_windows` and selects features on their rows.
/// `rows` must be the full feature vectors of the same windows under the
/// returned spec; pass `None` to compute them here.
pub fn fit_features(
    train_windows: &[&SegmentWindow],
    cache: Option<(&FeatureCache, &[usize])>,
    config: &PipelineConfig,
) -> Result<(FittedFeatures, Vec<Vec<f64>>)> {
    let owned: Vec<SegmentWindow> = train_windows.iter().map(|w| (*w).clone()).collect();
    let spec = FeatureSpec::fit(&owned, config.band_mode)?;
    let rows: Vec<Vec<f64>> = match cache {
        Some((cache, idx)) => idx.iter().map(|i| cache.row(*i, &spec)).collect(),
        None => owned
            .iter()
            .map(|w| features::extract_all(w, &spec).map(|v| v.values))
            .collect::<Result<_>>()?,
    };
    let labels = train_windows
        .iter()
        .map(|w| {
            w.meta
                .label
                .ok_or_else(|| Error::input(MODULE, "training window without a label"))
        })
        .collect::<Result<Vec<_>>>()?;
    let selection = selection::fit_selection(
        &spec.names,
        &rows,
        &label_ids(&labels),
        config.bin_count,
        config.selected_count,
    )?;
    Ok((FittedFeatures { spec, selection }, rows))
}

/// Groups projected rows by class in `Mode::ALL` order.
pub fn group_by_class(rows: Vec<Vec<f64>>, labels: &[Mode]) -> Vec<(Mode, Vec<Vec<f64>>)> {
    let mut groups: Vec<(Mode, Vec<Vec<f64>>)> = Vec::new();
    for mode in Mode::ALL {
        let members: Vec<Vec<f64>> = rows
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == mode)
            .map(|(r, _)| r.clone())
            .collect();
        if !members.is_empty() {
            groups.push((mode, members));
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub windows_per_class: Vec<(Mode, usize)>,
    pub warnings: Vec<String>,
}

/// The model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub pipeline: PipelineConfig,
    pub stationary_threshold_v: f64,
    pub feature_spec: FeatureSpec,
    pub selection: SelectionResult,
    pub src: SrcModel,
    pub training: TrainingSummary,
    pub seed: u64,
}

/// Trains the whole pipeline on labeled traces.
pub fn train_pipeline(traces: &[VoltageTrace], config: &PipelineConfig) -> Result<TrainedModel> {
    config.validate()?;
    if traces.iter().any(|t| t.meta.label.is_none()) {
        return Err(Error::input(MODULE, "every training trace needs a mode label"));
    }
    let mut classes: Vec<Mode> = traces.iter().filter_map(|t| t.meta.label).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::input(
            MODULE,
            format!("training needs at least two modes, found {}", classes.len()),
        ));
    }
    let (threshold, windows) = prepare_corpus(traces, config)?;
    if windows.is_empty() {
        return Err(Error::input(MODULE, "no windows survive preprocessing"));
    }
    let refs: Vec<&SegmentWindow> = windows.iter().collect();
    let (fitted, rows) = fit_features(&refs, None, config)?;
    let labels: Vec<Mode> = windows.iter().map(|w| w.meta.label.unwrap()).collect();
    let projected: Vec<Vec<f64>> = rows.iter().map(|r| fitted.selection.project(r)).collect();
    let groups = group_by_class(projected, &labels);
    if groups.len() < 2 {
        return Err(Error::input(MODULE, "fewer than two modes have windows after preprocessing"));
    }
    let windows_per_class = groups.iter().map(|(m, r)| (*m, r.len())).collect();
    let (src, notes) = classifier::train(&groups, &config.src)?;
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        pipeline: config.clone(),
        stationary_threshold_v: threshold,
        feature_spec: fitted.spec,
        selection: fitted.selection,
        src,
        training: TrainingSummary {
            windows_per_class,
            warnings: notes.warnings,
        },
        seed: config.seed,
    })
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::json("model", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::input(
                MODULE,
                format!(
                    "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                    model.format_version
                ),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn classes(&self) -> &[Mode] {
        &self.src.class_list
    }

    /// Classifies a single window; non-convergence is reported through the
    /// result's `low_confidence` flag.
    pub fn classify_window(&self, window: &SegmentWindow) -> Result<ClassificationResult> {
        let v = features::extract_all(window, &self.feature_spec)?;
        classifier::classify_lenient(&self.src, &self.selection.project(&v.values))
    }

    pub fn classify_trace(&self, trace: &VoltageTrace) -> Result<TraceClassification> {
        classify_trace(self, trace)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub offset: usize,
    pub predicted: Mode,
    pub residuals: Vec<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceClassification {
    pub trace_id: String,
    pub label: Option<Mode>,
    pub class_list: Vec<Mode>,
    pub windows: Vec<WindowPrediction>,
    /// Votes per class, in `class_list` order.
    pub votes: Vec<usize>,
    pub majority: Mode,
    pub low_confidence_windows: usize,
}

/// Runs the full chain on a raw trace and takes a plurality vote over its
/// windows (ties go to the earliest class).
pub fn classify_trace(model: &TrainedModel, trace: &VoltageTrace) -> Result<TraceClassification> {
    let windows = preprocess_trace(trace, model.stationary_threshold_v, &model.pipeline)?;
    if windows.is_empty() {
        return Err(Error::NoSignal {
            trace_id: trace.meta.trace_id.clone(),
        });
    }
    let classes = model.classes();
    let mut votes = vec![0usize; classes.len()];
    let mut predictions = Vec::with_capacity(windows.len());
    for w in &windows {
        let r = model.classify_window(w)?;
        let k = classes.iter().position(|c| *c == r.predicted).unwrap();
        votes[k] += 1;
        predictions.push(WindowPrediction {
            offset: w.offset,
            predicted: r.predicted,
            residuals: r.residuals,
            low_confidence: r.low_confidence,
        });
    }
    let mut best = 0;
    for (k, v) in votes.iter().enumerate() {
        if *v > votes[best] {
            best = k;
        }
    }
    Ok(TraceClassification {
        trace_id: trace.meta.trace_id.clone(),
        label: trace.meta.label,
        class_list: classes.to_vec(),
        low_confidence_windows: predictions.iter().filter(|p| p.low_confidence).count(),
        windows: predictions,
        votes,
        majority: classes[best],
    })
}
