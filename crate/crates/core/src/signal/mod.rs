//! Trace loading, smoothing, stop detection and windowing.
//!
//! The preprocessing chain is `moving_average -> detect_stationary ->
//! excise_stationary -> segment`. Every step is a pure function of its inputs.

pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::Mode;

const MODULE: &str = "signal";

/// Provenance carried by traces, windows and feature vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TraceMeta {
    pub label: Option<Mode>,
    pub user_id: String,
    pub trace_id: String,
}

/// Single-axis voltage series sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub samples: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub meta: TraceMeta,
}

impl VoltageTrace {
    /// Builds a trace, rejecting non-positive rates and non-finite samples.
    /// Empty traces are allowed here (stop excision can produce them); the
    /// operations that need samples check for themselves.
    pub fn new(samples: Vec<f64>, sampling_rate_hz: f64, meta: TraceMeta) -> Result<Self> {
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::param(
                MODULE,
                format!("sampling rate must be positive, got {sampling_rate_hz}"),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(MODULE, format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sampling_rate_hz,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sampling_rate_hz: self.sampling_rate_hz,
            meta: self.meta.clone(),
        }
    }
}

/// Per-sample stationary flags (`true` = vehicle stopped).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryMask {
    pub flags: Vec<bool>,
}

impl StationaryMask {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn stationary_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn stationary_fraction(&self) -> f64 {
        if self.flags.is_empty() {
            0.0
        } else {
            self.stationary_count() as f64 / self.flags.len() as f64
        }
    }
}

/// Fixed-length slice of a preprocessed trace; the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWindow {
    pub samples: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub window_seconds: f64,
    /// Start offset within the excised trace.
    pub offset: usize,
    pub meta: TraceMeta,
}

/// Centered moving average with windows that shrink symmetrically at the
/// edges, so the first and last samples pass through unchanged.
pub fn moving_average(trace: &VoltageTrace, span: usize) -> Result<VoltageTrace> {
    if trace.is_empty() {
        return Err(Error::input(MODULE, "moving average of an empty trace"));
    }
    if span == 0 || span % 2 == 0 {
        return Err(Error::param(
            MODULE,
            format!("moving average span must be odd and positive, got {span}"),
        ));
    }
    let n = trace.len();
    let half = span / 2;
    let x = &trace.samples;
    let out = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let window = &x[i - h..=i + h];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    Ok(trace.with_samples(out))
}

/// Number of history samples used by stop detection: one second of signal.
pub fn history_len(sampling_rate_hz: f64) -> usize {
    (sampling_rate_hz.round() as usize).max(1)
}

/// Population standard deviation of the `k` samples preceding each index
/// `t >= k`. Entry `t` of the result is `None` for `t < k`.
pub fn trailing_std(samples: &[f64], k: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; samples.len()];
    if k == 0 {
        return out;
    }
    for (t, slot) in out.iter_mut().enumerate().skip(k) {
        let w = &samples[t - k..t];
        let mean = w.iter().sum::<f64>() / k as f64;
        let ss: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum();
        *slot = Some((ss / k as f64).sqrt());
    }
    out
}

/// Flags samples whose trailing one-second standard deviation is below
/// `threshold`. The first `k` samples copy the decision made at index `k`.
pub fn detect_stationary(trace: &VoltageTrace, threshold: f64) -> Result<StationaryMask> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::param(
            MODULE,
            format!("stationary threshold must be positive, got {threshold}"),
        ));
    }
    let k = history_len(trace.sampling_rate_hz);
    if trace.len() < k + 1 {
        return Err(Error::TraceTooShort {
            len: trace.len(),
            needed: k + 1,
        });
    }
    let sigma = trailing_std(&trace.samples, k);
    let mut flags: Vec<bool> = sigma
        .iter()
        .map(|s| s.is_some_and(|s| s < threshold))
        .collect();
    let first = flags[k];
    flags[..k].iter_mut().for_each(|f| *f = first);
    Ok(StationaryMask { flags })
}

/// Keeps the samples not flagged stationary, in their original order.
pub fn excise_stationary(trace: &VoltageTrace, mask: &StationaryMask) -> Result<VoltageTrace> {
    if mask.len() != trace.len() {
        return Err(Error::input(
            MODULE,
            format!(
                "mask length {} does not match trace length {}",
                mask.len(),
                trace.len()
            ),
        ));
    }
    let kept = trace
        .samples
        .iter()
        .zip(&mask.flags)
        .filter(|(_, stationary)| !**stationary)
        .map(|(v, _)| *v)
        .collect();
    Ok(trace.with_samples(kept))
}

/// Window length in samples for a window of `window_seconds`.
pub fn window_len(window_seconds: f64, sampling_rate_hz: f64) -> usize {
    (window_seconds * sampling_rate_hz).round() as usize
}

/// Hop between consecutive window starts.
pub fn hop_len(window_len: usize, overlap_fraction: f64) -> usize {
    ((1.0 - overlap_fraction) * window_len as f64).round() as usize
}

/// Slices a trace into complete, possibly overlapping windows. A trace
/// shorter than one window yields no windows.
pub fn segment(
    trace: &VoltageTrace,
    window_seconds: f64,
    overlap_fraction: f64,
) -> Result<Vec<SegmentWindow>> {
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(Error::param(
            MODULE,
            format!("window length must be positive, got {window_seconds}"),
        ));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::param(
            MODULE,
            format!("overlap must lie in [0, 1), got {overlap_fraction}"),
        ));
    }
    let len = window_len(window_seconds, trace.sampling_rate_hz);
    if len == 0 {
        return Err(Error::param(MODULE, "window shorter than one sample"));
    }
    let hop = hop_len(len, overlap_fraction);
    if hop == 0 {
        return Err(Error::param(MODULE, "overlap leaves a zero hop"));
    }
    let n = trace.len();
    let mut windows = Vec::new();
    let mut offset = 0;
    while offset + len <= n {
        windows.push(SegmentWindow {
            samples: trace.samples[offset..offset + len].to_vec(),
            sampling_rate_hz: trace.sampling_rate_hz,
            window_seconds,
            offset,
            meta: trace.meta.clone(),
        });
        offset += hop;
    }
    Ok(windows)
}

/// How the stop-detection threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "value")]
pub enum ThresholdRule {
    /// Absolute threshold in volts.
    Fixed(f64),
    /// Percentile (0..100) of the trailing standard deviation over a corpus.
    Percentile(f64),
    /// Otsu split of log10 trailing standard deviation over a corpus. A
    /// corpus whose σ is not bimodal gets a threshold that flags nothing.
    Otsu,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Otsu
    }
}

/// Resolves a threshold rule to volts using the (already smoothed) traces.
pub fn calibrate_threshold(traces: &[VoltageTrace], rule: ThresholdRule) -> Result<f64> {
    if let ThresholdRule::Fixed(v) = rule {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(MODULE, format!("threshold must be positive, got {v}")));
        }
        return Ok(v);
    }
    let mut sigmas: Vec<f64> = traces
        .iter()
        .flat_map(|t| trailing_std(&t.samples, history_len(t.sampling_rate_hz)))
        .flatten()
        .filter(|s| *s > 0.0)
        .collect();
    if sigmas.is_empty() {
        return Err(Error::input(
            MODULE,
            "no trailing standard deviations available for threshold calibration",
        ));
    }
    sigmas.sort_by(f64::total_cmp);
    match rule {
        ThresholdRule::Percentile(p) => {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::param(MODULE, format!("percentile {p} outside [0, 100]")));
            }
            Ok(crate::stats::quantile_sorted(&sigmas, p / 100.0))
        }
        ThresholdRule::Otsu => {
            let logs: Vec<f64> = sigmas.iter().map(|s| s.log10()).collect();
            let (split, eta) = otsu_split(&logs, 256);
            if eta < MIN_SEPARABILITY {
                log::warn!(
                    "trailing σ is not bimodal (separability {eta:.3}); treating the corpus as stop-free"
                );
                return Ok(sigmas[0]);
            }
            Ok(10f64.powf(split))
        }
        ThresholdRule::Fixed(_) => unreachable!(),
    }
}

/// Below this between-class to total variance ratio the Otsu split is
/// rejected. A single Gaussian mode scores 2/π ≈ 0.64.
const MIN_SEPARABILITY: f64 = 0.8;

/// Otsu's two-class split of sorted values on a uniform histogram, with the
/// separability σ²_between / σ²_total of the chosen split.
fn otsu_split(sorted: &[f64], bins: usize) -> (f64, f64) {
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (hi + 1e-3, 0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0usize; bins];
    for v in sorted {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        hist[b] += 1;
    }
    let total = sorted.len() as f64;
    let centers: Vec<f64> = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let sum_all: f64 = hist.iter().zip(&centers).map(|(h, c)| *h as f64 * c).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for b in 0..bins - 1 {
        w0 += hist[b] as f64;
        sum0 += hist[b] as f64 * centers[b];
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, b);
        }
    }
    let mean = sum_all / total;
    let total_var: f64 = hist.iter().zip(&centers).map(|(h, c)| *h as f64 * (c - mean).powi(2)).sum();
    let eta = if total_var > 0.0 { best.0 / (total * total_var) } else { 0.0 };
    (lo + (best.1 as f64 + 1.0) * width, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trace(samples: Vec<f64>, fs: f64) -> VoltageTrace {
        VoltageTrace::new(samples, fs, TraceMeta::default()).unwrap()
    }

    // Independent reference: explicit loops over the window bounds.
    fn reference_average(x: &[f64], span: usize) -> Vec<f64> {
        let n = x.len() as isize;
        let half = (span / 2) as isize;
        (0..n)
            .map(|i| {
                let h = half.min(i).min(n - 1 - i);
                let mut acc = 0.0;
                let mut cnt = 0.0;
                let mut j = i - h;
                while j <= i + h {
                    acc += x[j as usize];
                    cnt += 1.0;
                    j += 1;
                }
                acc / cnt
            })
            .collect()
    }

    #[test]
    fn moving_average_examples() {
        let t = trace(vec![5.0; 5], 100.0);
        assert_eq!(moving_average(&t, 3).unwrap().samples, vec![5.0; 5]);

        let t = trace(vec![1.0, 5.0, 3.0], 100.0);
        let out = moving_average(&t, 3).unwrap().samples;
        assert_eq!(out, reference_average(&[1.0, 5.0, 3.0], 3));
        assert_eq!(out, vec![1.0, 3.0, 3.0]);

        let t = trace(vec![0.0, 0.0, 1.0, 0.0, 0.0], 100.0);
        let out = moving_average(&t, 3).unwrap().samples;
        let expected = [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn moving_average_errors() {
        let empty = trace(vec![], 100.0);
        assert!(matches!(moving_average(&empty, 3), Err(Error::InvalidInput { .. })));
        let t = trace(vec![1.0, 2.0], 100.0);
        assert!(matches!(moving_average(&t, 4), Err(Error::InvalidParameter { .. })));
        assert!(matches!(moving_average(&t, 0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn trace_rejects_bad_rate_and_nan() {
        assert!(VoltageTrace::new(vec![1.0], 0.0, TraceMeta::default()).is_err());
        assert!(VoltageTrace::new(vec![f64::NAN], 10.0, TraceMeta::default()).is_err());
    }

    #[test]
    fn detect_constant_and_alternating() {
        let t = trace(vec![2.5; 300], 100.0);
        let mask = detect_stationary(&t, 1e-6).unwrap();
        assert!(mask.flags.iter().all(|f| *f));

        let alt: Vec<f64> = (0..300).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mask = detect_stationary(&trace(alt, 100.0), 0.1).unwrap();
        assert!(mask.flags.iter().all(|f| !*f));
    }

    #[test]
    fn detect_zero_then_alternating() {
        let mut x = vec![0.0; 200];
        x.extend((0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }));
        let mask = detect_stationary(&trace(x.clone(), 100.0), 0.1).unwrap();
        // Brute force: first m whose trailing window [200+m-100, 200+m) has sigma >= 0.1.
        let m = (0..100)
            .find(|&m| {
                let w = &x[200 + m - 100..200 + m];
                let mu = w.iter().sum::<f64>() / 100.0;
                let var = w.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 100.0;
                var.sqrt() >= 0.1
            })
            .unwrap();
        assert_eq!(m, 2);
        for (t, f) in mask.flags.iter().enumerate() {
            assert_eq!(*f, t < 200 + m, "t = {t}");
        }
    }

    #[test]
    fn detect_too_short() {
        let t = trace(vec![0.0; 100], 100.0);
        assert!(matches!(
            detect_stationary(&t, 0.1),
            Err(Error::TraceTooShort { len: 100, needed: 101 })
        ));
    }

    #[test]
    fn excise_examples() {
        let t = trace(vec![1.0, 2.0, 3.0, 4.0], 10.0);
        let mask = StationaryMask {
            flags: vec![true, false, true, false],
        };
        assert_eq!(excise_stationary(&t, &mask).unwrap().samples, vec![2.0, 4.0]);
        let none = StationaryMask { flags: vec![false; 4] };
        assert_eq!(excise_stationary(&t, &none).unwrap(), t);
        let all = StationaryMask { flags: vec![true; 4] };
        let empty = excise_stationary(&t, &all).unwrap();
        assert!(empty.is_empty());
        assert!(segment(&empty, 0.1, 0.1).unwrap().is_empty());
        let bad = StationaryMask { flags: vec![true; 3] };
        assert!(matches!(excise_stationary(&t, &bad), Err(Error::InvalidInput { .. })));
    }

    #[test]
    fn segment_examples() {
        let t = trace(vec![0.0; 1000], 100.0);
        let w = segment(&t, 5.0, 0.1).unwrap();
        assert_eq!(w.iter().map(|w| w.offset).collect::<Vec<_>>(), vec![0, 450]);
        assert!(w.iter().all(|w| w.samples.len() == 500));
        assert_eq!(segment(&trace(vec![0.0; 500], 100.0), 5.0, 0.1).unwrap().len(), 1);
        assert_eq!(segment(&trace(vec![0.0; 499], 100.0), 5.0, 0.1).unwrap().len(), 0);
    }

    #[test]
    fn otsu_separates_two_clusters() {
        let mut v: Vec<f64> = (0..100).map(|i| -2.0 + i as f64 * 1e-3).collect();
        v.extend((0..300).map(|i| 0.0 + i as f64 * 1e-3));
        v.sort_by(f64::total_cmp);
        let (s, eta) = otsu_split(&v, 256);
        assert!(s > -1.9 && s < 0.0, "{s}");
        assert!(eta > 0.9, "{eta}");
    }

    #[test]
    fn unimodal_sigma_flags_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..6000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = trace(x, 100.0);
        let thr = calibrate_threshold(std::slice::from_ref(&t), ThresholdRule::Otsu).unwrap();
        assert_eq!(detect_stationary(&t, thr).unwrap().stationary_count(), 0);
    }
}
