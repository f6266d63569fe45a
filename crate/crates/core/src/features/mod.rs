//! Candidate feature set computed for every window.
//!
//! Feature order is fixed and recorded by name in [`FeatureSpec`]:
//!
//! 1. statistical: `min, max, std, mean_abs, count_above_t1..3, q1, q3, iqr,
//!    abs_area`
//! 2. time domain: `length, mean, median, rms, range, mean_abs_dev,
//!    mean_crossings, coeff_variation, skewness, kurtosis`
//! 3. frequency domain: `dominant_freq_1, dominant_freq_2, dominant_ratio,
//!    spectral_energy, spectral_entropy, spectrum_peak_pos, power_mean,
//!    power_min, power_max`, then either fifty `fft_band_NN` magnitudes or a
//!    single `fft_band_sum`
//! 4. vibration: `mean_of_peaks, mean_peak_distance_s, max_peak_distance_s,
//!    max_of_peaks, peak_to_peak`
//!
//! Kurtosis is the raw fourth standardized moment (3 for a normal
//! distribution). Quartiles interpolate linearly between order statistics.

mod peaks;
mod spectral;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use peaks::{detect_peaks, prominence, vibration_features, PeakSet};
pub use spectral::{frequency_scalars, Spectrum, BAND_COUNT};

use crate::error::{Error, Result};
use crate::signal::{SegmentWindow, TraceMeta};
use crate::stats;

const MODULE: &str = "features";

pub const STATISTICAL_NAMES: [&str; 11] = [
    "min",
    "max",
    "std",
    "mean_abs",
    "count_above_t1",
    "count_above_t2",
    "count_above_t3",
    "q1",
    "q3",
    "iqr",
    "abs_area",
];

pub const TIME_NAMES: [&str; 10] = [
    "length",
    "mean",
    "median",
    "rms",
    "range",
    "mean_abs_dev",
    "mean_crossings",
    "coeff_variation",
    "skewness",
    "kurtosis",
];

pub const FREQUENCY_NAMES: [&str; 9] = [
    "dominant_freq_1",
    "dominant_freq_2",
    "dominant_ratio",
    "spectral_energy",
    "spectral_entropy",
    "spectrum_peak_pos",
    "power_mean",
    "power_min",
    "power_max",
];

pub const VIBRATION_NAMES: [&str; 5] = [
    "mean_of_peaks",
    "mean_peak_distance_s",
    "max_peak_distance_s",
    "max_of_peaks",
    "peak_to_peak",
];

/// How the 1-50 Hz band magnitudes enter the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Fifty features, one per 1 Hz band.
    #[default]
    PerBin,
    /// A single feature summing all fifty bands.
    Summed,
}

/// Recipe for a feature vector: names in order plus the parameters the
/// extraction depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub spec_id: String,
    pub names: Vec<String>,
    /// Amplitude thresholds for the three `count_above` features.
    pub thresholds: [f64; 3],
    /// Minimum peak prominence as a fraction of the window's range.
    pub prominence_fraction: f64,
    pub window_seconds: f64,
    pub sampling_rate_hz: f64,
    pub band_mode: BandMode,
}

pub const DEFAULT_PROMINENCE_FRACTION: f64 = 0.05;

/// Percentiles of |v| used for the count thresholds.
pub const THRESHOLD_PERCENTILES: [f64; 3] = [0.50, 0.75, 0.90];

impl FeatureSpec {
    pub fn new(
        thresholds: [f64; 3],
        window_seconds: f64,
        sampling_rate_hz: f64,
        band_mode: BandMode,
    ) -> Self {
        let mut names: Vec<String> = STATISTICAL_NAMES
            .iter()
            .chain(TIME_NAMES.iter())
            .chain(FREQUENCY_NAMES.iter())
            .map(|s| s.to_string())
            .collect();
        match band_mode {
            BandMode::PerBin => names.extend((1..=BAND_COUNT).map(|b| format!("fft_band_{b:02}"))),
            BandMode::Summed => names.push("fft_band_sum".into()),
        }
        names.extend(VIBRATION_NAMES.iter().map(|s| s.to_string()));
        let spec_id = match band_mode {
            BandMode::PerBin => "keh-features-v1-per-bin",
            BandMode::Summed => "keh-features-v1-summed",
        }
        .to_string();
        Self {
            spec_id,
            names,
            thresholds,
            prominence_fraction: DEFAULT_PROMINENCE_FRACTION,
            window_seconds,
            sampling_rate_hz,
            band_mode,
        }
    }

    /// Fits the count thresholds to the 50th/75th/90th percentiles of |v|
    /// over the given (training) windows.
    pub fn fit(windows: &[SegmentWindow], band_mode: BandMode) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::input(MODULE, "cannot fit a feature spec on zero windows"))?;
        let mut abs: Vec<f64> = windows
            .iter()
            .flat_map(|w| w.samples.iter().map(|v| v.abs()))
            .collect();
        if abs.is_empty() {
            return Err(Error::input(MODULE, "windows contain no samples"));
        }
        abs.sort_by(f64::total_cmp);
        let thresholds = THRESHOLD_PERCENTILES.map(|q| stats::quantile_sorted(&abs, q));
        Ok(Self::new(
            thresholds,
            first.window_seconds,
            first.sampling_rate_hz,
            band_mode,
        ))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Feature values for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub spec_id: String,
    pub meta: TraceMeta,
}

fn check_window(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::input(MODULE, "empty window"));
    }
    Ok(())
}

/// Spectrum-independent statistics, in [`STATISTICAL_NAMES`] order. Counts
/// use strict inequality.
pub fn statistical_features(
    samples: &[f64],
    sampling_rate_hz: f64,
    thresholds: [f64; 3],
) -> Result<[f64; 11]> {
    check_window(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    let abs_sum: f64 = samples.iter().map(|v| v.abs()).sum();
    let count = |t: f64| samples.iter().filter(|v| **v > t).count() as f64;
    Ok([
        min,
        max,
        stats::std_dev(samples),
        abs_sum / samples.len() as f64,
        count(thresholds[0]),
        count(thresholds[1]),
        count(thresholds[2]),
        q1,
        q3,
        q3 - q1,
        abs_sum / sampling_rate_hz,
    ])
}

/// Textbook time-domain descriptors, in [`TIME_NAMES`] order. Moment ratios
/// of a constant window are defined as 0.
pub fn time_features(samples: &[f64]) -> Result<[f64; 10]> {
    check_window(samples)?;
    let n = samples.len() as f64;
    let mean = stats::mean(samples);
    let sigma = stats::std_dev(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mad = samples.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    let crossings = samples
        .windows(2)
        .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
        .count() as f64;
    let cv = if mean.abs() > f64::EPSILON * sorted[sorted.len() - 1].abs().max(sorted[0].abs()) {
        sigma / mean.abs()
    } else {
        0.0
    };
    let (skew, kurt) = if sigma > 0.0 {
        let m3 = samples.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = samples.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        (m3 / sigma.powi(3), m4 / sigma.powi(4))
    } else {
        (0.0, 0.0)
    };
    Ok([
        n,
        mean,
        stats::quantile_sorted(&sorted, 0.5),
        rms,
        sorted[sorted.len() - 1] - sorted[0],
        mad,
        crossings,
        cv,
        skew,
        kurt,
    ])
}

/// Frequency-domain features: the scalar block followed by band magnitudes.
pub fn frequency_features(
    samples: &[f64],
    sampling_rate_hz: f64,
    band_mode: BandMode,
) -> Result<Vec<f64>> {
    let spec = Spectrum::compute(samples, sampling_rate_hz)?;
    let mut out = frequency_scalars(&spec).to_vec();
    let bands = spec.band_magnitudes();
    match band_mode {
        BandMode::PerBin => out.extend_from_slice(&bands),
        BandMode::Summed => out.push(bands.iter().sum()),
    }
    Ok(out)
}

/// Minimum prominence for a window: a fraction of its peak-to-trough range.
pub fn window_prominence(samples: &[f64], fraction: f64) -> f64 {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if lo.is_finite() {
        fraction * (hi - lo)
    } else {
        0.0
    }
}

/// Computes every feature family for `window` in the order of `spec`.
pub fn extract_all(window: &SegmentWindow, spec: &FeatureSpec) -> Result<FeatureVector> {
    let x = &window.samples;
    let fs = window.sampling_rate_hz;
    let mut values = Vec::with_capacity(spec.len());
    values.extend_from_slice(&statistical_features(x, fs, spec.thresholds)?);
    values.extend_from_slice(&time_features(x)?);
    values.extend(frequency_features(x, fs, spec.band_mode)?);
    let peaks = detect_peaks(x, window_prominence(x, spec.prominence_fraction));
    values.extend_from_slice(&vibration_features(&peaks, fs));
    debug_assert_eq!(values.len(), spec.len());
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(
            MODULE,
            format!("feature {} is not finite", spec.names[i]),
        ));
    }
    Ok(FeatureVector {
        values,
        spec_id: spec.spec_id.clone(),
        meta: window.meta.clone(),
    })
}

/// Writes one row per vector followed by `label,user_id,trace_id` columns.
pub fn write_feature_csv(path: &Path, spec: &FeatureSpec, rows: &[FeatureVector]) -> Result<()> {
    let mut out = Vec::new();
    let mut header: Vec<&str> = spec.names.iter().map(String::as_str).collect();
    header.extend(["label", "user_id", "trace_id"]);
    writeln!(out, "{}", header.join(",")).unwrap();
    for r in rows {
        let mut cells: Vec<String> = r.values.iter().map(f64::to_string).collect();
        cells.push(r.meta.label.map(|m| m.to_string()).unwrap_or_default());
        cells.push(r.meta.user_id.clone());
        cells.push(r.meta.trace_id.clone());
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(samples: Vec<f64>, fs: f64) -> SegmentWindow {
        SegmentWindow {
            window_seconds: samples.len() as f64 / fs,
            samples,
            sampling_rate_hz: fs,
            offset: 0,
            meta: TraceMeta::default(),
        }
    }

    #[test]
    fn statistical_examples() {
        let x = [-1.0, 0.0, 1.0, 2.0];
        let s = statistical_features(&x, 4.0, [0.0, 1.0, 2.0]).unwrap();
        assert_eq!(s[0], -1.0);
        assert_eq!(s[1], 2.0);
        assert!((s[2] - 1.25f64.sqrt()).abs() < 1e-12);
        assert_eq!(s[3], 1.0);
        assert_eq!(&s[4..7], &[2.0, 1.0, 0.0]);
        assert_eq!(s[7], -0.25);
        assert_eq!(s[8], 1.25);
        assert_eq!(s[9], 1.5);
        assert_eq!(s[10], 1.0);

        let c = statistical_features(&[3.0; 10], 1.0, [0.0, 1.0, 2.0]).unwrap();
        assert_eq!((c[0], c[1], c[2], c[9]), (3.0, 3.0, 0.0, 0.0));
    }

    #[test]
    fn time_examples() {
        let t = time_features(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((t[3] - 7.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(t[6], 1.0);
        assert_eq!(t[0], 4.0);
        assert_eq!(t[2], 2.5);
        assert_eq!(t[4], 3.0);
        assert_eq!(t[5], 1.0);
    }

    #[test]
    fn spec_length_matches_vector() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        for mode in [BandMode::PerBin, BandMode::Summed] {
            let spec = FeatureSpec::new([0.1, 0.2, 0.3], 2.0, 100.0, mode);
            let v = extract_all(&window(x.clone(), 100.0), &spec).unwrap();
            assert_eq!(v.values.len(), spec.len());
        }
        assert_eq!(FeatureSpec::new([0.0; 3], 1.0, 1.0, BandMode::PerBin).len(), 85);
        assert_eq!(FeatureSpec::new([0.0; 3], 1.0, 1.0, BandMode::Summed).len(), 36);
    }

    #[test]
    fn constant_window_is_finite() {
        let spec = FeatureSpec::new([0.1, 0.2, 0.3], 1.0, 100.0, BandMode::PerBin);
        let v = extract_all(&window(vec![0.7; 100], 100.0), &spec).unwrap();
        assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn fit_thresholds_are_percentiles() {
        let w = window((0..=100).map(|i| i as f64 * 0.01 - 0.5).collect(), 100.0);
        let spec = FeatureSpec::fit(&[w], BandMode::PerBin).unwrap();
        assert!(spec.thresholds[0] <= spec.thresholds[1] && spec.thresholds[1] <= spec.thresholds[2]);
        assert!((spec.thresholds[0] - 0.25).abs() < 1e-12);
    }
}
