use serde::{Deserialize, Serialize};

/// Local maxima of a window and their amplitudes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    pub amplitudes: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Prominence of the local maximum at `i`: its height above the higher of the
/// two minima reached before the signal rises above it on either side (or the
/// window ends).
pub fn prominence(x: &[f64], i: usize) -> f64 {
    let h = x[i];
    let mut left_min = h;
    for v in x[..i].iter().rev() {
        if *v > h {
            break;
        }
        left_min = left_min.min(*v);
    }
    let mut right_min = h;
    for v in &x[i + 1..] {
        if *v > h {
            break;
        }
        right_min = right_min.min(*v);
    }
    h - left_min.max(right_min)
}

/// Strict interior local maxima with prominence at least `min_prominence`.
pub fn detect_peaks(x: &[f64], min_prominence: f64) -> PeakSet {
    let mut peaks = PeakSet::default();
    if x.len() < 3 {
        return peaks;
    }
    for i in 1..x.len() - 1 {
        if x[i] > x[i - 1] && x[i] > x[i + 1] && prominence(x, i) >= min_prominence {
            peaks.indices.push(i);
            peaks.amplitudes.push(x[i]);
        }
    }
    peaks
}

/// `[mean_of_peaks, mean_peak_distance_s, max_peak_distance_s, max_of_peaks,
/// peak_to_peak]`. No peaks gives all zeros; a single peak has zero distances.
pub fn vibration_features(peaks: &PeakSet, sampling_rate_hz: f64) -> [f64; 5] {
    if peaks.is_empty() {
        return [0.0; 5];
    }
    let amps = &peaks.amplitudes;
    let mean = amps.iter().sum::<f64>() / amps.len() as f64;
    let max = amps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = amps.iter().copied().fold(f64::INFINITY, f64::min);
    let gaps: Vec<f64> = peaks
        .indices
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / sampling_rate_hz)
        .collect();
    let (mean_gap, max_gap) = if gaps.is_empty() {
        (0.0, 0.0)
    } else {
        (
            gaps.iter().sum::<f64>() / gaps.len() as f64,
            gaps.iter().copied().fold(0.0, f64::max),
        )
    };
    [mean, mean_gap, max_gap, max, max - min]
}
