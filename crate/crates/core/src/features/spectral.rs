use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Highest 1 Hz band reported by the band-magnitude features.
pub const BAND_COUNT: usize = 50;

/// One-sided magnitude spectrum of a mean-removed window.
///
/// Magnitudes use the unitary scaling `|X_k| / sqrt(n)` for bins
/// `k = 1..=n/2`, so the one-sided energy (Nyquist bin weighted by one half
/// for even `n`) equals `n / 2` times the population variance.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub n: usize,
    pub sampling_rate_hz: f64,
    /// `magnitudes[j]` belongs to bin `k = j + 1`.
    pub magnitudes: Vec<f64>,
    /// All samples identical (up to rounding): no spectral content.
    pub degenerate: bool,
}

impl Spectrum {
    pub fn compute(samples: &[f64], sampling_rate_hz: f64) -> Result<Self> {
        let n = samples.len();
        if n < 8 {
            return Err(Error::input(
                "features",
                format!("spectral features need at least 8 samples, got {n}"),
            ));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = (n as f64).sqrt();
        let magnitudes: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm() / scale).collect();

        let peak = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let power: f64 = magnitudes.iter().map(|m| m * m).sum();
        let floor = (64.0 * f64::EPSILON * peak).powi(2) * n as f64;
        let degenerate = samples.iter().all(|v| *v == samples[0]) || power <= floor;
        Ok(Self {
            n,
            sampling_rate_hz,
            magnitudes,
            degenerate,
        })
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sampling_rate_hz / self.n as f64
    }

    fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.magnitudes.iter().map(|m| m * m)
    }

    /// One-sided energy; equals `n/2 * variance` of the window.
    pub fn energy(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let mut e: f64 = self.powers().sum();
        if self.n % 2 == 0 {
            let nyq = self.magnitudes[self.magnitudes.len() - 1];
            e -= 0.5 * nyq * nyq;
        }
        e
    }

    /// Bins (1-based) of the largest and second-largest magnitude; ties go to
    /// the lower bin.
    pub fn dominant_bins(&self) -> (usize, usize) {
        let mut first = 0;
        for (j, m) in self.magnitudes.iter().enumerate() {
            if *m > self.magnitudes[first] {
                first = j;
            }
        }
        let mut second = if first == 0 { 1 } else { 0 };
        for (j, m) in self.magnitudes.iter().enumerate() {
            if j != first && *m > self.magnitudes[second] {
                second = j;
            }
        }
        (first + 1, second + 1)
    }

    /// Shannon entropy of the normalized power distribution divided by the
    /// log of the bin count, in `[0, 1]`.
    pub fn normalized_entropy(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let total: f64 = self.powers().sum();
        let h: f64 = self
            .powers()
            .filter(|p| *p > 0.0)
            .map(|p| {
                let q = p / total;
                -q * q.ln()
            })
            .sum();
        (h / (self.magnitudes.len() as f64).ln()).clamp(0.0, 1.0)
    }

    /// Sum of magnitudes of the bins whose frequency lies in
    /// `[b - 0.5, b + 0.5)` Hz for `b = 1..=BAND_COUNT`.
    pub fn band_magnitudes(&self) -> [f64; BAND_COUNT] {
        let mut bands = [0.0; BAND_COUNT];
        if self.degenerate {
            return bands;
        }
        for (j, m) in self.magnitudes.iter().enumerate() {
            let f = self.bin_frequency(j + 1);
            let b = (f + 0.5).floor() as usize;
            if (1..=BAND_COUNT).contains(&b) {
                bands[b - 1] += m;
            }
        }
        bands
    }
}

/// `[dominant_freq_1, dominant_freq_2, dominant_ratio, spectral_energy,
/// spectral_entropy, spectrum_peak_position, power_mean, power_min, power_max]`
pub fn frequency_scalars(spec: &Spectrum) -> [f64; 9] {
    if spec.degenerate {
        return [0.0; 9];
    }
    let (k1, k2) = spec.dominant_bins();
    let m1 = spec.magnitudes[k1 - 1];
    let m2 = spec.magnitudes[k2 - 1];
    let ratio = if m1 > 0.0 { (m2 / m1).clamp(0.0, 1.0) } else { 0.0 };
    let powers: Vec<f64> = spec.powers().collect();
    let pmean = powers.iter().sum::<f64>() / powers.len() as f64;
    let pmin = powers.iter().copied().fold(f64::INFINITY, f64::min);
    let pmax = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [
        spec.bin_frequency(k1),
        spec.bin_frequency(k2),
        ratio,
        spec.energy(),
        spec.normalized_entropy(),
        k1 as f64,
        pmean,
        pmin,
        pmax,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Direct O(n^2) DFT magnitude oracle.
    fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        (1..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += (v - mean) * a.cos();
                    im += (v - mean) * a.sin();
                }
                (re * re + im * im).sqrt() / (n as f64).sqrt()
            })
            .collect()
    }

    fn tone(freqs: &[f64], n: usize, fs: f64) -> Vec<f64> {
        (0..n)
            .map(|t| freqs.iter().map(|f| (2.0 * PI * f * t as f64 / fs).sin()).sum())
            .collect()
    }

    #[test]
    fn fft_matches_direct_dft() {
        let x: Vec<f64> = (0..37).map(|i| ((i * i) % 11) as f64 - 3.0).collect();
        let s = Spectrum::compute(&x, 10.0).unwrap();
        for (a, b) in s.magnitudes.iter().zip(dft_magnitudes(&x)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_tone() {
        let x = tone(&[5.0], 500, 100.0);
        let s = Spectrum::compute(&x, 100.0).unwrap();
        let f = frequency_scalars(&s);
        assert!((f[0] - 5.0).abs() < 1e-12);
        assert!(f[2] < 1e-9, "ratio {}", f[2]);
        assert!(f[4] < 1e-6, "entropy {}", f[4]);
        assert_eq!(f[5], 25.0);
    }

    #[test]
    fn two_tones() {
        let x = tone(&[5.0, 10.0], 500, 100.0);
        let s = Spectrum::compute(&x, 100.0).unwrap();
        let f = frequency_scalars(&s);
        let mut d = [f[0], f[1]];
        d.sort_by(f64::total_cmp);
        assert!((d[0] - 5.0).abs() < 1e-12 && (d[1] - 10.0).abs() < 1e-12);
        assert!((f[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_window_is_degenerate() {
        let s = Spectrum::compute(&[0.3; 64], 100.0).unwrap();
        assert!(s.degenerate);
        assert_eq!(frequency_scalars(&s), [0.0; 9]);
        assert_eq!(s.band_magnitudes(), [0.0; BAND_COUNT]);
    }

    #[test]
    fn too_short() {
        assert!(Spectrum::compute(&[1.0; 7], 100.0).is_err());
    }

    #[test]
    fn bands_above_nyquist_are_zero() {
        let x = tone(&[3.0], 250, 25.0);
        let b = Spectrum::compute(&x, 25.0).unwrap().band_magnitudes();
        assert!(b[2] > 0.0);
        assert!(b[13..].iter().all(|v| *v == 0.0));
    }
}
