//! Labeled synthetic KEH voltage traces.
//!
//! Each mode is a sum of jittered sinusoids plus Gaussian noise, modulated by
//! Poisson-scheduled transient bursts (Hann envelopes) and interrupted by
//! Poisson-scheduled stops where only a weak noise floor remains. Every trace
//! draws from its own ChaCha stream keyed by `(seed, trace ordinal)`, so
//! output does not depend on generation order.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::Mode;
use crate::signal::io::{write_manifest, write_trace_csv, ManifestEntry};
use crate::signal::{StationaryMask, TraceMeta, VoltageTrace};

const MODULE: &str = "synthgen";

pub const FORMAT_VERSION: u32 = 1;

/// Shipped generator defaults.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../data/default_generator.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub base_freqs_hz: Vec<f64>,
    pub base_amplitudes_v: Vec<f64>,
    pub noise_sigma_v: f64,
    pub stop_rate_per_min: f64,
    pub stop_duration_s: [f64; 2],
    pub event_rate_per_min: f64,
    pub event_gain: f64,
}

impl ModeProfile {
    pub fn validate(&self, sampling_rate_hz: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::param(MODULE, msg));
        if self.base_freqs_hz.is_empty() || self.base_freqs_hz.len() > 3 {
            return bad("profiles need one to three base frequencies".into());
        }
        if self.base_freqs_hz.len() != self.base_amplitudes_v.len() {
            return bad("one amplitude per base frequency required".into());
        }
        let nyquist = sampling_rate_hz / 2.0;
        if self.base_freqs_hz.iter().any(|f| !(*f > 0.0 && *f * 1.05 < nyquist)) {
            return bad(format!("base frequencies must lie below Nyquist ({nyquist} Hz)"));
        }
        let non_negative = self.base_amplitudes_v.iter().all(|a| *a >= 0.0)
            && self.noise_sigma_v >= 0.0
            && self.stop_rate_per_min >= 0.0
            && self.event_rate_per_min >= 0.0
            && self.event_gain >= 0.0
            && self.stop_duration_s[0] >= 0.0
            && self.stop_duration_s[0] <= self.stop_duration_s[1];
        if !non_negative {
            return bad("rates, amplitudes, durations and sigmas must be non-negative".into());
        }
        Ok(())
    }

    /// Copy with amplitudes and noise scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            base_amplitudes_v: self.base_amplitudes_v.iter().map(|a| a * c).collect(),
            noise_sigma_v: self.noise_sigma_v * c,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub format_version: u32,
    pub profiles: BTreeMap<Mode, ModeProfile>,
    pub sampling_rate_hz: f64,
    pub trace_duration_s: f64,
    pub traces_per_mode: usize,
    pub users: usize,
    /// Per-user gain is drawn uniformly from `1 ± user_gain_jitter`.
    pub user_gain_jitter: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG_JSON).expect("shipped generator config parses")
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0 && self.trace_duration_s > 0.0) {
            return Err(Error::param(MODULE, "rate and duration must be positive"));
        }
        if self.traces_per_mode == 0 || self.users == 0 {
            return Err(Error::param(MODULE, "need at least one trace per mode and one user"));
        }
        if !(0.0..1.0).contains(&self.user_gain_jitter) {
            return Err(Error::param(MODULE, "user gain jitter must lie in [0, 1)"));
        }
        if self.profiles.is_empty() {
            return Err(Error::param(MODULE, "no mode profiles"));
        }
        for p in self.profiles.values() {
            p.validate(self.sampling_rate_hz)?;
        }
        Ok(())
    }

    /// Multiplicative gain for user `u`.
    pub fn user_gain(&self, user: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX - user as u64);
        1.0 + self.user_gain_jitter * (2.0 * rng.random::<f64>() - 1.0)
    }
}

/// Generator-side truth for oracle tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trace_id: String,
    /// Half-open sample ranges of stops, merged and sorted.
    pub stop_intervals: Vec<[usize; 2]>,
    /// `(start_s, duration_s)` of transient bursts.
    pub events: Vec<[f64; 2]>,
    pub user_gain: f64,
}

impl GroundTruth {
    pub fn stop_mask(&self, len: usize) -> StationaryMask {
        let mut flags = vec![false; len];
        for [a, b] in &self.stop_intervals {
            flags[(*a).min(len)..(*b).min(len)].iter_mut().for_each(|f| *f = true);
        }
        StationaryMask { flags }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedTrace {
    pub trace: VoltageTrace,
    pub truth: GroundTruth,
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
}

/// Generates one trace. `stream` selects an independent random stream under
/// `seed`; `user_gain` scales the whole signal.
pub fn generate_trace(
    profile: &ModeProfile,
    sampling_rate_hz: f64,
    duration_s: f64,
    meta: TraceMeta,
    user_gain: f64,
    seed: u64,
    stream: u64,
) -> Result<GeneratedTrace> {
    profile.validate(sampling_rate_hz)?;
    let n = (duration_s * sampling_rate_hz).round() as usize;
    let fs = sampling_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let tones: Vec<(f64, f64, f64)> = profile
        .base_freqs_hz
        .iter()
        .zip(&profile.base_amplitudes_v)
        .map(|(f, a)| {
            let jitter = 1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0);
            let phase = 2.0 * PI * rng.random::<f64>();
            (f * jitter, *a, phase)
        })
        .collect();

    let events: Vec<[f64; 2]> = (0..poisson_count(&mut rng, profile.event_rate_per_min * duration_s / 60.0))
        .map(|_| [rng.random::<f64>() * duration_s, rng.random_range(2.0..=5.0)])
        .collect();

    let mut stops: Vec<[usize; 2]> = (0..poisson_count(&mut rng, profile.stop_rate_per_min * duration_s / 60.0))
        .map(|_| {
            let start = rng.random::<f64>() * duration_s;
            let [lo, hi] = profile.stop_duration_s;
            let len = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let a = (start * fs).round() as usize;
            let b = ((start + len) * fs).round() as usize;
            [a.min(n), b.min(n)]
        })
        .filter(|[a, b]| b > a)
        .collect();
    stops.sort();
    let stops = merge_intervals(stops);

    let stop_sigma = profile.noise_sigma_v / 10.0;
    let mut in_stop = vec![false; n];
    for [a, b] in &stops {
        in_stop[*a..*b].iter_mut().for_each(|f| *f = true);
    }
    let samples = (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = if in_stop[i] {
                stop_sigma * z
            } else {
                let t = i as f64 / fs;
                let base: f64 = tones
                    .iter()
                    .map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                    .sum();
                let envelope = events
                    .iter()
                    .map(|[t0, d]| {
                        let u = (t - t0) / d;
                        if (0.0..=1.0).contains(&u) {
                            0.5 * (1.0 - (2.0 * PI * u).cos())
                        } else {
                            0.0
                        }
                    })
                    .fold(0.0, f64::max);
                base * (1.0 + (profile.event_gain - 1.0) * envelope) + profile.noise_sigma_v * z
            };
            user_gain * v
        })
        .collect();

    let truth = GroundTruth {
        trace_id: meta.trace_id.clone(),
        stop_intervals: stops,
        events,
        user_gain,
    };
    Ok(GeneratedTrace {
        trace: VoltageTrace::new(samples, fs, meta)?,
        truth,
    })
}

fn merge_intervals(sorted: Vec<[usize; 2]>) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = Vec::with_capacity(sorted.len());
    for [a, b] in sorted {
        match out.last_mut() {
            Some(last) if a <= last[1] => last[1] = last[1].max(b),
            _ => out.push([a, b]),
        }
    }
    out
}

/// Generates every trace of a corpus in memory, ordered by mode then index.
/// Trace `i` of a mode belongs to user `i mod users`.
pub fn generate_traces(config: &GeneratorConfig) -> Result<Vec<GeneratedTrace>> {
    config.validate()?;
    let mut out = Vec::new();
    for (mode_ord, (mode, profile)) in config.profiles.iter().enumerate() {
        for i in 0..config.traces_per_mode {
            let user = i % config.users;
            let meta = TraceMeta {
                label: Some(*mode),
                user_id: format!("user_{user}"),
                trace_id: format!("{mode}_{i:03}"),
            };
            let stream = (mode_ord * config.traces_per_mode + i) as u64;
            out.push(generate_trace(
                profile,
                config.sampling_rate_hz,
                config.trace_duration_s,
                meta,
                config.user_gain(user),
                config.seed,
                stream,
            )?);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub format_version: u32,
    pub generator: GeneratorConfig,
    pub traces: Vec<GroundTruth>,
}

/// Writes `traces/*.csv`, `manifest.json` and `ground_truth.json` under
/// `out_dir`.
pub fn generate_corpus(config: &GeneratorConfig, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let generated = generate_traces(config)?;
    let trace_dir = out_dir.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;
    let mut manifest = Vec::with_capacity(generated.len());
    for g in &generated {
        let rel = format!("traces/{}.csv", g.trace.meta.trace_id);
        write_trace_csv(&out_dir.join(&rel), &g.trace)?;
        manifest.push(ManifestEntry {
            path: rel,
            mode: g.trace.meta.label,
            user_id: g.trace.meta.user_id.clone(),
            trace_id: g.trace.meta.trace_id.clone(),
            sampling_rate_hz: g.trace.sampling_rate_hz,
        });
    }
    write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    let truth = GroundTruthFile {
        format_version: FORMAT_VERSION,
        generator: config.clone(),
        traces: generated.into_iter().map(|g| g.truth).collect(),
    };
    let text = serde_json::to_string_pretty(&truth).map_err(|e| Error::json("ground truth", e))?;
    let path = out_dir.join("ground_truth.json");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
