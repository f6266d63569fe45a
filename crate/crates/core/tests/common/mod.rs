//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use kehmode::features::{detect_peaks, window_prominence, PeakSet};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut *rng))
}

pub fn unit_columns(mut a: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in a.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    a
}

pub fn subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) <= max_size {
            out.push((0..n).filter(|j| mask & (1 << j) != 0).collect());
        }
    }
    out
}

// Exhaustive BPDN reference. On a support S with sign pattern s the lasso
// path is x_S = G⁻¹(A_Sᵀy − λs) with G = A_SᵀA_S, and the residual splits
// orthogonally: ||r||² = ||(I−P_S)y||² + λ² sᵀG⁻¹s. Solving ||r|| = ε for λ
// gives a feasible point whenever sign(x_S) = s; the optimum is the smallest
// ℓ1 norm over all such points.
pub fn oracle_bpdn(a: &DMatrix<f64>, y: &DVector<f64>, eps: f64) -> f64 {
    if y.norm() <= eps {
        return 0.0;
    }
    let (m, n) = a.shape();
    let mut best = f64::INFINITY;
    for s_idx in subsets(n, m) {
        if s_idx.is_empty() {
            continue;
        }
        let k = s_idx.len();
        let a_s = a.select_columns(&s_idx);
        let g = a_s.tr_mul(&a_s);
        let Some(g_inv) = g.clone().try_inverse() else { continue };
        if g.clone().svd(false, false).singular_values.min() < 1e-9 {
            continue;
        }
        let aty = a_s.tr_mul(y);
        let ls = &g_inv * &aty;
        let res_ls = (y - &a_s * &ls).norm_squared();
        if res_ls > eps * eps {
            continue;
        }
        for signs in 0u32..(1 << k) {
            let s = DVector::from_fn(k, |i, _| if signs & (1 << i) != 0 { 1.0 } else { -1.0 });
            let q = s.dot(&(&g_inv * &s));
            if q <= 0.0 {
                continue;
            }
            let lambda = ((eps * eps - res_ls) / q).sqrt();
            let x = &ls - lambda * (&g_inv * &s);
            if x.iter().zip(s.iter()).all(|(xi, si)| xi * si > 0.0) {
                best = best.min(x.lp_norm(1));
            }
        }
    }
    best
}

pub fn random_orthonormal(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, m, m).qr().q()
}

// Joint-histogram reference: sum of p(a,b) log2(p(a,b) / (p(a) p(b))).
pub fn oracle_mi(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut joint = vec![vec![0usize; kb]; ka];
    for (x, y) in a.iter().zip(b) {
        joint[*x][*y] += 1;
    }
    let n = a.len() as f64;
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum::<usize>() as f64 / n).collect();
    let pb: Vec<f64> = (0..kb).map(|j| joint.iter().map(|r| r[j]).sum::<usize>() as f64 / n).collect();
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            if joint[i][j] > 0 {
                let p = joint[i][j] as f64 / n;
                mi += p * (p / (pa[i] * pb[j])).log2();
            }
        }
    }
    mi
}

pub fn oracle_entropy(a: &[usize]) -> f64 {
    let k = a.iter().max().unwrap() + 1;
    let mut c = vec![0usize; k];
    for x in a {
        c[*x] += 1;
    }
    let n = a.len() as f64;
    c.iter()
        .filter(|v| **v > 0)
        .map(|v| {
            let p = *v as f64 / n;
            -p * p.log2()
        })
        .sum()
}

pub fn random_table(rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let n = rng.random_range(2..60);
    let ka = rng.random_range(2..6);
    let kb = rng.random_range(1..6);
    let coupling: f64 = rng.random_range(0.0..1.0);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(0..ka);
        let y = if rng.random_bool(coupling) { x % kb } else { rng.random_range(0..kb) };
        a.push(x);
        b.push(y);
    }
    (a, b)
}

pub fn brute_sigma(x: &[f64], t: usize, k: usize) -> f64 {
    let mut mean = 0.0;
    for v in &x[t - k..t] {
        mean += v;
    }
    mean /= k as f64;
    let mut ss = 0.0;
    for v in &x[t - k..t] {
        ss += (v - mean).powi(2);
    }
    (ss / k as f64).sqrt()
}

pub const RATES: [f64; 5] = [10.0, 20.0, 25.0, 50.0, 100.0];

pub fn random_window(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let fs = RATES[rng.random_range(0..RATES.len())];
    let n = rng.random_range(64..600);
    let f = rng.random_range(0.5..fs / 2.0 - 0.5);
    let a = rng.random_range(0.1..2.0);
    let offset = rng.random_range(-1.0..1.0);
    let noise = rng.random_range(0.01..0.5);
    let x = (0..n)
        .map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            offset + a * (2.0 * PI * f * t as f64 / fs).sin() + noise * z
        })
        .collect();
    (x, fs)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn time_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

// Feature positions inside each family block.
pub const STAT_EQUIVARIANT: [usize; 5] = [0, 1, 2, 3, 10]; // min, max, std, mean_abs, abs_area

pub const FREQ_INVARIANT: [usize; 5] = [0, 1, 2, 4, 5]; // dominant freqs, ratio, entropy, peak position

pub const TIME_CROSSINGS: usize = 6;

pub const VIB_EQUIVARIANT: [usize; 3] = [0, 3, 4]; // mean_of_peaks, max_of_peaks, peak_to_peak

pub fn peaks_of(x: &[f64]) -> PeakSet {
    detect_peaks(x, window_prominence(x, 0.05))
}

// Reference peak finder: every strict interior maximum, prominence taken as
// the height above the larger of the two side minima, where each side ends
// at the first strictly higher sample.
pub fn oracle_peaks(x: &[f64], min_prom: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if !(x[i] > x[i - 1] && x[i] > x[i + 1]) {
            continue;
        }
        let left_end = (0..i).rev().find(|&j| x[j] > x[i]).map_or(0, |j| j + 1);
        let right_end = (i + 1..x.len()).find(|&j| x[j] > x[i]).unwrap_or(x.len());
        let left_min = x[left_end..=i].iter().cloned().fold(f64::INFINITY, f64::min);
        let right_min = x[i..right_end].iter().cloned().fold(f64::INFINITY, f64::min);
        if x[i] - left_min.max(right_min) >= min_prom {
            out.push(i);
        }
    }
    out
}
