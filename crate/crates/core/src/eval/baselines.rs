//! Comparison classifiers: k-nearest neighbours, Gaussian naive Bayes and a
//! one-vs-rest linear SVM. All share the [`FoldClassifier`] interface used
//! by the experiment runner; labels are dense class indices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MODULE: &str = "eval";

pub const KNN_GRID: [usize; 5] = [1, 3, 5, 7, 9];
pub const SVM_C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const NB_VAR_FLOOR: f64 = 1e-9;
/// Share of the training side held out for hyperparameter selection.
pub const INNER_VALIDATION_FRACTION: f64 = 0.2;
/// Below this many training rows the grid search is skipped.
const MIN_ROWS_FOR_GRID: usize = 10;

pub trait FoldClassifier: Sync {
    fn name(&self) -> &str;
    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<usize>>;
}

fn check_training(train_x: &[Vec<f64>], train_y: &[usize]) -> Result<()> {
    if train_x.is_empty() || train_x.len() != train_y.len() {
        return Err(Error::input(MODULE, "training rows and labels must be non-empty and aligned"));
    }
    Ok(())
}

/// Per-column z-score fitted on the training rows; constant columns map to 0.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 0.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Seeded inner split of the training side: (fit indices, validation indices).
fn inner_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((n as f64 * INNER_VALIDATION_FRACTION).round() as usize).clamp(1, n - 1);
    let mut val = order[..n_val].to_vec();
    let mut fit = order[n_val..].to_vec();
    val.sort_unstable();
    fit.sort_unstable();
    (fit, val)
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

/// Returns the grid index with the best validation accuracy (ties: first).
fn grid_search<F>(
    x: &[Vec<f64>],
    y: &[usize],
    seed: u64,
    grid_len: usize,
    default: usize,
    mut eval: F,
) -> Result<usize>
where
    F: FnMut(usize, &[Vec<f64>], &[usize], &[Vec<f64>]) -> Result<Vec<usize>>,
{
    if x.len() < MIN_ROWS_FOR_GRID {
        return Ok(default);
    }
    let (fit, val) = inner_split(x.len(), seed);
    let (fx, fy, vx, vy) = (pick(x, &fit), pick(y, &fit), pick(x, &val), pick(y, &val));
    let mut best = (0, f64::NEG_INFINITY);
    for g in 0..grid_len {
        let acc = accuracy(&eval(g, &fx, &fy, &vx)?, &vy);
        if acc > best.1 {
            best = (g, acc);
        }
    }
    Ok(best.0)
}

/// Euclidean k-nearest neighbours on standardized features. `k = None`
/// selects k from [`KNN_GRID`] on an inner validation split.
#[derive(Debug, Clone, Default)]
pub struct Knn {
    pub k: Option<usize>,
}

/// Majority label among the `k` nearest rows. Distance ties go to the lower
/// row index; vote ties go to the class whose nearest member is closest.
pub fn knn_predict(train_x: &[Vec<f64>], train_y: &[usize], query: &[f64], k: usize) -> usize {
    let mut dist: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = k.min(dist.len());
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; classes];
    for &(_, i) in &dist[..k] {
        votes[train_y[i]] += 1;
    }
    let top = *votes.iter().max().unwrap();
    dist[..k]
        .iter()
        .map(|&(_, i)| train_y[i])
        .find(|c| votes[*c] == top)
        .unwrap()
}

impl FoldClassifier for Knn {
    fn name(&self) -> &str {
        "knn"
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<usize>> {
        check_training(train_x, train_y)?;
        let std = Standardizer::fit(train_x);
        let (tx, qx) = (std.apply_all(train_x), std.apply_all(test_x));
        let k = match self.k {
            Some(0) => return Err(Error::param(MODULE, "k must be at least 1")),
            Some(k) => k,
            None => {
                KNN_GRID[grid_search(&tx, train_y, seed, KNN_GRID.len(), 2, |g, fx, fy, vx| {
                    Ok(vx.iter().map(|q| knn_predict(fx, fy, q, KNN_GRID[g])).collect())
                })?]
            }
        };
        Ok(qx.iter().map(|q| knn_predict(&tx, train_y, q, k)).collect())
    }
}

/// Gaussian naive Bayes with empirical priors and variances floored at
/// [`NB_VAR_FLOOR`].
#[derive(Debug, Clone, Default)]
pub struct GaussianNb;

#[derive(Debug, Clone)]
pub struct NbModel {
    log_prior: Vec<f64>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl NbModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize]) -> Result<Self> {
        check_training(x, y)?;
        let classes = y.iter().max().unwrap() + 1;
        let d = x[0].len();
        let mut count = vec![0usize; classes];
        let mut mean = vec![vec![0.0; d]; classes];
        for (r, &c) in x.iter().zip(y) {
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(r) {
                *m += v;
            }
        }
        for (m, &n) in mean.iter_mut().zip(&count) {
            m.iter_mut().for_each(|v| *v /= n.max(1) as f64);
        }
        let mut var = vec![vec![0.0; d]; classes];
        for (r, &c) in x.iter().zip(y) {
            for ((s, v), m) in var[c].iter_mut().zip(r).zip(&mean[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, &n) in var.iter_mut().zip(&count) {
            s.iter_mut()
                .for_each(|v| *v = (*v / n.max(1) as f64).max(NB_VAR_FLOOR));
        }
        let total = y.len() as f64;
        let log_prior = count
            .iter()
            .map(|&n| if n > 0 { (n as f64 / total).ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self {
            log_prior,
            mean,
            var,
        })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..self.log_prior.len() {
            if self.log_prior[c] == f64::NEG_INFINITY {
                continue;
            }
            let mut ll = self.log_prior[c];
            for ((v, m), s) in row.iter().zip(&self.mean[c]).zip(&self.var[c]) {
                ll -= 0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s);
            }
            if ll > best.1 {
                best = (c, ll);
            }
        }
        best.0
    }
}

impl FoldClassifier for GaussianNb {
    fn name(&self) -> &str {
        "nb"
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
        _seed: u64,
    ) -> Result<Vec<usize>> {
        let model = NbModel::fit(train_x, train_y)?;
        Ok(test_x.iter().map(|r| model.predict(r)).collect())
    }
}

/// One-vs-rest linear SVM, L2-regularized hinge loss, trained by dual
/// coordinate descent on standardized features with an appended bias
/// column. `c = None` selects C from [`SVM_C_GRID`] on an inner split.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    pub c: Option<f64>,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for LinearSvm {
    fn default() -> Self {
        Self {
            c: None,
            max_epochs: 1000,
            tol: 1e-3,
        }
    }
}

fn with_bias(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut v = r.clone();
            v.push(1.0);
            v
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvm {
    /// Binary weights for targets `t ∈ {−1, +1}`; rows already carry the bias.
    pub fn train_binary(&self, x: &[Vec<f64>], t: &[f64], c: f64, seed: u64) -> Vec<f64> {
        let d = x[0].len();
        let mut w = vec![0.0; d];
        let mut alpha = vec![0.0; x.len()];
        let q: Vec<f64> = x.iter().map(|r| dot(r, r)).collect();
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..self.max_epochs {
            order.shuffle(&mut rng);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                if q[i] == 0.0 {
                    continue;
                }
                let g = t[i] * dot(&w, &x[i]) - 1.0;
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == c {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg.abs() > 1e-12 {
                    let old = alpha[i];
                    alpha[i] = (old - g / q[i]).clamp(0.0, c);
                    let step = (alpha[i] - old) * t[i];
                    for (wj, xj) in w.iter_mut().zip(&x[i]) {
                        *wj += step * xj;
                    }
                }
            }
            if pg_max - pg_min < self.tol {
                break;
            }
        }
        w
    }

    fn fit_ovr(&self, x: &[Vec<f64>], y: &[usize], c: f64, seed: u64) -> Vec<Vec<f64>> {
        let classes = y.iter().max().unwrap() + 1;
        (0..classes)
            .map(|k| {
                let t: Vec<f64> = y.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
                if t.iter().all(|v| *v < 0.0) {
                    // Class absent from this training set: never predicted.
                    let mut w = vec![0.0; x[0].len()];
                    *w.last_mut().unwrap() = f64::NEG_INFINITY;
                    w
                } else {
                    self.train_binary(x, &t, c, seed.wrapping_add(k as u64))
                }
            })
            .collect()
    }

    fn predict_ovr(weights: &[Vec<f64>], row: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, w) in weights.iter().enumerate() {
            let s = dot(w, row);
            if s > best.1 {
                best = (k, s);
            }
        }
        best.0
    }
}

impl FoldClassifier for LinearSvm {
    fn name(&self) -> &str {
        "svm"
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<usize>> {
        check_training(train_x, train_y)?;
        let std = Standardizer::fit(train_x);
        let tx = with_bias(&std.apply_all(train_x));
        let qx = with_bias(&std.apply_all(test_x));
        let c = match self.c {
            Some(c) if !(c.is_finite() && c > 0.0) => {
                return Err(Error::param(MODULE, "SVM regularization C must be positive"))
            }
            Some(c) => c,
            None => {
                SVM_C_GRID[grid_search(&tx, train_y, seed, SVM_C_GRID.len(), 2, |g, fx, fy, vx| {
                    let w = self.fit_ovr(fx, fy, SVM_C_GRID[g], seed);
                    Ok(vx.iter().map(|r| Self::predict_ovr(&w, r)).collect())
                })?]
            }
        };
        let w = self.fit_ovr(&tx, train_y, c, seed);
        Ok(qx.iter().map(|r| Self::predict_ovr(&w, r)).collect())
    }
}
