use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::omp::{check_sparsity, omp_gram};
use crate::error::{Error, Result};

/// Initial dictionary choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KsvdInit {
    /// First K training columns.
    #[default]
    FirstColumns,
    /// K distinct training columns drawn with the given seed.
    RandomColumns { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsvdConfig {
    pub atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub init: KsvdInit,
}

impl Default for KsvdConfig {
    fn default() -> Self {
        Self {
            atoms: 50,
            sparsity: 5,
            iterations: 30,
            init: KsvdInit::FirstColumns,
        }
    }
}

/// Frobenius reconstruction error around one dictionary-update stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageErrors {
    pub before_update: f64,
    pub after_update: f64,
}

#[derive(Debug, Clone)]
pub struct KsvdOutput {
    pub atoms: DMatrix<f64>,
    pub codes: DMatrix<f64>,
    pub history: Vec<StageErrors>,
}

fn frobenius_error(s: &DMatrix<f64>, d: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (s - d * x).norm()
}

fn initial_dictionary(training: &DMatrix<f64>, config: &KsvdConfig) -> DMatrix<f64> {
    let (m, n) = training.shape();
    let k = config.atoms;
    let columns: Vec<usize> = match config.init {
        KsvdInit::FirstColumns => (0..k).map(|j| j % n).collect(),
        KsvdInit::RandomColumns { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if k <= n {
                sample(&mut rng, n, k).into_vec()
            } else {
                (0..k).map(|j| j % n).collect()
            }
        }
    };
    let mut d = training.select_columns(&columns);
    let mut fallback = 0;
    for mut col in d.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else {
            col.fill(0.0);
            col[fallback % m] = 1.0;
            fallback += 1;
        }
    }
    d
}

fn sparse_code_all(
    d: &DMatrix<f64>,
    training: &DMatrix<f64>,
    sparsity: usize,
) -> Result<DMatrix<f64>> {
    check_sparsity(sparsity, d.nrows(), d.ncols())?;
    let gram = d.tr_mul(d);
    let dts = d.tr_mul(training);
    let mut x = DMatrix::zeros(d.ncols(), training.ncols());
    for (i, s) in training.column_iter().enumerate() {
        let g = omp_gram(&gram, &dts.column(i).into_owned(), s.norm_squared(), sparsity, 0.0);
        for (j, c) in g.support.iter().zip(&g.coef) {
            x[(*j, i)] = *c;
        }
    }
    Ok(x)
}

/// K-SVD: alternate OMP coding of every training column with per-atom rank-1
/// updates. Atoms no sample uses are replaced by the worst-represented
/// training column. Runs a fixed number of iterations.
pub fn ksvd_train(training: &DMatrix<f64>, config: &KsvdConfig) -> Result<KsvdOutput> {
    let (m, n) = training.shape();
    if n == 0 || m == 0 {
        return Err(Error::input("sparse", "K-SVD needs at least one training sample"));
    }
    if training.iter().all(|v| *v == 0.0) {
        return Err(Error::input("sparse", "K-SVD training matrix is all zeros"));
    }
    if config.atoms == 0 {
        return Err(Error::param("sparse", "K-SVD needs at least one atom"));
    }
    if config.sparsity == 0 || config.sparsity > config.atoms.min(m) {
        return Err(Error::param(
            "sparse",
            format!(
                "sparsity {} must lie in 1..={}",
                config.sparsity,
                config.atoms.min(m)
            ),
        ));
    }
    if n < config.atoms {
        log::warn!(
            "K-SVD: {n} training samples for {} atoms; initial atoms repeat",
            config.atoms
        );
    }

    let mut d = initial_dictionary(training, config);
    let mut x = DMatrix::zeros(config.atoms, n);
    let mut history = Vec::with_capacity(config.iterations);

    for _ in 0..config.iterations {
        x = sparse_code_all(&d, training, config.sparsity)?;
        // Kept current through every atom update.
        let mut residual = training - &d * &x;
        let before = residual.norm();
        let mut replaced = vec![false; n];

        for j in 0..config.atoms {
            let users: Vec<usize> = (0..n).filter(|i| x[(j, *i)] != 0.0).collect();
            if users.is_empty() {
                replace_dead_atom(training, &residual, &mut d, j, &mut replaced);
                continue;
            }
            let atom = d.column(j).into_owned();
            // Residual restricted to the users, with atom j's contribution added back.
            let mut e = DMatrix::zeros(m, users.len());
            for (k, i) in users.iter().enumerate() {
                let mut col = e.column_mut(k);
                col.copy_from(&residual.column(*i));
                col.axpy(x[(j, *i)], &atom, 1.0);
            }
            let Some((mut new_atom, mut new_row)) = rank_one(&e, &atom) else {
                for (k, i) in users.iter().enumerate() {
                    x[(j, *i)] = 0.0;
                    residual.set_column(*i, &e.column(k));
                }
                continue;
            };
            if new_atom.dot(&atom) < 0.0 {
                new_atom = -new_atom;
                new_row = -new_row;
            }
            d.set_column(j, &new_atom);
            for (k, i) in users.iter().enumerate() {
                x[(j, *i)] = new_row[k];
                let mut col = residual.column_mut(*i);
                col.copy_from(&e.column(k));
                col.axpy(-new_row[k], &new_atom, 1.0);
            }
        }
        let after = frobenius_error(training, &d, &x);
        history.push(StageErrors {
            before_update: before,
            after_update: after,
        });
    }

    Ok(KsvdOutput {
        atoms: d,
        codes: x,
        history,
    })
}

const POWER_STEPS: usize = 200;

/// Leading left singular vector `u` of `e` and the row `eᵀu`, by power
/// iteration on `e eᵀ` warm-started from `start`. Each step can only lower
/// `||e - u rowᵀ||`, so the result is never worse than the start. `None` when
/// `e` is zero.
fn rank_one(e: &DMatrix<f64>, start: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let mut u = start.clone();
    let mut row = e.tr_mul(&u);
    if row.norm() == 0.0 {
        let j = (0..e.ncols()).max_by(|a, b| e.column(*a).norm().total_cmp(&e.column(*b).norm()))?;
        let c = e.column(j);
        let norm = c.norm();
        if norm == 0.0 {
            return None;
        }
        u = c / norm;
        row = e.tr_mul(&u);
    }
    for _ in 0..POWER_STEPS {
        let next = e * &row;
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        let next = next / norm;
        let delta = (&next - &u).norm();
        u = next;
        row = e.tr_mul(&u);
        if delta < 1e-12 {
            break;
        }
    }
    Some((u, row))
}

/// Swaps an unused atom for the normalized training column with the largest
/// current reconstruction error. The atom's coefficient row is zero, so the
/// total error is unchanged.
fn replace_dead_atom(
    training: &DMatrix<f64>,
    residual: &DMatrix<f64>,
    d: &mut DMatrix<f64>,
    j: usize,
    replaced: &mut [bool],
) {
    let mut worst: Option<(usize, f64)> = None;
    for (i, col) in residual.column_iter().enumerate() {
        if replaced[i] || training.column(i).norm() == 0.0 {
            continue;
        }
        let e = col.norm();
        if worst.is_none_or(|(_, w)| e > w) {
            worst = Some((i, e));
        }
    }
    if let Some((i, _)) = worst {
        let col = training.column(i);
        d.set_column(j, &(col / col.norm()));
        replaced[i] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_returns_initialization() {
        let s = DMatrix::from_fn(3, 5, |i, j| (i + 2 * j) as f64 + 1.0);
        let out = ksvd_train(
            &s,
            &KsvdConfig {
                atoms: 2,
                sparsity: 1,
                iterations: 0,
                init: KsvdInit::FirstColumns,
            },
        )
        .unwrap();
        for j in 0..2 {
            let c = s.column(j) / s.column(j).norm();
            assert!((out.atoms.column(j) - c).norm() < 1e-15);
        }
        assert!(out.history.is_empty());
    }

    #[test]
    fn orthonormal_training_is_a_fixed_point() {
        let q = DMatrix::<f64>::identity(4, 4);
        let s = DMatrix::from_fn(4, 4, |i, j| q[(i, (j + 1) % 4)]);
        let out = ksvd_train(
            &s,
            &KsvdConfig {
                atoms: 4,
                sparsity: 1,
                iterations: 5,
                init: KsvdInit::FirstColumns,
            },
        )
        .unwrap();
        assert!((&s - &out.atoms * &out.codes).norm() < 1e-12);
        // Every training column matches one atom up to sign.
        for col in s.column_iter() {
            let best = out
                .atoms
                .column_iter()
                .map(|a| a.dot(&col).abs())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        let cfg = KsvdConfig {
            atoms: 2,
            sparsity: 1,
            iterations: 1,
            init: KsvdInit::FirstColumns,
        };
        assert!(ksvd_train(&DMatrix::zeros(3, 4), &cfg).is_err());
        assert!(ksvd_train(&DMatrix::zeros(3, 0), &cfg).is_err());
    }
}
