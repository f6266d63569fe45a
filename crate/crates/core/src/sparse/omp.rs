use nalgebra::{DMatrix, DVector};

use super::SparseCode;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OmpResult {
    pub code: SparseCode,
    pub residual_norm: f64,
    /// Residual norm after each selection, starting with `||y||`, taken from
    /// the normal equations.
    pub residual_history: Vec<f64>,
}

/// Support and coefficients found by [`omp_gram`].
pub(crate) struct GramCode {
    pub support: Vec<usize>,
    pub coef: Vec<f64>,
    pub history: Vec<f64>,
}

/// OMP in the Gram domain: `gram = DᵀD`, `dty = Dᵀy`, `y_sq = ||y||²`.
///
/// The Cholesky factor of the selected atoms' Gram block grows by one row per
/// step, so each step costs `O(K·k)` instead of a fresh least-squares solve.
/// An atom numerically inside the span of the current support is skipped.
pub(crate) fn omp_gram(
    gram: &DMatrix<f64>,
    dty: &DVector<f64>,
    y_sq: f64,
    sparsity: usize,
    residual_tol: f64,
) -> GramCode {
    let n = dty.len();
    let floor = 1e-12 * y_sq.sqrt().max(f64::MIN_POSITIVE);
    let mut alpha = dty.clone();
    let mut excluded = vec![false; n];
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    // Row-major lower-triangular factor.
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(sparsity);
    let mut coef: Vec<f64> = Vec::new();
    let mut res_sq = y_sq;
    let mut history = vec![y_sq.sqrt()];

    while support.len() < sparsity && res_sq.sqrt() > residual_tol {
        let mut best: Option<(usize, f64)> = None;
        for (j, a) in alpha.iter().enumerate() {
            if excluded[j] {
                continue;
            }
            if best.is_none_or(|(_, b)| a.abs() > b) {
                best = Some((j, a.abs()));
            }
        }
        let Some((j, c)) = best else { break };
        if c <= floor {
            break;
        }
        excluded[j] = true;

        let gjj = gram[(j, j)];
        let mut w = Vec::with_capacity(support.len());
        for (r, row) in l.iter().enumerate() {
            let mut v = gram[(support[r], j)];
            for (q, wq) in w.iter().enumerate() {
                v -= row[q] * wq;
            }
            w.push(v / row[r]);
        }
        let d_sq = gjj - w.iter().map(|v| v * v).sum::<f64>();
        if d_sq <= 1e-10 * gjj {
            continue;
        }
        w.push(d_sq.sqrt());
        l.push(w);
        support.push(j);

        // L z = Dᵀy on the support, then Lᵀ x = z.
        let k = support.len();
        let mut z = vec![0.0; k];
        for r in 0..k {
            let mut v = dty[support[r]];
            for q in 0..r {
                v -= l[r][q] * z[q];
            }
            z[r] = v / l[r][r];
        }
        coef = vec![0.0; k];
        for r in (0..k).rev() {
            let mut v = z[r];
            for q in r + 1..k {
                v -= l[q][r] * coef[q];
            }
            coef[r] = v / l[r][r];
        }

        alpha.copy_from(dty);
        for (s, x) in support.iter().zip(&coef) {
            alpha.axpy(-x, &gram.column(*s), 1.0);
        }
        res_sq = (y_sq - support.iter().zip(&coef).map(|(s, x)| dty[*s] * x).sum::<f64>()).max(0.0);
        history.push(res_sq.sqrt());
    }
    GramCode {
        support,
        coef,
        history,
    }
}

/// Orthogonal matching pursuit over a dictionary with unit-norm columns.
///
/// Stops once `sparsity` atoms are selected, the residual norm drops to
/// `residual_tol`, or no atom correlates with the residual.
pub fn omp(
    dictionary: &DMatrix<f64>,
    y: &DVector<f64>,
    sparsity: usize,
    residual_tol: f64,
) -> Result<OmpResult> {
    let (m, n) = dictionary.shape();
    if y.len() != m {
        return Err(Error::input(
            "sparse",
            format!("signal length {} does not match dictionary rows {m}", y.len()),
        ));
    }
    check_sparsity(sparsity, m, n)?;
    let gram = dictionary.tr_mul(dictionary);
    let dty = dictionary.tr_mul(y);
    let g = omp_gram(&gram, &dty, y.norm_squared(), sparsity, residual_tol);

    let mut coefficients = vec![0.0; n];
    let mut residual = y.clone();
    for (j, x) in g.support.iter().zip(&g.coef) {
        coefficients[*j] = *x;
        residual.axpy(-x, &dictionary.column(*j), 1.0);
    }
    Ok(OmpResult {
        code: SparseCode::from_coefficients(coefficients, 0.0),
        residual_norm: residual.norm(),
        residual_history: g.history,
    })
}

pub(crate) fn check_sparsity(sparsity: usize, m: usize, n: usize) -> Result<()> {
    if sparsity == 0 || sparsity > m.min(n) {
        return Err(Error::param(
            "sparse",
            format!("sparsity {sparsity} must lie in 1..={}", m.min(n)),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal4() -> DMatrix<f64> {
        // Normalized Hadamard matrix.
        DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0,
            ],
        ) / 2.0
    }

    #[test]
    fn recovers_single_atom() {
        let d = orthonormal4();
        let y = d.column(3).into_owned();
        let r = omp(&d, &y, 1, 0.0).unwrap();
        assert_eq!(r.code.support, vec![3]);
        assert!((r.code.coefficients[3] - 1.0).abs() < 1e-12);
        assert!(r.residual_norm < 1e-12);
    }

    #[test]
    fn orthonormal_two_atoms() {
        let d = orthonormal4();
        let y = d.column(1) * 2.0 + d.column(2) * 3.0;
        let r = omp(&d, &y, 2, 0.0).unwrap();
        let mut s = r.code.support.clone();
        s.sort();
        assert_eq!(s, vec![1, 2]);
        assert!((r.code.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((r.code.coefficients[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_signal_gives_empty_support() {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 2.0]);
        let r = omp(&d, &y, 2, 0.0).unwrap();
        assert!(r.code.support.is_empty());
        assert_eq!(r.residual_norm, 2.0);
        let zero = omp(&d, &DVector::zeros(3), 1, 0.0).unwrap();
        assert!(zero.code.support.is_empty());
    }

    #[test]
    fn rejects_bad_sparsity() {
        let d = orthonormal4();
        assert!(omp(&d, &DVector::zeros(4), 5, 0.0).is_err());
        assert!(omp(&d, &DVector::zeros(4), 0, 0.0).is_err());
    }
}
