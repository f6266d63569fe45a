//! Basis pursuit denoising by lasso homotopy.
//!
//! The lasso solution `x(λ) = argmin ½||y - Ax||² + λ||x||_1` is piecewise
//! linear in λ and its residual norm shrinks as λ decreases. Walking the path
//! from `λ = ||Aᵀy||_∞` (where `x = 0`) and stopping inside the segment where
//! `||y - Ax(λ)|| = ε` gives the BPDN minimizer. At that point `r / λ` is a
//! dual certificate, and the duality gap
//! `||x||_1 - (yᵀz - ε||z||)` with `z = r / max(λ, ||Aᵀr||_∞)` bounds the
//! suboptimality.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{SparseCode, SUPPORT_EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpdnConfig {
    /// Maximum number of homotopy breakpoints.
    pub max_iter: usize,
    /// Tolerance on the duality gap relative to `max(1, ||x||_1)`.
    pub conv_tol: f64,
}

impl Default for BpdnConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            conv_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub code: SparseCode,
    pub residual_norm: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

struct Path<'a> {
    a: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    x: DVector<f64>,
    active: Vec<usize>,
    signs: Vec<f64>,
    lambda: f64,
}

impl Path<'_> {
    fn residual(&self) -> DVector<f64> {
        self.y - self.a * &self.x
    }

    fn gram_cholesky(&self) -> Option<Cholesky<f64, Dyn>> {
        let sub = self.a.select_columns(&self.active);
        let g = sub.tr_mul(&sub);
        let chol = Cholesky::new(g)?;
        let l = chol.l_dirty();
        let min_diag = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        (min_diag > 1e-7).then_some(chol)
    }

    fn certificate(&self, epsilon: f64) -> (f64, f64) {
        let r = self.residual();
        let corr = self.a.tr_mul(&r).amax();
        let scale = self.lambda.max(corr);
        let l1 = self.x.lp_norm(1);
        if scale <= 0.0 {
            return (l1, if l1 == 0.0 { 0.0 } else { l1 });
        }
        let z = &r / scale;
        let dual = self.y.dot(&z) - epsilon * z.norm();
        (l1, l1 - dual)
    }
}

/// Solves `min ||x||_1 s.t. ||y - Ax||_2 <= epsilon`.
pub fn bpdn_solve(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    epsilon: f64,
    config: &BpdnConfig,
) -> Result<BpdnSolution> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::input(
            "sparse",
            format!("signal length {} does not match dictionary rows {m}", y.len()),
        ));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::param("sparse", format!("epsilon must be positive, got {epsilon}")));
    }
    if y.norm() <= epsilon || n == 0 {
        let code = SparseCode::zeros(n);
        let residual_norm = y.norm();
        if residual_norm <= epsilon {
            return Ok(BpdnSolution {
                code,
                residual_norm,
                duality_gap: 0.0,
                iterations: 0,
            });
        }
        return Err(not_converged(code, 0, f64::INFINITY, residual_norm));
    }

    let corr = a.tr_mul(y);
    let (first, lambda) = argmax_abs(&corr);
    let mut path = Path {
        a,
        y,
        x: DVector::zeros(n),
        active: vec![first],
        signs: vec![corr[first].signum()],
        lambda,
    };
    let mut excluded = vec![false; n];
    let mut last_dropped: Option<usize> = None;

    for iter in 1..=config.max_iter {
        let Some(chol) = path.gram_cholesky() else {
            // Newest atom is (numerically) dependent on the others.
            let j = path.active.pop().expect("active set non-empty");
            path.signs.pop();
            excluded[j] = true;
            if path.active.is_empty() {
                break;
            }
            continue;
        };
        let d = chol.solve(&DVector::from_column_slice(&path.signs));
        let u = path.a.select_columns(&path.active) * &d;
        let v = path.a.tr_mul(&u);
        let r = path.residual();
        let c = path.a.tr_mul(&r);

        let mut gamma = path.lambda;
        let mut event = Event::End;
        if path.active.len() < m {
            for j in 0..n {
                if excluded[j] || path.active.contains(&j) || Some(j) == last_dropped {
                    continue;
                }
                for (num, den) in [(path.lambda - c[j], 1.0 - v[j]), (path.lambda + c[j], 1.0 + v[j])] {
                    if den <= 1e-12 {
                        continue;
                    }
                    let g = (num / den).max(0.0);
                    if g < gamma {
                        gamma = g;
                        event = Event::Add(j);
                    }
                }
            }
        }
        for (k, j) in path.active.iter().enumerate() {
            if d[k] == 0.0 {
                continue;
            }
            let g = -path.x[*j] / d[k];
            if g > 0.0 && g < gamma {
                gamma = g;
                event = Event::Drop(k);
            }
        }

        // Does the residual reach epsilon inside this segment?
        let uu = u.norm_squared();
        let ru = r.dot(&u);
        let rr = r.norm_squared();
        let at_end = rr - 2.0 * gamma * ru + gamma * gamma * uu;
        if at_end <= epsilon * epsilon {
            let cq = rr - epsilon * epsilon;
            let disc = (ru * ru - uu * cq).max(0.0);
            // Smaller root of uu g² - 2 ru g + cq = 0, written stably.
            let g = if cq <= 0.0 { 0.0 } else { cq / (ru + disc.sqrt()) };
            let g = g.clamp(0.0, gamma);
            advance(&mut path, &d, g);
            return finish(path, epsilon, iter, config);
        }

        advance(&mut path, &d, gamma);
        last_dropped = None;
        match event {
            Event::Add(j) => {
                let cj = c[j] - gamma * v[j];
                path.active.push(j);
                path.signs.push(cj.signum());
            }
            Event::Drop(k) => {
                let j = path.active.remove(k);
                path.signs.remove(k);
                path.x[j] = 0.0;
                last_dropped = Some(j);
            }
            Event::End => {
                // Reached λ = 0 without meeting the constraint: infeasible.
                let code = SparseCode::from_coefficients(path.x.as_slice().to_vec(), SUPPORT_EPS);
                let res = path.residual().norm();
                return Err(not_converged(code, iter, f64::INFINITY, res));
            }
        }
    }

    let (_, gap) = path.certificate(epsilon);
    let res = path.residual().norm();
    let code = SparseCode::from_coefficients(path.x.as_slice().to_vec(), SUPPORT_EPS);
    Err(not_converged(code, config.max_iter, gap, res))
}

enum Event {
    Add(usize),
    Drop(usize),
    End,
}

fn advance(path: &mut Path<'_>, d: &DVector<f64>, gamma: f64) {
    for (k, j) in path.active.iter().enumerate() {
        path.x[*j] += gamma * d[k];
    }
    path.lambda -= gamma;
}

fn finish(
    path: Path<'_>,
    epsilon: f64,
    iterations: usize,
    config: &BpdnConfig,
) -> Result<BpdnSolution> {
    let (l1, gap) = path.certificate(epsilon);
    let residual_norm = path.residual().norm();
    let code = SparseCode::from_coefficients(path.x.as_slice().to_vec(), SUPPORT_EPS);
    if residual_norm <= epsilon + 1e-6 && gap <= config.conv_tol * l1.max(1.0) {
        Ok(BpdnSolution {
            code,
            residual_norm,
            duality_gap: gap,
            iterations,
        })
    } else {
        Err(not_converged(code, iterations, gap, residual_norm))
    }
}

fn argmax_abs(v: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, v[0].abs());
    for (j, c) in v.iter().enumerate().skip(1) {
        if c.abs() > best.1 {
            best = (j, c.abs());
        }
    }
    best
}

fn not_converged(last: SparseCode, iterations: usize, gap: f64, residual: f64) -> Error {
    Error::NotConverged {
        iterations,
        gap,
        residual,
        last: Box::new(last),
    }
}
