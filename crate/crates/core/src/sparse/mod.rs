//! Sparse coding and dictionary learning.
//!
//! * [`omp`]: orthogonal matching pursuit.
//! * [`ksvd_train`]: K-SVD dictionary learning with OMP coding.
//! * [`bpdn_solve`]: `min ||x||_1 s.t. ||y - Ax||_2 <= eps`, solved exactly by
//!   following the lasso homotopy path until the residual reaches `eps`.

mod bpdn;
mod dictionary;
mod ksvd;
mod omp;

pub use bpdn::{bpdn_solve, BpdnConfig, BpdnSolution};
pub use dictionary::{ClassDictionary, ClassRange, StackedDictionary};
pub use ksvd::{ksvd_train, KsvdConfig, KsvdInit, KsvdOutput, StageErrors};
pub use omp::{omp, OmpResult};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Coefficients below this magnitude are reported as exact zeros.
pub const SUPPORT_EPS: f64 = 1e-8;

/// Coefficient vector with its nonzero index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCode {
    pub coefficients: Vec<f64>,
    pub support: Vec<usize>,
}

impl SparseCode {
    pub fn zeros(n: usize) -> Self {
        Self {
            coefficients: vec![0.0; n],
            support: Vec::new(),
        }
    }

    /// Builds a code from raw coefficients, zeroing entries below `truncate`.
    pub fn from_coefficients(mut coefficients: Vec<f64>, truncate: f64) -> Self {
        for c in coefficients.iter_mut() {
            if c.abs() < truncate {
                *c = 0.0;
            }
        }
        let support = (0..coefficients.len())
            .filter(|i| coefficients[*i] != 0.0)
            .collect();
        Self {
            coefficients,
            support,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }
}

/// Scales every column to unit Euclidean norm. Returns the indices of columns
/// that were zero (left untouched).
pub fn normalize_columns(m: &mut DMatrix<f64>) -> Vec<usize> {
    let mut zero = Vec::new();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else {
            zero.push(j);
        }
    }
    zero
}
