//! Sparse representation classifier.
//!
//! Training z-scores the feature vectors, learns one K-SVD dictionary per
//! class and stacks them. A test vector is coded against the stacked
//! dictionary by basis pursuit denoising; the class whose atoms alone give
//! the smallest reconstruction residual wins.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::Mode;
use crate::sparse::{
    bpdn_solve, ksvd_train, normalize_columns, BpdnConfig, ClassDictionary, KsvdConfig, KsvdInit,
    SparseCode, StackedDictionary,
};

const MODULE: &str = "classifier";

/// Where the stacked dictionary's atoms come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionarySource {
    /// Per-class K-SVD dictionaries.
    #[default]
    Learned,
    /// The normalized training vectors themselves.
    RawTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SrcConfig {
    pub atoms_per_class: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub epsilon: f64,
    pub normalize: bool,
    pub dictionary: DictionarySource,
    pub init: KsvdInit,
    pub bpdn: BpdnConfig,
}

impl Default for SrcConfig {
    fn default() -> Self {
        Self {
            atoms_per_class: 50,
            sparsity: 5,
            iterations: 30,
            epsilon: 1e-3,
            normalize: true,
            dictionary: DictionarySource::Learned,
            init: KsvdInit::FirstColumns,
            bpdn: BpdnConfig::default(),
        }
    }
}

impl SrcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.atoms_per_class == 0 || self.sparsity == 0 {
            return Err(Error::param(MODULE, "atom count and sparsity must be positive"));
        }
        if self.sparsity > self.atoms_per_class {
            return Err(Error::param(MODULE, "sparsity cannot exceed the atom count"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param(MODULE, "epsilon must be positive"));
        }
        Ok(())
    }
}

/// Per-feature location and scale from the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub location: f64,
    pub scale: f64,
}

/// Trained classifier. `kept_features` indexes into the input vector;
/// zero-variance inputs are dropped at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrcModel {
    pub class_list: Vec<Mode>,
    pub input_dim: usize,
    pub kept_features: Vec<usize>,
    pub dropped_features: Vec<usize>,
    pub normalization: Vec<FeatureScale>,
    pub stacked: StackedDictionary,
    pub epsilon: f64,
    pub bpdn: BpdnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub predicted: Mode,
    /// One residual per entry of the model's class list.
    pub residuals: Vec<f64>,
    pub code: SparseCode,
    pub low_confidence: bool,
}

/// Warnings raised while training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainNotes {
    pub warnings: Vec<String>,
}

impl TrainNotes {
    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

/// Trains an SRC model from feature vectors grouped by class. Class order in
/// `features_by_class` becomes the model's class list.
pub fn train(
    features_by_class: &[(Mode, Vec<Vec<f64>>)],
    config: &SrcConfig,
) -> Result<(SrcModel, TrainNotes)> {
    config.validate()?;
    if features_by_class.len() < 2 {
        return Err(Error::input(MODULE, "training needs at least two classes"));
    }
    let mut seen = Vec::new();
    for (mode, rows) in features_by_class {
        if seen.contains(mode) {
            return Err(Error::input(MODULE, format!("class {mode} listed twice")));
        }
        seen.push(*mode);
        if rows.is_empty() {
            return Err(Error::input(MODULE, format!("class {mode} has no training vectors")));
        }
    }
    let dim = features_by_class[0].1[0].len();
    if dim == 0 {
        return Err(Error::input(MODULE, "feature vectors are empty"));
    }
    let all: Vec<&Vec<f64>> = features_by_class.iter().flat_map(|(_, r)| r).collect();
    if all.iter().any(|r| r.len() != dim) {
        return Err(Error::input(MODULE, "feature vectors differ in length"));
    }

    let mut notes = TrainNotes::default();
    let n = all.len() as f64;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut normalization = Vec::new();
    for j in 0..dim {
        let mean = all.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = all.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1e-300) || sd == 0.0 {
            dropped.push(j);
            continue;
        }
        kept.push(j);
        normalization.push(if config.normalize {
            FeatureScale {
                location: mean,
                scale: sd,
            }
        } else {
            FeatureScale {
                location: 0.0,
                scale: 1.0,
            }
        });
    }
    if !dropped.is_empty() {
        notes.warn(format!("dropped zero-variance features {dropped:?}"));
    }
    if kept.is_empty() {
        return Err(Error::input(MODULE, "every feature has zero variance"));
    }
    let m = kept.len();

    let mut parts = Vec::with_capacity(features_by_class.len());
    for (mode, rows) in features_by_class {
        let columns: Vec<f64> = rows
            .iter()
            .flat_map(|r| transform(r, &kept, &normalization))
            .collect();
        let training = DMatrix::from_column_slice(m, rows.len(), &columns);
        let atoms = match config.dictionary {
            DictionarySource::Learned => {
                let mut k = config.atoms_per_class;
                if rows.len() < k {
                    notes.warn(format!(
                        "class {mode}: {} vectors for {k} atoms, shrinking to {}",
                        rows.len(),
                        rows.len()
                    ));
                    k = rows.len();
                }
                let cfg = KsvdConfig {
                    atoms: k,
                    sparsity: config.sparsity.min(k).min(m),
                    iterations: config.iterations,
                    init: config.init,
                };
                ksvd_train(&training, &cfg)
                    .map_err(|e| Error::input(MODULE, format!("class {mode}: {e}")))?
                    .atoms
            }
            DictionarySource::RawTraining => {
                let keep: Vec<usize> = (0..training.ncols())
                    .filter(|j| training.column(*j).norm() > 0.0)
                    .collect();
                if keep.is_empty() {
                    return Err(Error::input(MODULE, format!("class {mode}: all vectors are zero")));
                }
                training.select_columns(&keep)
            }
        };
        parts.push(ClassDictionary {
            atoms,
            class_id: *mode,
        });
    }
    let mut stacked = StackedDictionary::stack(&parts)?;
    normalize_columns(&mut stacked.atoms);

    Ok((
        SrcModel {
            class_list: features_by_class.iter().map(|(m, _)| *m).collect(),
            input_dim: dim,
            kept_features: kept,
            dropped_features: dropped,
            normalization,
            stacked,
            epsilon: config.epsilon,
            bpdn: config.bpdn,
        },
        notes,
    ))
}

fn transform(values: &[f64], kept: &[usize], scales: &[FeatureScale]) -> Vec<f64> {
    kept.iter()
        .zip(scales)
        .map(|(j, s)| (values[*j] - s.location) / s.scale)
        .collect()
}

impl SrcModel {
    /// Normalized, reduced form of an input vector.
    pub fn prepare(&self, values: &[f64]) -> Result<DVector<f64>> {
        if values.len() != self.input_dim {
            return Err(Error::input(
                MODULE,
                format!("expected {} features, got {}", self.input_dim, values.len()),
            ));
        }
        Ok(DVector::from_vec(transform(
            values,
            &self.kept_features,
            &self.normalization,
        )))
    }

    /// `||y - A δ_i(x)||` for each class, where `δ_i` zeroes coefficients
    /// outside class `i`.
    pub fn class_residuals(&self, y: &DVector<f64>, code: &SparseCode) -> Vec<f64> {
        self.stacked
            .class_ranges
            .iter()
            .map(|range| {
                let mut recon = DVector::zeros(y.len());
                for j in code.support.iter().filter(|j| range.contains(**j)) {
                    recon.axpy(code.coefficients[*j], &self.stacked.atoms.column(*j), 1.0);
                }
                (y - recon).norm()
            })
            .collect()
    }
}

/// Index of the smallest value; ties go to the earliest.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Classifies one feature vector. Solver non-convergence yields
/// [`Error::LowConfidence`] carrying the result computed from the last iterate.
pub fn classify(model: &SrcModel, values: &[f64]) -> Result<ClassificationResult> {
    let y = model.prepare(values)?;
    let (code, converged) = match bpdn_solve(&model.stacked.atoms, &y, model.epsilon, &model.bpdn) {
        Ok(sol) => (sol.code, true),
        Err(Error::NotConverged { last, .. }) => (*last, false),
        Err(e) => return Err(e),
    };
    let residuals = model.class_residuals(&y, &code);
    let result = ClassificationResult {
        predicted: model.class_list[argmin_first(&residuals)],
        residuals,
        code,
        low_confidence: !converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::LowConfidence(Box::new(result)))
    }
}

/// Like [`classify`], but returns low-confidence results as values.
pub fn classify_lenient(model: &SrcModel, values: &[f64]) -> Result<ClassificationResult> {
    match classify(model, values) {
        Err(Error::LowConfidence(r)) => Ok(*r),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_config() -> SrcConfig {
        SrcConfig {
            atoms_per_class: 1,
            sparsity: 1,
            normalize: false,
            ..SrcConfig::default()
        }
    }

    #[test]
    fn one_vector_per_class_becomes_the_atom() {
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 0.6, 0.8];
        let (model, _) = train(
            &[(Mode::Car, vec![e1.clone()]), (Mode::Bus, vec![e2.clone()])],
            &raw_config(),
        )
        .unwrap();
        assert_eq!(model.stacked.atoms.ncols(), 2);
        let a0: Vec<f64> = model.stacked.atoms.column(0).iter().copied().collect();
        let a1: Vec<f64> = model.stacked.atoms.column(1).iter().copied().collect();
        for (x, y) in a0.iter().zip(&e1) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-12);
        }
        let r = classify(&model, &e2).unwrap();
        assert_eq!(r.predicted, Mode::Bus);
        assert!(r.residuals[1] < 2e-3);
    }

    #[test]
    fn tie_goes_to_earliest_class() {
        let v = vec![0.0, 1.0];
        let (model, _) = train(
            &[
                (Mode::Ferry, vec![v.clone()]),
                (Mode::Train, vec![v.clone()]),
                (Mode::Car, vec![vec![1.0, 0.0]]),
            ],
            &raw_config(),
        )
        .unwrap();
        // Both classes hold the identical atom.
        let r = classify(&model, &v).unwrap();
        assert_eq!(r.predicted, Mode::Ferry);
        assert_eq!(argmin_first(&[1.0, 1.0, 0.5, 0.5]), 2);
    }

    #[test]
    fn training_errors() {
        assert!(train(&[(Mode::Car, vec![vec![1.0]])], &raw_config()).is_err());
        assert!(train(&[(Mode::Car, vec![vec![1.0]]), (Mode::Bus, vec![])], &raw_config()).is_err());
        assert!(train(
            &[(Mode::Car, vec![vec![1.0]]), (Mode::Bus, vec![vec![1.0, 2.0]])],
            &raw_config()
        )
        .is_err());
    }

    #[test]
    fn zero_variance_feature_is_dropped_and_k_shrinks() {
        let car = vec![vec![1.0, 5.0, 0.1], vec![2.0, 5.0, 0.3]];
        let bus = vec![vec![-1.0, 5.0, 0.2]];
        let (model, notes) = train(
            &[(Mode::Car, car), (Mode::Bus, bus)],
            &SrcConfig {
                atoms_per_class: 2,
                sparsity: 1,
                ..SrcConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.dropped_features, vec![1]);
        assert_eq!(model.kept_features, vec![0, 2]);
        assert_eq!(model.stacked.class_ranges[1].len(), 1);
        assert_eq!(notes.warnings.len(), 2);
        assert!(classify(&model, &[1.0]).is_err());
    }
}
