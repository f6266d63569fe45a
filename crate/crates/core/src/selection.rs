//! Relative mutual information scoring and mRMR feature selection.
//!
//! Continuous features are discretized into equal-frequency bins; all
//! entropies are in bits and estimated from empirical frequencies.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

const MODULE: &str = "selection";

pub const DEFAULT_BIN_COUNT: usize = 10;
pub const DEFAULT_SELECTED: usize = 20;

/// Bin assignment of one feature column. `bin_edges` holds the interior cut
/// points; a value lands in the bin equal to the number of cuts strictly
/// below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedFeature {
    pub bin_ids: Vec<usize>,
    pub bin_edges: Vec<f64>,
}

impl DiscretizedFeature {
    pub fn bin_count(&self) -> usize {
        self.bin_edges.len() + 1
    }

    pub fn len(&self) -> usize {
        self.bin_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_ids.is_empty()
    }

    /// Wraps already-discrete ids (e.g. class labels) without edges.
    pub fn from_ids(ids: Vec<usize>) -> Self {
        let bins = ids.iter().max().map_or(0, |m| *m);
        Self {
            bin_ids: ids,
            bin_edges: (0..bins).map(|b| b as f64 + 0.5).collect(),
        }
    }
}

/// Equal-frequency binning. Cuts sit at the empirical quantiles `i / bins`;
/// duplicate cuts merge and cuts at or above the maximum are dropped, so the
/// effective bin count can shrink (to one for a constant column).
pub fn discretize(values: &[f64], bin_count: usize) -> Result<DiscretizedFeature> {
    if values.is_empty() {
        return Err(Error::input(MODULE, "cannot discretize an empty column"));
    }
    if bin_count < 2 {
        return Err(Error::param(MODULE, format!("bin count must be at least 2, got {bin_count}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = sorted[sorted.len() - 1];
    let mut edges: Vec<f64> = Vec::with_capacity(bin_count - 1);
    for i in 1..bin_count {
        let cut = stats::quantile_sorted(&sorted, i as f64 / bin_count as f64);
        if cut < max && edges.last().is_none_or(|last| cut > *last) {
            edges.push(cut);
        }
    }
    let bin_ids = values
        .iter()
        .map(|v| edges.partition_point(|e| e < v))
        .collect();
    Ok(DiscretizedFeature {
        bin_ids,
        bin_edges: edges,
    })
}

/// Entropy in bits of a distribution given by counts. Counts are summed in
/// sorted order so the result does not depend on table orientation.
fn entropy_from_counts(mut counts: Vec<usize>) -> f64 {
    counts.retain(|c| *c > 0);
    counts.sort_unstable();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

pub fn entropy(ids: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for id in ids {
        *counts.entry(*id).or_default() += 1;
    }
    entropy_from_counts(counts.into_values().collect())
}

pub fn joint_entropy(a: &[usize], b: &[usize]) -> f64 {
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for pair in a.iter().zip(b) {
        *counts.entry((*pair.0, *pair.1)).or_default() += 1;
    }
    entropy_from_counts(counts.into_values().collect())
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::input(MODULE, format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

fn mi_ids(a: &[usize], b: &[usize]) -> f64 {
    (entropy(a) + entropy(b) - joint_entropy(a, b)).max(0.0)
}

/// Empirical mutual information in bits.
pub fn mutual_information(a: &DiscretizedFeature, b: &DiscretizedFeature) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    Ok(mi_ids(&a.bin_ids, &b.bin_ids))
}

/// `(H(C) - H(C|F)) / H(C)`, clamped to `[0, 1]`.
pub fn rmi(class_labels: &[usize], feature: &DiscretizedFeature) -> Result<f64> {
    check_lengths(class_labels.len(), feature.len())?;
    let hc = entropy(class_labels);
    if hc <= 0.0 {
        return Err(Error::SingleClass);
    }
    // H(C|F) = H(C,F) - H(F)
    let cond = joint_entropy(class_labels, &feature.bin_ids) - entropy(&feature.bin_ids);
    Ok(((hc - cond) / hc).clamp(0.0, 1.0))
}

/// Greedy mRMR ranking (difference criterion). The first pick maximizes
/// relevance `MI(f; C)`; later picks maximize relevance minus
/// `redundancy_weight` times the mean MI with already-picked features. Ties go
/// to the lower feature index.
pub fn mrmr_rank(
    features: &[DiscretizedFeature],
    class_labels: &[usize],
    redundancy_weight: f64,
) -> Result<Vec<usize>> {
    for f in features {
        check_lengths(f.len(), class_labels.len())?;
    }
    let relevance: Vec<f64> = features
        .iter()
        .map(|f| mi_ids(&f.bin_ids, class_labels))
        .collect();
    let n = features.len();
    let mut redundancy_sum = vec![0.0; n];
    let mut picked = vec![false; n];
    let mut ranking = Vec::with_capacity(n);
    for step in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|j| !picked[*j]) {
            let score = if step == 0 || redundancy_weight == 0.0 {
                relevance[j]
            } else {
                relevance[j] - redundancy_weight * redundancy_sum[j] / step as f64
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (chosen, _) = best.expect("unpicked feature remains");
        picked[chosen] = true;
        ranking.push(chosen);
        if redundancy_weight != 0.0 {
            for j in (0..n).filter(|j| !picked[*j]) {
                redundancy_sum[j] += mi_ids(&features[j].bin_ids, &features[chosen].bin_ids);
            }
        }
    }
    Ok(ranking)
}

/// Ranked features, their RMI scores and the selected prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Candidate feature names in original order.
    pub feature_names: Vec<String>,
    /// Feature names in mRMR order.
    pub ranked_features: Vec<String>,
    /// Original indices in mRMR order.
    pub ranking: Vec<usize>,
    /// RMI per feature, original order.
    pub rmi_scores: Vec<f64>,
    /// Selection flag per feature, original order.
    pub selected: Vec<bool>,
}

impl SelectionResult {
    /// Indices of the selected features in ascending order.
    pub fn selected_indices(&self) -> Vec<usize> {
        (0..self.selected.len()).filter(|i| self.selected[*i]).collect()
    }

    /// Picks the selected entries out of a full feature vector.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        self.selected_indices().iter().map(|i| values[*i]).collect()
    }
}

/// Discretizes each column, scores RMI and keeps the first `m` mRMR picks.
pub fn mrmr_select(
    names: &[String],
    features: &[DiscretizedFeature],
    class_labels: &[usize],
    m: usize,
) -> Result<SelectionResult> {
    if names.len() != features.len() {
        return Err(Error::input(MODULE, "one name per feature required"));
    }
    if m == 0 || m > features.len() {
        return Err(Error::param(
            MODULE,
            format!("cannot select {m} of {} features", features.len()),
        ));
    }
    let rmi_scores = features
        .iter()
        .map(|f| rmi(class_labels, f))
        .collect::<Result<Vec<_>>>()?;
    let ranking = mrmr_rank(features, class_labels, 1.0)?;
    let mut selected = vec![false; features.len()];
    for i in &ranking[..m] {
        selected[*i] = true;
    }
    Ok(SelectionResult {
        feature_names: names.to_vec(),
        ranked_features: ranking.iter().map(|i| names[*i].clone()).collect(),
        ranking,
        rmi_scores,
        selected,
    })
}

/// Column-wise discretization followed by [`mrmr_select`].
pub fn fit_selection(
    names: &[String],
    rows: &[Vec<f64>],
    class_labels: &[usize],
    bin_count: usize,
    m: usize,
) -> Result<SelectionResult> {
    if rows.is_empty() {
        return Err(Error::input(MODULE, "no rows to select features from"));
    }
    let features = (0..names.len())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            discretize(&col, bin_count)
        })
        .collect::<Result<Vec<_>>>()?;
    mrmr_select(names, &features, class_labels, m.min(names.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> DiscretizedFeature {
        DiscretizedFeature::from_ids(v.to_vec())
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(&[1.0, 2.0, 3.0, 4.0], 2).unwrap().bin_ids, vec![0, 0, 1, 1]);
        let c = discretize(&[5.0; 6], 4).unwrap();
        assert_eq!(c.bin_count(), 1);
        assert!(c.bin_ids.iter().all(|b| *b == 0));
        let t = discretize(&[1.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(t.bin_ids, vec![0, 0, 0, 1]);
        assert!(discretize(&[1.0], 1).is_err());
        assert!(discretize(&[], 2).is_err());
    }

    #[test]
    fn rmi_examples() {
        let c = [0, 0, 1, 1];
        assert_eq!(rmi(&c, &ids(&c)).unwrap(), 1.0);
        assert_eq!(rmi(&c, &ids(&[0, 1, 0, 1])).unwrap(), 0.0);

        // Joint counts (0,0)=4, (0,1)=1, (1,0)=1, (1,1)=4.
        let c = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let f = [0, 0, 0, 0, 1, 0, 1, 1, 1, 1];
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let expected = 1.0 - h(0.8);
        assert!((rmi(&c, &ids(&f)).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.2781).abs() < 1e-4);
        let mi = mutual_information(&ids(&c), &ids(&f)).unwrap();
        assert!((mi - expected).abs() < 1e-12);

        assert!(matches!(rmi(&[1, 1, 1], &ids(&[0, 1, 2])), Err(Error::SingleClass)));
    }

    #[test]
    fn self_information() {
        let a = ids(&[0, 1, 2, 2, 1, 0, 0]);
        let mi = mutual_information(&a, &a).unwrap();
        assert!((mi - entropy(&a.bin_ids)).abs() < 1e-12);
    }

    #[test]
    fn mrmr_rejects_duplicate() {
        let class = [0, 0, 0, 0, 1, 1, 1, 1];
        let perfect = ids(&[0, 0, 1, 1, 2, 2, 3, 3]);
        let weak = ids(&[0, 1, 0, 1, 0, 1, 0, 1]);
        let feats = vec![perfect.clone(), perfect, weak];
        // Scores after picking feature 0 (relevance 1 bit, H(F) = 2 bits):
        // duplicate: 1 - 2 = -1, independent weak feature: 0 - 0 = 0.
        let names: Vec<String> = ["p1", "p2", "w"].iter().map(|s| s.to_string()).collect();
        let r = mrmr_select(&names, &feats, &class, 2).unwrap();
        assert_eq!(r.ranking, vec![0, 2, 1]);
        assert_eq!(r.selected, vec![true, false, true]);
        assert_eq!(r.ranked_features, vec!["p1", "w", "p2"]);

        let all = mrmr_select(&names, &feats, &class, 3).unwrap();
        assert!(all.selected.iter().all(|s| *s));
        let one = mrmr_select(&names[..1], &feats[..1], &class, 1).unwrap();
        assert_eq!(one.ranking, vec![0]);
    }
}
