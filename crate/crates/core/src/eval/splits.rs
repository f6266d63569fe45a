//! Train/test fold plans and integer-factor downsampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{SegmentWindow, VoltageTrace};

const MODULE: &str = "eval";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    RandomWindow,
    ByTrace,
    ByUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Held-out group id for grouped plans.
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub grouping: Grouping,
}

impl SplitPlan {
    /// Checks that every fold is a disjoint partition of `0..n` and, when
    /// `keys` is given, that no key appears on both sides of a fold.
    pub fn validate(&self, n: usize, keys: Option<&[&str]>) -> Result<()> {
        for (f, fold) in self.folds.iter().enumerate() {
            let mut seen = vec![false; n];
            for &i in fold.train.iter().chain(&fold.test) {
                if i >= n || seen[i] {
                    return Err(Error::input(
                        MODULE,
                        format!("fold {f}: window {i} out of range or repeated"),
                    ));
                }
                seen[i] = true;
            }
            if let Some(keys) = keys {
                let train: BTreeSet<&str> = fold.train.iter().map(|&i| keys[i]).collect();
                if let Some(&i) = fold.test.iter().find(|&&i| train.contains(keys[i])) {
                    return Err(Error::input(
                        MODULE,
                        format!("fold {f}: group {} on both sides", keys[i]),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i] = true;
    }
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// Seeded shuffle split into `k` folds whose sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::param(MODULE, format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::param(MODULE, format!("k = {k} exceeds window count {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let end = start + base + usize::from(f < extra);
        let mut test = order[start..end].to_vec();
        test.sort_unstable();
        folds.push(Fold {
            train: complement(n, &test),
            test,
            group: None,
        });
        start = end;
    }
    Ok(SplitPlan {
        folds,
        grouping: Grouping::RandomWindow,
    })
}

/// One fold per distinct key, in sorted key order.
pub fn grouped_by_keys(keys: &[&str], grouping: Grouping) -> Result<SplitPlan> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::input(
            MODULE,
            format!("grouped split needs at least 2 groups, found {}", groups.len()),
        ));
    }
    let folds = groups
        .into_iter()
        .map(|(g, test)| Fold {
            train: complement(keys.len(), &test),
            test,
            group: Some(g.to_string()),
        })
        .collect();
    Ok(SplitPlan { folds, grouping })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Trace,
    User,
}

pub fn group_keys(windows: &[SegmentWindow], key: GroupKey) -> Vec<&str> {
    windows
        .iter()
        .map(|w| match key {
            GroupKey::Trace => w.meta.trace_id.as_str(),
            GroupKey::User => w.meta.user_id.as_str(),
        })
        .collect()
}

pub fn grouped_splits(windows: &[SegmentWindow], key: GroupKey) -> Result<SplitPlan> {
    let grouping = match key {
        GroupKey::Trace => Grouping::ByTrace,
        GroupKey::User => Grouping::ByUser,
    };
    grouped_by_keys(&group_keys(windows, key), grouping)
}

/// Keeps every `factor`-th sample starting with the first.
pub fn downsample(trace: &VoltageTrace, factor: usize) -> Result<VoltageTrace> {
    if factor == 0 {
        return Err(Error::param(MODULE, "downsample factor must be at least 1"));
    }
    VoltageTrace::new(
        trace.samples.iter().step_by(factor).copied().collect(),
        trace.sampling_rate_hz / factor as f64,
        trace.meta.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::TraceMeta;

    #[test]
    fn kfold_singletons() {
        let plan = kfold(10, 10, 3).unwrap();
        assert_eq!(plan.folds.len(), 10);
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        assert!(plan.folds.iter().all(|f| f.test.len() == 1 && f.train.len() == 9));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        plan.validate(10, None).unwrap();
    }

    #[test]
    fn kfold_sizes_and_determinism() {
        let plan = kfold(23, 4, 11).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![6, 6, 6, 5]);
        assert_eq!(plan, kfold(23, 4, 11).unwrap());
        assert_ne!(plan, kfold(23, 4, 12).unwrap());
    }

    #[test]
    fn kfold_rejects_bad_k() {
        assert_eq!(kfold(5, 6, 0).unwrap_err().kind(), "invalid_parameter");
        assert_eq!(kfold(5, 1, 0).unwrap_err().kind(), "invalid_parameter");
    }

    #[test]
    fn grouped_plan_has_no_leak() {
        let keys = ["u2", "u1", "u2", "u3", "u1"];
        let plan = grouped_by_keys(&keys, Grouping::ByUser).unwrap();
        assert_eq!(plan.folds.len(), 3);
        assert_eq!(plan.folds[0].test, vec![1, 4]);
        assert_eq!(plan.folds[0].group.as_deref(), Some("u1"));
        plan.validate(5, Some(&keys)).unwrap();
        assert_eq!(
            grouped_by_keys(&["a", "a"], Grouping::ByTrace).unwrap_err().kind(),
            "invalid_input"
        );
    }

    #[test]
    fn downsample_lengths_and_rate() {
        let t = VoltageTrace::new((0..10).map(f64::from).collect(), 100.0, TraceMeta::default())
            .unwrap();
        assert_eq!(downsample(&t, 1).unwrap(), t);
        let d = downsample(&t, 4).unwrap();
        assert_eq!(d.samples, vec![0.0, 4.0, 8.0]);
        assert_eq!(d.sampling_rate_hz, 25.0);
        let twice = downsample(&downsample(&t, 2).unwrap(), 3).unwrap();
        assert_eq!(twice, downsample(&t, 6).unwrap());
    }
}
