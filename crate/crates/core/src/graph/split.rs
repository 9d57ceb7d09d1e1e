use rand::seq::SliceRandom;

use super::NodeId;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Partial node labelling with `n_classes` classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<Option<u32>>,
    n_classes: usize,
}

impl LabelSet {
    pub fn new(labels: Vec<Option<u32>>, n_classes: usize) -> Result<Self> {
        if labels.iter().all(Option::is_none) {
            return Err(Error::Config("label set is empty".into()));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&c| c as usize >= n_classes) {
            return Err(Error::Config(format!(
                "class id {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(LabelSet { labels, n_classes })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, v: NodeId) -> Option<u32> {
        self.labels[v]
    }

    /// Labeled node ids in ascending order.
    pub fn labeled(&self) -> Vec<NodeId> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(v, l)| l.map(|_| v))
            .collect()
    }

    pub fn select(&self, keep: &[NodeId]) -> LabelSet {
        LabelSet {
            labels: keep.iter().map(|&v| self.labels[v]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn as_slice(&self) -> &[Option<u32>] {
        &self.labels
    }
}

/// Disjoint train/validation/test node sets, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
    pub seed: u64,
}

/// Uniform random partition of the labeled nodes, deterministic per seed.
/// The test set receives every labeled node not drawn for train or val.
pub fn make_splits(labels: &LabelSet, train_ratio: f64, val_ratio: f64, seed: u64) -> Result<Split> {
    if !(train_ratio > 0.0 && val_ratio > 0.0 && train_ratio + val_ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratios must be positive with sum < 1 (got {train_ratio}, {val_ratio})"
        )));
    }
    let mut nodes = labels.labeled();
    let n = nodes.len();
    let n_train = (train_ratio * n as f64).round() as usize;
    let n_val = (val_ratio * n as f64).round() as usize;
    if n_train == 0 || n_train + n_val >= n {
        return Err(Error::Config(format!(
            "ratios {train_ratio}/{val_ratio} leave an empty set over {n} labeled nodes"
        )));
    }
    nodes.shuffle(&mut rng::stream(seed, Stream::Split));
    let mut train = nodes[..n_train].to_vec();
    let mut val = nodes[n_train..n_train + n_val].to_vec();
    let mut test = nodes[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        val,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_labeled(n: usize) -> LabelSet {
        LabelSet::new((0..n).map(|v| Some((v % 3) as u32)).collect(), 3).unwrap()
    }

    #[test]
    fn sizes_follow_ratios() {
        let s = make_splits(&all_labeled(100), 0.4, 0.1, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (40, 10, 50));
    }

    #[test]
    fn same_seed_same_split() {
        let l = all_labeled(60);
        assert_eq!(make_splits(&l, 0.4, 0.1, 9).unwrap(), make_splits(&l, 0.4, 0.1, 9).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        let l = all_labeled(50);
        let a = make_splits(&l, 0.4, 0.1, 1).unwrap();
        let b = make_splits(&l, 0.4, 0.1, 2).unwrap();
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn bad_ratios_rejected() {
        let l = all_labeled(10);
        assert!(make_splits(&l, 0.0, 0.1, 0).is_err());
        assert!(make_splits(&l, 0.6, 0.5, 0).is_err());
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(vec![None, None], 2).is_err());
        assert!(LabelSet::new(vec![Some(2)], 2).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_labeled_nodes(n in 20usize..200, seed in any::<u64>(), tr in 0.1f64..0.5) {
            let labels = LabelSet::new(
                (0..n).map(|v| if v % 4 == 3 { None } else { Some(0) }).collect(), 1).unwrap();
            let s = make_splits(&labels, tr, 0.1, seed).unwrap();
            let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            let before = all.len();
            all.dedup();
            prop_assert_eq!(before, all.len());
            prop_assert_eq!(all, labels.labeled());
        }
    }
}
