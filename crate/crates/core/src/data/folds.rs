use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Assignment of example indices to `k` disjoint folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// `assignment[i]` is the fold holding example `i`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Indices held out in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    /// Indices of every other fold, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` with the fold stream of `seed` and deals the shuffled
/// order round-robin into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Config(format!(
            "cannot split {n} examples into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Folds));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_into_ten_is_singletons() {
        let plan = kfold_split(10, 10, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn full_dataset_size_splits_evenly() {
        let plan = kfold_split(2022 + 2888, 10, 42).unwrap();
        assert_eq!(plan.fold_sizes(), vec![491; 10]);
    }

    #[test]
    fn too_few_examples_is_an_error() {
        assert!(kfold_split(9, 10, 0).is_err());
    }

    #[test]
    fn same_seed_same_plan() {
        assert_eq!(kfold_split(57, 10, 3).unwrap(), kfold_split(57, 10, 3).unwrap());
        assert_ne!(kfold_split(57, 10, 3).unwrap(), kfold_split(57, 10, 4).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_the_indices(n in 10usize..300, k in 2usize..11, seed in any::<u64>()) {
            let plan = kfold_split(n, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut seen = vec![0; n];
            for f in 0..k {
                let test = plan.test_indices(f);
                let train = plan.train_indices(f);
                prop_assert_eq!(test.len() + train.len(), n);
                prop_assert!(test.iter().all(|i| !train.contains(i)));
                for i in test {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
