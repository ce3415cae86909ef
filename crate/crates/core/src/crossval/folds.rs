use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VadError};
use crate::training::derive_seed;

/// Outer and inner fold assignments over item indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
    /// Outer fold of each item.
    pub outer: Vec<usize>,
    /// `inner[o][item]`: inner fold of `item` within outer fold `o`, or
    /// `None` when the item is in outer fold `o`'s test set.
    pub inner: Vec<Vec<Option<usize>>>,
}

fn round_robin(items: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut perm = items.to_vec();
    perm.shuffle(rng);
    perm.into_iter()
        .enumerate()
        .map(|(j, item)| (item, j % k))
        .collect()
}

/// Seeded shuffle then round-robin assignment. With `k_inner ==
/// k_outer - 1` the inner folds are the remaining outer folds.
pub fn make_folds(n_items: usize, k_outer: usize, k_inner: usize, seed: u64) -> Result<FoldPlan> {
    if k_outer < 2 || k_inner < 2 || n_items < k_outer {
        return Err(VadError::Argument(format!(
            "need n_items ≥ k_outer ≥ 2 and k_inner ≥ 2 (got n={n_items}, k_outer={k_outer}, k_inner={k_inner})"
        )));
    }
    let all: Vec<usize> = (0..n_items).collect();
    let mut outer = vec![0; n_items];
    for (item, f) in round_robin(
        &all,
        k_outer,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0])),
    ) {
        outer[item] = f;
    }
    let mut inner = Vec::with_capacity(k_outer);
    for o in 0..k_outer {
        let mut row = vec![None; n_items];
        let train: Vec<usize> = all.iter().copied().filter(|&i| outer[i] != o).collect();
        if k_inner == k_outer - 1 {
            for &i in &train {
                row[i] = Some(if outer[i] > o { outer[i] - 1 } else { outer[i] });
            }
        } else {
            if train.len() < k_inner {
                return Err(VadError::Argument(format!(
                    "outer fold {o} leaves {} training items for {k_inner} inner folds",
                    train.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, o as u64]));
            for (item, f) in round_robin(&train, k_inner, &mut rng) {
                row[item] = Some(f);
            }
        }
        inner.push(row);
    }
    let plan = FoldPlan {
        k_outer,
        k_inner,
        seed,
        outer,
        inner,
    };
    plan.validate()?;
    Ok(plan)
}

impl FoldPlan {
    pub fn n_items(&self) -> usize {
        self.outer.len()
    }

    pub fn outer_test(&self, o: usize) -> Vec<usize> {
        (0..self.n_items())
            .filter(|&i| self.outer[i] == o)
            .collect()
    }

    pub fn outer_train(&self, o: usize) -> Vec<usize> {
        (0..self.n_items())
            .filter(|&i| self.outer[i] != o)
            .collect()
    }

    /// `(inner_train, inner_val)` item indices for inner fold `i` of outer fold `o`.
    pub fn inner_split(&self, o: usize, i: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (item, f) in self.inner[o].iter().enumerate() {
            match f {
                Some(f) if *f == i => val.push(item),
                Some(_) => train.push(item),
                None => {}
            }
        }
        (train, val)
    }

    /// Checks the partition and leakage invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_items();
        if self.outer.iter().any(|&f| f >= self.k_outer) || self.inner.len() != self.k_outer {
            return Err(VadError::Leakage(
                "fold plan has out-of-range outer assignments".into(),
            ));
        }
        let sizes: Vec<usize> = (0..self.k_outer)
            .map(|o| self.outer_test(o).len())
            .collect();
        if sizes.iter().max().unwrap_or(&0) - sizes.iter().min().unwrap_or(&0) > 1 {
            return Err(VadError::Leakage(format!(
                "outer fold sizes {sizes:?} differ by more than one"
            )));
        }
        for o in 0..self.k_outer {
            let row = &self.inner[o];
            if row.len() != n {
                return Err(VadError::Leakage(format!(
                    "outer fold {o} inner row has wrong length"
                )));
            }
            for (item, slot) in row.iter().enumerate() {
                let is_test = self.outer[item] == o;
                match *slot {
                    Some(_) if is_test => {
                        return Err(VadError::Leakage(format!(
                            "item {item} is in outer-test fold {o} and in one of its inner splits"
                        )))
                    }
                    None if !is_test => {
                        return Err(VadError::Leakage(format!(
                            "outer-train item {item} of fold {o} has no inner fold"
                        )))
                    }
                    Some(f) if f >= self.k_inner => {
                        return Err(VadError::Leakage(format!(
                            "item {item} has inner fold {f} ≥ k_inner"
                        )))
                    }
                    _ => {}
                }
            }
            for i in 0..self.k_inner {
                if self.inner_split(o, i).1.is_empty() {
                    return Err(VadError::Leakage(format!(
                        "inner fold {i} of outer fold {o} is empty"
                    )));
                }
            }
        }
        Ok(())
    }
}
