use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `K` unit folds and the `K(K+1)/2` pair blocks they induce. Block
/// `(a, b)` with `a < b` holds every pair with one unit in each fold;
/// block `(a, a)` holds the pairs inside fold `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPartition {
    folds: Vec<Vec<usize>>,
    fold_of: Vec<usize>,
}

impl PairPartition {
    /// Splits `perm` (a permutation of `0..n`) into `k` contiguous folds with
    /// boundaries at `round(i n / k)`; each fold is stored sorted.
    pub fn from_permutation(perm: &[usize], k: usize) -> Result<Self> {
        let n = perm.len();
        if k < 2 || 2 * k > n {
            return Err(Error::BadK { n, k });
        }
        let bound = |i: usize| (2 * i * n + k) / (2 * k);
        let mut fold_of = vec![usize::MAX; n];
        let mut folds = Vec::with_capacity(k);
        for f in 0..k {
            let mut fold: Vec<usize> = perm[bound(f)..bound(f + 1)].to_vec();
            fold.sort_unstable();
            for &i in &fold {
                if i >= n || fold_of[i] != usize::MAX {
                    return Err(Error::Config("fold assignment is not a permutation".into()));
                }
                fold_of[i] = f;
            }
            folds.push(fold);
        }
        Ok(Self { folds, fold_of })
    }

    pub fn identity(n: usize, k: usize) -> Result<Self> {
        let perm: Vec<usize> = (0..n).collect();
        Self::from_permutation(&perm, k)
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    pub fn num_blocks(&self) -> usize {
        let k = self.k();
        k * (k + 1) / 2
    }

    /// Fold pairs `(a, b)`, `a <= b`, in lexicographic order.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let k = self.k();
        (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect()
    }

    /// Position of block `(a, b)` in [`blocks`](Self::blocks), either order.
    pub fn block_index(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let k = self.k();
        a * k - a * (a.saturating_sub(1)) / 2 + (b - a)
    }

    pub fn block_of_pair(&self, i: usize, j: usize) -> usize {
        self.block_index(self.fold_of[i], self.fold_of[j])
    }

    /// Pairs `(i, j)`, `i < j`, of block `l`, sorted.
    pub fn block_pairs(&self, l: usize) -> Vec<(usize, usize)> {
        let (a, b) = self.blocks()[l];
        let mut out = Vec::new();
        if a == b {
            let f = &self.folds[a];
            for (x, &i) in f.iter().enumerate() {
                for &j in &f[x + 1..] {
                    out.push((i, j));
                }
            }
        } else {
            for &i in &self.folds[a] {
                for &j in &self.folds[b] {
                    out.push((i.min(j), i.max(j)));
                }
            }
            out.sort_unstable();
        }
        out
    }

    /// Units of block `l`, sorted.
    pub fn block_units(&self, l: usize) -> Vec<usize> {
        let (a, b) = self.blocks()[l];
        let mut u = self.folds[a].clone();
        if a != b {
            u.extend_from_slice(&self.folds[b]);
            u.sort_unstable();
        }
        u
    }

    /// Training rows for block `l`: all units outside its folds.
    pub fn block_train(&self, l: usize) -> Vec<usize> {
        let (a, b) = self.blocks()[l];
        (0..self.n())
            .filter(|&i| self.fold_of[i] != a && self.fold_of[i] != b)
            .collect()
    }

    /// Training rows for fold `k`: its complement.
    pub fn fold_train(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != k).collect()
    }
}

/// Random partition of `0..n` into `k` folds, deterministic in `seed`.
pub fn partition_pairs(n: usize, k: usize, seed: u64) -> Result<PairPartition> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    PairPartition::from_permutation(&perm, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_units_three_folds() {
        let p = PairPartition::identity(10, 3).unwrap();
        assert_eq!(p.folds(), &[vec![0, 1, 2], vec![3, 4, 5, 6], vec![7, 8, 9]]);
        assert_eq!(p.num_blocks(), 6);
        assert_eq!(p.block_pairs(0), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(p.block_pairs(p.block_index(0, 1)).len(), 12);
        let total: usize = (0..6).map(|l| p.block_pairs(l).len()).sum();
        assert_eq!(total, 45);
        assert_eq!(p.block_train(p.block_index(0, 1)), vec![7, 8, 9]);
        assert_eq!(p.block_train(0), (3..10).collect::<Vec<_>>());
    }

    #[test]
    fn two_folds_four_units() {
        let p = PairPartition::identity(4, 2).unwrap();
        let blocks: Vec<_> = (0..3).map(|l| p.block_pairs(l)).collect();
        assert_eq!(
            blocks,
            vec![vec![(0, 1)], vec![(0, 2), (0, 3), (1, 2), (1, 3)], vec![(2, 3)]]
        );
    }

    #[test]
    fn bad_k() {
        assert_eq!(partition_pairs(10, 1, 0).err(), Some(Error::BadK { n: 10, k: 1 }));
        assert_eq!(partition_pairs(10, 6, 0).err(), Some(Error::BadK { n: 10, k: 6 }));
    }

    #[test]
    fn seeded_partitions_are_reproducible() {
        assert_eq!(partition_pairs(50, 5, 9).unwrap(), partition_pairs(50, 5, 9).unwrap());
        assert_ne!(partition_pairs(50, 5, 9).unwrap(), partition_pairs(50, 5, 10).unwrap());
    }

    proptest! {
        #[test]
        fn blocks_tile_all_pairs(n in 4usize..40, kf in 0.0f64..1.0, seed in any::<u64>()) {
            let k = 2 + ((n / 2 - 2) as f64 * kf) as usize;
            let p = partition_pairs(n, k, seed).unwrap();
            prop_assert_eq!(p.num_blocks(), k * (k + 1) / 2);
            let mut seen = vec![false; n * n];
            let mut total = 0;
            for l in 0..p.num_blocks() {
                for (i, j) in p.block_pairs(l) {
                    prop_assert!(i < j);
                    prop_assert!(!seen[i * n + j]);
                    prop_assert_eq!(p.block_of_pair(i, j), l);
                    seen[i * n + j] = true;
                    total += 1;
                }
            }
            prop_assert_eq!(total, n * (n - 1) / 2);
        }
    }
}
