use rand::seq::SliceRandom;

use crate::error::{invalid, Result};
use crate::rng;

/// Role pattern of one cross-validation rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldPattern {
    /// `k - 1` folds train, one validates.
    TrainVal,
    /// `k - 2` folds train, one validates, one tests.
    TrainValTest,
}

/// Assignment of samples to `k` folds.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub pattern: FoldPattern,
    pub seed: u64,
    /// Fold index of every sample, in input order.
    pub assignment: Vec<usize>,
}

/// Sample indices playing each role in one rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldRoles {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Option<Vec<usize>>,
}

impl FoldRoles {
    /// Samples receiving out-of-fold predictions in this rotation: the test
    /// fold when there is one, the validation fold otherwise.
    pub fn held_out(&self) -> &[usize] {
        self.test.as_deref().unwrap_or(&self.val)
    }
}

impl FoldPlan {
    pub fn fold(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == f)
            .collect()
    }

    /// Rotation `r` in `0..k`. For `TrainVal`, fold `r` validates; for
    /// `TrainValTest`, fold `r` tests and fold `r + 1 (mod k)` validates.
    pub fn rotation(&self, r: usize) -> FoldRoles {
        let (val, test) = match self.pattern {
            FoldPattern::TrainVal => (r, None),
            FoldPattern::TrainValTest => ((r + 1) % self.k, Some(r)),
        };
        let train = (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != val && Some(self.assignment[i]) != test)
            .collect();
        FoldRoles {
            train,
            val: self.fold(val),
            test: test.map(|t| self.fold(t)),
        }
    }
}

/// Shuffles `0..n` with the seed and deals positions round-robin into `k`
/// folds, so fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, pattern: FoldPattern, seed: u64) -> Result<FoldPlan> {
    let min_k = match pattern {
        FoldPattern::TrainVal => 2,
        FoldPattern::TrainValTest => 3,
    };
    if k < min_k || n < k {
        return Err(invalid(format!("cannot split {n} samples into {k} folds for {pattern:?}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::ids::FOLDS));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        pattern,
        seed,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_ids_four_folds() {
        let plan = kfold(8, 4, FoldPattern::TrainVal, 3).unwrap();
        for f in 0..4 {
            assert_eq!(plan.fold(f).len(), 2);
        }
        let mut seen = vec![0; 8];
        for r in 0..4 {
            let roles = plan.rotation(r);
            assert_eq!(roles.train.len(), 6);
            roles.val.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(plan, kfold(8, 4, FoldPattern::TrainVal, 3).unwrap());
    }

    #[test]
    fn train_val_test_roles_partition() {
        let plan = kfold(23, 4, FoldPattern::TrainValTest, 9).unwrap();
        let mut tested = vec![0; 23];
        for r in 0..4 {
            let roles = plan.rotation(r);
            let test = roles.test.clone().unwrap();
            assert_eq!(roles.train.len() + roles.val.len() + test.len(), 23);
            for i in &test {
                assert!(!roles.val.contains(i) && !roles.train.contains(i));
                tested[*i] += 1;
            }
            assert_eq!(roles.held_out(), test.as_slice());
        }
        assert!(tested.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = (0..4).map(|f| plan.fold(f).len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn too_few_samples() {
        assert!(kfold(3, 4, FoldPattern::TrainVal, 0).is_err());
        assert!(kfold(10, 2, FoldPattern::TrainValTest, 0).is_err());
    }
}
