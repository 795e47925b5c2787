use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of whole couples to folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_of(&self, couple_id: &str) -> Option<usize> {
        self.assignments.get(couple_id).copied()
    }

    /// Couples per fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Sample indices outside and inside `fold`, given each sample's group.
    pub fn partition<S: AsRef<str>>(&self, groups: &[S], fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for (i, g) in groups.iter().enumerate() {
            match self.fold_of(g.as_ref()) {
                Some(f) if f == fold => eval.push(i),
                Some(_) => train.push(i),
                None => {}
            }
        }
        (train, eval)
    }
}

/// Seeded shuffle of the distinct couples followed by round-robin dealing.
pub fn plan_grouped_folds<S: AsRef<str>>(couple_ids: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    // canonical order first, so the plan does not depend on input order
    let distinct: BTreeSet<&str> = couple_ids.iter().map(|c| c.as_ref()).collect();
    if distinct.len() < k {
        return Err(Error::TooFewGroups {
            groups: distinct.len(),
            folds: k,
        });
    }
    let mut order: Vec<&str> = distinct.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignments = order
        .into_iter()
        .enumerate()
        .map(|(pos, id)| (id.to_string(), pos % k))
        .collect();
    Ok(FoldPlan { k, assignments, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i:03}")).collect()
    }

    #[test]
    fn one_couple_per_fold() {
        let plan = plan_grouped_folds(&ids(10), 10, 4).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn uneven_sizes_differ_by_one() {
        let plan = plan_grouped_folds(&ids(23), 10, 4).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn too_few_groups() {
        assert!(matches!(
            plan_grouped_folds(&ids(4), 5, 0),
            Err(Error::TooFewGroups { groups: 4, folds: 5 })
        ));
        // duplicates count once
        let dup = vec!["a", "a", "b", "b", "c"];
        assert!(matches!(
            plan_grouped_folds(&dup, 4, 0),
            Err(Error::TooFewGroups { groups: 3, folds: 4 })
        ));
    }

    #[test]
    fn deterministic_and_order_free() {
        let mut a = ids(30);
        let p1 = plan_grouped_folds(&a, 5, 9).unwrap();
        a.reverse();
        let p2 = plan_grouped_folds(&a, 5, 9).unwrap();
        assert_eq!(p1, p2);
        let p3 = plan_grouped_folds(&a, 5, 10).unwrap();
        assert_ne!(p1.assignments, p3.assignments);
    }

    #[test]
    fn partition_keeps_groups_together() {
        let groups = vec!["a", "b", "a", "c", "b", "d"];
        let plan = plan_grouped_folds(&groups, 2, 1).unwrap();
        for fold in 0..2 {
            let (train, eval) = plan.partition(&groups, fold);
            assert_eq!(train.len() + eval.len(), groups.len());
            for &e in &eval {
                assert!(train.iter().all(|&t| groups[t] != groups[e]));
            }
        }
    }
}
