//! Random forest of axis-aligned trees with class-weighted Gini splits.
//!
//! Each sample enters a tree with mass `bootstrap_count * w(class)`. Leaves
//! store the per-class mass they received; a tree votes for the heavier
//! class and the forest takes the majority of tree votes.

use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::weights::{require_both_classes, ClassWeights};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// `ceil(sqrt(d))`
    Sqrt,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, dim: usize) -> usize {
        let k = match self {
            FeaturesPerSplit::Sqrt => (dim as f64).sqrt().ceil() as usize,
            FeaturesPerSplit::Count(k) => k,
        };
        k.clamp(1, dim.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: FeaturesPerSplit,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            features_per_split: FeaturesPerSplit::Sqrt,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Mass that reached this node; used when the tree is truncated.
        mass: [f64; 2],
    },
    Leaf {
        mass: [f64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_mass(&self, x: ArrayView1<f64>) -> [f64; 2] {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[feature] <= threshold { left } else { right },
                Node::Leaf { mass } => return mass,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// The tree that growing with `max_depth` would have produced.
    pub fn truncated(&self, max_depth: usize) -> DecisionTree {
        fn copy(src: &[Node], at: usize, depth: usize, cap: usize, out: &mut Vec<Node>) -> usize {
            let slot = out.len();
            match src[at] {
                Node::Leaf { mass } => out.push(Node::Leaf { mass }),
                Node::Split { mass, .. } if depth >= cap => out.push(Node::Leaf { mass }),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    mass,
                } => {
                    out.push(Node::Leaf { mass });
                    let l = copy(src, left, depth + 1, cap, out);
                    let r = copy(src, right, depth + 1, cap, out);
                    out[slot] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                        mass,
                    };
                }
            }
            slot
        }
        let mut nodes = Vec::new();
        copy(&self.nodes, 0, 0, max_depth, &mut nodes);
        DecisionTree { nodes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub dim: usize,
    /// Total training mass per class, used to break vote ties.
    pub class_totals: [f64; 2],
}

/// Tie rule shared by leaves and the forest vote: heavier total training
/// class first, then class 0.
fn tie_break(class_totals: [f64; 2]) -> u8 {
    if class_totals[1] > class_totals[0] {
        1
    } else {
        0
    }
}

fn vote(scores: [f64; 2], class_totals: [f64; 2]) -> u8 {
    if scores[0] > scores[1] {
        0
    } else if scores[1] > scores[0] {
        1
    } else {
        tie_break(class_totals)
    }
}

impl ForestModel {
    /// Trees voting for each class.
    pub fn votes(&self, x: ArrayView1<f64>) -> [usize; 2] {
        let mut votes = [0usize; 2];
        for tree in &self.trees {
            votes[vote(tree.leaf_mass(x), self.class_totals) as usize] += 1;
        }
        votes
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> Result<u8> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let v = self.votes(x);
        Ok(vote([v[0] as f64, v[1] as f64], self.class_totals))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Equal to retraining with the same seed and `max_depth`, which must
    /// not exceed the depth this forest was grown with.
    pub fn truncated(&self, max_depth: usize) -> Result<ForestModel> {
        if max_depth == 0 || self.params.max_depth.is_some_and(|m| m < max_depth) {
            return Err(Error::InvalidParams(format!(
                "cannot truncate a forest of depth {:?} to {max_depth}",
                self.params.max_depth
            )));
        }
        Ok(ForestModel {
            trees: self.trees.iter().map(|t| t.truncated(max_depth)).collect(),
            params: ForestParams {
                max_depth: Some(max_depth),
                ..self.params
            },
            dim: self.dim,
            class_totals: self.class_totals,
        })
    }
}

/// Child seeds depend only on the path from the root, so a depth-capped
/// tree is a prefix of the uncapped one.
fn child_seed(parent: u64, side: u64) -> u64 {
    let mut z = parent ^ side.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct TreeBuilder<'a> {
    /// Feature-major copy of the training matrix, `d x n`.
    columns: ArrayView2<'a, f64>,
    labels: &'a [u8],
    mass: Vec<f64>,
    max_depth: Option<usize>,
    k_features: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    features: Vec<usize>,
    scratch: Vec<(f64, u8, f64)>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    fn node_mass(&self, idx: &[usize]) -> [f64; 2] {
        let mut m = [0.0; 2];
        for &i in idx {
            m[self.labels[i] as usize] += self.mass[i];
        }
        m
    }

    fn best_split<R: Rng>(&mut self, idx: &[usize], total: [f64; 2], rng: &mut R) -> Option<SplitChoice> {
        let d = self.features.len();
        for (i, f) in self.features.iter_mut().enumerate() {
            *f = i;
        }
        let mut best: Option<SplitChoice> = None;
        let mut visited_informative = 0;
        // Partial Fisher-Yates: keep drawing until k non-constant features
        // were examined or the features run out.
        for drawn in 0..d {
            if visited_informative >= self.k_features {
                break;
            }
            let pick = rng.random_range(drawn..d);
            self.features.swap(drawn, pick);
            let f = self.features[drawn];
            let column = self.columns.row(f);
            let column = column.as_slice().expect("contiguous columns");

            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (column[i], self.labels[i], self.mass[i])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            visited_informative += 1;

            let mut left = [0.0; 2];
            let n = self.scratch.len();
            for pos in 0..n - 1 {
                let (v, label, mass) = self.scratch[pos];
                left[label as usize] += mass;
                let next = self.scratch[pos + 1].0;
                if v == next || pos + 1 < self.min_leaf || n - pos - 1 < self.min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                // Maximizing this proxy maximizes the weighted Gini decrease.
                let score = (left[0] * left[0] + left[1] * left[1]) / wl
                    + (right[0] * right[0] + right[1] * right[1]) / wr;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, seed: u64) -> usize {
        let slot = self.nodes.len();
        let mass = self.node_mass(&idx);
        self.nodes.push(Node::Leaf { mass });
        let pure = mass[0] == 0.0 || mass[1] == 0.0;
        let depth_capped = self.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || idx.len() < 2 * self.min_leaf {
            return slot;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(split) = self.best_split(&idx, mass, &mut rng) else {
            return slot;
        };
        let column = self.columns.row(split.feature);
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| column[i] <= split.threshold);
        let left = self.grow(left_idx, depth + 1, child_seed(seed, 1));
        let right = self.grow(right_idx, depth + 1, child_seed(seed, 2));
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            mass,
        };
        slot
    }
}

fn grow_tree(
    columns: ArrayView2<f64>,
    labels: &[u8],
    weights: &ClassWeights,
    params: &ForestParams,
    seed: u64,
) -> DecisionTree {
    let n = columns.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; n];
    if params.bootstrap {
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
    } else {
        counts.fill(1);
    }
    let mass: Vec<f64> = counts
        .iter()
        .zip(labels)
        .map(|(&c, &l)| c as f64 * weights.get(l))
        .collect();
    let idx: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
    let mut builder = TreeBuilder {
        columns,
        labels,
        mass,
        max_depth: params.max_depth,
        k_features: params.features_per_split.resolve(columns.nrows()),
        min_leaf: params.min_samples_leaf.max(1),
        nodes: Vec::new(),
        features: (0..columns.nrows()).collect(),
        scratch: Vec::with_capacity(n),
    };
    builder.grow(idx, 0, rng.next_u64());
    DecisionTree {
        nodes: builder.nodes,
    }
}

pub fn train_forest(
    x: ArrayView2<f64>,
    labels: &[u8],
    weights: &ClassWeights,
    params: &ForestParams,
) -> Result<ForestModel> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: labels.len(),
        });
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParams("n_trees must be at least 1".into()));
    }
    if params.max_depth == Some(0) {
        return Err(Error::InvalidParams("max_depth must be positive".into()));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidParams("no features".into()));
    }
    let counts = require_both_classes(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.next_u64()).collect();
    let columns = x.t().as_standard_layout().into_owned();
    let trees = seeds
        .par_iter()
        .map(|&s| grow_tree(columns.view(), labels, weights, params, s))
        .collect();
    Ok(ForestModel {
        trees,
        params: *params,
        dim: x.ncols(),
        class_totals: [
            counts[0] as f64 * weights.get(0),
            counts[1] as f64 * weights.get(1),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn single_tree_memorizes_distinct_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((60, 4), |_| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = (0..60).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            features_per_split: FeaturesPerSplit::Count(4),
            ..ForestParams::default()
        };
        let f = train_forest(x.view(), &y, &ClassWeights::uniform(), &params).unwrap();
        assert_eq!(f.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((80, 6), |_| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = x.rows().into_iter().map(|r| (r[0] + r[1] > 0.0) as u8).collect();
        let params = ForestParams {
            n_trees: 15,
            seed: 99,
            ..ForestParams::default()
        };
        let a = train_forest(x.view(), &y, &ClassWeights::uniform(), &params).unwrap();
        let b = train_forest(x.view(), &y, &ClassWeights::uniform(), &params).unwrap();
        assert_eq!(a, b);
        let test = Array2::from_shape_fn((50, 6), |_| rng.random_range(-2.0..2.0));
        assert_eq!(a.predict(test.view()).unwrap(), b.predict(test.view()).unwrap());
    }

    #[test]
    fn depth_cap_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((100, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = x.rows().into_iter().map(|r| (r[0] * r[1] > 0.0) as u8).collect();
        let params = ForestParams {
            n_trees: 5,
            max_depth: Some(2),
            ..ForestParams::default()
        };
        let f = train_forest(x.view(), &y, &ClassWeights::uniform(), &params).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 2));
        for tree in &f.trees {
            for node in tree.nodes() {
                if let Node::Split { feature, .. } = node {
                    assert!(*feature < 3);
                }
            }
        }
    }

    #[test]
    fn two_tree_tie_goes_to_heavier_class_then_zero() {
        // Hand-built: one stump votes 0 everywhere, the other 1.
        let leaf = |m0: f64, m1: f64| DecisionTree {
            nodes: vec![Node::Leaf { mass: [m0, m1] }],
        };
        let mut model = ForestModel {
            trees: vec![leaf(3.0, 1.0), leaf(0.5, 2.0)],
            params: ForestParams::default(),
            dim: 1,
            class_totals: [10.0, 12.0],
        };
        let x = array![[0.0]];
        assert_eq!(model.votes(x.row(0)), [1, 1]);
        assert_eq!(model.predict(x.view()).unwrap(), vec![1]);
        model.class_totals = [12.0, 10.0];
        assert_eq!(model.predict(x.view()).unwrap(), vec![0]);
        model.class_totals = [11.0, 11.0];
        assert_eq!(model.predict(x.view()).unwrap(), vec![0]);
        // reordering trees changes nothing
        model.trees.reverse();
        assert_eq!(model.predict(x.view()).unwrap(), vec![0]);
    }

    #[test]
    fn class_weights_shift_leaf_votes() {
        // identical points with mixed labels end in one impure leaf
        let x = array![[1.0], [1.0], [1.0]];
        let y = [0, 1, 1];
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let plain = train_forest(x.view(), &y, &ClassWeights::uniform(), &params).unwrap();
        assert_eq!(plain.predict(x.view()).unwrap(), vec![1, 1, 1]);
        let w = ClassWeights::new(3.0, 1.0).unwrap();
        let weighted = train_forest(x.view(), &y, &w, &params).unwrap();
        assert_eq!(weighted.predict(x.view()).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0]];
        let w = ClassWeights::uniform();
        assert!(matches!(
            train_forest(x.view(), &[1, 1], &w, &ForestParams::default()),
            Err(Error::SingleClassInput(1))
        ));
        let zero = ForestParams {
            n_trees: 0,
            ..ForestParams::default()
        };
        assert!(train_forest(x.view(), &[0, 1], &w, &zero).is_err());
        let f = train_forest(x.view(), &[0, 1], &w, &ForestParams { n_trees: 2, ..Default::default() }).unwrap();
        assert!(matches!(
            f.predict(array![[0.0, 1.0]].view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn truncation_matches_capped_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((150, 8), |_| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = x.rows().into_iter().map(|r| (r[0] * r[1] + 0.3 * r[2] > 0.0) as u8).collect();
        let w = ClassWeights::new(2.0, 0.7).unwrap();
        let deep = train_forest(x.view(), &y, &w, &ForestParams { n_trees: 9, seed: 4, ..Default::default() }).unwrap();
        assert!(deep.trees.iter().any(|t| t.depth() > 3));
        for cap in [1, 3] {
            let capped = ForestParams {
                n_trees: 9,
                seed: 4,
                max_depth: Some(cap),
                ..Default::default()
            };
            assert_eq!(deep.truncated(cap).unwrap(), train_forest(x.view(), &y, &w, &capped).unwrap());
        }
        let shallow = deep.truncated(3).unwrap();
        assert!(shallow.truncated(5).is_err());
    }

    #[test]
    fn sqrt_rule() {
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(944), 31);
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(1888), 44);
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(2), 2);
        assert_eq!(FeaturesPerSplit::Count(50).resolve(3), 3);
    }
}
