//! Couple-disjoint nested cross-validation.
//!
//! Every outer fold holds out whole couples. Inside the outer training part
//! a second grouped split scores each grid point; the winner is refit on the
//! full outer training part and predicts the held-out couples. Each fit
//! learns its own standardization from the rows it trains on.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::plan_grouped_folds;
use super::grid::Grid;
use super::metrics::{balanced_accuracy, ConfusionMatrix};
use crate::classifiers::kernel::row_sq_norms;
use crate::classifiers::model::{forest_params, overall_variance};
use crate::classifiers::svm::{box_bounds, decision_to_class, signed_labels, solve_dual};
use crate::classifiers::weights::{class_counts, require_both_classes};
use crate::classifiers::{
    compute_class_weights, train_forest, FeaturesPerSplit, HyperParams, Kernel, ModelFamily, ModelParams, SolverSettings,
    Standardizer, SvmModel, TrainedModel,
};
use crate::data::{Corpus, Role};
use crate::error::{Error, Result};
use crate::fusion::{Design, FusionMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Keep the model refit on every outer training part.
    #[serde(default)]
    pub keep_models: bool,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k_outer: 10,
            k_inner: 5,
            seed: 0,
            solver: SolverSettings::default(),
            keep_models: false,
        }
    }
}

/// SplitMix64 over a path of integers; used to derive child seeds.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerSplit {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterSplit {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub inner: Vec<InnerSplit>,
}

/// Every train/evaluation partition a nested run will use, as sample indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub outer: Vec<OuterSplit>,
}

fn inner_splits<S: AsRef<str>>(groups: &[S], train: &[usize], k_inner: usize, seed: u64) -> Result<Vec<InnerSplit>> {
    let train_groups: Vec<&str> = train.iter().map(|&i| groups[i].as_ref()).collect();
    let plan = plan_grouped_folds(&train_groups, k_inner, seed)?;
    Ok((0..k_inner)
        .map(|f| {
            let (tr, ev) = plan.partition(&train_groups, f);
            InnerSplit {
                train: tr.into_iter().map(|i| train[i]).collect(),
                eval: ev.into_iter().map(|i| train[i]).collect(),
            }
        })
        .collect())
}

pub fn plan_nested_splits<S: AsRef<str>>(groups: &[S], k_outer: usize, k_inner: usize, seed: u64) -> Result<SplitPlan> {
    let outer = plan_grouped_folds(groups, k_outer, seed)?;
    let outer = (0..k_outer)
        .map(|fold| {
            let (train, test) = outer.partition(groups, fold);
            let inner = inner_splits(groups, &train, k_inner, derive_seed(seed, &[1, fold as u64]))?;
            Ok(OuterSplit {
                fold,
                train,
                test,
                inner,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitPlan { outer })
}

fn check_disjoint<S: AsRef<str>>(groups: &[S], train: &[usize], eval: &[usize]) -> Result<()> {
    let train_groups: std::collections::HashSet<&str> = train.iter().map(|&i| groups[i].as_ref()).collect();
    match eval.iter().find(|&&i| train_groups.contains(groups[i].as_ref())) {
        Some(&i) => Err(Error::GroupLeak(groups[i].as_ref().to_string())),
        None => Ok(()),
    }
}

/// Verifies that no couple sits on both sides of any outer or inner split and
/// that inner splits stay inside their outer training part. Returns the
/// number of partitions checked.
pub fn audit_group_disjointness<S: AsRef<str>>(groups: &[S], plan: &SplitPlan) -> Result<usize> {
    let mut checked = 0;
    for outer in &plan.outer {
        check_disjoint(groups, &outer.train, &outer.test)?;
        checked += 1;
        let allowed: std::collections::HashSet<usize> = outer.train.iter().copied().collect();
        for inner in &outer.inner {
            check_disjoint(groups, &inner.train, &inner.eval)?;
            if let Some(&i) = inner.train.iter().chain(&inner.eval).find(|i| !allowed.contains(i)) {
                return Err(Error::GroupLeak(groups[i].as_ref().to_string()));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

struct Products {
    gram: Array2<f64>,
    cross: Array2<f64>,
    train_norms: Array1<f64>,
    eval_norms: Array1<f64>,
    variance: f64,
}

/// One train/evaluation partition, standardized with training statistics,
/// with inner products cached for every SVM fit on it.
pub(crate) struct FoldData {
    train_y: Vec<u8>,
    eval_y: Vec<u8>,
    standardizer: Standardizer,
    z_train: Array2<f64>,
    z_eval: Array2<f64>,
    products: OnceLock<Products>,
}

impl FoldData {
    pub(crate) fn new(x: ArrayView2<f64>, y: &[u8], train: &[usize], eval: &[usize]) -> Result<Self> {
        let x_train = x.select(Axis(0), train);
        let standardizer = Standardizer::fit(x_train.view())?;
        let z_train = standardizer.transform(x_train.view())?;
        let z_eval = standardizer.transform(x.select(Axis(0), eval).view())?;
        Ok(Self {
            train_y: train.iter().map(|&i| y[i]).collect(),
            eval_y: eval.iter().map(|&i| y[i]).collect(),
            standardizer,
            z_train,
            z_eval,
            products: OnceLock::new(),
        })
    }

    #[cfg(test)]
    fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    fn products(&self) -> &Products {
        self.products.get_or_init(|| {
            let gram = self.z_train.dot(&self.z_train.t());
            let cross = self.z_eval.dot(&self.z_train.t());
            Products {
                train_norms: gram.diag().to_owned(),
                eval_norms: row_sq_norms(self.z_eval.view()),
                variance: overall_variance(self.z_train.view()),
                gram,
                cross,
            }
        })
    }

    /// Both classes must be present on each side for a fold to be scored.
    fn scorable(&self) -> bool {
        let t = class_counts(&self.train_y);
        let e = class_counts(&self.eval_y);
        t[0] > 0 && t[1] > 0 && e[0] > 0 && e[1] > 0
    }

    fn fit_svm(
        &self,
        kernel_of: impl Fn(&Products) -> Kernel,
        c: f64,
        solver: SolverSettings,
    ) -> Result<(Vec<u8>, SvmModel)> {
        let weights = compute_class_weights(&self.train_y)?;
        let p = self.products();
        let kernel = kernel_of(p);
        let (k, cross) = match kernel {
            Kernel::Linear => (p.gram.clone(), p.cross.clone()),
            Kernel::Rbf { .. } => {
                let mut k = kernel.from_inner_products(p.gram.clone(), &p.train_norms, &p.train_norms);
                k.diag_mut().fill(1.0);
                let cross = kernel.from_inner_products(p.cross.clone(), &p.eval_norms, &p.train_norms);
                (k, cross)
            }
        };
        let y = signed_labels(&self.train_y);
        let upper = box_bounds(&self.train_y, c, &weights);
        let sol = solve_dual(k.view(), &y, &upper, solver)?;
        let coef: Array1<f64> = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
        let pred = cross
            .dot(&coef)
            .iter()
            .map(|&v| decision_to_class(v - sol.rho))
            .collect();
        let model = SvmModel::from_solution(self.z_train.view(), &y, kernel, c, weights, &sol);
        Ok((pred, model))
    }

    /// Fits `hyper` on the training side and predicts the evaluation side.
    pub(crate) fn fit_predict(&self, hyper: &HyperParams, solver: SolverSettings, seed: u64) -> Result<(Vec<u8>, TrainedModel)> {
        let (pred, params) = match *hyper {
            HyperParams::LinearSvm { c } => {
                let (pred, m) = self.fit_svm(|_| Kernel::Linear, c, solver)?;
                (pred, ModelParams::Svm(m))
            }
            HyperParams::RbfSvm { c, g } => {
                let d = self.z_train.ncols().max(1) as f64;
                let gamma_of = |p: &Products| Kernel::Rbf {
                    gamma: if p.variance > 0.0 { g / (d * p.variance) } else { g / d },
                };
                let (pred, m) = self.fit_svm(gamma_of, c, solver)?;
                (pred, ModelParams::Svm(m))
            }
            HyperParams::RandomForest { .. } => {
                let weights = compute_class_weights(&self.train_y)?;
                let params = forest_params(hyper, seed).expect("forest hyperparameters");
                let forest = train_forest(self.z_train.view(), &self.train_y, &weights, &params)?;
                (forest.predict(self.z_eval.view())?, ModelParams::Forest(forest))
            }
        };
        let model = TrainedModel {
            family: hyper.family(),
            hyper: *hyper,
            weights: compute_class_weights(&self.train_y)?,
            standardizer: self.standardizer.clone(),
            params,
        };
        Ok((pred, model))
    }

    /// Balanced accuracy of every grid point on this fold. Forest points
    /// that differ only in depth share one forest grown to the deepest of
    /// them and truncated.
    fn score_grid(&self, points: &[HyperParams], solver: SolverSettings, seed: u64) -> Result<Vec<f64>> {
        let score = |pred: &[u8]| balanced_accuracy(&ConfusionMatrix::from_predictions(&self.eval_y, pred)?);
        let mut scores = vec![f64::NAN; points.len()];
        let mut forests: Vec<(usize, FeaturesPerSplit, Vec<usize>)> = Vec::new();
        for (gi, hyper) in points.iter().enumerate() {
            match *hyper {
                HyperParams::RandomForest {
                    n_trees,
                    features_per_split,
                    ..
                } => match forests.iter_mut().find(|(n, f, _)| *n == n_trees && *f == features_per_split) {
                    Some(group) => group.2.push(gi),
                    None => forests.push((n_trees, features_per_split, vec![gi])),
                },
                _ => scores[gi] = score(&self.fit_predict(hyper, solver, seed)?.0)?,
            }
        }
        for (n_trees, features_per_split, members) in forests {
            let depth_of = |gi: usize| match points[gi] {
                HyperParams::RandomForest { max_depth, .. } => max_depth,
                _ => unreachable!(),
            };
            let deepest = members.iter().map(|&gi| depth_of(gi)).max_by(|a, b| match (a, b) {
                (None, None) => std::cmp::Ordering::Equal,
                (None, _) => std::cmp::Ordering::Greater,
                (_, None) => std::cmp::Ordering::Less,
                (Some(a), Some(b)) => a.cmp(b),
            });
            let hyper = HyperParams::RandomForest {
                n_trees,
                max_depth: deepest.flatten(),
                features_per_split,
            };
            let weights = compute_class_weights(&self.train_y)?;
            let params = forest_params(&hyper, seed).expect("forest hyperparameters");
            let forest = train_forest(self.z_train.view(), &self.train_y, &weights, &params)?;
            for gi in members {
                let pred = match depth_of(gi) {
                    Some(d) if Some(d) != params.max_depth => forest.truncated(d)?.predict(self.z_eval.view())?,
                    _ => forest.predict(self.z_eval.view())?,
                };
                scores[gi] = score(&pred)?;
            }
        }
        Ok(scores)
    }
}

/// Outcome of the inner search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSelection {
    pub best: HyperParams,
    pub best_index: usize,
    /// Mean inner balanced accuracy per grid point; `None` when every
    /// inner fold was degenerate for it.
    pub scores: Vec<Option<f64>>,
    pub scored_folds: usize,
}

fn select_on_folds(folds: &[FoldData], grid: &Grid, solver: SolverSettings, seed: u64) -> Result<InnerSelection> {
    let points = grid.points();
    if points.len() == 1 {
        return Ok(InnerSelection {
            best: points[0],
            best_index: 0,
            scores: vec![None],
            scored_folds: 0,
        });
    }
    let usable: Vec<(usize, &FoldData)> = folds.iter().enumerate().filter(|(_, f)| f.scorable()).collect();
    let mut sums = vec![0.0; points.len()];
    for &(fi, fold) in &usable {
        let fold_scores = fold.score_grid(points, solver, derive_seed(seed, &[fi as u64]))?;
        for (sum, s) in sums.iter_mut().zip(fold_scores) {
            *sum += s;
        }
    }
    let scores: Vec<Option<f64>> = sums
        .into_iter()
        .map(|sum| (!usable.is_empty()).then(|| sum / usable.len() as f64))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    let (best_index, _) = best.ok_or(Error::DegenerateInner)?;
    Ok(InnerSelection {
        best: points[best_index],
        best_index,
        scores,
        scored_folds: usable.len(),
    })
}

/// Grid search by couple-disjoint `k_inner`-fold CV over the rows `train`
/// of `design`. Ties resolve to the earliest grid point.
pub fn inner_select(
    design: &Design,
    train: &[usize],
    grid: &Grid,
    k_inner: usize,
    seed: u64,
    solver: SolverSettings,
) -> Result<InnerSelection> {
    let splits = inner_splits(&design.groups, train, k_inner, seed)?;
    let folds = splits
        .iter()
        .map(|s| FoldData::new(design.x.view(), &design.y, &s.train, &s.eval))
        .collect::<Result<Vec<_>>>()?;
    select_on_folds(&folds, grid, solver, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen: HyperParams,
    pub inner_scores: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
    /// `None` when the held-out couples lack one of the classes.
    pub balanced_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub role: Role,
    pub fusion: FusionMode,
    pub family: ModelFamily,
    pub seed: u64,
    pub k_outer: usize,
    pub k_inner: usize,
    pub stratified: bool,
    pub n_samples: usize,
    pub n_negative: usize,
    pub n_positive: usize,
    pub excluded_missing_partner: usize,
    pub folds: Vec<FoldOutcome>,
    pub pooled: ConfusionMatrix,
    pub pooled_balanced_accuracy: f64,
    pub fold_mean: f64,
    pub fold_sd: f64,
    pub folds_undefined: usize,
}

impl EvalReport {
    fn assemble(design: &Design, family: ModelFamily, settings: &CvSettings, folds: Vec<FoldOutcome>) -> Result<Self> {
        let pooled: ConfusionMatrix = folds.iter().map(|f| f.confusion).sum();
        let defined: Vec<f64> = folds.iter().filter_map(|f| f.balanced_accuracy).collect();
        let (fold_mean, fold_sd) = mean_sd(&defined);
        let counts = class_counts(&design.y);
        Ok(Self {
            role: design.role,
            fusion: design.mode,
            family,
            seed: settings.seed,
            k_outer: settings.k_outer,
            k_inner: settings.k_inner,
            stratified: false,
            n_samples: design.len(),
            n_negative: counts[0],
            n_positive: counts[1],
            excluded_missing_partner: design.excluded,
            folds_undefined: folds.len() - defined.len(),
            pooled_balanced_accuracy: balanced_accuracy(&pooled)?,
            folds,
            pooled,
            fold_mean,
            fold_sd,
        })
    }
}

/// Mean and sample standard deviation; `(NaN, NaN)` for an empty slice.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// A report plus, when requested, the model refit on each outer training part.
#[derive(Clone, Debug)]
pub struct NestedOutcome {
    pub report: EvalReport,
    pub models: Vec<TrainedModel>,
}

struct OuterResult {
    per_grid: Vec<(FoldOutcome, Option<TrainedModel>)>,
}

fn run_outer(
    design: &Design,
    split: &OuterSplit,
    grids: &[Grid],
    settings: &CvSettings,
) -> Result<OuterResult> {
    let x = design.x.view();
    let inner = split
        .inner
        .iter()
        .map(|s| FoldData::new(x, &design.y, &s.train, &s.eval))
        .collect::<Result<Vec<_>>>()?;
    let outer = FoldData::new(x, &design.y, &split.train, &split.test)?;
    let fold = split.fold as u64;
    let per_grid = grids
        .iter()
        .map(|grid| {
            let family_tag = grid.family() as u64;
            let selection = select_on_folds(&inner, grid, settings.solver, derive_seed(settings.seed, &[2, fold, family_tag]))?;
            let (pred, model) = outer.fit_predict(&selection.best, settings.solver, derive_seed(settings.seed, &[3, fold, family_tag]))?;
            let confusion = ConfusionMatrix::from_predictions(&outer.eval_y, &pred)?;
            let outcome = FoldOutcome {
                fold: split.fold,
                n_train: split.train.len(),
                n_test: split.test.len(),
                chosen: selection.best,
                inner_scores: selection.scores,
                confusion,
                balanced_accuracy: balanced_accuracy(&confusion).ok(),
            };
            Ok((outcome, settings.keep_models.then_some(model)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OuterResult { per_grid })
}

/// Nested CV for several model families over the same splits; one outcome
/// per grid, in grid order.
pub fn nested_cv_design(design: &Design, grids: &[Grid], settings: &CvSettings) -> Result<Vec<NestedOutcome>> {
    if settings.k_outer < 2 || settings.k_inner < 2 {
        return Err(Error::InvalidParams("k_outer and k_inner must be at least 2".into()));
    }
    require_both_classes(&design.y)?;
    let plan = plan_nested_splits(&design.groups, settings.k_outer, settings.k_inner, settings.seed)?;
    audit_group_disjointness(&design.groups, &plan)?;

    let results = plan
        .outer
        .par_iter()
        .map(|split| run_outer(design, split, grids, settings))
        .collect::<Result<Vec<_>>>()?;

    let mut per_grid: Vec<(Vec<FoldOutcome>, Vec<TrainedModel>)> = grids.iter().map(|_| Default::default()).collect();
    for r in results {
        for (slot, (outcome, model)) in per_grid.iter_mut().zip(r.per_grid) {
            slot.0.push(outcome);
            slot.1.extend(model);
        }
    }
    grids
        .iter()
        .zip(per_grid)
        .map(|(grid, (folds, models))| {
            Ok(NestedOutcome {
                report: EvalReport::assemble(design, grid.family(), settings, folds)?,
                models,
            })
        })
        .collect()
}

pub fn nested_cv(corpus: &Corpus, role: Role, fusion: FusionMode, grid: &Grid, settings: &CvSettings) -> Result<EvalReport> {
    let design = Design::build(corpus, role, fusion)?;
    let mut out = nested_cv_design(&design, std::slice::from_ref(grid), settings)?;
    Ok(out.remove(0).report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Evaluated,
    /// No records of this role in the corpus.
    MissingRole,
    /// Records exist but none has the partner record this mode needs.
    NoEligibleDyads,
}

#[derive(Clone, Debug)]
pub struct MatrixCell {
    pub role: Role,
    pub mode: FusionMode,
    pub status: CellStatus,
    pub outcomes: Vec<NestedOutcome>,
}

impl MatrixCell {
    /// Family with the highest pooled balanced accuracy; first in grid order on ties.
    pub fn best(&self) -> Option<&EvalReport> {
        let mut best: Option<&EvalReport> = None;
        for o in &self.outcomes {
            if best.is_none_or(|b| o.report.pooled_balanced_accuracy > b.pooled_balanced_accuracy) {
                best = Some(&o.report);
            }
        }
        best
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentMatrix {
    pub seed: u64,
    pub cells: Vec<MatrixCell>,
}

impl ExperimentMatrix {
    pub fn cell(&self, role: Role, mode: FusionMode) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.role == role && c.mode == mode)
    }

    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.cells.iter().flat_map(|c| c.outcomes.iter().map(|o| &o.report))
    }
}

/// Runs every (role, mode) cell for every grid under one seed.
pub fn run_experiment_matrix(
    corpus: &Corpus,
    roles: &[Role],
    modes: &[FusionMode],
    grids: &[Grid],
    settings: &CvSettings,
) -> Result<ExperimentMatrix> {
    let cells: Vec<(Role, FusionMode)> = roles.iter().flat_map(|&r| modes.iter().map(move |&m| (r, m))).collect();
    let cells = cells
        .par_iter()
        .map(|&(role, mode)| {
            let empty = |status| MatrixCell {
                role,
                mode,
                status,
                outcomes: Vec::new(),
            };
            if corpus.partners(role).next().is_none() {
                return Ok(empty(CellStatus::MissingRole));
            }
            let design = match Design::build(corpus, role, mode) {
                Ok(d) => d,
                Err(Error::EmptyDesignMatrix { .. }) => return Ok(empty(CellStatus::NoEligibleDyads)),
                Err(e) => return Err(e),
            };
            Ok(MatrixCell {
                role,
                mode,
                status: CellStatus::Evaluated,
                outcomes: nested_cv_design(&design, grids, settings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentMatrix {
        seed: settings.seed,
        cells,
    })
}
