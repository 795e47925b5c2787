use std::fmt;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::forest::{train_forest, FeaturesPerSplit, ForestModel, ForestParams};
use super::kernel::Kernel;
use super::standardize::Standardizer;
use super::svm::{fit_with_kernel_matrix, SolverSettings, SvmModel};
use super::weights::{compute_class_weights, ClassWeights};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    LinearSvm,
    RbfSvm,
    RandomForest,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::LinearSvm, ModelFamily::RbfSvm, ModelFamily::RandomForest];

    pub fn key(self) -> &'static str {
        match self {
            ModelFamily::LinearSvm => "linear_svm",
            ModelFamily::RbfSvm => "rbf_svm",
            ModelFamily::RandomForest => "random_forest",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.key() == key)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One point of a hyperparameter grid.
///
/// For the RBF family `g` is dimension-free: the kernel width used at fit
/// time is `gamma = g / (d * var(X_train))` on standardized features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperParams {
    LinearSvm {
        c: f64,
    },
    RbfSvm {
        c: f64,
        g: f64,
    },
    RandomForest {
        n_trees: usize,
        max_depth: Option<usize>,
        features_per_split: FeaturesPerSplit,
    },
}

impl HyperParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            HyperParams::LinearSvm { .. } => ModelFamily::LinearSvm,
            HyperParams::RbfSvm { .. } => ModelFamily::RbfSvm,
            HyperParams::RandomForest { .. } => ModelFamily::RandomForest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            HyperParams::LinearSvm { c } => positive("C", c),
            HyperParams::RbfSvm { c, g } => positive("C", c).and(positive("g", g)),
            HyperParams::RandomForest {
                n_trees,
                max_depth,
                features_per_split,
            } => {
                if n_trees == 0 || max_depth == Some(0) || features_per_split == FeaturesPerSplit::Count(0) {
                    Err(Error::InvalidParams(format!("invalid forest parameters {self}")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::LinearSvm { c } => write!(f, "C={c}"),
            HyperParams::RbfSvm { c, g } => write!(f, "C={c} g={g}"),
            HyperParams::RandomForest {
                n_trees,
                max_depth,
                features_per_split,
            } => {
                write!(f, "trees={n_trees} depth=")?;
                match max_depth {
                    Some(d) => write!(f, "{d}")?,
                    None => f.write_str("none")?,
                }
                match features_per_split {
                    FeaturesPerSplit::Sqrt => f.write_str(" mtry=sqrt"),
                    FeaturesPerSplit::Count(k) => write!(f, " mtry={k}"),
                }
            }
        }
    }
}

/// Variance of every entry of a matrix around its grand mean.
pub fn overall_variance(x: ArrayView2<f64>) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mean = x.sum() / n as f64;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// Resolves the dimension-free width `g` against standardized training data.
pub fn rbf_gamma(g: f64, x_std: ArrayView2<f64>) -> f64 {
    let d = x_std.ncols().max(1) as f64;
    let var = overall_variance(x_std);
    if var > 0.0 {
        g / (d * var)
    } else {
        g / d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub solver: SolverSettings,
    /// Seed for stochastic families.
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Svm(SvmModel),
    Forest(ForestModel),
}

/// A fitted classifier together with the scaling learned on its training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: ModelFamily,
    pub hyper: HyperParams,
    pub weights: ClassWeights,
    pub standardizer: Standardizer,
    pub params: ModelParams,
}

pub(crate) fn forest_params(hyper: &HyperParams, seed: u64) -> Option<ForestParams> {
    match *hyper {
        HyperParams::RandomForest {
            n_trees,
            max_depth,
            features_per_split,
        } => Some(ForestParams {
            n_trees,
            max_depth,
            features_per_split,
            seed,
            ..ForestParams::default()
        }),
        _ => None,
    }
}

impl TrainedModel {
    /// Standardizes `x`, computes balanced class weights from `labels` and
    /// fits the family named by `hyper`.
    pub fn fit(x: ArrayView2<f64>, labels: &[u8], hyper: &HyperParams, settings: &FitSettings) -> Result<Self> {
        hyper.validate()?;
        let weights = compute_class_weights(labels)?;
        let standardizer = Standardizer::fit(x)?;
        let z = standardizer.transform(x)?;
        let params = match *hyper {
            HyperParams::LinearSvm { c } => {
                let k = Kernel::Linear.matrix(z.view());
                let (m, _) = fit_with_kernel_matrix(z.view(), k.view(), labels, Kernel::Linear, c, &weights, settings.solver)?;
                ModelParams::Svm(m)
            }
            HyperParams::RbfSvm { c, g } => {
                let kernel = Kernel::Rbf {
                    gamma: rbf_gamma(g, z.view()),
                };
                let k = kernel.matrix(z.view());
                let (m, _) = fit_with_kernel_matrix(z.view(), k.view(), labels, kernel, c, &weights, settings.solver)?;
                ModelParams::Svm(m)
            }
            HyperParams::RandomForest { .. } => {
                let p = forest_params(hyper, settings.seed).expect("forest hyperparameters");
                ModelParams::Forest(train_forest(z.view(), labels, &weights, &p)?)
            }
        };
        Ok(Self {
            family: hyper.family(),
            hyper: *hyper,
            weights,
            standardizer,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        let z = self.standardizer.transform(x)?;
        match &self.params {
            ModelParams::Svm(m) => m.predict(z.view()),
            ModelParams::Forest(f) => f.predict(z.view()),
        }
    }

    /// SVM decision values on raw rows; `None` for forests.
    pub fn decision_values(&self, x: ArrayView2<f64>) -> Result<Option<Vec<f64>>> {
        let z = self.standardizer.transform(x)?;
        match &self.params {
            ModelParams::Svm(m) => m.decision_values(z.view()).map(Some),
            ModelParams::Forest(_) => Ok(None),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        let params_dim = match &model.params {
            ModelParams::Svm(m) => m.dim(),
            ModelParams::Forest(f) => Some(f.dim),
        };
        if let Some(d) = params_dim {
            if d != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    actual: d,
                });
            }
        }
        Ok(model)
    }
}
