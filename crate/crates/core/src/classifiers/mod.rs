//! Class-balanced linear SVM, RBF SVM and random forest.

pub mod forest;
pub mod kernel;
pub mod model;
pub mod standardize;
pub mod svm;
pub mod weights;

pub use forest::{train_forest, DecisionTree, FeaturesPerSplit, ForestModel, ForestParams};
pub use kernel::Kernel;
pub use model::{rbf_gamma, FitSettings, HyperParams, ModelFamily, ModelParams, TrainedModel};
pub use standardize::Standardizer;
pub use svm::{
    dual_objective, kkt_residual, solve_dual, train_svm, DualSolution, SolverSettings, SvmModel,
};
pub use weights::{compute_class_weights, ClassWeights};
