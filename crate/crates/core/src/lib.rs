//! Valence prediction for couples from linguistic and paralinguistic features,
//! with optional fusion of the partner's features.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod labeling;
pub mod selection;
pub mod synth;

pub use data::{load_corpus, parse_corpus, save_corpus, write_corpus, Corpus, DyadRecord, PartnerRecord, Role};
pub use error::{Error, Result};
pub use fusion::{build_design_matrix, fuse_dyadic, fuse_multimodal, Design, FusionMode};
pub use labeling::{compute_valence_label, Valence, ValenceLabel};
pub use experiment::{run_experiment, ExperimentConfig};
pub use selection::{nested_cv, run_experiment_matrix, CvSettings, EvalReport, Grid};
pub use synth::{generate_corpus, paper_shaped_preset, SynthParams};
