use serde::{Deserialize, Serialize};

use crate::classifiers::{FeaturesPerSplit, HyperParams, ModelFamily};
use crate::error::{Error, Result};

pub const DEFAULT_C: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_RBF_G: [f64; 3] = [0.1, 1.0, 10.0];

/// Candidate hyperparameters for one family, in canonical (tie-breaking) order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    family: ModelFamily,
    points: Vec<HyperParams>,
}

impl Grid {
    pub fn new(family: ModelFamily, points: Vec<HyperParams>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParams(format!("empty grid for {family}")));
        }
        for p in &points {
            if p.family() != family {
                return Err(Error::InvalidParams(format!(
                    "grid for {family} contains a {} point",
                    p.family()
                )));
            }
            p.validate()?;
        }
        Ok(Self { family, points })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn points(&self) -> &[HyperParams] {
        &self.points
    }

    pub fn default_for(family: ModelFamily) -> Self {
        let points = match family {
            ModelFamily::LinearSvm => DEFAULT_C.iter().map(|&c| HyperParams::LinearSvm { c }).collect(),
            ModelFamily::RbfSvm => DEFAULT_C
                .iter()
                .flat_map(|&c| DEFAULT_RBF_G.iter().map(move |&g| HyperParams::RbfSvm { c, g }))
                .collect(),
            ModelFamily::RandomForest => [None, Some(8)]
                .into_iter()
                .map(|max_depth| HyperParams::RandomForest {
                    n_trees: 100,
                    max_depth,
                    features_per_split: FeaturesPerSplit::Sqrt,
                })
                .collect(),
        };
        Self { family, points }
    }
}
