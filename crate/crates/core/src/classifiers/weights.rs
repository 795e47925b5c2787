use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class penalty multipliers, indexed by label (0 = negative, 1 = positive).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    weights: [f64; 2],
}

impl ClassWeights {
    pub fn new(negative: f64, positive: f64) -> Result<Self> {
        for w in [negative, positive] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "class weight must be positive and finite, got {w}"
                )));
            }
        }
        Ok(Self {
            weights: [negative, positive],
        })
    }

    pub fn uniform() -> Self {
        Self { weights: [1.0, 1.0] }
    }

    pub fn get(&self, class: u8) -> f64 {
        self.weights[class as usize]
    }
}

/// Counts per class; labels must be 0 or 1.
pub(crate) fn class_counts(labels: &[u8]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &y in labels {
        counts[y as usize] += 1;
    }
    counts
}

pub(crate) fn require_both_classes(labels: &[u8]) -> Result<[usize; 2]> {
    let counts = class_counts(labels);
    match counts {
        [0, _] => Err(Error::SingleClassInput(1)),
        [_, 0] => Err(Error::SingleClassInput(0)),
        _ => Ok(counts),
    }
}

/// "Balanced" weights: `n / (2 * n_c)` for each class `c`.
pub fn compute_class_weights(labels: &[u8]) -> Result<ClassWeights> {
    let counts = require_both_classes(labels)?;
    let n = labels.len() as f64;
    ClassWeights::new(n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64))
}
