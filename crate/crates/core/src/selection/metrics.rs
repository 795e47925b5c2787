use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true][predicted]`, classes 0 (negative) and 1 (positive).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut cm = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t > 1 || p > 1 {
                return Err(Error::InvalidParams(format!("labels must be 0 or 1, got ({t}, {p})")));
            }
            cm.counts[t as usize][p as usize] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn class_total(&self, class: u8) -> u64 {
        self.counts[class as usize].iter().sum()
    }

    pub fn recall(&self, class: u8) -> Result<f64> {
        let total = self.class_total(class);
        if total == 0 {
            return Err(Error::UndefinedRecall(class));
        }
        Ok(self.counts[class as usize][class as usize] as f64 / total as f64)
    }

    /// Two-by-two CSV with true classes as rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted,0,1\n");
        for t in 0..2 {
            let _ = writeln!(out, "{t},{},{}", self.counts[t][0], self.counts[t][1]);
        }
        out
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for t in 0..2 {
            for p in 0..2 {
                self.counts[t][p] += rhs.counts[t][p];
            }
        }
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Unweighted mean of the two per-class recalls.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    Ok((cm.recall(0)? + cm.recall(1)?) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(balanced_accuracy(&ConfusionMatrix::new([[10, 0], [0, 10]])).unwrap(), 1.0);
        let ba = balanced_accuracy(&ConfusionMatrix::new([[6, 4], [2, 8]])).unwrap();
        assert!((ba - 0.7).abs() < 1e-15);
    }

    #[test]
    fn all_positive_predictor_is_chance() {
        let truth: Vec<u8> = (0..341).map(|i| (i >= 32) as u8).collect();
        let pred = vec![1u8; truth.len()];
        let cm = ConfusionMatrix::from_predictions(&truth, &pred).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 0.5);
        assert_eq!(cm.total(), 341);
    }

    #[test]
    fn undefined_when_class_absent() {
        let cm = ConfusionMatrix::new([[0, 0], [3, 4]]);
        assert!(matches!(balanced_accuracy(&cm), Err(Error::UndefinedRecall(0))));
    }

    #[test]
    fn sums_and_csv() {
        let a = ConfusionMatrix::new([[1, 2], [3, 4]]);
        let b = ConfusionMatrix::new([[10, 0], [0, 1]]);
        let s: ConfusionMatrix = [a, b].into_iter().sum();
        assert_eq!(s.counts, [[11, 2], [3, 5]]);
        assert_eq!(s.to_csv(), "true\\predicted,0,1\n0,11,2\n1,3,5\n");
    }
}
