use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature z-scoring learned from a training partition.
///
/// Features that are constant on the training rows have no scale and are
/// mapped to 0 for every input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    /// `None` marks a feature with zero training spread.
    scale: Vec<Option<f64>>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidParams("cannot standardize zero rows".into()));
        }
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let m = col.sum() / n as f64;
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let s = if lo == hi {
                None
            } else {
                let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                Some(var.sqrt())
            };
            mean.push(m);
            scale.push(s);
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[Option<f64>] {
        &self.scale
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            Zip::from(&mut row)
                .and(&self.mean[..])
                .and(&self.scale[..])
                .for_each(|v, &m, &s| {
                    *v = match s {
                        Some(s) => (*v - m) / s,
                        None => 0.0,
                    }
                });
        }
        Ok(out)
    }
}
