use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma * |u - v|^2)`
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => u.dot(&v),
            Kernel::Rbf { gamma } => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Kernel between every row of `a` and every row of `b`.
    pub fn cross(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        let gram = a.dot(&b.t());
        self.from_inner_products(gram, &row_sq_norms(a), &row_sq_norms(b))
    }

    pub fn matrix(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let gram = x.dot(&x.t());
        let norms = gram.diag().to_owned();
        let mut k = self.from_inner_products(gram, &norms, &norms);
        if matches!(self, Kernel::Rbf { .. }) {
            k.diag_mut().fill(1.0);
        }
        k
    }

    /// Turns a matrix of inner products into kernel values given the squared
    /// norms of the row and column points.
    pub(crate) fn from_inner_products(
        &self,
        mut gram: Array2<f64>,
        row_norms: &Array1<f64>,
        col_norms: &Array1<f64>,
    ) -> Array2<f64> {
        if let Kernel::Rbf { gamma } = *self {
            for (mut row, &ri) in gram.axis_iter_mut(Axis(0)).zip(row_norms) {
                for (g, &cj) in row.iter_mut().zip(col_norms) {
                    let d2 = (ri + cj - 2.0 * *g).max(0.0);
                    *g = (-gamma * d2).exp();
                }
            }
        }
        gram
    }
}

pub(crate) fn row_sq_norms(x: ArrayView2<f64>) -> Array1<f64> {
    x.rows().into_iter().map(|r| r.dot(&r)).collect()
}
