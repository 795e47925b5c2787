//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use dyad_core::data::{BlockKind, Corpus, DyadRecord, FeatureVector, MdmqItems, PartnerRecord, Provenance, Role};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting; `None` when (near) singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    /// Offset `b` of `f(x) = sum(a_j y_j K(x_j, x)) + b`.
    pub bias: f64,
}

/// `0.5 a'Qa - sum(a)` with `Q = (y y') * K`.
pub fn objective(k: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Minimizes the SVM dual by enumerating every assignment of the variables
/// to {at 0, at upper bound, free}. For each assignment the free variables
/// solve the equality-constrained KKT system; feasible candidates are kept
/// and the lowest objective wins. Exponential; for n <= 8 only.
pub fn brute_force_dual(k: &[Vec<f64>], y: &[f64], upper: &[f64]) -> QpSolution {
    let n = y.len();
    assert!(n <= 10);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut alpha = vec![0.0; n];
        for i in 0..n {
            if state[i] == 1 {
                alpha[i] = upper[i];
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if !free.is_empty() {
            // [Q_FF y_F; y_F' 0] [a_F; nu] = [1 - Q_FB a_B; -y_B' a_B]
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    a[r][c] = y[i] * y[j] * k[i][j];
                }
                a[r][m] = y[i];
                a[m][r] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|j| state[*j] != 2).map(|j| y[i] * y[j] * k[i][j] * alpha[j]).sum::<f64>();
            }
            rhs[m] = -(0..n).filter(|j| state[*j] != 2).map(|j| y[j] * alpha[j]).sum::<f64>();
            let Some(sol) = solve_linear(a, rhs) else { continue };
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                if v < -1e-12 || v > upper[i] + 1e-12 {
                    ok = false;
                    break;
                }
                alpha[i] = v.clamp(0.0, upper[i]);
            }
            if !ok {
                continue;
            }
        }
        let eq: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
        if eq.abs() > 1e-9 {
            continue;
        }
        let obj = objective(k, y, &alpha);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, alpha));
        }
    }
    let (objective, alpha) = best.expect("alpha = 0 is always feasible");
    let bias = kkt_bias(k, y, upper, &alpha);
    QpSolution { alpha, objective, bias }
}

/// Offset from the margin conditions: free vectors pin `b` exactly (their
/// mean is used); otherwise `b` may lie anywhere between the bounds the
/// bounded vectors impose and the midpoint is taken.
pub fn kkt_bias(k: &[Vec<f64>], y: &[f64], upper: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let s: Vec<f64> = (0..n).map(|i| (0..n).map(|j| alpha[j] * y[j] * k[j][i]).sum()).collect();
    let eps = 1e-12;
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > eps && alpha[i] < upper[i] - eps).collect();
    if !free.is_empty() {
        return free.iter().map(|&i| y[i] - s[i]).sum::<f64>() / free.len() as f64;
    }
    let mut low = f64::NEG_INFINITY;
    let mut high = f64::INFINITY;
    for i in 0..n {
        let at_zero = alpha[i] <= eps;
        // y_i (s_i + b) >= 1 at zero, <= 1 at the upper bound
        let bound = y[i] - s[i];
        let lower_side = (y[i] > 0.0) == at_zero;
        if lower_side {
            low = low.max(bound);
        } else {
            high = high.min(bound);
        }
    }
    (low + high) / 2.0
}

pub fn oracle_decision(kernel_row: &[f64], y: &[f64], sol: &QpSolution) -> f64 {
    kernel_row.iter().zip(y).zip(&sol.alpha).map(|((k, y), a)| a * y * k).sum::<f64>() + sol.bias
}

pub fn linear_kernel(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn rbf_kernel(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    (-gamma * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
}

pub fn gram(points: &[Vec<f64>], kernel: impl Fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    points.iter().map(|u| points.iter().map(|v| kernel(u, v)).collect()).collect()
}

pub fn to_array(points: &[Vec<f64>]) -> Array2<f64> {
    let d = points.first().map_or(0, Vec::len);
    Array2::from_shape_fn((points.len(), d), |(i, j)| points[i][j])
}

/// Predicts the class whose training mean is closest.
pub fn nearest_centroid(train: ArrayView2<f64>, labels: &[u8], test: ArrayView2<f64>) -> Vec<u8> {
    let d = train.ncols();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0.0; 2];
    for (row, &l) in train.rows().into_iter().zip(labels) {
        counts[l as usize] += 1.0;
        for (s, v) in sums[l as usize].iter_mut().zip(row) {
            *s += v;
        }
    }
    let centroids: Vec<Vec<f64>> = (0..2).map(|c| sums[c].iter().map(|s| s / counts[c]).collect()).collect();
    test.rows()
        .into_iter()
        .map(|row| {
            let dist = |c: &Vec<f64>| c.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (dist(&centroids[1]) < dist(&centroids[0])) as u8
        })
        .collect()
}

/// Mean of the two class recalls, counted directly.
pub fn mean_recall(truth: &[u8], predicted: &[u8]) -> f64 {
    let recall = |c: u8| {
        let total = truth.iter().filter(|&&t| t == c).count();
        let hit = truth.iter().zip(predicted).filter(|(&t, &p)| t == c && p == c).count();
        hit as f64 / total as f64
    };
    (recall(0) + recall(1)) / 2.0
}

/// A small corpus of random records; `male_only` leaves out every female.
pub fn random_corpus(n_couples: usize, seed: u64, male_only: bool) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |kind: BlockKind, rng: &mut ChaCha8Rng| {
        FeatureVector::new(kind, (0..kind.dim()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let dyads = (0..n_couples)
        .map(|c| {
            let id = format!("k{c:04}");
            let rec = |role: Role, rng: &mut ChaCha8Rng| {
                let ling = block(BlockKind::Linguistic, rng);
                let para = block(BlockKind::Paralinguistic, rng);
                let mdmq = MdmqItems::new(rng.random_range(1..=6), rng.random_range(1..=6)).unwrap();
                PartnerRecord::new(id.clone(), role, ling, para, mdmq).unwrap()
            };
            let male = rec(Role::Male, &mut rng);
            let female = rec(Role::Female, &mut rng);
            DyadRecord::new(id.clone(), Some(male), (!male_only).then_some(female)).unwrap()
        })
        .collect();
    Corpus::new(dyads, Provenance::Ingested, None).unwrap()
}
