mod support;

use dyad_core::classifiers::{dual_objective, solve_dual, train_svm, ClassWeights, Kernel, SolverSettings};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

fn tight() -> SolverSettings {
    SolverSettings {
        tol: 1e-10,
        ..Default::default()
    }
}

fn signed(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

#[test]
fn six_point_problem_matches_enumeration() {
    let points = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.5],
        vec![0.2, 1.4],
        vec![2.0, 2.0],
        vec![2.5, 1.2],
        vec![1.1, 2.6],
    ];
    let labels = [0u8, 0, 0, 1, 1, 1];
    let y = signed(&labels);
    for c in [0.05, 0.5, 5.0] {
        let upper = vec![c; 6];
        let k = gram(&points, linear_kernel);
        let oracle = brute_force_dual(&k, &y, &upper);
        let karr = to_array(&k);
        let sol = solve_dual(karr.view(), &y, &upper, tight()).unwrap();
        assert!((sol.objective - oracle.objective).abs() < 1e-6, "C={c}: {} vs {}", sol.objective, oracle.objective);
        assert!((dual_objective(karr.view(), &y, &sol.alpha) - sol.objective).abs() < 1e-9);
        assert!((-sol.rho - oracle.bias).abs() < 1e-5, "C={c}");
    }
}

#[test]
fn xor_needs_the_rbf_kernel() {
    let points = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [0u8, 0, 1, 1];
    let x = to_array(&points);
    let w = ClassWeights::uniform();

    let rbf = train_svm(x.view(), &labels, Kernel::Rbf { gamma: 1.0 }, 10.0, &w, tight()).unwrap();
    assert_eq!(rbf.predict(x.view()).unwrap(), labels);
    let oracle = brute_force_dual(&gram(&points, |u, v| rbf_kernel(1.0, u, v)), &signed(&labels), &[10.0; 4]);
    assert!((rbf.dual_objective - oracle.objective).abs() < 1e-6);

    let linear = train_svm(x.view(), &labels, Kernel::Linear, 10.0, &w, tight()).unwrap();
    assert_eq!(mean_recall(&labels, &linear.predict(x.view()).unwrap()), 0.5);
}

#[test]
fn class_weights_act_like_duplication() {
    // weight 2 on class 0 equals listing every class-0 point twice
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let n = 7;
        let points: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let c = rng.random_range(0.1..3.0);
        let weighted = train_svm(
            to_array(&points).view(),
            &labels,
            Kernel::Linear,
            c,
            &ClassWeights::new(2.0, 1.0).unwrap(),
            tight(),
        )
        .unwrap();

        let mut dup_points = points.clone();
        let mut dup_labels = labels.clone();
        for (p, &l) in points.iter().zip(&labels) {
            if l == 0 {
                dup_points.push(p.clone());
                dup_labels.push(0);
            }
        }
        let duplicated =
            train_svm(to_array(&dup_points).view(), &dup_labels, Kernel::Linear, c, &ClassWeights::uniform(), tight()).unwrap();

        assert!((weighted.dual_objective - duplicated.dual_objective).abs() < 1e-6);
        let probe = Array2::from_shape_fn((200, 2), |_| rng.random_range(-3.0..3.0));
        let a = weighted.decision_values(probe.view()).unwrap();
        let b = duplicated.decision_values(probe.view()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-4, "{u} vs {v}");
        }
    }
}

#[test]
fn rescaling_inputs_with_c_over_a_squared_keeps_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let n = 12;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = x.rows().into_iter().map(|r| (r[0] + 0.3 * r[1] > 0.1) as u8).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            continue;
        }
        let a = rng.random_range(0.2..5.0);
        let c = rng.random_range(0.1..10.0);
        let w = ClassWeights::new(1.5, 0.8).unwrap();
        let base = train_svm(x.view(), &labels, Kernel::Linear, c, &w, tight()).unwrap();
        let scaled_x = &x * a;
        let scaled = train_svm(scaled_x.view(), &labels, Kernel::Linear, c / (a * a), &w, tight()).unwrap();
        let probe = Array2::from_shape_fn((300, 3), |_| rng.random_range(-2.0..2.0));
        let d1 = base.decision_values(probe.view()).unwrap();
        let d2 = scaled.decision_values((&probe * a).view()).unwrap();
        for (u, v) in d1.iter().zip(&d2) {
            assert!((u - v).abs() < 1e-4, "{u} vs {v}");
        }
    }
}
