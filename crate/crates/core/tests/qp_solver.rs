mod common;

use common::qp_oracle::{active_set_oracle, random_qp, tiny_qp};
use nalgebra::{DMatrix, DVector};
use pcsmpc::qp::{solve, verify_kkt, QpStatus, QuadraticProgram};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn two_variable_three_constraint_instance_matches_oracle() {
    // min (x - 2)² + (y - 1)² + xy  s.t. x + y ≤ 1, x ≥ 0, y ≥ 0
    let qp = QuadraticProgram::from_dense(
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        DVector::from_vec(vec![4.0, 2.0]),
        DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
        DVector::from_vec(vec![1.0, 0.0, 0.0]),
    )
    .unwrap();
    let sol = solve(&qp, 1e-8, 50).unwrap();
    let (x_ref, obj_ref) = active_set_oracle(&qp).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    assert!((sol.x.clone() - x_ref).amax() < 1e-6);
    assert!((sol.objective - obj_ref).abs() <= 1e-6 * obj_ref.abs().max(1.0));
}

#[test]
fn verify_kkt_flags_perturbation_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let qp = tiny_qp(&mut rng);
    let sol = solve(&qp, 1e-9, 50).unwrap();
    assert!(verify_kkt(&qp, &sol, 1e-6).passed);

    let direction = DVector::from_element(qp.n(), 1.0);
    let residual_at = |eps: f64| {
        let mut p = sol.clone();
        p.x += &direction * eps;
        verify_kkt(&qp, &p, 1e-6).residuals.stationarity
    };
    assert!(residual_at(1e-3) > 1e-6);
    // the perturbation term dominates, so doubling it doubles the residual
    let (r1, r2) = (residual_at(1e-2), residual_at(2e-2));
    assert!((r2 / r1 - 2.0).abs() < 0.01, "ratio {}", r2 / r1);
}

#[test]
fn text_dump_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut qp = random_qp(&mut rng, 4, 6);
    qp.labels = (0..4).map(|i| format!("x{i}")).collect();
    let back = QuadraticProgram::from_text(&qp.to_text()).unwrap();
    assert_eq!(back, qp);
    assert!(QuadraticProgram::from_text("qp n 2").is_err());
}

#[test]
fn dimension_mismatch_rejected() {
    let r = QuadraticProgram::from_dense(
        DMatrix::identity(2, 2),
        DVector::zeros(3),
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
    );
    assert!(r.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_qps_converge(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 30) as usize;
        let qp = random_qp(&mut rng, n, 60);
        let sol = solve(&qp, 1e-6, 50).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        prop_assert!(verify_kkt(&qp, &sol, 1e-6).passed);
    }

    #[test]
    fn tiny_qps_match_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = tiny_qp(&mut rng);
        let sol = solve(&qp, 1e-6, 50).unwrap();
        let (_, obj) = active_set_oracle(&qp).unwrap();
        prop_assert!((sol.objective - obj).abs() <= 1e-6 * obj.abs().max(1.0));
    }

    #[test]
    fn argmin_invariant_to_objective_scaling(seed in any::<u64>(), k in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = tiny_qp(&mut rng);
        let a = solve(&qp, 1e-8, 50).unwrap();
        let b = solve(&qp.scaled_objective(k), 1e-8, 50).unwrap();
        prop_assert!((a.x - b.x).amax() <= 1e-6);
    }

    #[test]
    fn repeated_solves_are_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = random_qp(&mut rng, 8, 16);
        let a = solve(&qp, 1e-6, 50).unwrap();
        let b = solve(&qp, 1e-6, 50).unwrap();
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.lambda, b.lambda);
    }
}
