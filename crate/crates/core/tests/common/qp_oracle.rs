//! Random convex QP generation and a brute-force active-set oracle.

use nalgebra::{DMatrix, DVector};
use pcsmpc::qp::QuadraticProgram;
use rand::Rng;

/// Random QP with a strictly feasible interior point. When the Hessian is
/// rank deficient a box `|xᵢ| ≤ 10` keeps the problem bounded.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m_max: usize) -> QuadraticProgram {
    let singular = rng.random_bool(0.3);
    let rank = if singular {
        rng.random_range(0..n.max(1))
    } else {
        n
    };
    let mut h = DMatrix::<f64>::zeros(n, n);
    if rank > 0 {
        let a = DMatrix::from_fn(rank, n, |_, _| rng.random_range(-1.0..1.0));
        h = a.transpose() * a;
    }
    if !singular {
        h += DMatrix::identity(n, n) * rng.random_range(0.01..1.0);
    }
    let f = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let interior = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    if singular {
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut r = vec![0.0; n];
                r[i] = sign;
                rows.push(r);
                rhs.push(10.0);
            }
        }
    }
    let extra = rng.random_range(0..=m_max.saturating_sub(rows.len()));
    for _ in 0..extra {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gx: f64 = r.iter().zip(interior.iter()).map(|(a, b)| a * b).sum();
        rhs.push(gx + rng.random_range(0.05..1.0));
        rows.push(r);
    }
    let m = rows.len();
    let g = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    QuadraticProgram::from_dense(h, f, g, DVector::from_vec(rhs)).unwrap()
}

/// Minimum objective over all faces: for every subset of at most `n`
/// constraints held as equalities, solve the equality-constrained problem
/// and keep the best primal-feasible minimiser. For a convex problem with a
/// positive definite Hessian this is the global optimum.
pub fn active_set_oracle(qp: &QuadraticProgram) -> Option<(DVector<f64>, f64)> {
    let (n, m) = (qp.n(), qp.m());
    let g = qp.g_ineq.to_dense();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > n {
            continue;
        }
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&qp.gradient);
        for (a, &i) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + a, j)] = g[(i, j)];
                kkt[(j, n + a)] = g[(i, j)];
            }
            rhs[n + a] = qp.h_ineq[i];
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let resid = (&kkt * &sol - &rhs).amax();
        if !resid.is_finite() || resid > 1e-8 * (1.0 + rhs.amax()) {
            continue;
        }
        let viol = (&g * &x - &qp.h_ineq).max();
        if m > 0 && viol > 1e-9 {
            continue;
        }
        let obj = qp.objective(&x);
        if best.as_ref().is_none_or(|b| obj < b.1) {
            best = Some((x, obj));
        }
    }
    best
}

/// Tiny strictly convex QP for oracle comparison.
pub fn tiny_qp<R: Rng>(rng: &mut R) -> QuadraticProgram {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(0..=10);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = a.transpose() * a + DMatrix::identity(n, n) * rng.random_range(0.05..1.0);
    let f = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let interior = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let h_ineq = &g * &interior + DVector::from_fn(m, |_, _| rng.random_range(0.05..1.0));
    QuadraticProgram::from_dense(h, f, g, h_ineq).unwrap()
}
