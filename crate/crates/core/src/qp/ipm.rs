//! Mehrotra predictor-corrector interior-point method.
//!
//! Newton systems are reduced to the normal equations
//! `(H + Gᵀ W G) Δx = r` with `W = diag(λ / s)`. Columns whose Hessian row is
//! diagonal and which never share a constraint row with another such column
//! (typically slack variables) contribute a diagonal block and are eliminated
//! by a Schur complement before the dense Cholesky factorisation.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{kkt_residuals, KktResiduals, QpSolution, QpStatus, QuadraticProgram};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Static diagonal regularisation added to the Hessian.
    pub regularization: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50,
            regularization: 1e-9,
        }
    }
}

const STEP_FRACTION: f64 = 0.99;
const REFINEMENT_STEPS: usize = 2;
/// Iterations without a new best residual before giving up early.
const STALL_LIMIT: usize = 12;

pub fn solve(qp: &QuadraticProgram, tol: f64, max_iter: usize) -> Result<QpSolution> {
    solve_with(
        qp,
        &SolverSettings {
            tol,
            max_iter,
            ..SolverSettings::default()
        },
    )
}

pub fn solve_with(qp: &QuadraticProgram, settings: &SolverSettings) -> Result<QpSolution> {
    qp.validate()?;
    if !(settings.tol > 0.0) {
        return Err(Error::config("solver tolerance must be positive"));
    }
    let start = Instant::now();
    let (n, m) = (qp.n(), qp.m());
    // Iterate on an objective scaled to unit magnitude; termination is
    // judged on the original problem with `λ / scale`.
    let scale = 1.0 / qp.hessian.amax().max(qp.gradient.amax()).max(1.0);
    let original = qp;
    let scaled = QuadraticProgram {
        hessian: &qp.hessian * scale,
        gradient: &qp.gradient * scale,
        ..qp.clone()
    };
    let qp = &scaled;
    let residuals =
        |x: &DVector<f64>, lam: &DVector<f64>| kkt_residuals(original, x, &(lam / scale));
    let g = &qp.g_ineq;
    let h = &qp.h_ineq;
    let mut sys = NormalSystem::new(qp, settings.regularization);

    // Starting point from the KKT system with unit scaling, shifted into
    // the positive orthant.
    let ones = DVector::from_element(m, 1.0);
    sys.factor(&ones)?;
    let mut x = sys.solve_refined(&(&qp.gradient + g.tr_mul_vec(h)), &ones);
    let gx = g.mul_vec(&x);
    let mut s = h - &gx;
    let mut lam = &gx - h;
    balance_start(&mut s, &mut lam);

    let mut best = Best::new(&x, &lam, residuals(&x, &lam), 0);
    let mut status = QpStatus::MaxIterations;
    let mut iterations = 0;
    let mut stalled = 0;

    for iter in 0..=settings.max_iter {
        let kkt = residuals(&x, &lam);
        if !kkt.max().is_finite() {
            break;
        }
        if best.offer(&x, &lam, kkt, iter) {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > STALL_LIMIT {
                break;
            }
        }
        if kkt.within(settings.tol) {
            status = QpStatus::Optimal;
            best = Best::new(&x, &lam, kkt, iter);
            break;
        }
        if iter == settings.max_iter {
            break;
        }
        iterations = iter + 1;

        let r_d = &qp.hessian * &x - &qp.gradient + g.tr_mul_vec(&lam);
        if m == 0 {
            let dx = sys.solve_refined(&(-r_d), &ones);
            x += dx;
            continue;
        }
        if farkas_certificate(qp, &lam, settings.tol) {
            status = QpStatus::Infeasible;
            break;
        }
        let r_p = g.mul_vec(&x) + &s - h;
        let mu = s.dot(&lam) / m as f64;
        let w = lam.component_div(&s);
        sys.factor(&w)?;

        // predictor
        let rc_aff = s.component_mul(&lam);
        let (_, dl_a, ds_a) = newton(&sys, g, &w, &s, &lam, &r_d, &r_p, &rc_aff);
        let alpha_aff = step_to_boundary(&s, &ds_a, &lam, &dl_a);
        let s_aff = &s + &ds_a * alpha_aff;
        let l_aff = &lam + &dl_a * alpha_aff;
        let mu_aff = s_aff.dot(&l_aff) / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        // Driving μ far below what termination needs only inflates `w`.
        let target = (sigma * mu).max(0.1 * settings.tol * scale);
        let rc = rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, target);
        let (dx, dl, ds) = newton(&sys, g, &w, &s, &lam, &r_d, &r_p, &rc);
        let alpha = (STEP_FRACTION * step_to_boundary(&s, &ds, &lam, &dl)).min(1.0);
        x += dx * alpha;
        s += ds * alpha;
        lam += dl * alpha;
        // keep the iterate strictly interior even after rounding
        for v in s.iter_mut().chain(lam.iter_mut()) {
            *v = v.max(1e-300);
        }
    }
    debug_assert_eq!(x.len(), n);

    let (x, lambda, kkt) = (best.x, best.lam, best.kkt);
    if status == QpStatus::MaxIterations && kkt.within(settings.tol) {
        status = QpStatus::Optimal;
    }
    Ok(QpSolution {
        objective: original.objective(&x),
        x,
        lambda: lambda / scale,
        status,
        kkt,
        iterations: if status == QpStatus::Optimal {
            best.iter
        } else {
            iterations
        },
        solve_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

struct Best {
    x: DVector<f64>,
    lam: DVector<f64>,
    kkt: KktResiduals,
    iter: usize,
}

impl Best {
    fn new(x: &DVector<f64>, lam: &DVector<f64>, kkt: KktResiduals, iter: usize) -> Self {
        Self {
            x: x.clone(),
            lam: lam.clone(),
            kkt,
            iter,
        }
    }

    /// Keeps the iterate if it improves on the best; true when it does.
    fn offer(
        &mut self,
        x: &DVector<f64>,
        lam: &DVector<f64>,
        kkt: KktResiduals,
        iter: usize,
    ) -> bool {
        if kkt.max() < self.kkt.max() || !self.kkt.max().is_finite() {
            *self = Self::new(x, lam, kkt, iter);
            true
        } else {
            false
        }
    }
}

/// Shifts slacks and multipliers into the interior so that both sides carry
/// comparable complementarity.
fn balance_start(s: &mut DVector<f64>, lam: &mut DVector<f64>) {
    if s.is_empty() {
        return;
    }
    s.add_scalar_mut((-1.5 * s.min()).max(0.0));
    lam.add_scalar_mut((-1.5 * lam.min()).max(0.0));
    let sl = s.dot(lam);
    if sl > 0.0 {
        let (ss, ls) = (s.sum(), lam.sum());
        s.add_scalar_mut(0.5 * sl / ls);
        lam.add_scalar_mut(0.5 * sl / ss);
    } else {
        s.add_scalar_mut(1.0);
        lam.add_scalar_mut(1.0);
    }
}

/// `λ ≥ 0` with `Gᵀλ ≈ 0` and `hᵀλ < 0` proves that `G x ≤ h` has no
/// solution.
fn farkas_certificate(qp: &QuadraticProgram, lam: &DVector<f64>, tol: f64) -> bool {
    let l1: f64 = lam.iter().sum();
    if !(l1 > 0.0) {
        return false;
    }
    let lh = lam / l1;
    let h_dot = qp.h_ineq.dot(&lh);
    if h_dot >= -tol {
        return false;
    }
    qp.g_ineq.tr_mul_vec(&lh).amax() <= 1e-6 * -h_dot
}

fn step_to_boundary(
    s: &DVector<f64>,
    ds: &DVector<f64>,
    l: &DVector<f64>,
    dl: &DVector<f64>,
) -> f64 {
    let mut alpha: f64 = 1.0;
    for (v, dv) in s.iter().zip(ds.iter()).chain(l.iter().zip(dl.iter())) {
        if *dv < 0.0 {
            alpha = alpha.min(-v / dv);
        }
    }
    alpha
}

/// Newton step for the residuals `(r_d, r_p, r_c)`, refined against the full
/// unreduced system because the reduced right-hand side loses precision once
/// `w` spans many decades.
#[allow(clippy::too_many_arguments)]
fn newton(
    sys: &NormalSystem<'_>,
    g: &super::SparseRows,
    w: &DVector<f64>,
    s: &DVector<f64>,
    lam: &DVector<f64>,
    r_d: &DVector<f64>,
    r_p: &DVector<f64>,
    r_c: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let (mut dx, mut dl, mut ds) = reduced_step(sys, g, w, s, r_d, r_p, r_c);
    for _ in 0..REFINEMENT_STEPS {
        let e_d = &sys.qp.hessian * &dx + g.tr_mul_vec(&dl) + r_d;
        let e_p = g.mul_vec(&dx) + &ds + r_p;
        let e_c = lam.component_mul(&ds) + s.component_mul(&dl) + r_c;
        let (cx, cl, cs) = reduced_step(sys, g, w, s, &e_d, &e_p, &e_c);
        dx -= cx;
        dl -= cl;
        ds -= cs;
    }
    (dx, dl, ds)
}

fn reduced_step(
    sys: &NormalSystem<'_>,
    g: &super::SparseRows,
    w: &DVector<f64>,
    s: &DVector<f64>,
    r_d: &DVector<f64>,
    r_p: &DVector<f64>,
    r_c: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let rc_s = r_c.component_div(s);
    let rhs = -r_d - g.tr_mul_vec(&(w.component_mul(r_p) - &rc_s));
    let dx = sys.solve_refined(&rhs, w);
    let gdx = g.mul_vec(&dx);
    let dl = w.component_mul(&(&gdx + r_p)) - rc_s;
    let ds = -r_p - gdx;
    (dx, dl, ds)
}

#[derive(Clone, Copy)]
enum Slot {
    Free(usize),
    Diag(usize),
}

struct NormalSystem<'a> {
    qp: &'a QuadraticProgram,
    reg: f64,
    free: Vec<usize>,
    diag: Vec<usize>,
    slot: Vec<Slot>,
    /// Distinct free-column patterns up to sign, and for each constraint row
    /// its pattern and sign (rows without free entries have none).
    patterns: Vec<Vec<(usize, f64)>>,
    row_pattern: Vec<Option<(usize, f64)>>,
    /// Eliminated columns whose coupled rows all share one pattern with unit
    /// coefficients; their rows are accounted for in closed form.
    folded: Vec<Option<usize>>,
    row_folded: Vec<bool>,
    /// Entries of each eliminated column: (row, coefficient).
    diag_rows: Vec<Vec<(usize, f64)>>,
    h_free: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    d: Vec<f64>,
    /// Sparse coupling between each eliminated column and the free block.
    v: Vec<Vec<(usize, f64)>>,
}

impl<'a> NormalSystem<'a> {
    fn new(qp: &'a QuadraticProgram, reg: f64) -> Self {
        let (n, m) = (qp.n(), qp.m());
        let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in qp.g_ineq.rows().enumerate() {
            for &(j, v) in row {
                col_rows[j].push((r, v));
            }
        }
        let mut is_diag = vec![false; n];
        let mut row_taken = vec![false; m];
        for j in (0..n).rev() {
            let off_diag = (0..n).any(|i| i != j && qp.hessian[(i, j)] != 0.0);
            if off_diag || col_rows[j].iter().any(|&(r, _)| row_taken[r]) {
                continue;
            }
            is_diag[j] = true;
            for &(r, _) in &col_rows[j] {
                row_taken[r] = true;
            }
        }
        let free: Vec<usize> = (0..n).filter(|&j| !is_diag[j]).collect();
        let diag: Vec<usize> = (0..n).filter(|&j| is_diag[j]).collect();
        let mut slot = vec![Slot::Free(0); n];
        for (k, &j) in free.iter().enumerate() {
            slot[j] = Slot::Free(k);
        }
        for (k, &j) in diag.iter().enumerate() {
            slot[j] = Slot::Diag(k);
        }
        let mut patterns: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut index: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        let mut row_pattern = Vec::with_capacity(m);
        for row in qp.g_ineq.rows() {
            let free_part: Vec<(usize, f64)> = row
                .iter()
                .filter_map(|&(j, v)| match slot[j] {
                    Slot::Free(k) => Some((k, v)),
                    Slot::Diag(_) => None,
                })
                .collect();
            let Some(&(_, first)) = free_part.first() else {
                row_pattern.push(None);
                continue;
            };
            let sign = first.signum();
            let canon: Vec<(usize, f64)> = free_part.iter().map(|&(k, v)| (k, v * sign)).collect();
            let key: Vec<(usize, u64)> = canon.iter().map(|&(k, v)| (k, v.to_bits())).collect();
            let p = *index.entry(key).or_insert_with(|| {
                patterns.push(canon);
                patterns.len() - 1
            });
            row_pattern.push(Some((p, sign)));
        }
        let diag_rows: Vec<Vec<(usize, f64)>> = diag
            .iter()
            .map(|&j| std::mem::take(&mut col_rows[j]))
            .collect();
        let mut row_folded = vec![false; m];
        let folded = diag_rows
            .iter()
            .map(|rows| {
                let coupled: Vec<(usize, f64, usize)> = rows
                    .iter()
                    .filter_map(|&(r, c)| row_pattern[r].map(|(p, _)| (r, c, p)))
                    .collect();
                let p0 = coupled.first()?.2;
                if !coupled.iter().all(|&(_, c, p)| p == p0 && c.abs() == 1.0) {
                    return None;
                }
                for &(r, _, _) in &coupled {
                    row_folded[r] = true;
                }
                Some(p0)
            })
            .collect();
        let h_free = qp.hessian.select_rows(&free).select_columns(&free);
        Self {
            qp,
            reg,
            d: vec![0.0; diag.len()],
            v: vec![Vec::new(); diag.len()],
            free,
            diag,
            slot,
            patterns,
            row_pattern,
            folded,
            row_folded,
            diag_rows,
            h_free,
            chol: None,
        }
    }

    /// Builds and factorises the Schur complement on the free columns. Only
    /// the lower triangle is assembled; the factorisation reads nothing else.
    fn factor(&mut self, w: &DVector<f64>) -> Result<()> {
        let nf = self.free.len();
        let mut s = self.h_free.clone();
        for i in 0..nf {
            s[(i, i)] += self.reg;
        }
        let mut pattern_w = vec![0.0; self.patterns.len()];
        for (r, p) in self.row_pattern.iter().enumerate() {
            if let (Some((p, _)), false) = (p, self.row_folded[r]) {
                pattern_w[*p] += w[r];
            }
        }
        let mut scratch = vec![0.0; nf];
        let mut touched: Vec<usize> = Vec::new();
        for k in 0..self.diag.len() {
            let j = self.diag[k];
            let mut d = self.qp.hessian[(j, j)] + self.reg;
            for &(r, c) in &self.diag_rows[k] {
                d += w[r] * c * c;
            }
            self.d[k] = d;

            // Common case: every coupled row shares one pattern and the
            // eliminated column enters with unit magnitude. The Schur term is
            // then a multiple of the pattern's outer product, folded into the
            // pattern weight in a cancellation-free form.
            let coupled: Vec<(usize, f64, usize, f64)> = self.diag_rows[k]
                .iter()
                .filter_map(|&(r, c)| self.row_pattern[r].map(|(p, sign)| (r, c, p, sign)))
                .collect();
            if let Some(p) = self.folded[k] {
                let (mut pos, mut neg) = (0.0, 0.0);
                for &(r, c, _, sign) in &coupled {
                    if c * sign > 0.0 {
                        pos += w[r];
                    } else {
                        neg += w[r];
                    }
                }
                let total = pos + neg;
                let alpha = pos - neg;
                let d0 = d - total;
                pattern_w[p] += (d0 * total + 4.0 * pos * neg) / d;
                self.v[k] = self.patterns[p]
                    .iter()
                    .map(|&(a, va)| (a, alpha * va))
                    .collect();
                continue;
            }

            touched.clear();
            for &(r, c, p, sign) in &coupled {
                for &(a, va) in &self.patterns[p] {
                    if !touched.contains(&a) {
                        touched.push(a);
                    }
                    scratch[a] += w[r] * c * sign * va;
                }
            }
            let v: Vec<(usize, f64)> = touched
                .iter()
                .map(|&a| (a, std::mem::take(&mut scratch[a])))
                .collect();
            for &(a, va) in &v {
                let scaled = va / d;
                for &(b, vb) in &v {
                    if a >= b {
                        s[(a, b)] -= scaled * vb;
                    }
                }
            }
            self.v[k] = v;
        }
        let data = s.as_mut_slice();
        for (p, &pw) in self.patterns.iter().zip(&pattern_w) {
            if pw == 0.0 {
                continue;
            }
            for &(a, va) in p {
                let scaled = pw * va;
                for &(b, vb) in p {
                    if a >= b {
                        data[a + b * nf] += scaled * vb;
                    }
                }
            }
        }
        let base = s.diagonal().amax().max(1.0);
        let mut shift = 0.0;
        for _ in 0..8 {
            let mut trial = s.clone();
            for i in 0..nf {
                trial[(i, i)] += shift;
            }
            if let Some(c) = trial.cholesky() {
                self.chol = Some(c);
                return Ok(());
            }
            shift = if shift == 0.0 {
                1e-12 * base
            } else {
                shift * 100.0
            };
        }
        Err(Error::Internal(
            "normal equations could not be factorised".into(),
        ))
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let chol = self.chol.as_ref().expect("factor() before solve()");
        let b_diag: Vec<f64> = self.diag.iter().map(|&j| b[j]).collect();
        let mut y = DVector::from_iterator(self.free.len(), self.free.iter().map(|&j| b[j]));
        for (k, v) in self.v.iter().enumerate() {
            let t = b_diag[k] / self.d[k];
            for &(a, va) in v {
                y[a] -= va * t;
            }
        }
        let dx_free = chol.solve(&y);
        let mut out = DVector::zeros(b.len());
        for (j, slot) in self.slot.iter().enumerate() {
            out[j] = match *slot {
                Slot::Free(k) => dx_free[k],
                Slot::Diag(k) => {
                    let dot: f64 = self.v[k].iter().map(|&(a, va)| va * dx_free[a]).sum();
                    (b_diag[k] - dot) / self.d[k]
                }
            };
        }
        out
    }

    /// `(H + Gᵀ W G) dx` without regularisation.
    fn apply(&self, dx: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let gdx = self.qp.g_ineq.mul_vec(dx);
        &self.qp.hessian * dx + self.qp.g_ineq.tr_mul_vec(&w.component_mul(&gdx))
    }

    fn solve_refined(&self, b: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut dx = self.solve(b);
        for _ in 0..REFINEMENT_STEPS {
            let r = b - self.apply(&dx, w);
            dx += self.solve(&r);
        }
        dx
    }
}
