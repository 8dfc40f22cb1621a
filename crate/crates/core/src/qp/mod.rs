//! Convex quadratic programs and a primal-dual interior-point solver.
//!
//! Problems have the form
//!
//! ```text
//! minimise   ½ xᵀ H x − fᵀ x
//! subject to G x ≤ h
//! ```
//!
//! with `H` symmetric positive semidefinite. Equalities are expected to be
//! relaxed into pairs of inequalities by the caller.

mod ipm;
mod sparse;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use ipm::{solve, solve_with, SolverSettings};
pub use sparse::SparseRows;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub g_ineq: SparseRows,
    pub h_ineq: DVector<f64>,
    /// Optional column names, empty or one per column.
    pub labels: Vec<String>,
}

impl QuadraticProgram {
    pub fn new(
        hessian: DMatrix<f64>,
        gradient: DVector<f64>,
        g_ineq: SparseRows,
        h_ineq: DVector<f64>,
    ) -> Result<Self> {
        let qp = Self {
            hessian,
            gradient,
            g_ineq,
            h_ineq,
            labels: Vec::new(),
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn from_dense(
        hessian: DMatrix<f64>,
        gradient: DVector<f64>,
        g: DMatrix<f64>,
        h: DVector<f64>,
    ) -> Result<Self> {
        if g.ncols() != hessian.ncols() && g.nrows() > 0 {
            return Err(Error::Dimension(format!(
                "G has {} columns, H has {}",
                g.ncols(),
                hessian.ncols()
            )));
        }
        let mut rows = SparseRows::from_dense(&g);
        if g.nrows() == 0 {
            rows = SparseRows::new(hessian.ncols());
        }
        Self::new(hessian, gradient, rows, h)
    }

    pub fn n(&self) -> usize {
        self.gradient.len()
    }

    pub fn m(&self) -> usize {
        self.h_ineq.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gradient.len();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(Error::Dimension(format!(
                "H is {}x{}, expected {n}x{n}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if self.g_ineq.ncols() != n || self.g_ineq.nrows() != self.h_ineq.len() {
            return Err(Error::Dimension(format!(
                "G is {}x{}, h has {} rows, n = {n}",
                self.g_ineq.nrows(),
                self.g_ineq.ncols(),
                self.h_ineq.len()
            )));
        }
        if !self.labels.is_empty() && self.labels.len() != n {
            return Err(Error::Dimension("one label per column required".into()));
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.gradient.iter().all(|v| v.is_finite())
            && self.h_ineq.iter().all(|v| v.is_finite())
            && self
                .g_ineq
                .rows()
                .all(|r| r.iter().all(|e| e.1.is_finite()));
        if !finite {
            return Err(Error::Internal("QP data contains non-finite values".into()));
        }
        let scale = self.hessian.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.hessian[(i, j)] - self.hessian[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Internal(format!("H is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Positive semidefiniteness check by attempted Cholesky factorisation of
    /// a slightly shifted Hessian.
    pub fn check_psd(&self) -> Result<()> {
        let n = self.n();
        let shift = 1e-9 * self.hessian.amax().max(1.0);
        let shifted = &self.hessian + DMatrix::identity(n, n) * shift;
        if shifted.cholesky().is_none() {
            return Err(Error::Internal(
                "Hessian is not positive semidefinite".into(),
            ));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) - self.gradient.dot(x)
    }

    /// Same problem with the objective multiplied by `factor > 0`. The
    /// minimiser is unchanged, multipliers scale by `factor`.
    pub fn scaled_objective(&self, factor: f64) -> Self {
        Self {
            hessian: &self.hessian * factor,
            gradient: &self.gradient * factor,
            ..self.clone()
        }
    }

    /// Self-describing plain-text dump: dimensions, then row-major `H`, `f`,
    /// `G` and `h`.
    pub fn to_text(&self) -> String {
        let (n, m) = (self.n(), self.m());
        let mut s = String::new();
        let _ = writeln!(s, "qp n {n} m {m}");
        if !self.labels.is_empty() {
            let _ = writeln!(s, "labels {}", self.labels.join(" "));
        }
        let row = |s: &mut String, it: &mut dyn Iterator<Item = f64>| {
            let parts: Vec<String> = it.map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        };
        let _ = writeln!(s, "H");
        for i in 0..n {
            row(&mut s, &mut self.hessian.row(i).iter().copied());
        }
        let _ = writeln!(s, "f");
        row(&mut s, &mut self.gradient.iter().copied());
        let _ = writeln!(s, "G");
        let g = self.g_ineq.to_dense();
        for i in 0..m {
            row(&mut s, &mut g.row(i).iter().copied());
        }
        let _ = writeln!(s, "h");
        row(&mut s, &mut self.h_ineq.iter().copied());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let header: Vec<&str> = lines
            .first()
            .copied()
            .unwrap_or("")
            .split_whitespace()
            .collect();
        let (n, m) = match header.as_slice() {
            ["qp", "n", n, "m", m] => (
                n.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("n: {e}")))?,
                m.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("m: {e}")))?,
            ),
            _ => return Err(Error::Parse("missing 'qp n <n> m <m>' header".into())),
        };
        let mut pos = 1;
        let mut labels = Vec::new();
        if let Some(l) = lines.get(pos).and_then(|l| l.strip_prefix("labels ")) {
            labels = l.split_whitespace().map(String::from).collect();
            pos += 1;
        }
        let mut section = |name: &str, count: usize, width: usize| -> Result<Vec<f64>> {
            if lines.get(pos) != Some(&name) {
                return Err(Error::Parse(format!("expected section '{name}'")));
            }
            pos += 1;
            let mut values = Vec::with_capacity(count * width);
            for _ in 0..count {
                let line = lines
                    .get(pos)
                    .ok_or_else(|| Error::Parse(format!("section {name} truncated")))?;
                pos += 1;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("{name}: {e}")))
                    })
                    .collect::<Result<_>>()?;
                if row.len() != width {
                    return Err(Error::Parse(format!(
                        "{name}: row of length {} where {width} expected",
                        row.len()
                    )));
                }
                values.extend(row);
            }
            Ok(values)
        };
        let h = section("H", n, n)?;
        // empty vectors are written as an empty line, which the filter drops
        let f = section("f", usize::from(n > 0), n)?;
        let g = section("G", m, n)?;
        let rhs = section("h", usize::from(m > 0), m)?;
        let mut qp = Self::from_dense(
            DMatrix::from_row_slice(n, n, &h),
            DVector::from_vec(f),
            DMatrix::from_row_slice(m, n, &g),
            DVector::from_vec(rhs),
        )?;
        qp.labels = labels;
        qp.validate()?;
        Ok(qp)
    }
}

/// Status reported by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Infinity-norm optimality residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `‖H x − f + Gᵀ λ‖∞`
    pub stationarity: f64,
    /// `‖max(0, G x − h)‖∞`
    pub primal: f64,
    /// `maxᵢ |λᵢ (G x − h)ᵢ|`
    pub complementarity: f64,
    /// `‖max(0, −λ)‖∞`
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual_sign)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpSolution {
    #[serde(serialize_with = "ser_dvec")]
    pub x: DVector<f64>,
    #[serde(serialize_with = "ser_dvec")]
    pub lambda: DVector<f64>,
    pub status: QpStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub solve_time_ms: f64,
    pub objective: f64,
}

fn ser_dvec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Residuals of a candidate primal-dual pair, computed directly from the
/// problem data.
pub fn kkt_residuals(
    qp: &QuadraticProgram,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> KktResiduals {
    let stat = &qp.hessian * x - &qp.gradient + qp.g_ineq.tr_mul_vec(lambda);
    let viol = qp.g_ineq.mul_vec(x) - &qp.h_ineq;
    KktResiduals {
        stationarity: stat.amax(),
        primal: viol.iter().fold(0.0, |a, &v| a.max(v)),
        complementarity: viol
            .iter()
            .zip(lambda.iter())
            .fold(0.0, |a, (v, l)| a.max((v * l).abs())),
        dual_sign: lambda.iter().fold(0.0, |a, &l| a.max(-l)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    pub residuals: KktResiduals,
    pub passed: bool,
}

/// Independent re-check of a solution against `tol`.
pub fn verify_kkt(qp: &QuadraticProgram, sol: &QpSolution, tol: f64) -> KktReport {
    let residuals = kkt_residuals(qp, &sol.x, &sol.lambda);
    KktReport {
        residuals,
        passed: residuals.within(tol),
    }
}
