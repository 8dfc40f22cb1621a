//! Finite-horizon optimal control problem and its condensation into a QP.
//!
//! Decision vector: blocked input moves (eight flows per block) followed by
//! one non-negative slack per state and predicted step. Predicted states
//! are eliminated through the linear model, so every state constraint and
//! tracking term becomes affine or quadratic in the decision vector.

mod tuning;

use nalgebra::{DMatrix, DVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

pub use tuning::{HorizonWeights, Objective, StateWeights, TuningSchedule};

use crate::forecast::ForecastBundle;
use crate::model::{
    input, node_row, ElectricContext, EnergyFlowSetpoints, InputVector, StateSpace, SystemState,
    NU, NX,
};
use crate::qp::{QuadraticProgram, SparseRows};
use crate::{Error, Result};

/// Bounds on states and inputs plus the equality tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSet {
    /// State bounds in kWh, order SH, DHW, BLD, B.
    pub e_min: [f64; NX],
    pub e_max: [f64; NX],
    /// Heat-pump electric limit (kW); thermal limit is this times COP.
    pub hp_el_max: f64,
    pub q_hr_max: f64,
    pub q_sh_max: f64,
    pub p_b_ch_max: f64,
    pub p_b_dis_max: f64,
    pub p_g_dem_max: f64,
    pub p_g_sup_max: f64,
    /// Allowed deviation of delivered SH heat from the SH load (kW).
    pub sigma_th: f64,
    /// Half-width of the relaxed node equality (kW).
    pub eps_el: f64,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            e_min: [0.0, 0.0, -2.0, 7.35],
            e_max: [8.4, 3.6, 2.0, 21.0],
            hp_el_max: 3.7,
            q_hr_max: 6.0,
            q_sh_max: 15.0,
            p_b_ch_max: 7.0,
            p_b_dis_max: 7.0,
            p_g_dem_max: 7.5,
            p_g_sup_max: 7.5,
            sigma_th: 0.5,
            eps_el: 1e-4,
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        for j in 0..NX {
            if !(self.e_min[j] <= self.e_max[j]) {
                return Err(Error::config(format!(
                    "state bound for {} has min {} above max {}",
                    crate::model::state::NAMES[j],
                    self.e_min[j],
                    self.e_max[j]
                )));
            }
        }
        let maxima = [
            self.hp_el_max,
            self.q_hr_max,
            self.q_sh_max,
            self.p_b_ch_max,
            self.p_b_dis_max,
            self.p_g_dem_max,
            self.p_g_sup_max,
        ];
        if maxima.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::config("input upper bounds must be non-negative"));
        }
        if !(self.sigma_th > 0.0) || !(self.eps_el > 0.0) {
            return Err(Error::config("sigma_th and eps_el must be positive"));
        }
        Ok(())
    }

    /// Upper bound of each flow at a step with the given COP values.
    pub fn input_max(&self, cop_sh: f64, cop_dhw: f64) -> [f64; NU] {
        [
            self.hp_el_max * cop_sh,
            self.hp_el_max * cop_dhw,
            self.q_hr_max,
            self.q_sh_max,
            self.p_b_ch_max,
            self.p_b_dis_max,
            self.p_g_dem_max,
            self.p_g_sup_max,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Sampling interval (min).
    pub h_minutes: u32,
    /// Prediction horizon (steps).
    pub n: usize,
    pub move_blocks: Vec<usize>,
    /// Linear weight on every slack.
    pub soft_penalty: f64,
    /// Inverter efficiency used in the node balance.
    pub eta: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let mut move_blocks = vec![1; 8];
        move_blocks.extend([2; 8]);
        move_blocks.extend([4; 6]);
        Self {
            h_minutes: 15,
            n: 48,
            move_blocks,
            soft_penalty: 1e4,
            eta: 0.95,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_minutes != 15 {
            return Err(Error::config(
                "the model coefficients are identified for h = 15 min",
            ));
        }
        if self.n == 0 {
            return Err(Error::config("horizon must be at least one step"));
        }
        if self.move_blocks.iter().any(|b| *b == 0)
            || self.move_blocks.iter().sum::<usize>() != self.n
        {
            return Err(Error::config(format!(
                "move blocks {:?} must be positive and sum to N = {}",
                self.move_blocks, self.n
            )));
        }
        if !(self.soft_penalty > 0.0) {
            return Err(Error::config("soft_penalty must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config("eta must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Same configuration with a different horizon; the blocking pattern is
    /// truncated or extended with 4-step blocks to match.
    pub fn with_horizon(&self, n: usize) -> Self {
        let mut blocks = Vec::new();
        let mut left = n;
        for &b in &self.move_blocks {
            if left == 0 {
                break;
            }
            let take = b.min(left);
            blocks.push(take);
            left -= take;
        }
        while left > 0 {
            let take = left.min(4);
            blocks.push(take);
            left -= take;
        }
        Self {
            n,
            move_blocks: blocks,
            ..self.clone()
        }
    }
}

/// Column layout of the decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableMap {
    pub n: usize,
    pub block_lengths: Vec<usize>,
    pub block_of_step: Vec<usize>,
    pub block_start: Vec<usize>,
}

impl VariableMap {
    pub fn new(move_blocks: &[usize]) -> Self {
        let n = move_blocks.iter().sum();
        let mut block_of_step = Vec::with_capacity(n);
        let mut block_start = Vec::with_capacity(move_blocks.len());
        for (b, &len) in move_blocks.iter().enumerate() {
            block_start.push(block_of_step.len());
            block_of_step.extend(std::iter::repeat_n(b, len));
        }
        Self {
            n,
            block_lengths: move_blocks.to_vec(),
            block_of_step,
            block_start,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.block_lengths.len()
    }

    pub fn n_input_cols(&self) -> usize {
        self.n_blocks() * NU
    }

    pub fn n_slack_cols(&self) -> usize {
        self.n * NX
    }

    pub fn n_cols(&self) -> usize {
        self.n_input_cols() + self.n_slack_cols()
    }

    pub fn input_col(&self, block: usize, flow: usize) -> usize {
        block * NU + flow
    }

    /// Slack of state `j` at predicted step `i` in `1..=N`.
    pub fn slack_col(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        self.n_input_cols() + (i - 1) * NX + j
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.n_cols());
        for b in 0..self.n_blocks() {
            for name in input::NAMES {
                out.push(format!("{name}[b{b}]"));
            }
        }
        for i in 1..=self.n {
            for name in crate::model::state::NAMES {
                out.push(format!("s_{name}[{i}]"));
            }
        }
        out
    }

    /// Input applied at step `i` according to a decision vector.
    pub fn step_input(&self, z: &DVector<f64>, i: usize) -> InputVector {
        let b = self.block_of_step[i];
        InputVector::from_fn(|j, _| z[self.input_col(b, j)])
    }

    pub fn slack(&self, z: &DVector<f64>, i: usize) -> [f64; NX] {
        std::array::from_fn(|j| z[self.slack_col(i, j)])
    }
}

/// Condensed problem together with the bookkeeping needed to interpret it.
#[derive(Debug, Clone)]
pub struct CondensedProblem {
    pub qp: QuadraticProgram,
    pub map: VariableMap,
    /// Cost terms independent of the decision vector.
    pub constant: f64,
    pub weights: HorizonWeights,
    /// Free response `c_i` of the predicted states, `i = 0..=N`.
    pub free_response: Vec<Vector4<f64>>,
    /// Sensitivity `Φ_i` of the predicted states to the input columns.
    pub sensitivity: Vec<DMatrix<f64>>,
}

impl CondensedProblem {
    /// Full objective value `½zᵀHz − fᵀz + const`.
    pub fn cost(&self, z: &DVector<f64>) -> f64 {
        self.qp.objective(z) + self.constant
    }

    pub fn predicted_states(&self, z: &DVector<f64>) -> Vec<Vector4<f64>> {
        let u = z.rows(0, self.map.n_input_cols());
        self.free_response
            .iter()
            .zip(&self.sensitivity)
            .map(|(c, phi)| c + phi * u)
            .collect()
    }
}

fn block_mean(v: &[f64], start: usize, len: usize) -> f64 {
    v[start..start + len].iter().sum::<f64>() / len as f64
}

/// Assembles the condensed QP for the current state and forecast.
pub fn build_qp(
    x0: &SystemState,
    forecast: &ForecastBundle,
    weights: &HorizonWeights,
    c: &ConstraintSet,
    cfg: &ControllerConfig,
    ss: &StateSpace,
) -> Result<CondensedProblem> {
    cfg.validate()?;
    c.validate()?;
    let n = cfg.n;
    forecast.validate(n)?;
    weights.validate(n)?;
    let map = VariableMap::new(&cfg.move_blocks);
    let (nu_cols, ncols) = (map.n_input_cols(), map.n_cols());

    // Prediction x_i = c_i + Φ_i U.
    let mut free_response = Vec::with_capacity(n + 1);
    let mut sensitivity = Vec::with_capacity(n + 1);
    free_response.push(x0.to_vector());
    sensitivity.push(DMatrix::zeros(NX, nu_cols));
    let a = DMatrix::from_fn(NX, NX, |r, k| ss.a[(r, k)]);
    for i in 0..n {
        let d = Vector2::new(forecast.q_l_sh[i], forecast.q_l_dhw[i]);
        free_response.push(ss.a * free_response[i] + ss.e * d);
        let mut phi = &a * &sensitivity[i];
        let b = map.block_of_step[i];
        for r in 0..NX {
            for j in 0..NU {
                phi[(r, map.input_col(b, j))] += ss.b[(r, j)];
            }
        }
        sensitivity.push(phi);
    }

    // Cost.
    let mut hess = DMatrix::zeros(ncols, ncols);
    let mut grad = DVector::zeros(ncols);
    let mut constant = 0.0;
    let set = weights.set_points;
    for j in 0..NX {
        let r = weights.state[0][j];
        constant += r * (set[j] - free_response[0][j]).powi(2);
    }
    let mut rows = DMatrix::zeros(n * NX, nu_cols);
    for i in 1..=n {
        for j in 0..NX {
            let r = weights.state[i][j];
            let err = set[j] - free_response[i][j];
            constant += r * err * err;
            let phi = sensitivity[i].row(j);
            rows.row_mut((i - 1) * NX + j)
                .copy_from(&(phi * (2.0 * r).sqrt()));
            let mut g = grad.rows_mut(0, nu_cols);
            g.axpy(2.0 * r * err, &phi.transpose(), 1.0);
        }
    }
    hess.view_mut((0, 0), (nu_cols, nu_cols))
        .copy_from(&rows.tr_mul(&rows));
    for i in 0..n {
        let b = map.block_of_step[i];
        for j in 0..NU {
            let col = map.input_col(b, j);
            hess[(col, col)] += 2.0 * weights.input[i][j];
        }
    }
    for col in nu_cols..ncols {
        grad[col] = -cfg.soft_penalty;
    }

    // Constraints.
    let mut g = SparseRows::new(ncols);
    let mut h = Vec::new();
    let mut push = |g: &mut SparseRows, row: Vec<(usize, f64)>, rhs: f64| {
        g.push_row(row);
        h.push(rhs);
    };
    for (b, &len) in map.block_lengths.iter().enumerate() {
        let start = map.block_start[b];
        let mut upper = [f64::INFINITY; NU];
        for i in start..start + len {
            let m = c.input_max(forecast.cop_sh[i], forecast.cop_dhw[i]);
            for j in 0..NU {
                upper[j] = upper[j].min(m[j]);
            }
        }
        for (j, ub) in upper.iter().enumerate() {
            let col = map.input_col(b, j);
            push(&mut g, vec![(col, -1.0)], 0.0);
            push(&mut g, vec![(col, 1.0)], *ub);
        }
        for i in start..start + len {
            push(
                &mut g,
                vec![
                    (map.input_col(b, input::Q_HP_SH), 1.0 / forecast.cop_sh[i]),
                    (map.input_col(b, input::Q_HP_DHW), 1.0 / forecast.cop_dhw[i]),
                ],
                c.hp_el_max,
            );
        }
        // Load tracking and node balance on block averages.
        let q_l = block_mean(&forecast.q_l_sh, start, len);
        let q_sh = map.input_col(b, input::Q_SH);
        push(&mut g, vec![(q_sh, 1.0)], c.sigma_th + q_l);
        push(&mut g, vec![(q_sh, -1.0)], c.sigma_th - q_l);
        let inv_cop =
            |v: &[f64]| v[start..start + len].iter().map(|c| 1.0 / c).sum::<f64>() / len as f64;
        let ctx = ElectricContext {
            p_l: block_mean(&forecast.p_l, start, len),
            p_pv: block_mean(&forecast.p_pv, start, len),
            eta: cfg.eta,
            cop_sh: 1.0 / inv_cop(&forecast.cop_sh),
            cop_dhw: 1.0 / inv_cop(&forecast.cop_dhw),
        };
        let (coef, k) = node_row(&ctx);
        let row: Vec<(usize, f64)> = coef
            .iter()
            .enumerate()
            .map(|(j, v)| (map.input_col(b, j), *v))
            .collect();
        let neg: Vec<(usize, f64)> = row.iter().map(|(j, v)| (*j, -v)).collect();
        push(&mut g, row, c.eps_el - k);
        push(&mut g, neg, c.eps_el + k);
    }
    for i in 1..=n {
        for j in 0..NX {
            let phi = sensitivity[i].row(j);
            let s = map.slack_col(i, j);
            let nz: Vec<(usize, f64)> = phi
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k, *v))
                .collect();
            let mut up = nz.clone();
            up.push((s, -1.0));
            push(&mut g, up, c.e_max[j] - free_response[i][j]);
            let mut lo: Vec<(usize, f64)> = nz.iter().map(|(k, v)| (*k, -v)).collect();
            lo.push((s, -1.0));
            push(&mut g, lo, free_response[i][j] - c.e_min[j]);
            push(&mut g, vec![(s, -1.0)], 0.0);
        }
    }

    let mut qp = QuadraticProgram::new(hess, grad, g, DVector::from_vec(h))?;
    qp.labels = map.labels();
    qp.check_psd()?;
    Ok(CondensedProblem {
        qp,
        map,
        constant,
        weights: weights.clone(),
        free_response,
        sensitivity,
    })
}

/// Values at or below this magnitude below zero are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-9;

/// First applied input with the clamping record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstInput {
    pub setpoints: EnergyFlowSetpoints,
    /// Slack values of the first predicted step.
    pub slacks: [f64; NX],
    /// Flows that were more negative than the noise floor and were clamped.
    pub clamped: Vec<(String, f64)>,
}

pub fn extract_first_input(z: &DVector<f64>, map: &VariableMap) -> FirstInput {
    let u = map.step_input(z, 0);
    let mut clamped = Vec::new();
    let mut v = [0.0; NU];
    for j in 0..NU {
        v[j] = if u[j] < 0.0 {
            if u[j] < -NOISE_FLOOR {
                clamped.push((input::NAMES[j].to_string(), u[j]));
            }
            0.0
        } else {
            u[j]
        };
    }
    FirstInput {
        setpoints: EnergyFlowSetpoints::from_slice(&v),
        slacks: map.slack(z, 1),
        clamped,
    }
}

/// Planned trajectory: `states` has one more entry than `inputs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlannedTrajectory {
    pub states: Vec<SystemState>,
    pub inputs: Vec<EnergyFlowSetpoints>,
}

/// Tracking plus input cost by direct summation.
pub fn evaluate_cost(traj: &PlannedTrajectory, weights: &HorizonWeights) -> f64 {
    let mut j = 0.0;
    for (i, s) in traj.states.iter().enumerate() {
        let x = s.to_vector();
        for k in 0..NX {
            j += weights.state[i][k] * (weights.set_points[k] - x[k]).powi(2);
        }
    }
    for (i, u) in traj.inputs.iter().enumerate() {
        let v = u.to_vector();
        for k in 0..NU {
            j += weights.input[i][k] * v[k] * v[k];
        }
    }
    j
}

/// Forward simulation of the linear model over a forecast.
pub fn predict_states(
    x0: &SystemState,
    inputs: &[EnergyFlowSetpoints],
    forecast: &ForecastBundle,
    ss: &StateSpace,
) -> Vec<SystemState> {
    let mut out = vec![*x0];
    let mut x = x0.to_vector();
    for (i, u) in inputs.iter().enumerate() {
        let d = Vector2::new(forecast.q_l_sh[i], forecast.q_l_dhw[i]);
        x = ss.step_vec(&x, &u.to_vector(), &d);
        out.push(SystemState::from_vector(&x));
    }
    out
}
