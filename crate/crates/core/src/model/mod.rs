//! Linear control-oriented storage model and the electric node balance.
//!
//! States are stored energies in kWh, inputs are power set points in kW held
//! over one 15-minute step. The β coefficients already contain the step
//! length, so `x(k+1) = A x(k) + B u(k) + E d(k)` maps kW directly to kWh.

pub mod fit;

use nalgebra::{Matrix4, SMatrix, SVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NX: usize = 4;
pub const NU: usize = 8;
pub const ND: usize = 2;

/// Controller sampling interval (h).
pub const STEP_HOURS: f64 = 0.25;

/// Input column indices.
pub mod input {
    pub const Q_HP_SH: usize = 0;
    pub const Q_HP_DHW: usize = 1;
    pub const Q_HR: usize = 2;
    pub const Q_SH: usize = 3;
    pub const P_B_CH: usize = 4;
    pub const P_B_DIS: usize = 5;
    pub const P_G_DEM: usize = 6;
    pub const P_G_SUP: usize = 7;

    pub const NAMES: [&str; super::NU] = [
        "q_hp_sh", "q_hp_dhw", "q_hr", "q_sh", "p_b_ch", "p_b_dis", "p_g_dem", "p_g_sup",
    ];
}

/// State row indices.
pub mod state {
    pub const E_SH: usize = 0;
    pub const E_DHW: usize = 1;
    pub const E_BLD: usize = 2;
    pub const E_B: usize = 3;

    pub const NAMES: [&str; super::NX] = ["e_sh", "e_dhw", "e_bld", "e_b"];
}

pub type InputVector = SVector<f64, NU>;

/// Water properties on the load side.
pub const RHO_WATER_KG_PER_L: f64 = 1.0;
pub const CP_WATER: f64 = 4.18;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub e_sh: f64,
    pub e_dhw: f64,
    /// Building over/undersupply accumulator, may be negative.
    pub e_bld: f64,
    pub e_b: f64,
}

impl SystemState {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.e_sh, self.e_dhw, self.e_bld, self.e_b)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            e_sh: v[0],
            e_dhw: v[1],
            e_bld: v[2],
            e_b: v[3],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyFlowSetpoints {
    pub q_hp_sh: f64,
    pub q_hp_dhw: f64,
    pub q_hr: f64,
    pub q_sh: f64,
    pub p_b_ch: f64,
    pub p_b_dis: f64,
    pub p_g_dem: f64,
    pub p_g_sup: f64,
}

impl EnergyFlowSetpoints {
    pub fn to_vector(&self) -> InputVector {
        InputVector::from([
            self.q_hp_sh,
            self.q_hp_dhw,
            self.q_hr,
            self.q_sh,
            self.p_b_ch,
            self.p_b_dis,
            self.p_g_dem,
            self.p_g_sup,
        ])
    }

    pub fn from_slice(u: &[f64]) -> Self {
        assert_eq!(u.len(), NU, "input vector must have {NU} entries");
        Self {
            q_hp_sh: u[0],
            q_hp_dhw: u[1],
            q_hr: u[2],
            q_sh: u[3],
            p_b_ch: u[4],
            p_b_dis: u[5],
            p_g_dem: u[6],
            p_g_sup: u[7],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> {
        let v = self.to_vector();
        input::NAMES
            .into_iter()
            .zip(v.iter().copied().collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceVector {
    pub q_l_sh: f64,
    pub q_l_dhw: f64,
}

impl DisturbanceVector {
    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.q_l_sh, self.q_l_dhw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricContext {
    pub p_l: f64,
    pub p_pv: f64,
    pub eta: f64,
    pub cop_sh: f64,
    pub cop_dhw: f64,
}

impl ElectricContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("eta = {} outside (0, 1]", self.eta)));
        }
        if !(self.cop_sh >= 1.0 && self.cop_dhw >= 1.0) {
            return Err(Error::config("COP values must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub nu: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub beta6: f64,
    pub beta7: f64,
    pub beta8: f64,
}

impl Default for ModelParameters {
    /// Identified parameters of the laboratory plant.
    fn default() -> Self {
        Self {
            alpha1: 0.99949,
            alpha2: 0.9979,
            alpha3: 1.0,
            alpha4: 0.9991,
            nu: 0.003,
            beta1: 0.275,
            beta2: 0.298,
            beta3: 0.192,
            beta4: 0.248,
            beta5: 0.339,
            beta6: 0.298,
            beta7: 0.223,
            beta8: 0.205,
        }
    }
}

impl ModelParameters {
    pub fn alphas(&self) -> [f64; 4] {
        [self.alpha1, self.alpha2, self.alpha3, self.alpha4]
    }

    pub fn betas(&self) -> [f64; 8] {
        [
            self.beta1, self.beta2, self.beta3, self.beta4, self.beta5, self.beta6, self.beta7,
            self.beta8,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.alphas().into_iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::config(format!(
                    "alpha{} = {a} outside (0, 1]",
                    i + 1
                )));
            }
        }
        if !(self.nu >= 0.0) {
            return Err(Error::config("nu must be non-negative"));
        }
        if !(self.alpha2 - self.nu > 0.0) {
            return Err(Error::config("alpha2 - nu must be positive"));
        }
        for (i, b) in self.betas().into_iter().enumerate() {
            if !(b > 0.0) {
                return Err(Error::config(format!(
                    "beta{} = {b} must be positive",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix4<f64>,
    pub b: SMatrix<f64, NX, NU>,
    pub e: SMatrix<f64, NX, ND>,
    pub c: Matrix4<f64>,
}

pub fn build_matrices(p: &ModelParameters) -> Result<StateSpace> {
    p.validate()?;
    Ok(build_matrices_unchecked(p))
}

/// Matrix assembly without the parameter checks; used by the refit where
/// intermediate estimates may leave the physical range.
pub(crate) fn build_matrices_unchecked(p: &ModelParameters) -> StateSpace {
    use input::*;
    use state::*;
    let mut a = Matrix4::zeros();
    a[(E_SH, E_SH)] = p.alpha1;
    a[(E_SH, E_DHW)] = p.nu;
    a[(E_DHW, E_DHW)] = p.alpha2 - p.nu;
    a[(E_BLD, E_BLD)] = p.alpha3;
    a[(E_B, E_B)] = p.alpha4;

    let mut b = SMatrix::<f64, NX, NU>::zeros();
    b[(E_SH, Q_HP_SH)] = p.beta1;
    b[(E_SH, Q_SH)] = -p.beta2;
    b[(E_DHW, Q_HP_DHW)] = p.beta3;
    b[(E_DHW, Q_HR)] = p.beta4;
    b[(E_BLD, Q_SH)] = p.beta6;
    b[(E_B, P_B_CH)] = p.beta7;
    b[(E_B, P_B_DIS)] = -p.beta8;

    let mut e = SMatrix::<f64, NX, ND>::zeros();
    e[(E_DHW, 1)] = -p.beta5;
    e[(E_BLD, 0)] = -p.beta6;

    StateSpace {
        a,
        b,
        e,
        c: Matrix4::identity(),
    }
}

impl StateSpace {
    pub fn step_vec(&self, x: &Vector4<f64>, u: &InputVector, d: &Vector2<f64>) -> Vector4<f64> {
        self.a * x + self.b * u + self.e * d
    }
}

pub fn step(
    x: &SystemState,
    u: &EnergyFlowSetpoints,
    d: &DisturbanceVector,
    ss: &StateSpace,
) -> SystemState {
    SystemState::from_vector(&ss.step_vec(&x.to_vector(), &u.to_vector(), &d.to_vector()))
}

/// Electric power drawn by the heat pump for the requested heat flows (kW).
pub fn electric_demand_hp(q_hp_sh: f64, q_hp_dhw: f64, ctx: &ElectricContext) -> f64 {
    q_hp_sh / ctx.cop_sh + q_hp_dhw / ctx.cop_dhw
}

/// PV output from global irradiance (W/m²), peak power (kW) and a derating.
pub fn pv_power(g: f64, y_pv: f64, mu: f64) -> f64 {
    g / 1000.0 * y_pv * mu
}

/// Power surplus at the electric node (kW); zero when balanced.
pub fn node_residual(u: &EnergyFlowSetpoints, ctx: &ElectricContext) -> f64 {
    u.p_g_dem + ctx.eta * u.p_b_dis + ctx.eta * ctx.p_pv
        - ctx.p_l
        - ctx.eta * u.p_b_ch
        - u.p_g_sup
        - electric_demand_hp(u.q_hp_sh, u.q_hp_dhw, ctx)
        - u.q_hr
}

/// Coefficients of `node_residual` with respect to each input, and the
/// input-free constant term.
pub fn node_row(ctx: &ElectricContext) -> ([f64; NU], f64) {
    let mut row = [0.0; NU];
    row[input::Q_HP_SH] = -1.0 / ctx.cop_sh;
    row[input::Q_HP_DHW] = -1.0 / ctx.cop_dhw;
    row[input::Q_HR] = -1.0;
    row[input::P_B_CH] = -ctx.eta;
    row[input::P_B_DIS] = ctx.eta;
    row[input::P_G_DEM] = 1.0;
    row[input::P_G_SUP] = -1.0;
    (row, ctx.eta * ctx.p_pv - ctx.p_l)
}

pub fn battery_energy(soc: f64, e_max: f64) -> f64 {
    soc / 100.0 * e_max
}

/// Heat drawn by a water-side consumer from flow (l/s) and the demand and
/// supply temperatures (kW).
pub fn load_heat(vdot: f64, t_dem: f64, t_sup: f64) -> f64 {
    RHO_WATER_KG_PER_L * vdot * CP_WATER * (t_dem - t_sup)
}
