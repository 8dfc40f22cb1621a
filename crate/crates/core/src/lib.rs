//! Supervisory model-predictive energy dispatch for a domestic heating system
//! with an air-source heat pump, a staged heating rod, PV, a battery and a
//! phase-change-slurry (PCS) thermal store.
//!
//! The crate is organised bottom-up:
//!
//! * [`pcs`] slurry thermodynamics: density/pressure state estimation, stored
//!   energy, heat-pump heat flows and the hysteretic enthalpy curves.
//! * [`model`] the linear control-oriented storage model and the electric node.
//! * [`forecast`] persistence load forecasts and irradiance-based PV forecasts.
//! * [`ocp`] condensing of the finite-horizon problem into a dense QP.
//! * [`qp`] a primal-dual interior-point QP solver.
//! * [`dispatch`] the rule layer that turns the continuous optimum into
//!   realizable actuator set points.
//! * [`sim`] the nonlinear closed-loop plant.
//! * [`harness`] the closed-loop runner, the rule-based baseline and KPIs.

pub mod dispatch;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod model;
pub mod ocp;
pub mod pcs;
pub mod qp;
pub mod sim;

pub use error::{Error, Result};

/// kJ per kWh.
pub const KJ_PER_KWH: f64 = 3600.0;

/// Gravitational acceleration (m/s²).
pub const GRAVITY: f64 = 9.81;
