//! Phase-change-slurry thermodynamics.
//!
//! The slurry is a paraffin-in-water emulsion. Its stored heat splits into a
//! sensible part, read from temperature sensors, and a latent part, read from
//! the emulsion density, which is itself recovered from two hydrostatic
//! pressure readings.

mod curve;
mod hysteresis;

use serde::{Deserialize, Serialize};

pub use curve::{Curve, CurveValue};
pub use hysteresis::{Branch, Clamped, TEMPERATURE_DOMAIN};

use crate::{Error, Result, GRAVITY, KJ_PER_KWH};

/// A closed temperature interval in °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.low && t <= self.high
    }
}

/// Slurry material constants.
///
/// Densities are in kg/m³, specific heats in kJ/(kg·K), `dh_f` in kJ/kg per kg
/// of paraffin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcsProperties {
    pub w_p: f64,
    pub dh_f: f64,
    pub cp_w: f64,
    pub cp_p: f64,
    pub rho_liq: f64,
    pub rho_sol: f64,
    pub melt_range: Band,
    pub freeze_range: Band,
    /// Effective specific heat seen by the heat-pump circuit.
    pub cp_approx_curve: Curve,
    /// Density for rising temperature.
    pub density_melting: Curve,
    /// Density for falling temperature.
    pub density_freezing: Curve,
}

/// Heat flow together with a flag telling whether a material curve had to be
/// extrapolated to produce it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatFlow {
    pub kw: f64,
    pub extrapolated: bool,
}

impl Default for PcsProperties {
    fn default() -> Self {
        Self::from_material(
            0.3,
            49.0,
            4.18,
            2.1,
            940.0,
            960.0,
            Band::new(30.0, 42.0),
            Band::new(24.0, 29.6),
        )
        .expect("default slurry data is consistent")
    }
}

/// Width (K) just below the upper end of the freezing band in which most of
/// the latent heat is released, and the share released there. Crystallisation
/// starts abruptly once the slurry has cooled to the onset temperature.
pub const FREEZE_ONSET_WIDTH: f64 = 0.5;
pub const FREEZE_ONSET_SHARE: f64 = 0.9;

impl PcsProperties {
    /// Builds a material with the default piecewise-linear curves: a
    /// triangular effective-heat-capacity peak over the melt band, a density
    /// ramp across the melt band, and a freezing density curve that drops
    /// most of the way within [`FREEZE_ONSET_WIDTH`] of the band's top.
    #[allow(clippy::too_many_arguments)]
    pub fn from_material(
        w_p: f64,
        dh_f: f64,
        cp_w: f64,
        cp_p: f64,
        rho_liq: f64,
        rho_sol: f64,
        melt_range: Band,
        freeze_range: Band,
    ) -> Result<Self> {
        let cp = (1.0 - w_p) * cp_w + w_p * cp_p;
        let (t_min, t_max) = TEMPERATURE_DOMAIN;
        let peak = cp + 2.0 * w_p * dh_f / melt_range.width();
        let cp_approx_curve = Curve::new(vec![
            (t_min, cp),
            (melt_range.low, cp),
            (melt_range.midpoint(), peak),
            (melt_range.high, cp),
            (t_max, cp),
        ])?;
        let ramp = |band: Band| {
            Curve::new(vec![
                (t_min, rho_sol),
                (band.low, rho_sol),
                (band.high, rho_liq),
                (t_max, rho_liq),
            ])
        };
        let props = Self {
            w_p,
            dh_f,
            cp_w,
            cp_p,
            rho_liq,
            rho_sol,
            melt_range,
            freeze_range,
            cp_approx_curve,
            density_melting: ramp(melt_range)?,
            density_freezing: Curve::new(vec![
                (t_min, rho_sol),
                (freeze_range.low, rho_sol),
                (
                    freeze_range.high - FREEZE_ONSET_WIDTH,
                    rho_liq + FREEZE_ONSET_SHARE * (rho_sol - rho_liq),
                ),
                (freeze_range.high, rho_liq),
                (t_max, rho_liq),
            ])?,
        };
        props.validate()?;
        Ok(props)
    }

    /// Same material with a different paraffin mass fraction; the default
    /// curves are rebuilt for the new fraction.
    pub fn with_mass_fraction(&self, w_p: f64) -> Result<Self> {
        Self::from_material(
            w_p,
            self.dh_f,
            self.cp_w,
            self.cp_p,
            self.rho_liq,
            self.rho_sol,
            self.melt_range,
            self.freeze_range,
        )
    }

    pub fn validate(&self) -> Result<()> {
        // w_p = 0 is accepted so that plain water can be run through the same code.
        if !(0.0..1.0).contains(&self.w_p) {
            return Err(Error::config(format!("w_p = {} outside [0, 1)", self.w_p)));
        }
        if self.dh_f <= 0.0 {
            return Err(Error::config("dh_f must be positive"));
        }
        if self.cp_w <= 0.0 || self.cp_p <= 0.0 {
            return Err(Error::config("specific heats must be positive"));
        }
        if self.rho_sol <= self.rho_liq {
            return Err(Error::config(
                "solid emulsion density must exceed liquid density",
            ));
        }
        for (name, band) in [("melt", self.melt_range), ("freeze", self.freeze_range)] {
            if band.width() <= 0.0 {
                return Err(Error::config(format!(
                    "{name} band must have positive width"
                )));
            }
        }
        if self.freeze_range.high > self.melt_range.high
            || self.freeze_range.low > self.melt_range.low
        {
            return Err(Error::config(
                "freeze band must lie at or below the melt band",
            ));
        }
        for (name, curve) in [
            ("melting", &self.density_melting),
            ("freezing", &self.density_freezing),
        ] {
            let pts = curve.points();
            if pts.windows(2).any(|w| w[1].1 > w[0].1)
                || pts
                    .iter()
                    .any(|p| p.1 < self.rho_liq - 1e-9 || p.1 > self.rho_sol + 1e-9)
            {
                return Err(Error::config(format!(
                    "{name} density curve must fall from rho_sol to rho_liq with temperature"
                )));
            }
        }
        // A freezing slurry holds at least as much liquid as a melting one.
        let knots = self
            .density_melting
            .points()
            .iter()
            .chain(self.density_freezing.points())
            .map(|p| p.0);
        for t in knots {
            if self.branch_fraction(t, Branch::Freezing) + 1e-9
                < self.branch_fraction(t, Branch::Melting)
            {
                return Err(Error::config(format!(
                    "freezing curve lies above the melting curve at {t} °C"
                )));
            }
        }
        let expected = self.cp_pcs() * self.melt_range.width() + self.latent_heat();
        let got = self
            .cp_approx_curve
            .integrate(self.melt_range.low, self.melt_range.high);
        if (got - expected).abs() > 0.01 * expected {
            return Err(Error::config(format!(
                "cp_approx curve integrates to {got:.3} kJ/kg over the melt band, expected {expected:.3}"
            )));
        }
        Ok(())
    }

    /// Mixture specific heat `(1 - w_p)·cp_w + w_p·cp_p`.
    pub fn cp_pcs(&self) -> f64 {
        (1.0 - self.w_p) * self.cp_w + self.w_p * self.cp_p
    }

    /// Latent heat per kg of slurry (kJ/kg).
    pub fn latent_heat(&self) -> f64 {
        self.w_p * self.dh_f
    }

    /// Emulsion density for a known liquid fraction (linear mixing).
    pub fn density_at_fraction(&self, fraction: f64) -> f64 {
        self.rho_sol + fraction.clamp(0.0, 1.0) * (self.rho_liq - self.rho_sol)
    }

    pub fn density(&self, t: f64, branch: Branch) -> CurveValue {
        match branch {
            Branch::Melting => self.density_melting.eval(t),
            Branch::Freezing => self.density_freezing.eval(t),
        }
    }
}

/// Sensor readings of the two-zone tank. Pressures are gauge pressures in
/// Pa, heights in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankMeasurement {
    pub t_top: f64,
    pub t_center: f64,
    pub t_bottom: f64,
    pub p_center: f64,
    pub p_bottom: f64,
    pub z_center: f64,
    pub z_bottom: f64,
}

/// Zone masses (kg) and the lowest usable temperature of each zone (°C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankGeometry {
    pub m_sh: f64,
    pub m_dhw: f64,
    pub t_sh_ref: f64,
    pub t_dhw_ref: f64,
}

impl Default for TankGeometry {
    /// Masses chosen so that a full SH zone at the top of the melt band holds
    /// 8.4 kWh and a DHW zone at 65 °C holds 3.6 kWh with the default slurry.
    fn default() -> Self {
        Self {
            m_sh: 384.0,
            m_dhw: 243.0,
            t_sh_ref: 24.0,
            t_dhw_ref: 50.0,
        }
    }
}

impl TankGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.m_sh <= 0.0 || self.m_dhw <= 0.0 {
            return Err(Error::config("zone masses must be positive"));
        }
        if self.t_sh_ref >= self.t_dhw_ref {
            return Err(Error::config(
                "SH reference temperature must be below DHW reference",
            ));
        }
        Ok(())
    }
}

/// Hydrostatic density `dp / (g·dz)`.
pub fn density_from_pressure(dp: f64, dz: f64) -> Result<f64> {
    if !(dz > 0.0) || !(dp > 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "pressure difference {dp} Pa over height {dz} m"
        )));
    }
    Ok(dp / (GRAVITY * dz))
}

/// Fraction of liquid paraffin implied by the emulsion density, clamped to
/// `[0, 1]`.
pub fn liquid_fraction(rho: f64, props: &PcsProperties) -> Result<f64> {
    let span = props.rho_liq - props.rho_sol;
    if span == 0.0 {
        return Err(Error::DegenerateMaterial);
    }
    Ok(((rho - props.rho_sol) / span).clamp(0.0, 1.0))
}

/// Latent heat stored in `m_pcs` kg of slurry with density `rho` (kWh).
pub fn latent_energy(rho: f64, m_pcs: f64, props: &PcsProperties) -> Result<f64> {
    if !(m_pcs > 0.0) {
        return Err(Error::config("slurry mass must be positive"));
    }
    let fraction = liquid_fraction(rho, props)?;
    Ok(m_pcs * props.latent_heat() * fraction / KJ_PER_KWH)
}

/// Heat stored in the lower (space-heating) zone above its reference
/// temperature, sensible plus latent (kWh, never negative).
pub fn stored_energy_sh(
    meas: &TankMeasurement,
    geom: &TankGeometry,
    props: &PcsProperties,
) -> Result<f64> {
    if !(meas.t_center >= geom.t_sh_ref - 5.0) {
        return Err(Error::InvalidMeasurement(format!(
            "T_center = {} °C is implausibly far below {} °C",
            meas.t_center, geom.t_sh_ref
        )));
    }
    let rho = density_from_pressure(meas.p_bottom - meas.p_center, meas.z_center - meas.z_bottom)?;
    let sensible = geom.m_sh * props.cp_pcs() * (meas.t_center - geom.t_sh_ref) / KJ_PER_KWH;
    let latent = latent_energy(rho, geom.m_sh, props)?;
    Ok((sensible + latent).max(0.0))
}

/// Sensible heat stored in the upper (DHW) zone above its reference
/// temperature (kWh, never negative). The phase change lies below the DHW
/// range, so no latent term appears.
pub fn stored_energy_dhw(
    meas: &TankMeasurement,
    geom: &TankGeometry,
    props: &PcsProperties,
) -> Result<f64> {
    if !meas.t_top.is_finite() {
        return Err(Error::InvalidMeasurement("T_top is not finite".into()));
    }
    Ok((geom.m_dhw * props.cp_pcs() * (meas.t_top - geom.t_dhw_ref) / KJ_PER_KWH).max(0.0))
}

/// Heat delivered by the heat pump in SH mode from supply/return temperatures
/// and volume flow (l/s), using the temperature-dependent density and the
/// effective heat capacity map.
pub fn hp_heat_sh(vdot: f64, t_sup: f64, t_ret: f64, props: &PcsProperties) -> Result<HeatFlow> {
    if !(vdot >= 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "negative volume flow {vdot} l/s"
        )));
    }
    let rho = props.density(t_sup, Branch::Melting);
    let cp = props.cp_approx_curve.eval(t_sup);
    Ok(HeatFlow {
        kw: rho.value * vdot / 1000.0 * cp.value * (t_sup - t_ret),
        extrapolated: rho.extrapolated || cp.extrapolated,
    })
}

/// Heat delivered in DHW mode; the slurry is fully liquid at DHW temperatures.
pub fn hp_heat_dhw(vdot: f64, t_sup: f64, t_ret: f64, props: &PcsProperties) -> Result<HeatFlow> {
    if !(vdot >= 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "negative volume flow {vdot} l/s"
        )));
    }
    Ok(HeatFlow {
        kw: props.rho_liq * vdot / 1000.0 * props.cp_pcs() * (t_sup - t_ret),
        extrapolated: false,
    })
}
