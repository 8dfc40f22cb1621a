//! Two-branch enthalpy/temperature relation of the slurry.
//!
//! Along each branch `h = cp·T + L·f(T)`, where the liquid fraction `f`
//! follows that branch's density curve. Both are piecewise linear, so the
//! inverse is exact segment by segment. The freezing curve lies below the
//! melting curve in temperature, so at equal enthalpy a freezing slurry is
//! never warmer than a melting one.

use serde::{Deserialize, Serialize};

use super::{Band, PcsProperties};

/// Temperature range over which the relation is defined (°C).
pub const TEMPERATURE_DOMAIN: (f64, f64) = (0.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Melting,
    Freezing,
}

impl Branch {
    pub fn other(self) -> Self {
        match self {
            Branch::Melting => Branch::Freezing,
            Branch::Freezing => Branch::Melting,
        }
    }

    /// Branch to follow for a given direction of net heat flow; `None` when
    /// there is no flow and the current branch is kept.
    pub fn for_heat_flow(q: f64) -> Option<Self> {
        if q > 0.0 {
            Some(Branch::Melting)
        } else if q < 0.0 {
            Some(Branch::Freezing)
        } else {
            None
        }
    }
}

/// A value that may have been saturated at the edge of its valid range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl PcsProperties {
    pub fn band(&self, branch: Branch) -> Band {
        match branch {
            Branch::Melting => self.melt_range,
            Branch::Freezing => self.freeze_range,
        }
    }

    /// Liquid paraffin fraction along a branch at temperature `t`, read from
    /// the branch's density curve.
    pub fn branch_fraction(&self, t: f64, branch: Branch) -> f64 {
        let rho = self.density(t, branch).value;
        ((rho - self.rho_sol) / (self.rho_liq - self.rho_sol)).clamp(0.0, 1.0)
    }

    /// Specific enthalpy relative to 0 °C solid (kJ/kg).
    pub fn temperature_to_enthalpy(&self, t: f64, branch: Branch) -> Clamped {
        let (lo, hi) = TEMPERATURE_DOMAIN;
        let tc = t.clamp(lo, hi);
        Clamped {
            value: self.cp_pcs() * tc + self.latent_heat() * self.branch_fraction(tc, branch),
            clamped: tc != t,
        }
    }

    /// Inverse of [`temperature_to_enthalpy`](Self::temperature_to_enthalpy)
    /// on the same branch. Enthalpies outside the domain saturate.
    pub fn enthalpy_to_temperature(&self, h: f64, branch: Branch) -> Clamped {
        let (lo, hi) = TEMPERATURE_DOMAIN;
        let h_at = |t: f64| self.temperature_to_enthalpy(t, branch).value;
        if h.is_nan() || h < h_at(lo) {
            return Clamped {
                value: lo,
                clamped: true,
            };
        }
        if h > h_at(hi) {
            return Clamped {
                value: hi,
                clamped: true,
            };
        }
        // h(T) is linear between the curve's breakpoints.
        let curve = match branch {
            Branch::Melting => &self.density_melting,
            Branch::Freezing => &self.density_freezing,
        };
        let mut knots: Vec<f64> = curve
            .points()
            .iter()
            .map(|p| p.0)
            .filter(|t| *t > lo && *t < hi)
            .collect();
        knots.insert(0, lo);
        knots.push(hi);
        let (mut t0, mut h0) = (lo, h_at(lo));
        for &t1 in &knots[1..] {
            let h1 = h_at(t1);
            if h <= h1 {
                let value = if h1 > h0 {
                    t0 + (t1 - t0) * (h - h0) / (h1 - h0)
                } else {
                    t0
                };
                return Clamped {
                    value,
                    clamped: false,
                };
            }
            (t0, h0) = (t1, h1);
        }
        Clamped {
            value: hi,
            clamped: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcs::{FREEZE_ONSET_SHARE, FREEZE_ONSET_WIDTH};
    use proptest::prelude::*;

    #[test]
    fn single_phase_region_agrees() {
        let p = PcsProperties::default();
        for t in [5.0, 15.0, 23.9] {
            let hm = p.temperature_to_enthalpy(t, Branch::Melting).value;
            let hf = p.temperature_to_enthalpy(t, Branch::Freezing).value;
            assert_eq!(hm, hf);
            let tm = p.enthalpy_to_temperature(hm, Branch::Melting).value;
            let tf = p.enthalpy_to_temperature(hm, Branch::Freezing).value;
            assert!((tm - tf).abs() < 1e-12);
        }
    }

    #[test]
    fn melt_midpoint_lies_in_band() {
        let p = PcsProperties::default();
        let band = p.melt_range;
        let h = 0.5 * (p.cp_pcs() * band.low + p.cp_pcs() * band.high + p.latent_heat());
        let t = p.enthalpy_to_temperature(h, Branch::Melting);
        assert!(!t.clamped);
        assert!(band.contains(t.value));
    }

    #[test]
    fn slopes_match_sensible_and_latent_rates() {
        let p = PcsProperties::default();
        let dh = 1e-3;
        let slope = |h: f64, b| {
            (p.enthalpy_to_temperature(h + dh, b).value - p.enthalpy_to_temperature(h, b).value)
                / dh
        };
        let h_in = p.temperature_to_enthalpy(36.0, Branch::Melting).value;
        let expected_in = 1.0 / (p.cp_pcs() + p.latent_heat() / p.melt_range.width());
        assert!((slope(h_in, Branch::Melting) - expected_in).abs() < 1e-9);
        let h_out = p.temperature_to_enthalpy(60.0, Branch::Melting).value;
        assert!((slope(h_out, Branch::Melting) - 1.0 / p.cp_pcs()).abs() < 1e-9);
    }

    #[test]
    fn freezing_plateau_is_sharp() {
        let p = PcsProperties::default();
        let top = p.freeze_range.high;
        let h_top = p.temperature_to_enthalpy(top, Branch::Freezing).value;
        let h_onset = p
            .temperature_to_enthalpy(top - FREEZE_ONSET_WIDTH, Branch::Freezing)
            .value;
        let latent_released = h_top - h_onset - p.cp_pcs() * FREEZE_ONSET_WIDTH;
        assert!((latent_released - FREEZE_ONSET_SHARE * p.latent_heat()).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_enthalpy_saturates() {
        let p = PcsProperties::default();
        let low = p.enthalpy_to_temperature(-10.0, Branch::Freezing);
        assert_eq!(
            low,
            Clamped {
                value: 0.0,
                clamped: true
            }
        );
        let high = p.enthalpy_to_temperature(1e6, Branch::Melting);
        assert_eq!(
            high,
            Clamped {
                value: 100.0,
                clamped: true
            }
        );
        assert!(p.temperature_to_enthalpy(120.0, Branch::Melting).clamped);
    }

    #[test]
    fn zero_paraffin_has_no_hysteresis() {
        let p = PcsProperties::default().with_mass_fraction(0.0).unwrap();
        for t in [10.0, 27.0, 35.0, 50.0] {
            let h = p.temperature_to_enthalpy(t, Branch::Melting).value;
            assert_eq!(h, p.temperature_to_enthalpy(t, Branch::Freezing).value);
        }
    }

    proptest! {
        #[test]
        fn round_trip_identity(t in 0.0f64..100.0, melting in any::<bool>()) {
            let p = PcsProperties::default();
            let b = if melting { Branch::Melting } else { Branch::Freezing };
            let h = p.temperature_to_enthalpy(t, b).value;
            let back = p.enthalpy_to_temperature(h, b);
            prop_assert!(!back.clamped);
            prop_assert!((back.value - t).abs() < 1e-9);
        }

        #[test]
        fn branches_strictly_monotone(t in 0.0f64..99.0, dt in 1e-3f64..1.0) {
            let p = PcsProperties::default();
            for b in [Branch::Melting, Branch::Freezing] {
                let h1 = p.temperature_to_enthalpy(t, b).value;
                let h2 = p.temperature_to_enthalpy((t + dt).min(100.0), b).value;
                prop_assert!(h2 > h1);
            }
        }

        #[test]
        fn freezing_never_warmer_than_melting(h in 0.0f64..370.0) {
            let p = PcsProperties::default();
            let tm = p.enthalpy_to_temperature(h, Branch::Melting).value;
            let tf = p.enthalpy_to_temperature(h, Branch::Freezing).value;
            prop_assert!(tf <= tm + 1e-12);
        }
    }
}
