//! Ambient-dependent heat-pump efficiency.

use serde::{Deserialize, Serialize};

use crate::dispatch::HpMode;
use crate::{Error, Result};

/// `cop = a + b·T_amb`, clipped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCop {
    pub a: f64,
    pub b: f64,
    pub min: f64,
    pub max: f64,
}

impl AffineCop {
    pub fn eval(&self, t_amb: f64) -> f64 {
        (self.a + self.b * t_amb).clamp(self.min, self.max)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.min >= 1.0 && self.min <= self.max) || !self.a.is_finite() || !self.b.is_finite()
        {
            return Err(Error::config(format!(
                "{what} COP clip range must satisfy 1 <= min <= max"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopModel {
    pub sh: AffineCop,
    pub dhw: AffineCop,
}

impl Default for CopModel {
    /// Space heating lifts to about 35 °C, hot water to about 60 °C, hence
    /// the lower DHW line.
    fn default() -> Self {
        Self {
            sh: AffineCop {
                a: 5.6,
                b: -0.16,
                min: 2.6,
                max: 4.3,
            },
            dhw: AffineCop {
                a: 3.6,
                b: -0.08,
                min: 2.0,
                max: 3.2,
            },
        }
    }
}

impl CopModel {
    pub fn validate(&self) -> Result<()> {
        self.sh.validate("SH")?;
        self.dhw.validate("DHW")
    }

    /// COP in the given mode; an idle heat pump is reported with its SH value.
    pub fn eval(&self, t_amb: f64, mode: HpMode) -> f64 {
        match mode {
            HpMode::Dhw => self.dhw.eval(t_amb),
            HpMode::Sh | HpMode::Off => self.sh.eval(t_amb),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_anchors() {
        let c = CopModel::default();
        assert!((c.eval(2.5, HpMode::Sh) - 4.4).abs() <= 0.3);
        let warm = c.eval(17.0, HpMode::Sh);
        assert!((2.6..=3.0).contains(&warm), "{warm}");
        assert_eq!(c.eval(-15.0, HpMode::Sh), 4.3);
        assert_eq!(c.eval(40.0, HpMode::Sh), 2.6);
        assert!(c.eval(10.0, HpMode::Dhw) < c.eval(10.0, HpMode::Sh));
    }

    #[test]
    fn rejects_cop_below_one() {
        let mut c = CopModel::default();
        c.dhw.min = 0.5;
        assert!(c.validate().is_err());
    }
}
