//! Weather and load time series driving the plant.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::forecast::{format_timestamp, is_on_grid, parse_timestamp, step_duration};
use crate::{Error, Result};

/// Values held constant over one 15-minute step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScenarioStep {
    pub t_amb: f64,
    pub g: f64,
    pub q_l_sh: f64,
    pub q_l_dhw: f64,
    pub p_l: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlantScenario {
    pub times: Vec<NaiveDateTime>,
    pub steps: Vec<ScenarioStep>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    timestamp: String,
    #[serde(rename = "T_amb_C")]
    t_amb: f64,
    #[serde(rename = "G_Wm2")]
    g: f64,
    #[serde(rename = "q_l_sh_kW")]
    q_l_sh: f64,
    #[serde(rename = "q_l_dhw_kW")]
    q_l_dhw: f64,
    #[serde(rename = "p_l_kW")]
    p_l: f64,
}

impl PlantScenario {
    pub fn new(times: Vec<NaiveDateTime>, steps: Vec<ScenarioStep>) -> Result<Self> {
        let s = Self { times, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.steps.len() {
            return Err(Error::Dimension(format!(
                "{} timestamps for {} scenario rows",
                self.times.len(),
                self.steps.len()
            )));
        }
        if let Some(&t) = self.times.iter().find(|t| !is_on_grid(**t)) {
            return Err(Error::Parse(format!(
                "{} is not on the 15-minute grid",
                format_timestamp(t)
            )));
        }
        if let Some(w) = self
            .times
            .windows(2)
            .find(|w| w[1] - w[0] != step_duration())
        {
            return Err(Error::Parse(format!(
                "scenario rows must be consecutive 15-minute steps (gap after {})",
                format_timestamp(w[0])
            )));
        }
        for (t, s) in self.times.iter().zip(&self.steps) {
            let values = [s.t_amb, s.g, s.q_l_sh, s.q_l_dhw, s.p_l];
            if values.iter().any(|v| !v.is_finite()) || values[1..].iter().any(|v| *v < 0.0) {
                return Err(Error::Parse(format!(
                    "row {} has non-finite values or negative loads/irradiance",
                    format_timestamp(*t)
                )));
            }
        }
        Ok(())
    }

    /// Rows `[from, from + n)` as a new scenario.
    pub fn slice(&self, from: usize, n: usize) -> Self {
        let to = (from + n).min(self.len());
        Self {
            times: self.times[from..to].to_vec(),
            steps: self.steps[from..to].to_vec(),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let (mut times, mut steps) = (Vec::new(), Vec::new());
        for row in rdr.deserialize::<Row>() {
            let r = row?;
            times.push(parse_timestamp(&r.timestamp)?);
            steps.push(ScenarioStep {
                t_amb: r.t_amb,
                g: r.g,
                q_l_sh: r.q_l_sh,
                q_l_dhw: r.q_l_dhw,
                p_l: r.p_l,
            });
        }
        Self::new(times, steps)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (t, s) in self.times.iter().zip(&self.steps) {
            w.serialize(Row {
                timestamp: format_timestamp(*t),
                t_amb: s.t_amb,
                g: s.g,
                q_l_sh: s.q_l_sh,
                q_l_dhw: s.q_l_dhw,
                p_l: s.p_l,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2019, 3, 19)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let s = PlantScenario::new(
            vec![t(0, 0), t(0, 15)],
            vec![
                ScenarioStep {
                    t_amb: 3.5,
                    g: 0.0,
                    q_l_sh: 2.0,
                    q_l_dhw: 0.1,
                    p_l: 0.4,
                },
                ScenarioStep {
                    t_amb: 3.25,
                    g: 12.5,
                    q_l_sh: 1.9,
                    q_l_dhw: 0.0,
                    p_l: 0.35,
                },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,T_amb_C,G_Wm2,q_l_sh_kW,q_l_dhw_kW,p_l_kW"));
        assert_eq!(PlantScenario::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn rejects_gaps_and_negative_loads() {
        let step = ScenarioStep::default();
        assert!(PlantScenario::new(vec![t(0, 0), t(0, 30)], vec![step, step]).is_err());
        let bad = ScenarioStep {
            q_l_sh: -1.0,
            ..step
        };
        assert!(PlantScenario::new(vec![t(0, 0)], vec![bad]).is_err());
        assert!(PlantScenario::new(vec![t(0, 7)], vec![step]).is_err());
    }
}
