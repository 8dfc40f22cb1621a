//! Persistence load forecasts and irradiance-based PV forecasts.
//!
//! Loads are predicted by repeating the value recorded exactly one week
//! earlier. PV power is computed from an irradiance forecast file.

use std::collections::VecDeque;
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::model::pv_power;
use crate::{Error, Result};

/// Controller sampling interval in minutes.
pub const STEP_MINUTES: i64 = 15;
/// One week of samples on the 15-minute grid.
pub const HISTORY_DEPTH: usize = 7 * 24 * 60 / STEP_MINUTES as usize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadSample {
    pub q_l_sh: f64,
    pub q_l_dhw: f64,
    pub p_l: f64,
}

/// Ring buffer of recent load samples.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: usize,
    entries: VecDeque<(NaiveDateTime, LoadSample)>,
}

impl Default for HistoryBuffer {
    fn default() -> Self {
        Self::new(HISTORY_DEPTH)
    }
}

pub fn step_duration() -> Duration {
    Duration::minutes(STEP_MINUTES)
}

pub fn is_on_grid(ts: NaiveDateTime) -> bool {
    ts.second() == 0 && ts.nanosecond() == 0 && i64::from(ts.minute()) % STEP_MINUTES == 0
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn first(&self) -> Option<(NaiveDateTime, LoadSample)> {
        self.entries.front().copied()
    }

    pub fn last(&self) -> Option<(NaiveDateTime, LoadSample)> {
        self.entries.back().copied()
    }

    pub fn record(&mut self, ts: NaiveDateTime, sample: LoadSample) -> Result<()> {
        if !is_on_grid(ts) {
            return Err(Error::History(format!(
                "{ts} is not on the {STEP_MINUTES}-minute grid"
            )));
        }
        if let Some((last, _)) = self.entries.back() {
            if ts <= *last {
                return Err(Error::History(format!("{ts} does not follow {last}")));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((ts, sample));
        Ok(())
    }

    pub fn get(&self, ts: NaiveDateTime) -> Option<LoadSample> {
        let (a, b) = self.entries.as_slices();
        for part in [a, b] {
            if let Ok(i) = part.binary_search_by_key(&ts, |e| e.0) {
                return Some(part[i].1);
            }
        }
        None
    }

    /// Per-step load forecast for `n` steps starting at `now`.
    pub fn forecast_loads(&self, now: NaiveDateTime, n: usize) -> LoadForecast {
        let mut out = LoadForecast::default();
        for i in 0..n {
            let target = now + step_duration() * i as i32;
            let sample = match self.get(target - Duration::days(7)) {
                Some(s) => s,
                None => {
                    out.fallback_steps += 1;
                    match (1..=7).find_map(|k| self.get(target - Duration::days(k))) {
                        Some(s) => s,
                        None => {
                            out.degraded = true;
                            LoadSample::default()
                        }
                    }
                }
            };
            out.q_l_sh.push(sample.q_l_sh);
            out.q_l_dhw.push(sample.q_l_dhw);
            out.p_l.push(sample.p_l);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadForecast {
    pub q_l_sh: Vec<f64>,
    pub q_l_dhw: Vec<f64>,
    pub p_l: Vec<f64>,
    /// Steps served by the same-time-of-day fallback instead of the
    /// one-week persistence value.
    pub fallback_steps: usize,
    /// Set when no history at all was available for some step.
    pub degraded: bool,
}

/// Everything the controller needs to know about the horizon.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub q_l_sh: Vec<f64>,
    pub q_l_dhw: Vec<f64>,
    pub p_l: Vec<f64>,
    pub p_pv: Vec<f64>,
    pub cop_sh: Vec<f64>,
    pub cop_dhw: Vec<f64>,
    pub tariff_dem: Vec<f64>,
    pub tariff_sup: Vec<f64>,
    #[serde(default)]
    pub degraded: bool,
}

impl ForecastBundle {
    pub fn len(&self) -> usize {
        self.q_l_sh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_l_sh.is_empty()
    }

    /// Constant profile of length `n`, mostly for tests.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        n: usize,
        q_l_sh: f64,
        q_l_dhw: f64,
        p_l: f64,
        p_pv: f64,
        cop_sh: f64,
        cop_dhw: f64,
        tariff_dem: f64,
        tariff_sup: f64,
    ) -> Self {
        Self {
            q_l_sh: vec![q_l_sh; n],
            q_l_dhw: vec![q_l_dhw; n],
            p_l: vec![p_l; n],
            p_pv: vec![p_pv; n],
            cop_sh: vec![cop_sh; n],
            cop_dhw: vec![cop_dhw; n],
            tariff_dem: vec![tariff_dem; n],
            tariff_sup: vec![tariff_sup; n],
            degraded: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let series = [
            ("q_l_sh", &self.q_l_sh),
            ("q_l_dhw", &self.q_l_dhw),
            ("p_l", &self.p_l),
            ("p_pv", &self.p_pv),
            ("cop_sh", &self.cop_sh),
            ("cop_dhw", &self.cop_dhw),
            ("tariff_dem", &self.tariff_dem),
            ("tariff_sup", &self.tariff_sup),
        ];
        for (name, s) in series {
            if s.len() != n {
                return Err(Error::Dimension(format!(
                    "forecast {name} has {} steps, expected {n}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!(
                    "forecast {name} contains non-finite values"
                )));
            }
        }
        for (name, s) in [
            ("q_l_sh", &self.q_l_sh),
            ("q_l_dhw", &self.q_l_dhw),
            ("p_l", &self.p_l),
            ("p_pv", &self.p_pv),
        ] {
            if s.iter().any(|v| *v < 0.0) {
                return Err(Error::Dimension(format!("forecast {name} is negative")));
            }
        }
        if self.cop_sh.iter().chain(&self.cop_dhw).any(|c| *c < 1.0) {
            return Err(Error::Dimension("forecast COP below 1".into()));
        }
        Ok(())
    }
}

/// Element-wise PV power for an irradiance forecast (W/m²).
pub fn forecast_pv(irradiance: &[f64], y_pv: f64, mu: f64) -> Vec<f64> {
    irradiance
        .iter()
        .map(|&g| pv_power(g.max(0.0), y_pv, mu))
        .collect()
}

/// Irradiance forecast time series read from `timestamp,g_Wm2` CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrradianceSeries {
    pub times: Vec<NaiveDateTime>,
    pub g: Vec<f64>,
}

#[derive(Deserialize)]
struct IrradianceRow {
    timestamp: String,
    #[serde(rename = "g_Wm2")]
    g: f64,
}

impl IrradianceSeries {
    pub fn new(times: Vec<NaiveDateTime>, g: Vec<f64>) -> Result<Self> {
        if times.len() != g.len() || times.is_empty() {
            return Err(Error::Parse(
                "irradiance series needs matching, non-empty columns".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse("irradiance timestamps must increase".into()));
        }
        Ok(Self { times, g })
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut times, mut g) = (Vec::new(), Vec::new());
        for row in rdr.deserialize::<IrradianceRow>() {
            let row = row?;
            times.push(parse_timestamp(&row.timestamp)?);
            g.push(row.g);
        }
        Self::new(times, g)
    }

    /// Linear interpolation, held constant beyond the ends.
    pub fn at(&self, ts: NaiveDateTime) -> f64 {
        match self.times.binary_search(&ts) {
            Ok(i) => self.g[i],
            Err(0) => self.g[0],
            Err(i) if i == self.times.len() => self.g[i - 1],
            Err(i) => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let w = (ts - t0).num_seconds() as f64 / (t1 - t0).num_seconds() as f64;
                self.g[i - 1] + w * (self.g[i] - self.g[i - 1])
            }
        }
    }

    pub fn window(&self, now: NaiveDateTime, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.at(now + step_duration() * i as i32))
            .collect()
    }
}

/// Accepts `YYYY-MM-DD HH:MM[:SS]` with a space or `T` separator.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    Err(Error::Parse(format!("unrecognised timestamp '{s}'")))
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%d %H:%M:%S").to_string()
}
