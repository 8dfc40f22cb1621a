//! Piecewise-linear material tables indexed by temperature.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A tabulated `value(T)` relation with linear interpolation between points
/// and constant extrapolation beyond the first and last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Curve {
    points: Vec<(f64, f64)>,
}

/// Result of evaluating a [`Curve`]; `extrapolated` is set when the argument
/// lay outside the tabulated domain and the endpoint value was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveValue {
    pub value: f64,
    pub extrapolated: bool,
}

impl Curve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config("a material curve needs at least two points"));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::config("material curve contains non-finite values"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config(
                "material curve temperatures must be strictly increasing",
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn eval(&self, t: f64) -> CurveValue {
        let (lo, hi) = self.domain();
        if t < lo {
            return CurveValue {
                value: self.points[0].1,
                extrapolated: true,
            };
        }
        if t > hi {
            return CurveValue {
                value: self.points[self.points.len() - 1].1,
                extrapolated: true,
            };
        }
        // index of the first point with temperature > t
        let idx = self.points.partition_point(|p| p.0 <= t);
        let value = if idx == self.points.len() {
            self.points[idx - 1].1
        } else {
            let (t0, v0) = self.points[idx - 1];
            let (t1, v1) = self.points[idx];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        };
        CurveValue {
            value,
            extrapolated: false,
        }
    }

    /// Exact integral of the interpolant over `[a, b]` (constant extension
    /// outside the domain).
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integrate(b, a);
        }
        let mut knots: Vec<f64> = vec![a];
        knots.extend(self.points.iter().map(|p| p.0).filter(|&t| t > a && t < b));
        knots.push(b);
        knots
            .windows(2)
            .map(|w| 0.5 * (self.eval(w[0]).value + self.eval(w[1]).value) * (w[1] - w[0]))
            .sum()
    }

    /// Reads a `temperature_C,value` table.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            temperature_c: f64,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let normalized: csv::StringRecord =
            headers.iter().map(|h| h.to_ascii_lowercase()).collect();
        rdr.set_headers(normalized);
        let mut points = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            points.push((row.temperature_c, row.value));
        }
        Self::new(points)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["temperature_C", "value"])?;
        for (t, v) in &self.points {
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl TryFrom<Vec<(f64, f64)>> for Curve {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Curve::new(points)
    }
}

impl From<Curve> for Vec<(f64, f64)> {
    fn from(c: Curve) -> Self {
        c.points
    }
}
