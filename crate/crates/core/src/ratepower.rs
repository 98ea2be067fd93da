//! Discrete power levels, rate-power curves and per-link power budgets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when matching a power value against the
/// configured levels and when comparing convexity slopes.
const LEVEL_TOL: f64 = 1e-12;

/// Rate achievable as a function of transmit power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatePowerCurve {
    /// `rate = W * log2(1 + h * P / (N0 W))`, the inverse of
    /// `P = N0 W / h * (2^(c / W) - 1)`.
    Awgn { gain: f64, n0w: f64, bandwidth: f64 },
    /// Explicit `(power, rate)` points.
    Table(Vec<(f64, f64)>),
}

impl RatePowerCurve {
    pub fn awgn(gain: f64, n0w: f64, bandwidth: f64) -> Result<Self> {
        for (name, v) in [("gain", gain), ("n0w", n0w), ("bandwidth", bandwidth)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "awgn {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(RatePowerCurve::Awgn {
            gain,
            n0w,
            bandwidth,
        })
    }

    /// Table curve; points are sorted by power and must contain `(0, 0)`
    /// with rate strictly increasing in power.
    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|(p, r)| !p.is_finite() || !r.is_finite()) {
            return Err(Error::InvalidInput("table entries must be finite".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.first() != Some(&(0.0, 0.0)) {
            return Err(Error::InvalidInput(
                "table curve must start at (power 0, rate 0)".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::InvalidInput(format!(
                    "table curve must be strictly increasing: ({}, {}) then ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(RatePowerCurve::Table(points))
    }

    /// Rate at `power`, or `None` when a table curve has no such point.
    pub fn rate_at(&self, power: f64) -> Option<f64> {
        match self {
            RatePowerCurve::Awgn {
                gain,
                n0w,
                bandwidth,
            } => (power >= 0.0).then(|| bandwidth * (1.0 + gain * power / n0w).log2()),
            RatePowerCurve::Table(points) => points
                .iter()
                .find(|(p, _)| same_level(*p, power))
                .map(|&(_, r)| r),
        }
    }

    /// Power needed for `rate` on an AWGN curve; `None` for tables.
    pub fn power_for_rate(&self, rate: f64) -> Option<f64> {
        match self {
            RatePowerCurve::Awgn {
                gain,
                n0w,
                bandwidth,
            } => Some(n0w / gain * ((rate / bandwidth).exp2() - 1.0)),
            RatePowerCurve::Table(_) => None,
        }
    }
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Outcome of [`validate_convexity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConvexityReport {
    Ok,
    /// The incremental power per unit rate drops between the segment ending
    /// at `levels[index]` and the one starting there.
    Violation {
        index: usize,
        slope_before: f64,
        slope_after: f64,
    },
    /// A level has no rate on the curve.
    MissingLevel { power: f64 },
}

impl ConvexityReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ConvexityReport::Ok)
    }
}

/// Checks that power as a function of rate is convex over `levels`:
/// successive slopes `dP / dc` must not decrease.
pub fn validate_convexity(curve: &RatePowerCurve, levels: &[f64]) -> ConvexityReport {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| same_level(*a, *b));
    let mut points = Vec::with_capacity(sorted.len());
    for &p in &sorted {
        match curve.rate_at(p) {
            Some(r) => points.push((p, r)),
            None => return ConvexityReport::MissingLevel { power: p },
        }
    }
    let slopes: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
        .collect();
    for (i, s) in slopes.windows(2).enumerate() {
        if s[1] < s[0] - LEVEL_TOL * s[0].abs().max(1.0) {
            return ConvexityReport::Violation {
                index: i + 1,
                slope_before: s[0],
                slope_after: s[1],
            };
        }
    }
    ConvexityReport::Ok
}

/// Discrete power levels of one link with their rates and average budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRadio {
    levels: Vec<f64>,
    rates: Vec<f64>,
    p_avg: f64,
}

impl LinkRadio {
    /// Levels must be strictly increasing and start at 0, rates must be
    /// strictly increasing and start at 0.
    pub fn new(levels: Vec<f64>, rates: Vec<f64>, p_avg: f64) -> Result<Self> {
        let bad = |reason: String| Error::InvalidInput(reason);
        if levels.len() != rates.len() {
            return Err(bad(format!(
                "{} levels but {} rates",
                levels.len(),
                rates.len()
            )));
        }
        if levels.len() < 2 {
            return Err(bad("a radio needs level 0 and at least one positive level".into()));
        }
        if levels.iter().chain(&rates).any(|v| !v.is_finite()) {
            return Err(bad("levels and rates must be finite".into()));
        }
        if levels[0] != 0.0 || rates[0] != 0.0 {
            return Err(bad("the lowest level must be power 0 with rate 0".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("levels must be strictly increasing".into()));
        }
        if rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("rates must be strictly increasing in power".into()));
        }
        if !(p_avg.is_finite() && p_avg >= 0.0) {
            return Err(bad(format!("p_avg must be finite and >= 0, got {p_avg}")));
        }
        Ok(Self {
            levels,
            rates,
            p_avg,
        })
    }

    /// Evaluates `curve` at each level. Level 0 is added when missing.
    pub fn from_curve(curve: &RatePowerCurve, levels: &[f64], p_avg: f64) -> Result<Self> {
        let mut levels = levels.to_vec();
        if levels.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput("levels must be finite and >= 0".into()));
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        if levels.first() != Some(&0.0) {
            levels.insert(0, 0.0);
        }
        let rates = levels
            .iter()
            .map(|&p| curve.rate_at(p).ok_or(Error::NotALevel { power: p }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels, rates, p_avg)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn p_avg(&self) -> f64 {
        self.p_avg
    }

    pub fn p_max(&self) -> f64 {
        *self.levels.last().expect("radio has levels")
    }

    pub fn c_max(&self) -> f64 {
        *self.rates.last().expect("radio has rates")
    }

    /// The budget is at or above the peak power, so power control has
    /// nothing to do on this link.
    pub fn budget_is_slack(&self) -> bool {
        self.p_avg >= self.p_max()
    }

    /// Index of the level equal to `power`.
    pub fn level_index(&self, power: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|&p| same_level(p, power))
            .ok_or(Error::NotALevel { power })
    }

    /// Exact table lookup of the rate at a configured level.
    pub fn rate_for_power(&self, power: f64) -> Result<f64> {
        self.level_index(power).map(|i| self.rates[i])
    }

    /// Level maximizing `q * rate - u * power` over all levels; ties go to
    /// the lowest power.
    pub fn optimal_power(&self, q: f64, u: f64) -> LevelChoice {
        let mut best = LevelChoice {
            index: 0,
            power: 0.0,
            rate: 0.0,
            objective: 0.0,
        };
        for (i, (&p, &r)) in self.levels.iter().zip(&self.rates).enumerate().skip(1) {
            let objective = q * r - u * p;
            if objective > best.objective {
                best = LevelChoice {
                    index: i,
                    power: p,
                    rate: r,
                    objective,
                };
            }
        }
        best
    }

    /// Same radio with `power` added as a level.
    pub fn with_level(&self, curve: &RatePowerCurve, power: f64) -> Result<Self> {
        let mut levels = self.levels.clone();
        levels.push(power);
        Self::from_curve(curve, &levels, self.p_avg)
    }
}

/// A link's solo-optimal power level and its objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelChoice {
    pub index: usize,
    pub power: f64,
    pub rate: f64,
    pub objective: f64,
}

/// Free-function form of [`LinkRadio::rate_for_power`].
pub fn rate_for_power(radio: &LinkRadio, power: f64) -> Result<f64> {
    radio.rate_for_power(power)
}

/// Free-function form of [`LinkRadio::optimal_power`].
pub fn optimal_power_for_link(radio: &LinkRadio, q: f64, u: f64) -> LevelChoice {
    radio.optimal_power(q, u)
}
