//! Slotted-time simulation of real and virtual power queues.
//!
//! Each slot: arrivals `A(t)` are drawn, the policy decides on the current
//! `(Q(t), U(t))`, then
//!
//! ```text
//! Q(t+1) = [Q(t) - S(t)]+ + A(t)
//! U(t+1) = [U(t) - P_av]+ + P(t)
//! ```
//!
//! where `S(t)` is the decision's rate and `P(t)` its power. A bounded
//! virtual queue `U` means the long-run average power stays within `P_av`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::ConflictNetwork;
use crate::ratepower::LinkRadio;
use crate::schedulers::{PolicyKind, PowerDecision, Scheduler, SchedulerInput, TieBreaker};

/// Shortest horizon for which [`stability_verdict`] gives an answer.
pub const MIN_VERDICT_HORIZON: u64 = 1_000;

/// Default number of trace samples kept per run.
pub const DEFAULT_TRACE_POINTS: u64 = 10_000;

const ARRIVAL_STREAM: u64 = 0;
const TIE_STREAM: u64 = 1;
const DEPARTURE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalKind {
    /// `batch` units with probability `mean / batch` each slot.
    BernoulliBatch { batch: f64 },
    /// Poisson-distributed count with the link's mean.
    Poisson,
    /// `mean * period` units every `period` slots, starting at slot 0.
    Periodic { period: u64 },
    /// Exactly the mean, every slot.
    Constant,
}

/// Per-link arrival process with configured means.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    kind: ArrivalKind,
    means: Vec<f64>,
    poisson: Vec<Option<Poisson<f64>>>,
}

impl ArrivalProcess {
    pub fn new(kind: ArrivalKind, means: Vec<f64>) -> Result<Self> {
        if let Some(m) = means.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "arrival means must be finite and >= 0, got {m}"
            )));
        }
        match kind {
            ArrivalKind::BernoulliBatch { batch } => {
                if !(batch.is_finite() && batch > 0.0) {
                    return Err(Error::InvalidInput(format!("batch size must be positive, got {batch}")));
                }
                if let Some((l, m)) = means.iter().enumerate().find(|(_, m)| **m > batch) {
                    return Err(Error::InvalidInput(format!(
                        "link {l}: mean {m} exceeds the batch size {batch}, so no Bernoulli probability fits"
                    )));
                }
            }
            ArrivalKind::Periodic { period: 0 } => {
                return Err(Error::InvalidInput("arrival period must be >= 1".into()));
            }
            _ => {}
        }
        let poisson = means
            .iter()
            .map(|&m| match kind {
                ArrivalKind::Poisson if m > 0.0 => Poisson::new(m).ok(),
                _ => None,
            })
            .collect();
        Ok(Self { kind, means, poisson })
    }

    pub fn kind(&self) -> &ArrivalKind {
        &self.kind
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Same shape with every mean multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.kind.clone(), self.means.iter().map(|m| m * factor).collect())
    }

    pub fn draw(&self, slot: u64, rng: &mut impl Rng, out: &mut [f64]) {
        for (l, a) in out.iter_mut().enumerate() {
            let mean = self.means[l];
            *a = match self.kind {
                ArrivalKind::BernoulliBatch { batch } => {
                    if mean > 0.0 && rng.random_bool((mean / batch).min(1.0)) {
                        batch
                    } else {
                        0.0
                    }
                }
                ArrivalKind::Poisson => self.poisson[l].as_ref().map_or(0.0, |d| d.sample(rng)),
                ArrivalKind::Periodic { period } => {
                    if slot.is_multiple_of(period) {
                        mean * period as f64
                    } else {
                        0.0
                    }
                }
                ArrivalKind::Constant => mean,
            };
        }
    }
}

/// How much the virtual power queue drains each slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VirtualDepartures {
    /// Exactly `P_av` per slot.
    #[default]
    Constant,
    /// I.i.d. uniform on `[0, 2 P_av]`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub q: Vec<f64>,
    pub u: Vec<f64>,
}

impl QueueState {
    pub fn zeros(num_links: usize) -> Self {
        Self {
            q: vec![0.0; num_links],
            u: vec![0.0; num_links],
        }
    }

    pub fn sum_q(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `max_l Q_l^2 + U_l^2`.
    pub fn lyapunov(&self) -> f64 {
        self.q
            .iter()
            .zip(&self.u)
            .map(|(q, u)| q * q + u * u)
            .fold(0.0, f64::max)
    }

    /// Applies one slot in place and returns the amount actually served on
    /// each link.
    pub fn apply(&mut self, decision: &PowerDecision, arrivals: &[f64], drain: &[f64]) -> Vec<f64> {
        let mut served = vec![0.0; self.q.len()];
        for l in 0..self.q.len() {
            served[l] = self.q[l].min(decision.rate[l]);
            self.q[l] = (self.q[l] - decision.rate[l]).max(0.0) + arrivals[l];
            self.u[l] = (self.u[l] - drain[l]).max(0.0) + decision.power[l];
        }
        served
    }
}

/// One slot of both queue updates, with the virtual queue draining `p_avg`.
pub fn step(state: &QueueState, decision: &PowerDecision, arrivals: &[f64], p_avg: &[f64]) -> QueueState {
    let mut next = state.clone();
    next.apply(decision, arrivals, p_avg);
    next
}

/// Everything needed for one reproducible run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: ConflictNetwork,
    pub radios: Vec<LinkRadio>,
    pub arrivals: ArrivalProcess,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub seed: u64,
    pub initial: Option<QueueState>,
    /// Slots between trace samples; `None` picks one giving about
    /// [`DEFAULT_TRACE_POINTS`] samples.
    pub trace_stride: Option<u64>,
    pub log_slots: bool,
    pub virtual_departures: VirtualDepartures,
}

impl Scenario {
    pub fn new(
        net: ConflictNetwork,
        radios: Vec<LinkRadio>,
        arrivals: ArrivalProcess,
        policy: PolicyKind,
        horizon: u64,
        seed: u64,
    ) -> Self {
        Self {
            net,
            radios,
            arrivals,
            policy,
            horizon,
            seed,
            initial: None,
            trace_stride: None,
            log_slots: false,
            virtual_departures: VirtualDepartures::Constant,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.net.num_links();
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1 slot".into()));
        }
        if self.radios.len() != n {
            return Err(Error::LengthMismatch {
                what: "radios",
                expected: n,
                got: self.radios.len(),
            });
        }
        if self.arrivals.means().len() != n {
            return Err(Error::LengthMismatch {
                what: "arrival means",
                expected: n,
                got: self.arrivals.means().len(),
            });
        }
        if let Some(init) = &self.initial {
            SchedulerInput::new(&init.q, &init.u, &self.net, &self.radios)?;
        }
        if self.trace_stride == Some(0) {
            return Err(Error::InvalidInput("trace stride must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    /// Slot index of the state, `t + 1` after slot `t` was applied.
    pub slot: u64,
    pub sum_q: f64,
    pub lyapunov: f64,
}

/// Full record of one slot, kept only when slot logging is on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub power: Vec<f64>,
    pub rate: Vec<f64>,
    pub served: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon: u64,
    /// Time average of `sum_l Q_l(t)` over `t = 1..=T`.
    pub avg_sum_q: f64,
    pub avg_power: Vec<f64>,
    pub avg_arrivals: Vec<f64>,
    /// Configured arrival means.
    pub arrival_means: Vec<f64>,
    pub initial: QueueState,
    pub max_u: Vec<f64>,
    pub final_state: QueueState,
    pub total_arrivals: Vec<f64>,
    pub total_served: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub slots: Option<Vec<SlotRecord>>,
}

impl RunMetrics {
    pub fn max_u_overall(&self) -> f64 {
        self.max_u.iter().copied().fold(0.0, f64::max)
    }
}

pub fn run(scenario: &Scenario) -> Result<RunMetrics> {
    scenario.validate()?;
    let n = scenario.net.num_links();
    let t_max = scenario.horizon;
    let scheduler = Scheduler::new(scenario.policy, &scenario.net, &scenario.radios)?;
    let p_avg: Vec<f64> = scenario.radios.iter().map(LinkRadio::p_avg).collect();

    let stream = |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(k);
        rng
    };
    let mut arrival_rng = stream(ARRIVAL_STREAM);
    let mut ties = TieBreaker::Seeded(stream(TIE_STREAM));
    let mut departure_rng = stream(DEPARTURE_STREAM);

    let initial = scenario.initial.clone().unwrap_or_else(|| QueueState::zeros(n));
    let mut state = initial.clone();
    let stride = scenario
        .trace_stride
        .unwrap_or_else(|| (t_max / DEFAULT_TRACE_POINTS).max(1));

    let mut arrivals = vec![0.0; n];
    let mut drain = p_avg.clone();
    let mut sum_q_total = 0.0;
    let mut power_total = vec![0.0; n];
    let mut arrival_total = vec![0.0; n];
    let mut served_total = vec![0.0; n];
    let mut max_u = initial.u.clone();
    let mut trace = Vec::with_capacity((t_max / stride) as usize + 1);
    let mut slots = scenario.log_slots.then(Vec::new);

    for t in 0..t_max {
        scenario.arrivals.draw(t, &mut arrival_rng, &mut arrivals);
        let input = SchedulerInput::new(&state.q, &state.u, &scenario.net, &scenario.radios)
            .map_err(|e| Error::AtSlot { slot: t, source: Box::new(e) })?;
        let decision = scheduler.decide(&input, &mut ties);
        if scenario.virtual_departures == VirtualDepartures::Uniform {
            for (d, &p) in drain.iter_mut().zip(&p_avg) {
                *d = departure_rng.random_range(0.0..=2.0 * p);
            }
        }
        let before = slots.as_ref().map(|_| state.clone());
        let served = state.apply(&decision, &arrivals, &drain);

        for l in 0..n {
            power_total[l] += decision.power[l];
            arrival_total[l] += arrivals[l];
            served_total[l] += served[l];
            max_u[l] = max_u[l].max(state.u[l]);
        }
        let sum_q = state.sum_q();
        sum_q_total += sum_q;
        if (t + 1) % stride == 0 {
            trace.push(TracePoint {
                slot: t + 1,
                sum_q,
                lyapunov: state.lyapunov(),
            });
        }
        if let (Some(log), Some(before)) = (slots.as_mut(), before) {
            log.push(SlotRecord {
                slot: t,
                q: before.q,
                u: before.u,
                arrivals: arrivals.clone(),
                power: decision.power,
                rate: decision.rate,
                served,
            });
        }
    }

    let per_slot = |v: Vec<f64>| v.into_iter().map(|x| x / t_max as f64).collect();
    Ok(RunMetrics {
        policy: scenario.policy,
        seed: scenario.seed,
        horizon: t_max,
        avg_sum_q: sum_q_total / t_max as f64,
        avg_power: per_slot(power_total),
        avg_arrivals: per_slot(arrival_total.clone()),
        arrival_means: scenario.arrivals.means().to_vec(),
        initial,
        max_u,
        final_state: state,
        total_arrivals: arrival_total,
        total_served: served_total,
        trace,
        slots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Inconclusive,
}

impl Stability {
    pub fn name(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Inconclusive => "inconclusive",
        }
    }
}

/// Normalized-slope cut-offs for [`stability_verdict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityThresholds {
    pub stable_below: f64,
    pub unstable_above: f64,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        Self {
            stable_below: 0.01,
            unstable_above: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub verdict: Stability,
    /// Least-squares slope of `sum Q` per slot divided by the mean per-link
    /// arrival rate.
    pub normalized_slope: f64,
}

pub fn stability_verdict(metrics: &RunMetrics, window: f64) -> Result<StabilityReport> {
    stability_verdict_with(metrics, window, StabilityThresholds::default())
}

/// Fits a line to the `sum Q` trace over the last `window` fraction of the
/// run and classifies its slope.
pub fn stability_verdict_with(
    metrics: &RunMetrics,
    window: f64,
    thresholds: StabilityThresholds,
) -> Result<StabilityReport> {
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::InvalidInput(format!("window must lie in (0, 1), got {window}")));
    }
    if metrics.horizon < MIN_VERDICT_HORIZON {
        return Err(Error::HorizonTooShort {
            slots: metrics.horizon,
            min: MIN_VERDICT_HORIZON,
        });
    }
    let start = ((1.0 - window) * metrics.horizon as f64).floor() as u64;
    let points: Vec<(f64, f64)> = metrics
        .trace
        .iter()
        .filter(|p| p.slot >= start)
        .map(|p| (p.slot as f64, p.sum_q))
        .collect();
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} trace samples fall in the verdict window; lower the trace stride",
            points.len()
        )));
    }
    let slope = least_squares_slope(&points);

    let n = metrics.arrival_means.len().max(1) as f64;
    let mut mean_rate = metrics.arrival_means.iter().sum::<f64>() / n;
    if mean_rate <= 0.0 {
        mean_rate = metrics.avg_arrivals.iter().sum::<f64>() / n;
    }
    let normalized_slope = if mean_rate > 0.0 { slope / mean_rate } else { slope };
    let verdict = if normalized_slope < thresholds.stable_below {
        Stability::Stable
    } else if normalized_slope > thresholds.unstable_above {
        Stability::Unstable
    } else {
        Stability::Inconclusive
    };
    Ok(StabilityReport {
        verdict,
        normalized_slope,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkCompliance {
    pub link: usize,
    pub avg_power: f64,
    pub p_avg: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCompliance {
    pub links: Vec<LinkCompliance>,
    /// Largest virtual-queue value seen on any link.
    pub max_u: f64,
}

impl PowerCompliance {
    pub fn all_ok(&self) -> bool {
        self.links.iter().all(|l| l.ok)
    }
}

/// Flags links whose time-average power exceeds `p_avg + tol`.
pub fn power_compliance(metrics: &RunMetrics, p_avg: &[f64], tol: f64) -> PowerCompliance {
    let links = metrics
        .avg_power
        .iter()
        .zip(p_avg)
        .enumerate()
        .map(|(link, (&avg_power, &p_avg))| LinkCompliance {
            link,
            avg_power,
            p_avg,
            ok: avg_power <= p_avg + tol,
        })
        .collect();
    PowerCompliance {
        links,
        max_u: metrics.max_u_overall(),
    }
}

/// Windowed means of the trace's Lyapunov value `max_l Q_l^2 + U_l^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftDiagnostic {
    /// Mean over slots in `[3T/8, 5T/8)`.
    pub mid_mean: f64,
    /// Mean over the final quarter.
    pub final_mean: f64,
}

impl DriftDiagnostic {
    /// Relative growth of the final-quarter mean over the mid-run mean.
    pub fn growth(&self) -> f64 {
        if self.mid_mean > 0.0 {
            self.final_mean / self.mid_mean - 1.0
        } else if self.final_mean > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

pub fn drift_diagnostic(metrics: &RunMetrics) -> DriftDiagnostic {
    let t = metrics.horizon as f64;
    let mean_in = |lo: f64, hi: f64| {
        let vals: Vec<f64> = metrics
            .trace
            .iter()
            .filter(|p| (p.slot as f64) >= lo * t && (p.slot as f64) < hi * t)
            .map(|p| p.lyapunov)
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    DriftDiagnostic {
        mid_mean: mean_in(0.375, 0.625),
        final_mean: mean_in(0.75, 1.0 + f64::EPSILON),
    }
}
