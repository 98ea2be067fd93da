//! Scenario files.
//!
//! A scenario is a TOML document describing the network, the per-link
//! radios, the arrival process and the experiment grid. Unknown keys are
//! rejected. See `scenarios/` for complete examples.
//!
//! ```toml
//! name = "six-cycle"
//!
//! [network]
//! edges = [[0, 1], [1, 2], [2, 0]]   # or: conflicts = [[1, 2], [0, 2], [0, 1]]
//! model = "one-hop"                  # or "k-hop" with hops = K
//!
//! [[radio]]                          # one entry for all links, or one per link
//! levels = [0, 1, 3, 7, 15]
//! p_avg = 2.75
//! awgn = { h = 1.0, n0w = 1.0, w = 1.0 }   # or: rates = [0, 1, 2, 3, 4]
//!
//! [arrivals]
//! kind = "poisson"                   # bernoulli_batch (batch), periodic (period), constant
//! direction = [1, 1, 1]              # or: rates = [...]
//!
//! [experiment]
//! policies = ["gecs", "gmw"]
//! loads = [0.2, 0.4, 0.6]
//! horizon = 100000
//! seeds = [1, 2, 3]
//! ```
//!
//! With `direction`, a load `rho` means the arrival vector
//! `rho * rho_star * direction`, where `rho_star` puts `direction` on the
//! boundary of the stability region. With `rates`, a load `rho` means
//! `rho * rates`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::capacity::CapacityRegion;
use crate::error::{Error, Result};
use crate::netmodel::{ConflictNetwork, Graph, InterferenceModel};
use crate::ratepower::{validate_convexity, ConvexityReport, LinkRadio, RatePowerCurve};
use crate::schedulers::PolicyKind;
use crate::sim::{ArrivalKind, ArrivalProcess, QueueState, Scenario, StabilityThresholds, VirtualDepartures};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub network: NetworkSection,
    pub radio: Vec<RadioSection>,
    pub arrivals: ArrivalsSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub initial: Option<InitialSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub vertices: Option<usize>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub hops: Option<usize>,
    #[serde(default)]
    pub conflicts: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    pub levels: Vec<f64>,
    pub p_avg: f64,
    #[serde(default)]
    pub awgn: Option<AwgnSection>,
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwgnSection {
    pub h: f64,
    #[serde(default = "one")]
    pub n0w: f64,
    #[serde(default = "one")]
    pub w: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalsSection {
    pub kind: String,
    #[serde(default)]
    pub batch: Option<f64>,
    #[serde(default)]
    pub period: Option<u64>,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default = "default_loads")]
    pub loads: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_power_tol")]
    pub power_tol: f64,
    #[serde(default)]
    pub trace_stride: Option<u64>,
    #[serde(default)]
    pub virtual_departures: VirtualDepartures,
    #[serde(default)]
    pub stability: Option<StabilityThresholds>,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Default CSV destination for `sweep` and `compare`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_policies() -> Vec<String> {
    vec!["gecs".into(), "gmw".into()]
}

fn default_loads() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}

fn default_horizon() -> u64 {
    100_000
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_window() -> f64 {
    0.5
}

fn default_power_tol() -> f64 {
    0.01
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            policies: default_policies(),
            loads: default_loads(),
            horizon: default_horizon(),
            seeds: default_seeds(),
            window: default_window(),
            power_tol: default_power_tol(),
            trace_stride: None,
            virtual_departures: VirtualDepartures::Constant,
            stability: None,
            jobs: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub u: Option<Vec<f64>>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

/// Load base: what a load factor of 1 means.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadBase {
    /// Scale to the region boundary along this direction.
    Direction(Vec<f64>),
    /// Absolute arrival means.
    Rates(Vec<f64>),
}

/// Validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub net: ConflictNetwork,
    pub radios: Vec<LinkRadio>,
    pub curves: Vec<RatePowerCurve>,
    pub arrival_kind: ArrivalKind,
    pub load_base: LoadBase,
    pub policies: Vec<PolicyKind>,
    pub loads: Vec<f64>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub window: f64,
    pub power_tol: f64,
    pub trace_stride: Option<u64>,
    pub virtual_departures: VirtualDepartures,
    pub thresholds: StabilityThresholds,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub initial: Option<QueueState>,
    /// Non-fatal observations, e.g. budgets that make power control vacuous.
    pub warnings: Vec<String>,
}

fn field_err(field: impl Into<String>, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {msg}", field.into()))
}

fn check_len(field: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(field_err(field, format!("expected {n} entries (one per link), got {}", v.len())));
    }
    if let Some((l, x)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(field_err(format!("{field}[{l}]"), format!("must be finite and >= 0, got {x}")));
    }
    Ok(())
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Model> {
        let net = self.build_network()?;
        let n = net.num_links();
        let mut warnings = Vec::new();

        if self.radio.len() != 1 && self.radio.len() != n {
            return Err(field_err(
                "radio",
                format!("give one entry for all links or one per link ({n}), got {}", self.radio.len()),
            ));
        }
        let mut radios = Vec::with_capacity(n);
        let mut curves = Vec::with_capacity(n);
        for l in 0..n {
            let section = &self.radio[if self.radio.len() == 1 { 0 } else { l }];
            let (curve, radio) = build_radio(l, section)?;
            if radio.budget_is_slack() {
                warnings.push(format!(
                    "link {l}: p_avg {} >= peak power {}, power control is vacuous",
                    radio.p_avg(),
                    radio.p_max()
                ));
            }
            radios.push(radio);
            curves.push(curve);
        }

        let a = &self.arrivals;
        let arrival_kind = match a.kind.as_str() {
            "bernoulli_batch" => ArrivalKind::BernoulliBatch {
                batch: a.batch.ok_or_else(|| field_err("arrivals.batch", "required for bernoulli_batch"))?,
            },
            "poisson" => ArrivalKind::Poisson,
            "periodic" => ArrivalKind::Periodic {
                period: a.period.ok_or_else(|| field_err("arrivals.period", "required for periodic"))?,
            },
            "constant" => ArrivalKind::Constant,
            other => {
                return Err(field_err(
                    "arrivals.kind",
                    format!("unknown kind {other:?} (expected bernoulli_batch, poisson, periodic or constant)"),
                ))
            }
        };
        if a.batch.is_some() && !matches!(arrival_kind, ArrivalKind::BernoulliBatch { .. }) {
            return Err(field_err("arrivals.batch", "only applies to bernoulli_batch"));
        }
        if a.period.is_some() && !matches!(arrival_kind, ArrivalKind::Periodic { .. }) {
            return Err(field_err("arrivals.period", "only applies to periodic"));
        }
        let load_base = match (&a.direction, &a.rates) {
            (Some(d), None) => {
                check_len("arrivals.direction", d, n)?;
                if d.iter().all(|&x| x == 0.0) {
                    return Err(field_err("arrivals.direction", "must be nonzero"));
                }
                LoadBase::Direction(d.clone())
            }
            (None, Some(r)) => {
                check_len("arrivals.rates", r, n)?;
                LoadBase::Rates(r.clone())
            }
            _ => return Err(field_err("arrivals", "give exactly one of `direction` or `rates`")),
        };
        // Shape check with unit means; per-load means are re-checked on use.
        ArrivalProcess::new(arrival_kind.clone(), vec![0.0; n]).map_err(|e| field_err("arrivals", e))?;

        let e = &self.experiment;
        let policies = e
            .policies
            .iter()
            .map(|p| p.parse::<PolicyKind>().map_err(|_| field_err("experiment.policies", format!("unknown policy {p:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if policies.is_empty() {
            return Err(field_err("experiment.policies", "must not be empty"));
        }
        if e.loads.is_empty() || e.loads.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(field_err("experiment.loads", "must be a nonempty list of finite values >= 0"));
        }
        if e.horizon == 0 {
            return Err(field_err("experiment.horizon", "must be >= 1"));
        }
        if e.seeds.is_empty() {
            return Err(field_err("experiment.seeds", "must not be empty"));
        }
        if !(e.window > 0.0 && e.window < 1.0) {
            return Err(field_err("experiment.window", format!("must lie in (0, 1), got {}", e.window)));
        }
        if !(e.power_tol.is_finite() && e.power_tol >= 0.0) {
            return Err(field_err("experiment.power_tol", "must be finite and >= 0"));
        }
        if e.trace_stride == Some(0) {
            return Err(field_err("experiment.trace_stride", "must be >= 1"));
        }
        if e.jobs == Some(0) {
            return Err(field_err("experiment.jobs", "must be >= 1"));
        }
        let thresholds = e.stability.unwrap_or_default();
        if !(thresholds.stable_below <= thresholds.unstable_above) {
            return Err(field_err("experiment.stability", "stable_below must not exceed unstable_above"));
        }

        let initial = match &self.initial {
            None => None,
            Some(init) => {
                let q = init.q.clone().unwrap_or_else(|| vec![0.0; n]);
                let u = init.u.clone().unwrap_or_else(|| vec![0.0; n]);
                check_len("initial.q", &q, n)?;
                check_len("initial.u", &u, n)?;
                Some(QueueState { q, u })
            }
        };

        Ok(Model {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            net,
            radios,
            curves,
            arrival_kind,
            load_base,
            policies,
            loads: e.loads.clone(),
            horizon: e.horizon,
            seeds: e.seeds.clone(),
            window: e.window,
            power_tol: e.power_tol,
            trace_stride: e.trace_stride,
            virtual_departures: e.virtual_departures,
            thresholds,
            jobs: e.jobs,
            out: e.out.clone(),
            initial,
            warnings,
        })
    }

    fn build_network(&self) -> Result<ConflictNetwork> {
        let s = &self.network;
        match (&s.edges, &s.conflicts) {
            (Some(edges), None) => {
                let model = match (s.model.as_deref(), s.hops) {
                    (None | Some("one-hop"), None) => InterferenceModel::OneHop,
                    (Some("k-hop"), Some(k)) => InterferenceModel::KHop(k),
                    (Some("k-hop"), None) => return Err(field_err("network.hops", "required for k-hop")),
                    (Some("one-hop") | None, Some(_)) => {
                        return Err(field_err("network.hops", "only applies to model = \"k-hop\""))
                    }
                    (Some(other), _) => {
                        return Err(field_err(
                            "network.model",
                            format!("unknown model {other:?} (expected one-hop or k-hop)"),
                        ))
                    }
                };
                let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                let graph = match s.vertices {
                    Some(v) => Graph::new(v, edges),
                    None => Graph::from_edges(edges),
                };
                ConflictNetwork::from_graph(&graph, &model).map_err(|e| field_err("network", e))
            }
            (None, Some(sets)) => {
                if s.model.is_some() || s.hops.is_some() || s.vertices.is_some() {
                    return Err(field_err(
                        "network",
                        "model, hops and vertices only apply to `edges` networks",
                    ));
                }
                ConflictNetwork::from_conflict_sets(sets.clone()).map_err(|e| field_err("network.conflicts", e))
            }
            _ => Err(field_err("network", "give exactly one of `edges` or `conflicts`")),
        }
    }
}

fn build_radio(link: usize, s: &RadioSection) -> Result<(RatePowerCurve, LinkRadio)> {
    let bad = |reason: String| Error::InvalidRadio { link, reason };
    let curve = match (&s.awgn, &s.rates) {
        (Some(a), None) => RatePowerCurve::awgn(a.h, a.n0w, a.w).map_err(|e| bad(e.to_string()))?,
        (None, Some(rates)) => {
            if rates.len() != s.levels.len() {
                return Err(bad(format!("{} levels but {} rates", s.levels.len(), rates.len())));
            }
            RatePowerCurve::table(s.levels.iter().copied().zip(rates.iter().copied()).collect())
                .map_err(|e| bad(e.to_string()))?
        }
        _ => return Err(bad("give exactly one of `awgn` or `rates`".into())),
    };
    let radio = LinkRadio::from_curve(&curve, &s.levels, s.p_avg).map_err(|e| bad(e.to_string()))?;
    match validate_convexity(&curve, radio.levels()) {
        ConvexityReport::Ok => {}
        ConvexityReport::Violation {
            index,
            slope_before,
            slope_after,
        } => {
            return Err(bad(format!(
                "power is not convex in rate at level {}: slope {slope_before} then {slope_after}",
                radio.levels()[index]
            )))
        }
        ConvexityReport::MissingLevel { power } => return Err(bad(format!("no rate for level {power}"))),
    }
    Ok((curve, radio))
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        ScenarioFile::load(path)?.build()
    }

    pub fn p_avg(&self) -> Vec<f64> {
        self.radios.iter().map(LinkRadio::p_avg).collect()
    }

    pub fn region(&self) -> Result<CapacityRegion> {
        CapacityRegion::new(&self.net, &self.radios)
    }

    /// Arrival means at load 1. For a direction this solves the boundary LP.
    pub fn unit_load_means(&self) -> Result<Vec<f64>> {
        match &self.load_base {
            LoadBase::Rates(r) => Ok(r.clone()),
            LoadBase::Direction(d) => {
                let rho = self.region()?.boundary_scale(d)?.rho;
                Ok(d.iter().map(|x| x * rho).collect())
            }
        }
    }

    /// A runnable scenario at load `rho`, given the unit-load means.
    pub fn scenario(&self, unit_means: &[f64], policy: PolicyKind, rho: f64, seed: u64, horizon: u64) -> Result<Scenario> {
        let means = unit_means.iter().map(|m| m * rho).collect();
        let arrivals = ArrivalProcess::new(self.arrival_kind.clone(), means)?;
        let mut s = Scenario::new(self.net.clone(), self.radios.clone(), arrivals, policy, horizon, seed);
        s.initial = self.initial.clone();
        s.trace_stride = self.trace_stride;
        s.virtual_departures = self.virtual_departures;
        Ok(s)
    }
}
