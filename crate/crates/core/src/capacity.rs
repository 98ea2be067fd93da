//! Power-constrained stability region of a small network.
//!
//! The region is the set of arrival-rate vectors `lambda` for which some
//! convex combination `theta` of feasible allocations serves at least
//! `lambda` on every link while spending at most `p_avg` on average. All
//! feasible allocations are enumerated up front, so every query is one LP
//! over `theta`.
//!
//! The LP decides the closed region. Callers that need strict interiority
//! use [`CapacityRegion::membership_with_margin`].

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::{ConflictNetwork, LinkId};
use crate::ratepower::LinkRadio;
use crate::solver::{solve_lp, LinearProgram, LpOutcome, Relation};

pub const DEFAULT_ALLOCATION_CAP: u128 = 1_000_000;

/// Tolerance for replaying a certificate against `lambda` and `p_avg`.
pub const CERTIFICATE_TOL: f64 = 1e-7;

/// A conflict-free power vector and the rates it induces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleAllocation {
    pub power: Vec<f64>,
    pub rate: Vec<f64>,
}

/// Lexicographic order on power vectors.
pub fn cmp_power_vectors(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub(crate) fn check_radios(net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<()> {
    if radios.len() != net.num_links() {
        return Err(Error::LengthMismatch {
            what: "radios",
            expected: net.num_links(),
            got: radios.len(),
        });
    }
    Ok(())
}

/// Number of feasible allocations, without materializing them.
pub fn count_feasible_allocations(net: &ConflictNetwork, radios: &[LinkRadio], cap: u128) -> Result<u128> {
    check_radios(net, radios)?;
    let set_cap = usize::try_from(cap).unwrap_or(usize::MAX);
    let sets = net.independent_sets(set_cap)?;
    let mut total: u128 = 0;
    for set in &sets {
        let combos = set
            .iter()
            .map(|l| radios[l.0].levels().len() as u128 - 1)
            .try_fold(1u128, u128::checked_mul)
            .unwrap_or(u128::MAX);
        total = total.saturating_add(combos);
        if total > cap {
            return Err(Error::EnumerationLimit {
                what: "feasible allocations",
                count: total,
                cap,
            });
        }
    }
    Ok(total)
}

pub fn enumerate_feasible_allocations(net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<Vec<FeasibleAllocation>> {
    enumerate_feasible_allocations_with_cap(net, radios, DEFAULT_ALLOCATION_CAP)
}

/// Every feasible allocation: for each independent set, every combination
/// of nonzero levels on its links with all other links idle. Sorted
/// lexicographically by power vector; the all-idle allocation comes first.
pub fn enumerate_feasible_allocations_with_cap(
    net: &ConflictNetwork,
    radios: &[LinkRadio],
    cap: u128,
) -> Result<Vec<FeasibleAllocation>> {
    let total = count_feasible_allocations(net, radios, cap)?;
    let n = net.num_links();
    let mut out = Vec::with_capacity(total as usize);
    for set in net.independent_sets(usize::MAX)? {
        let mut levels = vec![1usize; set.len()];
        loop {
            let mut power = vec![0.0; n];
            let mut rate = vec![0.0; n];
            for (&link, &lv) in set.iter().zip(&levels) {
                power[link.0] = radios[link.0].levels()[lv];
                rate[link.0] = radios[link.0].rates()[lv];
            }
            out.push(FeasibleAllocation { power, rate });
            // Odometer over the nonzero levels of the active links.
            let mut pos = 0;
            while pos < set.len() {
                levels[pos] += 1;
                if levels[pos] < radios[set[pos].0].levels().len() {
                    break;
                }
                levels[pos] = 1;
                pos += 1;
            }
            if pos == set.len() {
                break;
            }
        }
    }
    out.sort_by(|a, b| cmp_power_vectors(&a.power, &b.power));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Inside,
    Outside,
}

/// Time-sharing weights over allocations; only positive weights are kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub weights: Vec<WeightedAllocation>,
    /// `sum theta * rate`, per link.
    pub service: Vec<f64>,
    /// `sum theta * power`, per link.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedAllocation {
    pub weight: f64,
    pub allocation: FeasibleAllocation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionResult {
    pub verdict: Verdict,
    pub lambda: Vec<f64>,
    pub certificate: Option<Certificate>,
}

impl RegionResult {
    pub fn is_inside(&self) -> bool {
        self.verdict == Verdict::Inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryResult {
    pub rho: f64,
    pub direction: Vec<f64>,
    pub certificate: Certificate,
}

/// Enumerated allocations plus budgets, ready for repeated queries.
#[derive(Debug, Clone)]
pub struct CapacityRegion {
    allocations: Vec<FeasibleAllocation>,
    p_avg: Vec<f64>,
}

impl CapacityRegion {
    pub fn new(net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<Self> {
        Self::with_cap(net, radios, DEFAULT_ALLOCATION_CAP)
    }

    pub fn with_cap(net: &ConflictNetwork, radios: &[LinkRadio], cap: u128) -> Result<Self> {
        let allocations = enumerate_feasible_allocations_with_cap(net, radios, cap)?;
        Ok(Self {
            allocations,
            p_avg: radios.iter().map(LinkRadio::p_avg).collect(),
        })
    }

    pub fn allocations(&self) -> &[FeasibleAllocation] {
        &self.allocations
    }

    pub fn num_links(&self) -> usize {
        self.p_avg.len()
    }

    fn check_rates(&self, what: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.num_links() {
            return Err(Error::LengthMismatch {
                what,
                expected: self.num_links(),
                got: v.len(),
            });
        }
        if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "{what} entries must be finite and >= 0, got {x}"
            )));
        }
        Ok(())
    }

    /// LP rows shared by all queries: `sum theta = 1` and the power budgets.
    /// `extra` trailing variables get zero coefficients.
    fn base_program(&self, objective: Vec<f64>, extra: usize) -> LinearProgram {
        let k = self.allocations.len();
        let mut lp = LinearProgram::minimize(objective);
        let mut ones = vec![1.0; k];
        ones.resize(k + extra, 0.0);
        lp.constrain(ones, Relation::Eq, 1.0);
        for l in 0..self.num_links() {
            let mut row: Vec<f64> = self.allocations.iter().map(|a| a.power[l]).collect();
            row.resize(k + extra, 0.0);
            lp.constrain(row, Relation::Le, self.p_avg[l]);
        }
        lp
    }

    fn certificate(&self, theta: &[f64]) -> Certificate {
        let n = self.num_links();
        let mut service = vec![0.0; n];
        let mut power = vec![0.0; n];
        let mut weights = Vec::new();
        for (a, &w) in self.allocations.iter().zip(theta) {
            if w <= 0.0 {
                continue;
            }
            for l in 0..n {
                service[l] += w * a.rate[l];
                power[l] += w * a.power[l];
            }
            weights.push(WeightedAllocation {
                weight: w,
                allocation: a.clone(),
            });
        }
        Certificate {
            weights,
            service,
            power,
        }
    }

    /// Closed-region membership test for `lambda`.
    pub fn membership(&self, lambda: &[f64]) -> Result<RegionResult> {
        self.check_rates("arrival rates", lambda)?;
        let k = self.allocations.len();
        let mut lp = self.base_program(vec![0.0; k], 0);
        for (l, &target) in lambda.iter().enumerate() {
            if target > 0.0 {
                let row = self.allocations.iter().map(|a| a.rate[l]).collect();
                lp.constrain(row, Relation::Ge, target);
            }
        }
        Ok(match solve_lp(&lp)? {
            LpOutcome::Optimal(sol) => RegionResult {
                verdict: Verdict::Inside,
                lambda: lambda.to_vec(),
                certificate: Some(self.certificate(&sol.x)),
            },
            LpOutcome::Infeasible => RegionResult {
                verdict: Verdict::Outside,
                lambda: lambda.to_vec(),
                certificate: None,
            },
            LpOutcome::Unbounded => unreachable!("feasibility LP has a zero objective"),
        })
    }

    /// Membership of `lambda * (1 + margin)`.
    pub fn membership_with_margin(&self, lambda: &[f64], margin: f64) -> Result<RegionResult> {
        if !(margin.is_finite() && margin > -1.0) {
            return Err(Error::InvalidInput(format!("margin must exceed -1, got {margin}")));
        }
        let scaled: Vec<f64> = lambda.iter().map(|x| x * (1.0 + margin)).collect();
        self.membership(&scaled)
    }

    /// Largest `rho` with `rho * direction` in the closed region.
    pub fn boundary_scale(&self, direction: &[f64]) -> Result<BoundaryResult> {
        self.check_rates("direction", direction)?;
        if direction.iter().all(|&d| d == 0.0) {
            return Err(Error::InvalidInput("direction must be nonzero".into()));
        }
        let k = self.allocations.len();
        let mut objective = vec![0.0; k + 1];
        objective[k] = -1.0;
        let mut lp = self.base_program(objective, 1);
        for (l, &d) in direction.iter().enumerate() {
            if d > 0.0 {
                let mut row: Vec<f64> = self.allocations.iter().map(|a| a.rate[l]).collect();
                row.push(-d);
                lp.constrain(row, Relation::Ge, 0.0);
            }
        }
        match solve_lp(&lp)? {
            LpOutcome::Optimal(sol) => Ok(BoundaryResult {
                rho: sol.x[k],
                direction: direction.to_vec(),
                certificate: self.certificate(&sol.x[..k]),
            }),
            // The all-idle allocation with rho = 0 is always feasible and rates
            // are bounded, so neither case can occur for a valid region.
            other => Err(Error::InvalidInput(format!(
                "boundary LP ended with status {:?}",
                other.status()
            ))),
        }
    }

    /// Highest admissible arrival rate of `link` when all others are idle.
    pub fn max_admissible_rate(&self, link: LinkId) -> Result<f64> {
        if link.0 >= self.num_links() {
            return Err(Error::InvalidInput(format!("link {} out of range", link.0)));
        }
        let mut direction = vec![0.0; self.num_links()];
        direction[link.0] = 1.0;
        Ok(self.boundary_scale(&direction)?.rho)
    }
}

impl Certificate {
    /// Re-derives the certified service and power from the weights and
    /// checks them against `lambda` and `p_avg` within [`CERTIFICATE_TOL`].
    pub fn replays(&self, lambda: &[f64], p_avg: &[f64]) -> bool {
        let total: f64 = self.weights.iter().map(|w| w.weight).sum();
        if (total - 1.0).abs() > CERTIFICATE_TOL || self.weights.iter().any(|w| w.weight < 0.0) {
            return false;
        }
        (0..lambda.len()).all(|l| {
            let served: f64 = self.weights.iter().map(|w| w.weight * w.allocation.rate[l]).sum();
            let spent: f64 = self.weights.iter().map(|w| w.weight * w.allocation.power[l]).sum();
            served >= lambda[l] - CERTIFICATE_TOL && spent <= p_avg[l] + CERTIFICATE_TOL
        })
    }
}

pub fn membership(lambda: &[f64], net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<RegionResult> {
    CapacityRegion::new(net, radios)?.membership(lambda)
}

pub fn max_admissible_rate(link: LinkId, net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<f64> {
    CapacityRegion::new(net, radios)?.max_admissible_rate(link)
}

pub fn boundary_scale(direction: &[f64], net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<BoundaryResult> {
    CapacityRegion::new(net, radios)?.boundary_scale(direction)
}
