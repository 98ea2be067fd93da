//! Per-slot link scheduling and power control policies.
//!
//! * GECS picks links greedily by `Q^2 + U^2` and gives each picked link its
//!   solo-optimal level `argmax Q r - U P`.
//! * GMW picks links greedily by that solo-optimal objective itself.
//! * MaxWeight maximizes `sum Q r - U P` exactly over all feasible
//!   allocations.
//! * GMS is plain greedy maximal scheduling by `Q` at peak power.
//!
//! A picked link that ends up idle does not block its conflict set; it is
//! only removed from further consideration.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{check_radios, cmp_power_vectors, count_feasible_allocations, DEFAULT_ALLOCATION_CAP};
use crate::error::{Error, Result};
use crate::netmodel::{ConflictNetwork, LinkId};
use crate::ratepower::{LevelChoice, LinkRadio};

/// Queue state and network a policy decides on.
#[derive(Debug, Clone, Copy)]
pub struct SchedulerInput<'a> {
    pub q: &'a [f64],
    pub u: &'a [f64],
    pub net: &'a ConflictNetwork,
    pub radios: &'a [LinkRadio],
}

impl<'a> SchedulerInput<'a> {
    pub fn new(q: &'a [f64], u: &'a [f64], net: &'a ConflictNetwork, radios: &'a [LinkRadio]) -> Result<Self> {
        let n = net.num_links();
        check_radios(net, radios)?;
        for (what, v) in [("real queues", q), ("virtual queues", u)] {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "{what} must be finite and >= 0, got {x}"
                )));
            }
        }
        Ok(Self { q, u, net, radios })
    }

    fn num_links(&self) -> usize {
        self.net.num_links()
    }

    fn best_level(&self, l: usize) -> LevelChoice {
        self.radios[l].optimal_power(self.q[l], self.u[l])
    }
}

/// Power assignment for one slot and the rates it induces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerDecision {
    pub power: Vec<f64>,
    pub rate: Vec<f64>,
}

impl PowerDecision {
    pub fn idle(num_links: usize) -> Self {
        Self {
            power: vec![0.0; num_links],
            rate: vec![0.0; num_links],
        }
    }

    fn assign(&mut self, link: usize, choice: &LevelChoice) {
        self.power[link] = choice.power;
        self.rate[link] = choice.rate;
    }

    /// `sum_l Q_l r_l - U_l P_l`, summed in link order.
    pub fn objective(&self, q: &[f64], u: &[f64]) -> f64 {
        weighted_objective(q, u, &self.power, &self.rate)
    }

    pub fn active_links(&self) -> Vec<LinkId> {
        self.power
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(l, _)| LinkId(l))
            .collect()
    }
}

pub fn weighted_objective(q: &[f64], u: &[f64], power: &[f64], rate: &[f64]) -> f64 {
    (0..power.len()).map(|l| q[l] * rate[l] - u[l] * power[l]).sum()
}

/// Resolves ties among equally weighted links.
#[derive(Debug, Clone)]
pub enum TieBreaker {
    /// Uniformly random among the tied links.
    Seeded(ChaCha8Rng),
    /// Lowest link index.
    Lexicographic,
}

impl TieBreaker {
    pub fn seeded(seed: u64) -> Self {
        TieBreaker::Seeded(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Picks one of `candidates` (nonempty, ascending). Randomness is only
    /// consumed when there is an actual tie.
    pub fn pick(&mut self, candidates: &[usize]) -> usize {
        match (self, candidates.len()) {
            (_, 1) | (TieBreaker::Lexicographic, _) => candidates[0],
            (TieBreaker::Seeded(rng), k) => candidates[rng.random_range(0..k)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Gecs,
    Gmw,
    #[serde(rename = "maxweight")]
    MaxWeight,
    Gms,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Gecs, PolicyKind::Gmw, PolicyKind::MaxWeight, PolicyKind::Gms];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Gecs => "gecs",
            PolicyKind::Gmw => "gmw",
            PolicyKind::MaxWeight => "maxweight",
            PolicyKind::Gms => "gms",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?} (expected gecs, gmw, maxweight or gms)")))
    }
}

/// Greedy selection shared by GECS, GMW and GMS.
///
/// `priority` ranks links still in play; links for which `eligible` is false
/// are dropped up front. Each picked link gets `level(link)`; a positive
/// level removes its conflict set from play.
fn greedy(
    input: &SchedulerInput,
    ties: &mut TieBreaker,
    priority: impl Fn(usize) -> f64,
    eligible: impl Fn(usize) -> bool,
    level: impl Fn(usize) -> LevelChoice,
) -> (PowerDecision, Vec<LinkId>) {
    let n = input.num_links();
    let weights: Vec<f64> = (0..n).map(&priority).collect();
    let mut in_play: Vec<bool> = (0..n).map(&eligible).collect();
    let mut decision = PowerDecision::idle(n);
    let mut order = Vec::new();
    let mut candidates = Vec::with_capacity(n);
    loop {
        let top = (0..n)
            .filter(|&l| in_play[l])
            .map(|l| weights[l])
            .max_by(f64::total_cmp);
        let Some(top) = top else { break };
        candidates.clear();
        candidates.extend((0..n).filter(|&l| in_play[l] && weights[l] == top));
        let m = ties.pick(&candidates);
        order.push(LinkId(m));
        in_play[m] = false;
        let choice = level(m);
        if choice.power > 0.0 {
            decision.assign(m, &choice);
            for k in input.net.conflict_set(LinkId(m)) {
                in_play[k.0] = false;
            }
        }
    }
    (decision, order)
}

fn gecs_with_priority(
    input: &SchedulerInput,
    ties: &mut TieBreaker,
    priority: impl Fn(f64, f64) -> f64,
) -> (PowerDecision, Vec<LinkId>) {
    greedy(
        input,
        ties,
        |l| priority(input.q[l], input.u[l]),
        |_| true,
        |l| input.best_level(l),
    )
}

pub fn gecs_decide(input: &SchedulerInput, ties: &mut TieBreaker) -> PowerDecision {
    gecs_with_priority(input, ties, |q, u| q * q + u * u).0
}

/// GECS decision together with the order in which links were picked.
pub fn gecs_decide_traced(input: &SchedulerInput, ties: &mut TieBreaker) -> (PowerDecision, Vec<LinkId>) {
    gecs_with_priority(input, ties, |q, u| q * q + u * u)
}

pub fn gmw_decide(input: &SchedulerInput, ties: &mut TieBreaker) -> PowerDecision {
    let best: Vec<LevelChoice> = (0..input.num_links()).map(|l| input.best_level(l)).collect();
    greedy(
        input,
        ties,
        |l| best[l].objective,
        |l| best[l].objective > 0.0,
        |l| best[l],
    )
    .0
}

pub fn gms_fixed_power_decide(input: &SchedulerInput, ties: &mut TieBreaker) -> PowerDecision {
    greedy(
        input,
        ties,
        |l| input.q[l],
        |l| input.q[l] > 0.0,
        |l| {
            let radio = &input.radios[l];
            LevelChoice {
                index: radio.levels().len() - 1,
                power: radio.p_max(),
                rate: radio.c_max(),
                objective: 0.0,
            }
        },
    )
    .0
}

/// Exact maximizer of `sum Q r - U P` over all feasible allocations; among
/// maximizers the lexicographically smallest power vector wins.
///
/// A maximizer only activates links whose solo objective is positive, each
/// at its lowest optimal level, on a set `M ∩ positive` for some maximal
/// activation `M`. Searching those candidates is therefore exhaustive.
#[derive(Debug, Clone)]
pub struct MaxWeight {
    maximal_sets: Vec<Vec<LinkId>>,
}

impl MaxWeight {
    pub fn new(net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<Self> {
        Self::with_cap(net, radios, DEFAULT_ALLOCATION_CAP)
    }

    pub fn with_cap(net: &ConflictNetwork, radios: &[LinkRadio], cap: u128) -> Result<Self> {
        count_feasible_allocations(net, radios, cap)?;
        let all: Vec<LinkId> = net.links().collect();
        let maximal_sets = net
            .enumerate_maximal_activations_with_cap(&all, 64)?
            .iter()
            .map(|a| a.active_links())
            .collect();
        Ok(Self { maximal_sets })
    }

    pub fn decide(&self, input: &SchedulerInput) -> PowerDecision {
        let n = input.num_links();
        let best: Vec<LevelChoice> = (0..n).map(|l| input.best_level(l)).collect();
        let mut winner = PowerDecision::idle(n);
        let mut winner_value = 0.0;
        let mut candidate = PowerDecision::idle(n);
        for set in &self.maximal_sets {
            candidate.power.fill(0.0);
            candidate.rate.fill(0.0);
            for l in set {
                if best[l.0].objective > 0.0 {
                    candidate.assign(l.0, &best[l.0]);
                }
            }
            let value = candidate.objective(input.q, input.u);
            let better = match value.total_cmp(&winner_value) {
                Ordering::Greater => true,
                Ordering::Equal => cmp_power_vectors(&candidate.power, &winner.power).is_lt(),
                Ordering::Less => false,
            };
            if better {
                winner_value = value;
                winner.clone_from(&candidate);
            }
        }
        winner
    }
}

pub fn maxweight_decide(input: &SchedulerInput) -> Result<PowerDecision> {
    Ok(MaxWeight::new(input.net, input.radios)?.decide(input))
}

/// A policy with whatever it precomputes from the network.
#[derive(Debug, Clone)]
pub enum Scheduler {
    Gecs,
    Gmw,
    MaxWeight(MaxWeight),
    Gms,
}

impl Scheduler {
    pub fn new(kind: PolicyKind, net: &ConflictNetwork, radios: &[LinkRadio]) -> Result<Self> {
        Ok(match kind {
            PolicyKind::Gecs => Scheduler::Gecs,
            PolicyKind::Gmw => Scheduler::Gmw,
            PolicyKind::MaxWeight => Scheduler::MaxWeight(MaxWeight::new(net, radios)?),
            PolicyKind::Gms => Scheduler::Gms,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Scheduler::Gecs => PolicyKind::Gecs,
            Scheduler::Gmw => PolicyKind::Gmw,
            Scheduler::MaxWeight(_) => PolicyKind::MaxWeight,
            Scheduler::Gms => PolicyKind::Gms,
        }
    }

    pub fn decide(&self, input: &SchedulerInput, ties: &mut TieBreaker) -> PowerDecision {
        match self {
            Scheduler::Gecs => gecs_decide(input, ties),
            Scheduler::Gmw => gmw_decide(input, ties),
            Scheduler::MaxWeight(mw) => mw.decide(input),
            Scheduler::Gms => gms_fixed_power_decide(input, ties),
        }
    }
}
