//! Local pooling factor of a conflict network.
//!
//! For a link subset `L` with maximal activation vectors `M_L` (columns of a
//! 0/1 matrix `M`), the pooling value of `L` is the smallest `sigma` for
//! which some pair of convex combinations `mu = M a`, `nu = M b` has
//! `sigma * mu >= nu` componentwise. Substituting `x = sigma * a` makes this
//! the LP
//!
//! ```text
//! minimize  sum(x)
//! s.t.      M x - M b >= 0,   sum(b) = 1,   x, b >= 0
//! ```
//!
//! whose optimum is `sigma`, with `mu` weights `x / sum(x)` and `nu` weights
//! `b`. The network's factor `sigma*` is the minimum over all nonempty `L`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::{ActivationVector, ConflictNetwork, LinkId, DEFAULT_ACTIVATION_CAP};
use crate::solver::{solve_lp, LinearProgram, LpOutcome, Relation};

/// Largest network for which [`lpf`] sweeps every subset.
pub const DEFAULT_LPF_LINK_CAP: usize = 14;

/// Slack under which `sigma * mu` is not considered strictly below `nu`.
pub const DOMINANCE_TOL: f64 = 1e-9;

const TIE_TOL: f64 = 1e-9;

/// Pooling value of one subset together with its witness pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphSigma {
    pub subset: Vec<LinkId>,
    pub sigma: f64,
    /// `M_L` in canonical (lexicographic) order.
    pub activations: Vec<ActivationVector>,
    pub mu_weights: Vec<f64>,
    pub nu_weights: Vec<f64>,
    /// `mu` and `nu` restricted to `subset`, in subset order.
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpfResult {
    pub sigma_star: f64,
    /// Minimizing subset and its witness.
    pub witness: SubgraphSigma,
    /// Pooling value of every nonempty subset, in lexicographic subset order.
    pub subgraphs: Vec<(Vec<LinkId>, f64)>,
}

impl LpfResult {
    /// `sigma_star` rounded to 9 decimal places.
    pub fn sigma_star_rounded(&self) -> f64 {
        round9(self.sigma_star)
    }
}

pub fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn activation_matrix(activations: &[ActivationVector], subset: &[LinkId]) -> Vec<Vec<f64>> {
    // rows: links of the subset, columns: activations
    let cols: Vec<Vec<f64>> = activations.iter().map(|a| a.restricted(subset)).collect();
    (0..subset.len())
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect()
}

fn combine(matrix: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    matrix
        .iter()
        .map(|row| row.iter().zip(weights).map(|(m, w)| m * w).sum())
        .collect()
}

pub fn sigma_for_subgraph(net: &ConflictNetwork, subset: &[LinkId]) -> Result<SubgraphSigma> {
    sigma_for_subgraph_with_cap(net, subset, DEFAULT_ACTIVATION_CAP)
}

pub fn sigma_for_subgraph_with_cap(net: &ConflictNetwork, subset: &[LinkId], cap: usize) -> Result<SubgraphSigma> {
    let subset = net.normalize_subset(subset)?;
    let activations = net.enumerate_maximal_activations_with_cap(&subset, cap)?;
    let matrix = activation_matrix(&activations, &subset);
    let k = activations.len();

    let mut objective = vec![1.0; k];
    objective.resize(2 * k, 0.0);
    let mut lp = LinearProgram::minimize(objective);
    for row in &matrix {
        let mut coeffs = row.clone();
        coeffs.extend(row.iter().map(|m| -m));
        lp.constrain(coeffs, Relation::Ge, 0.0);
    }
    let mut convex = vec![0.0; k];
    convex.resize(2 * k, 1.0);
    lp.constrain(convex, Relation::Eq, 1.0);

    let sol = match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => sol,
        other => {
            return Err(Error::InvalidInput(format!(
                "pooling LP for subset {subset:?} ended with status {:?}",
                other.status()
            )))
        }
    };
    let sigma = sol.value;
    let mu_weights: Vec<f64> = sol.x[..k].iter().map(|x| x / sigma).collect();
    let nu_weights = sol.x[k..].to_vec();
    Ok(SubgraphSigma {
        mu: combine(&matrix, &mu_weights),
        nu: combine(&matrix, &nu_weights),
        subset,
        sigma,
        activations,
        mu_weights,
        nu_weights,
    })
}

pub fn lpf(net: &ConflictNetwork) -> Result<LpfResult> {
    lpf_with_cap(net, DEFAULT_LPF_LINK_CAP)
}

/// Minimum pooling value over every nonempty subset of links.
pub fn lpf_with_cap(net: &ConflictNetwork, cap: usize) -> Result<LpfResult> {
    let n = net.num_links();
    if n > cap.min(30) {
        return Err(Error::EnumerationLimit {
            what: "local pooling subsets (links)",
            count: n as u128,
            cap: cap.min(30) as u128,
        });
    }
    let mut subsets: Vec<Vec<LinkId>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(LinkId).collect())
        .collect();
    subsets.sort();

    let sigmas = subsets
        .par_iter()
        .map(|s| sigma_for_subgraph_with_cap(net, s, n).map(|r| r.sigma))
        .collect::<Result<Vec<f64>>>()?;

    // Sequential reduction: lowest value, ties to the earliest subset.
    let mut best = 0;
    for (i, &s) in sigmas.iter().enumerate() {
        if s < sigmas[best] - TIE_TOL {
            best = i;
        }
    }
    let witness = sigma_for_subgraph_with_cap(net, &subsets[best], n)?;
    Ok(LpfResult {
        sigma_star: witness.sigma,
        witness,
        subgraphs: subsets.into_iter().zip(sigmas).collect(),
    })
}

/// True iff `sigma * mu` does not strictly dominate-from-below `nu`, i.e.
/// there is some link of the subset with `sigma * mu_l >= nu_l` (up to
/// [`DOMINANCE_TOL`]). Weights index `M_L` in canonical order.
pub fn check_sigma_pair(
    net: &ConflictNetwork,
    subset: &[LinkId],
    mu_weights: &[f64],
    nu_weights: &[f64],
    sigma: f64,
) -> Result<bool> {
    let subset = net.normalize_subset(subset)?;
    let activations = net.enumerate_maximal_activations(&subset)?;
    for (what, w) in [("mu weights", mu_weights), ("nu weights", nu_weights)] {
        if w.len() != activations.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: activations.len(),
                got: w.len(),
            });
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 || w.iter().any(|&x| x < -1e-12) {
            return Err(Error::InvalidInput(format!(
                "{what} must be a convex combination (sum {total})"
            )));
        }
    }
    let matrix = activation_matrix(&activations, &subset);
    let mu = combine(&matrix, mu_weights);
    let nu = combine(&matrix, nu_weights);
    let strictly_below = mu.iter().zip(&nu).all(|(m, v)| sigma * m < v - DOMINANCE_TOL);
    Ok(!strictly_below)
}
