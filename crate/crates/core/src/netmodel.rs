//! Links, binary interference sets and link activation vectors.
//!
//! A [`ConflictNetwork`] is the interference graph over links: link `k` is in
//! the conflict set of `l` when the two may not be active in the same slot.
//! Conflict sets are always symmetric and irreflexive.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the number of links a maximal-activation enumeration may
/// range over.
pub const DEFAULT_ACTIVATION_CAP: usize = 20;

/// Dense link index in `[0, num_links)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

impl LinkId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0 + 1)
    }
}

/// Undirected multigraph given as an edge list; every edge is one link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> Self {
        Self {
            num_vertices,
            edges,
        }
    }

    /// Graph whose vertex count is inferred from the largest endpoint.
    pub fn from_edges(edges: Vec<(usize, usize)>) -> Self {
        let num_vertices = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        Self::new(num_vertices, edges)
    }

    /// Cycle on `n` vertices, edge `i` joining vertices `i` and `i + 1 mod n`.
    pub fn cycle(n: usize) -> Self {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    /// Path with `n` edges.
    pub fn path(n: usize) -> Self {
        Self::new(n + 1, (0..n).map(|i| (i, i + 1)).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        for (link, &(a, b)) in self.edges.iter().enumerate() {
            for v in [a, b] {
                if v >= self.num_vertices {
                    return Err(Error::DanglingVertex {
                        link,
                        vertex: v,
                        num_vertices: self.num_vertices,
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(link));
            }
        }
        Ok(())
    }

    fn hop_distances(&self) -> Vec<Vec<usize>> {
        let n = self.num_vertices;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        (0..n)
            .map(|src| {
                let mut dist = vec![usize::MAX; n];
                dist[src] = 0;
                let mut queue = VecDeque::from([src]);
                while let Some(v) = queue.pop_front() {
                    for &w in &adj[v] {
                        if dist[w] == usize::MAX {
                            dist[w] = dist[v] + 1;
                            queue.push_back(w);
                        }
                    }
                }
                dist
            })
            .collect()
    }
}

/// How conflict sets are derived from a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterferenceModel {
    /// Node-exclusive: links conflict iff they share an endpoint.
    OneHop,
    /// Links conflict iff some endpoint of one is within `k - 1` hops of an
    /// endpoint of the other. `KHop(1)` is the same as `OneHop`.
    KHop(usize),
}

/// Links together with their symmetric, irreflexive interference sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictNetwork {
    endpoints: Option<Vec<(usize, usize)>>,
    conflict_sets: Vec<Vec<LinkId>>,
    matrix: Vec<bool>,
}

impl ConflictNetwork {
    /// Derives conflict sets from a graph under an interference model.
    pub fn from_graph(graph: &Graph, model: &InterferenceModel) -> Result<Self> {
        graph.validate()?;
        let hops = match *model {
            InterferenceModel::OneHop => 1,
            InterferenceModel::KHop(0) => return Err(Error::InvalidHopCount),
            InterferenceModel::KHop(k) => k,
        };
        let n = graph.edges.len();
        let dist = if hops > 1 {
            Some(graph.hop_distances())
        } else {
            None
        };
        let mut sets = vec![Vec::new(); n];
        for (i, &(a, b)) in graph.edges.iter().enumerate() {
            for (j, &(c, d)) in graph.edges.iter().enumerate() {
                if i == j {
                    continue;
                }
                let conflict = match &dist {
                    None => a == c || a == d || b == c || b == d,
                    Some(dist) => {
                        let near = [a, b]
                            .iter()
                            .flat_map(|&u| [c, d].map(|v| dist[u][v]))
                            .min()
                            .unwrap_or(usize::MAX);
                        near < hops
                    }
                };
                if conflict {
                    sets[i].push(LinkId(j));
                }
            }
        }
        let mut net = Self::build(sets);
        net.endpoints = Some(graph.edges.clone());
        Ok(net)
    }

    /// Takes conflict sets as given. Rejects asymmetric sets, self-conflicts
    /// and out-of-range link ids; duplicates within a set are collapsed.
    pub fn from_conflict_sets(sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        let mut matrix = vec![false; n * n];
        for (l, set) in sets.iter().enumerate() {
            for &k in set {
                if k >= n {
                    return Err(Error::UnknownLink { link: l, other: k });
                }
                if k == l {
                    return Err(Error::SelfConflict(l));
                }
                matrix[l * n + k] = true;
            }
        }
        for l in 0..n {
            for k in 0..n {
                if matrix[l * n + k] && !matrix[k * n + l] {
                    return Err(Error::AsymmetricConflict { from: l, to: k });
                }
            }
        }
        let sets = (0..n)
            .map(|l| (0..n).filter(|&k| matrix[l * n + k]).map(LinkId).collect())
            .collect();
        Ok(Self::build(sets))
    }

    fn build(mut sets: Vec<Vec<LinkId>>) -> Self {
        let n = sets.len();
        let mut matrix = vec![false; n * n];
        for (l, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            for k in set.iter() {
                matrix[l * n + k.0] = true;
            }
        }
        Self {
            endpoints: None,
            conflict_sets: sets,
            matrix,
        }
    }

    pub fn num_links(&self) -> usize {
        self.conflict_sets.len()
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> {
        (0..self.num_links()).map(LinkId)
    }

    pub fn endpoints(&self) -> Option<&[(usize, usize)]> {
        self.endpoints.as_deref()
    }

    /// The interference set of `link`, sorted ascending.
    pub fn conflict_set(&self, link: LinkId) -> &[LinkId] {
        &self.conflict_sets[link.0]
    }

    pub fn conflicts(&self, a: LinkId, b: LinkId) -> bool {
        self.matrix[a.0 * self.num_links() + b.0]
    }

    /// True iff no two of the given links conflict.
    pub fn is_independent(&self, links: &[LinkId]) -> bool {
        links
            .iter()
            .enumerate()
            .all(|(i, &a)| links[i + 1..].iter().all(|&b| !self.conflicts(a, b)))
    }

    /// True iff the support of `power` (links with positive power) is
    /// conflict-free.
    pub fn is_feasible_power_vector(&self, power: &[f64]) -> Result<bool> {
        if power.len() != self.num_links() {
            return Err(Error::LengthMismatch {
                what: "power vector",
                expected: self.num_links(),
                got: power.len(),
            });
        }
        if let Some(p) = power.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "power entries must be non-negative, got {p}"
            )));
        }
        let support: Vec<LinkId> = power
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(l, _)| LinkId(l))
            .collect();
        Ok(self.is_independent(&support))
    }

    /// Every maximal activation vector of the sub-network induced by
    /// `subset`, with conflicts restricted to the subset.
    pub fn enumerate_maximal_activations(&self, subset: &[LinkId]) -> Result<Vec<ActivationVector>> {
        self.enumerate_maximal_activations_with_cap(subset, DEFAULT_ACTIVATION_CAP)
    }

    /// As [`Self::enumerate_maximal_activations`] with an explicit bound on
    /// `|subset|`. Output is duplicate-free and sorted lexicographically by
    /// the ascending list of active links.
    pub fn enumerate_maximal_activations_with_cap(
        &self,
        subset: &[LinkId],
        cap: usize,
    ) -> Result<Vec<ActivationVector>> {
        let members = self.normalize_subset(subset)?;
        if members.len() > cap.min(64) {
            return Err(Error::EnumerationLimit {
                what: "maximal activation subset",
                count: members.len() as u128,
                cap: cap.min(64) as u128,
            });
        }
        // compat[i]: subset-local links that may be active together with i.
        let k = members.len();
        let compat: Vec<u64> = (0..k)
            .map(|i| {
                (0..k)
                    .filter(|&j| j != i && !self.conflicts(members[i], members[j]))
                    .fold(0u64, |m, j| m | (1 << j))
            })
            .collect();
        let all = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        let mut found = Vec::new();
        bron_kerbosch(&compat, 0, all, 0, &mut found);

        let mut out: Vec<ActivationVector> = found
            .into_iter()
            .map(|mask| {
                let mut active = vec![false; self.num_links()];
                for (i, link) in members.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        active[link.0] = true;
                    }
                }
                ActivationVector { active }
            })
            .collect();
        out.sort_by_cached_key(|a| a.active_links());
        out.dedup();
        Ok(out)
    }

    /// Every independent set of links (including the empty set), each as an
    /// ascending link list, in lexicographic order. Fails once more than
    /// `cap` sets have been produced.
    pub fn independent_sets(&self, cap: usize) -> Result<Vec<Vec<LinkId>>> {
        let mut out = Vec::new();
        let mut current = Vec::new();
        self.extend_independent(0, &mut current, &mut out, cap)?;
        Ok(out)
    }

    fn extend_independent(
        &self,
        next: usize,
        current: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
        cap: usize,
    ) -> Result<()> {
        if out.len() >= cap {
            return Err(Error::EnumerationLimit {
                what: "independent sets",
                count: out.len() as u128 + 1,
                cap: cap as u128,
            });
        }
        out.push(current.clone());
        for l in next..self.num_links() {
            let link = LinkId(l);
            if current.iter().all(|&c| !self.conflicts(c, link)) {
                current.push(link);
                self.extend_independent(l + 1, current, out, cap)?;
                current.pop();
            }
        }
        Ok(())
    }

    pub(crate) fn normalize_subset(&self, subset: &[LinkId]) -> Result<Vec<LinkId>> {
        if subset.is_empty() {
            return Err(Error::InvalidInput("link subset must be nonempty".into()));
        }
        let mut members = subset.to_vec();
        members.sort_unstable();
        members.dedup();
        if let Some(bad) = members.iter().find(|l| l.0 >= self.num_links()) {
            return Err(Error::InvalidInput(format!(
                "link {} is out of range for a network of {} links",
                bad.0,
                self.num_links()
            )));
        }
        Ok(members)
    }
}

fn bron_kerbosch(compat: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = bits(p | x)
        .max_by_key(|&u| (p & compat[u]).count_ones())
        .expect("p | x is nonempty");
    for v in bits(p & !compat[pivot]) {
        let bit = 1u64 << v;
        bron_kerbosch(compat, r | bit, p & compat[v], x & compat[v], out);
        p &= !bit;
        x |= bit;
    }
}

fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Binary on/off indicator per link of the whole network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivationVector {
    pub active: Vec<bool>,
}

impl ActivationVector {
    pub fn active_links(&self) -> Vec<LinkId> {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(l, _)| LinkId(l))
            .collect()
    }

    pub fn is_active(&self, link: LinkId) -> bool {
        self.active[link.0]
    }

    /// 0/1 entries restricted to `subset`, in the order given.
    pub fn restricted(&self, subset: &[LinkId]) -> Vec<f64> {
        subset
            .iter()
            .map(|&l| if self.active[l.0] { 1.0 } else { 0.0 })
            .collect()
    }
}
