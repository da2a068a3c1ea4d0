//! Interaction graphs and neighbor-mean observations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::OscillatorState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Complete,
    Ring,
    Path,
    Star,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 4] = [
        TopologyKind::Complete,
        TopologyKind::Ring,
        TopologyKind::Path,
        TopologyKind::Star,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Complete => "complete",
            TopologyKind::Ring => "ring",
            TopologyKind::Path => "path",
            TopologyKind::Star => "star",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complete" | "cg" => Ok(TopologyKind::Complete),
            "ring" | "rg" => Ok(TopologyKind::Ring),
            "path" | "pg" => Ok(TopologyKind::Path),
            "star" | "sg" => Ok(TopologyKind::Star),
            other => Err(Error::Topology(format!("unknown topology kind `{other}`"))),
        }
    }
}

/// Undirected interaction graph without self-loops where every node has at
/// least one neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds one of the four standard graphs. `center` (0-based) is only
    /// consulted for the star and defaults to node 0.
    pub fn new(kind: TopologyKind, n: usize, center: Option<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Topology(format!("need at least 2 agents, got {n}")));
        }
        let mut edges = Vec::new();
        match kind {
            TopologyKind::Complete => {
                for i in 0..n {
                    for j in i + 1..n {
                        edges.push((i, j));
                    }
                }
            }
            TopologyKind::Path | TopologyKind::Ring => {
                edges.extend((0..n - 1).map(|i| (i, i + 1)));
                if kind == TopologyKind::Ring && n > 2 {
                    edges.push((n - 1, 0));
                }
            }
            TopologyKind::Star => {
                let c = center.unwrap_or(0);
                if c >= n {
                    return Err(Error::Topology(format!("star center {c} out of range for n = {n}")));
                }
                edges.extend((0..n).filter(|&i| i != c).map(|i| (c, i)));
            }
        }
        if kind != TopologyKind::Star && center.is_some_and(|c| c >= n) {
            return Err(Error::Topology("center index out of range".into()));
        }
        Self::from_edges(n, &edges)
    }

    /// Builds a graph from 0-based undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Topology(format!("need at least 2 agents, got {n}")));
        }
        let mut adjacency = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Topology(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::Topology(format!("self-loop at node {i}")));
            }
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[i * n + j]).collect())
            .collect();
        if let Some(k) = neighbors.iter().position(Vec::is_empty) {
            return Err(Error::Topology(format!("node {k} is isolated")));
        }
        Ok(Self {
            n,
            adjacency,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Topology("not a permutation".into()));
            }
        }
        let edges: Vec<_> = (0..self.n)
            .flat_map(|i| self.neighbors[i].iter().map(move |&j| (i, j)))
            .filter(|(i, j)| i < j)
            .map(|(i, j)| (perm[i], perm[j]))
            .collect();
        Self::from_edges(self.n, &edges)
    }
}

/// Positions and velocities of the whole group at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub states: Vec<OscillatorState>,
    pub t: f64,
}

impl GroupState {
    pub fn new(states: Vec<OscillatorState>, t: f64) -> Self {
        Self { states, t }
    }
}

/// Mean position and velocity over an agent's neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeighborMean {
    pub position: f64,
    pub velocity: f64,
}

pub fn neighbor_mean(group: &GroupState, topo: &Topology, k: usize) -> Result<NeighborMean> {
    if group.states.len() != topo.n() {
        return Err(Error::DimensionMismatch {
            expected: topo.n(),
            got: group.states.len(),
        });
    }
    if k >= topo.n() {
        return Err(Error::Topology(format!("agent {k} out of range")));
    }
    Ok(neighbor_mean_of(&group.states, topo.neighbors(k)))
}

pub(crate) fn neighbor_mean_of(states: &[OscillatorState], neighbors: &[usize]) -> NeighborMean {
    let m = neighbors.len() as f64;
    let (sx, sv) = neighbors
        .iter()
        .fold((0.0, 0.0), |(sx, sv), &j| (sx + states[j].x, sv + states[j].v));
    NeighborMean {
        position: sx / m,
        velocity: sv / m,
    }
}
