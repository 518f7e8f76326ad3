//! Decision vectors, the agent-to-coordinate ownership map, and network actions.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-coordinate closed intervals `[lo[k], hi[k]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ActionBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim(lo.len(), hi.len(), "box upper bounds"));
        }
        if lo.is_empty() {
            return Err(Error::Config("action box has no coordinates".into()));
        }
        for (k, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::Config(format!("coordinate {k} has a non-finite bound")));
            }
            if l > h {
                return Err(Error::Config(format!("coordinate {k} is empty: lo = {l} > hi = {h}")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval on every one of `p` coordinates.
    pub fn uniform(p: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; p], vec![hi; p])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Largest per-coordinate width, `D_X`.
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }

    /// Largest Euclidean norm of a point in the box.
    pub fn radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (l * l).max(h * h))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(v, (l, h))| v.clamp(*l, *h)),
        )
    }
}

/// Which coordinates of the global decision vector each agent controls.
///
/// The blocks partition `0..p`; every agent owns at least one coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMap {
    blocks: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl BlockMap {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Config("block map has no agents".into()));
        }
        let p: usize = blocks.iter().map(Vec::len).sum();
        let mut owner = vec![usize::MAX; p];
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::Config(format!("agent {i} owns no coordinate")));
            }
            for &k in block {
                if k >= p {
                    return Err(Error::Config(format!("agent {i} owns coordinate {k}, outside 0..{p}")));
                }
                if owner[k] != usize::MAX {
                    return Err(Error::Config(format!(
                        "coordinate {k} is owned by agents {} and {i}",
                        owner[k]
                    )));
                }
                owner[k] = i;
            }
        }
        Ok(Self { blocks, owner })
    }

    /// One coordinate per agent, `block(i) = {i}`.
    pub fn scalar(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
            owner: (0..n).collect(),
        }
    }

    pub fn agents(&self) -> usize {
        self.blocks.len()
    }

    pub fn coords(&self) -> usize {
        self.owner.len()
    }

    pub fn block(&self, agent: usize) -> &[usize] {
        &self.blocks[agent]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// The agent owning coordinate `k`.
    pub fn owner(&self, k: usize) -> usize {
        self.owner[k]
    }
}

/// The network action `x(t)`: coordinate `k` comes from the agent owning it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkAction {
    pub x: DVector<f64>,
    pub round: usize,
}

/// Local state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Dual iterate (running gradient estimate).
    pub z: DVector<f64>,
    /// Primal iterate, always inside the action box.
    pub x: DVector<f64>,
    /// Push-sum weight; stays at 1 for the circulation engine.
    pub w: f64,
}

impl AgentState {
    pub fn new(z: DVector<f64>, x: DVector<f64>) -> Self {
        Self { z, x, w: 1.0 }
    }
}

pub fn extract_network_action(states: &[AgentState], blocks: &BlockMap, round: usize) -> Result<NetworkAction> {
    if states.len() != blocks.agents() {
        return Err(Error::Config(format!(
            "{} agent states for a block map over {} agents",
            states.len(),
            blocks.agents()
        )));
    }
    let p = blocks.coords();
    let mut x = DVector::zeros(p);
    for k in 0..p {
        let state = &states[blocks.owner(k)];
        if state.x.len() != p {
            return Err(Error::dim(p, state.x.len(), "agent primal vector"));
        }
        x[k] = state.x[k];
    }
    Ok(NetworkAction { x, round })
}

/// Places an agent's block-local vector into the full `p`-dimensional space.
pub fn block_embed(agent: usize, u: &[f64], blocks: &BlockMap) -> Result<DVector<f64>> {
    if agent >= blocks.agents() {
        return Err(Error::Config(format!(
            "agent {agent} outside block map with {} agents",
            blocks.agents()
        )));
    }
    let block = blocks.block(agent);
    if u.len() != block.len() {
        return Err(Error::dim(block.len(), u.len(), "block update"));
    }
    let mut out = DVector::zeros(blocks.coords());
    for (&k, &v) in block.iter().zip(u) {
        out[k] = v;
    }
    Ok(out)
}
