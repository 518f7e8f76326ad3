use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DigraphSchedule, ReversiblePair, UndirectedGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    Static,
    Schedule,
}

/// Graph description file. Indices are 0-based.
///
/// ```json
/// {"n": 5, "mode": "static", "edges": [[0,1],[1,2]], "r": [...], "M": [[...]]}
/// {"n": 5, "mode": "schedule", "graphs": [[[0,1]], [[1,2]]], "period": 2}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub mode: GraphMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphs: Option<Vec<Vec<[usize; 2]>>>,
    /// Defaults to the number of graphs; 0 marks an explicit finite list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    /// Claimed connectivity window; checked by validation.
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    /// Treat every schedule graph as regular when picking contraction constants.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub regular: bool,
    /// Uniform bound on second singular values of the regular schedule's matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

/// A resolved communication structure.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Static {
        graph: UndirectedGraph,
        pair: ReversiblePair,
    },
    Schedule(DigraphSchedule),
}

impl Topology {
    pub fn n(&self) -> usize {
        match self {
            Topology::Static { graph, .. } => graph.n(),
            Topology::Schedule(s) => s.n(),
        }
    }
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph description: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_file(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Builds the topology. Static graphs without `r`/`M` get lazy Metropolis
    /// weights; schedule graphs get all self-loops added.
    pub fn build(&self) -> Result<Topology> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Config("graph has no nodes".into()));
        }
        match self.mode {
            GraphMode::Static => {
                let edges = self
                    .edges
                    .as_ref()
                    .ok_or_else(|| Error::Config("static graph needs \"edges\"".into()))?;
                let graph = UndirectedGraph::new(n, edges.iter().map(|e| (e[0], e[1])))?;
                let pair = match (&self.r, &self.m) {
                    (None, None) => ReversiblePair::lazy_metropolis(&graph),
                    (Some(r), Some(m)) => {
                        if m.iter().any(|row| row.len() != n) || m.len() != n {
                            return Err(Error::Config(format!("\"M\" must be {n}x{n}")));
                        }
                        ReversiblePair::new(DVector::from_row_slice(r), DMatrix::from_fn(n, n, |i, j| m[i][j]))?
                    }
                    _ => return Err(Error::Config("give both \"r\" and \"M\" or neither".into())),
                };
                Ok(Topology::Static { graph, pair })
            }
            GraphMode::Schedule => {
                let graphs = self
                    .graphs
                    .as_ref()
                    .ok_or_else(|| Error::Config("schedule needs \"graphs\"".into()))?;
                let lists: Vec<Vec<(usize, usize)>> = graphs
                    .iter()
                    .map(|g| g.iter().map(|e| (e[0], e[1])).collect())
                    .collect();
                let lists = DigraphSchedule::with_self_loops(n, lists);
                let schedule = match self.period {
                    Some(0) => DigraphSchedule::explicit(n, lists)?,
                    Some(p) if p != lists.len() => {
                        return Err(Error::Config(format!(
                            "period {p} does not match {} listed graphs",
                            lists.len()
                        )))
                    }
                    _ => DigraphSchedule::periodic(n, lists)?,
                };
                Ok(Topology::Schedule(match self.b {
                    Some(b) => schedule.with_claimed_b(b),
                    None => schedule,
                }))
            }
        }
    }
}
