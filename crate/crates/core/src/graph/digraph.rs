use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Directed link `(from, to)`: `from` may send to `to`.
pub type Edge = (usize, usize);

/// A sequence of digraphs `E(0), E(1), ...`, either repeating with a fixed
/// period or given as an explicit finite list. Every graph carries all self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigraphSchedule {
    n: usize,
    /// 0 for an explicit finite list.
    period: usize,
    graphs: Vec<BTreeSet<Edge>>,
    claimed_b: Option<usize>,
}

impl DigraphSchedule {
    fn build(n: usize, graphs: Vec<Vec<Edge>>, period: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("schedule has no nodes".into()));
        }
        if graphs.is_empty() {
            return Err(Error::Config("schedule has no graphs".into()));
        }
        let mut sets = Vec::with_capacity(graphs.len());
        for (t, edges) in graphs.into_iter().enumerate() {
            let mut set = BTreeSet::new();
            for (j, i) in edges {
                if i >= n || j >= n {
                    return Err(Error::Config(format!("graph {t}: edge ({j}, {i}) outside 0..{n}")));
                }
                set.insert((j, i));
            }
            if let Some(i) = (0..n).find(|&i| !set.contains(&(i, i))) {
                return Err(Error::Config(format!("graph {t}: node {i} has no self-loop")));
            }
            sets.push(set);
        }
        Ok(Self {
            n,
            period,
            graphs: sets,
            claimed_b: None,
        })
    }

    /// `E(t) = graphs[t mod graphs.len()]`.
    pub fn periodic(n: usize, graphs: Vec<Vec<Edge>>) -> Result<Self> {
        let period = graphs.len();
        Self::build(n, graphs, period)
    }

    /// `E(t) = graphs[t]`; instants past the end are an error.
    pub fn explicit(n: usize, graphs: Vec<Vec<Edge>>) -> Result<Self> {
        Self::build(n, graphs, 0)
    }

    /// Adds every self-loop `(i, i)` to each edge list.
    pub fn with_self_loops(n: usize, graphs: Vec<Vec<Edge>>) -> Vec<Vec<Edge>> {
        graphs
            .into_iter()
            .map(|mut g| {
                g.extend((0..n).map(|i| (i, i)));
                g
            })
            .collect()
    }

    /// The same strongly connected digraph at every instant.
    pub fn fixed(n: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::periodic(n, Self::with_self_loops(n, vec![edges]))
    }

    /// Complete digraph with self-loops at every instant.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|j| (0..n).map(move |i| (j, i))).collect();
        Self::periodic(n, vec![edges]).expect("complete digraph is well formed")
    }

    pub fn with_claimed_b(mut self, b: usize) -> Self {
        self.claimed_b = Some(b);
        self
    }

    pub fn claimed_b(&self) -> Option<usize> {
        self.claimed_b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn graphs(&self) -> &[BTreeSet<Edge>] {
        &self.graphs
    }

    /// Number of distinct instants before the schedule repeats or ends.
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Whether instant `t` exists (always true for periodic schedules).
    pub fn covers(&self, t: usize) -> bool {
        self.period > 0 || t < self.graphs.len()
    }

    pub fn graph_at(&self, t: usize) -> Result<&BTreeSet<Edge>> {
        if self.period > 0 {
            Ok(&self.graphs[t % self.period])
        } else {
            self.graphs.get(t).ok_or_else(|| {
                Error::Config(format!(
                    "explicit schedule has {} graphs, instant {t} requested",
                    self.graphs.len()
                ))
            })
        }
    }

    /// Column-stochastic push-sum matrix: `A_ij = 1/d_j` when `j -> i`, where
    /// `d_j` is the out-degree of `j` counting its self-loop.
    pub fn pushsum_matrix(&self, t: usize) -> Result<DMatrix<f64>> {
        let edges = self.graph_at(t)?;
        let n = self.n;
        let mut out_degree = vec![0usize; n];
        for &(j, _) in edges {
            out_degree[j] += 1;
        }
        let mut a = DMatrix::zeros(n, n);
        for &(j, i) in edges {
            a[(i, j)] = 1.0 / out_degree[j] as f64;
        }
        Ok(a)
    }
}

pub(crate) fn strongly_connected(n: usize, edges: &BTreeSet<Edge>) -> bool {
    let reach = |forward: bool| {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if forward {
                adj[a].push(b);
            } else {
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n <= 1 || (reach(true) && reach(false))
}

/// Smallest `B` such that the edge union of every `B` consecutive instants is
/// strongly connected. Periodic schedules are checked over one period of
/// window starts; `None` when no `B <= cap` works.
pub fn validate_b_strong(schedule: &DigraphSchedule, cap: usize) -> Option<usize> {
    let n = schedule.n();
    let len = schedule.len();
    (1..=cap).find(|&b| {
        let starts = if schedule.period() > 0 {
            len
        } else if b <= len {
            len - b + 1
        } else {
            0
        };
        starts > 0
            && (0..starts).all(|s| {
                let union: BTreeSet<Edge> = (s..s + b)
                    .flat_map(|t| schedule.graph_at(t).expect("window within schedule").iter().copied())
                    .collect();
                strongly_connected(n, &union)
            })
    })
}

/// Backward product `A(t:s) = A(t) A(t-1) ... A(s)`, with `A(s-1:s) = I`.
pub fn backward_product(schedule: &DigraphSchedule, t: isize, s: usize) -> Result<DMatrix<f64>> {
    let n = schedule.n();
    let mut prod = DMatrix::identity(n, n);
    let mut k = t;
    while k >= s as isize {
        prod *= schedule.pushsum_matrix(k as usize)?;
        k -= 1;
    }
    Ok(prod)
}
