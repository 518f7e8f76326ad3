//! Circulation-based dual averaging over a static undirected graph.
//!
//! Each agent keeps a full dual vector `z_i` and exchanges it with its
//! neighbors. With messages `v_{i->j} = z_i` the coordinate-`k` duals of all
//! agents evolve as `z^k(t+1) = M z^k(t) + u_k(t) / r_{owner(k)} e_{owner(k)}`,
//! and the r-weighted mean `sum_i r_i z_i` tracks the running sum of updates.

use nalgebra::DVector;

use crate::domain::{ActionBox, AgentState, BlockMap};
use crate::engine::{check_dims, check_step_args, dual_matrix, DualAveragingEngine};
use crate::error::{Error, Result};
use crate::graph::ReversiblePair;
use crate::prox::project;

#[derive(Debug, Clone)]
pub struct OdaCEngine {
    pair: ReversiblePair,
    bx: ActionBox,
    blocks: BlockMap,
    states: Vec<AgentState>,
    zbar: DVector<f64>,
    t: usize,
    history: Vec<DVector<f64>>,
    max_residual: f64,
    max_abs_dual: f64,
}

impl OdaCEngine {
    /// Starts from `z_i(0) = 0` and `x_i(0) = project(0, alpha0)`.
    pub fn new(pair: ReversiblePair, bx: ActionBox, blocks: BlockMap, alpha0: f64) -> Result<Self> {
        check_dims(&blocks, &bx, pair.n())?;
        if pair.r.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config("circulation weights r must be positive".into()));
        }
        let p = blocks.coords();
        let x0 = project(&DVector::zeros(p), alpha0, &bx)?;
        let states = (0..pair.n())
            .map(|_| AgentState::new(DVector::zeros(p), x0.clone()))
            .collect();
        Ok(Self {
            pair,
            bx,
            blocks,
            states,
            zbar: DVector::zeros(p),
            t: 0,
            history: Vec::new(),
            max_residual: 0.0,
            max_abs_dual: 0.0,
        })
    }

    pub fn pair(&self) -> &ReversiblePair {
        &self.pair
    }

    /// `sum_i r_i z_i`, computed from the agents' duals.
    pub fn weighted_mean(&self) -> DVector<f64> {
        weighted_mean(&self.states, &self.pair.r)
    }

    /// Largest `|z_i^k|` seen so far; tiny `r_i` amplifies injections by `1/r_i`.
    pub fn max_abs_dual(&self) -> f64 {
        self.max_abs_dual
    }
}

pub fn weighted_mean(states: &[AgentState], r: &DVector<f64>) -> DVector<f64> {
    let p = states.first().map_or(0, |s| s.z.len());
    states
        .iter()
        .zip(r.iter())
        .fold(DVector::zeros(p), |acc, (s, &ri)| acc + &s.z * ri)
}

/// `sum_i ||z_i - zbar||` with `zbar = sum_i r_i z_i`.
pub fn weighted_disagreement(states: &[AgentState], r: &DVector<f64>) -> f64 {
    let zbar = weighted_mean(states, r);
    states.iter().map(|s| (&s.z - &zbar).norm()).sum()
}

fn weighted_disagreement_sq(states: &[AgentState], r: &DVector<f64>) -> f64 {
    let zbar = weighted_mean(states, r);
    states.iter().map(|s| (&s.z - &zbar).norm_squared()).sum()
}

impl DualAveragingEngine for OdaCEngine {
    fn blocks(&self) -> &BlockMap {
        &self.blocks
    }

    fn action_box(&self) -> &ActionBox {
        &self.bx
    }

    fn states(&self) -> &[AgentState] {
        &self.states
    }

    fn round(&self) -> usize {
        self.t
    }

    fn mean_field(&self) -> &DVector<f64> {
        &self.zbar
    }

    fn update_history(&self) -> &[DVector<f64>] {
        &self.history
    }

    fn step(&mut self, u: &DVector<f64>, alpha: f64) -> Result<()> {
        let p = self.blocks.coords();
        check_step_args(u, alpha, p)?;
        let n = self.pair.n();

        // Rows are agents, columns are coordinates: column k is z^k.
        let mut z = &self.pair.m * dual_matrix(&self.states);
        for k in 0..p {
            let owner = self.blocks.owner(k);
            z[(owner, k)] += u[k] / self.pair.r[owner];
        }
        for (i, state) in self.states.iter_mut().enumerate() {
            state.z = z.row(i).transpose();
            state.x = project(&state.z, alpha, &self.bx)?;
        }
        debug_assert_eq!(self.states.len(), n);

        self.zbar += u;
        self.history.push(u.clone());
        self.t += 1;
        self.max_residual = self.max_residual.max(self.current_mean_field_residual());
        self.max_abs_dual = self.max_abs_dual.max(z.amax());
        Ok(())
    }

    fn disagreement(&self) -> f64 {
        weighted_disagreement(&self.states, &self.pair.r)
    }

    fn disagreement_sq(&self) -> f64 {
        weighted_disagreement_sq(&self.states, &self.pair.r)
    }

    fn current_mean_field_residual(&self) -> f64 {
        (self.weighted_mean() - &self.zbar).amax()
    }

    fn mean_field_residual(&self) -> f64 {
        self.max_residual
    }
}

/// Consensus bound `sum_i ||z_i - zbar||^2 <= n L^2 / (r_*^3 (1 - sqrt(1 - lambda))^2)`.
pub fn disagreement_sq_bound(n: usize, lipschitz: f64, r_star: f64, gap: f64) -> f64 {
    let contraction = 1.0 - (1.0 - gap).sqrt();
    n as f64 * lipschitz * lipschitz / (r_star.powi(3) * contraction * contraction)
}
