//! Push-sum dual averaging over a time-varying digraph schedule.
//!
//! At instant `t` every agent broadcasts `w_i / d_i` and `z_i / d_i` to its
//! out-neighbors (itself included) and sums what it receives. The column
//! stochastic matrix `A(t)` keeps `sum_i w_i = n` and `(1/n) sum_i z_i` equal to
//! the running sum of updates; primal points come from the ratios `z_i / w_i`.

use nalgebra::{DMatrix, DVector};

use crate::domain::{ActionBox, AgentState, BlockMap};
use crate::engine::{check_dims, check_step_args, dual_matrix, DualAveragingEngine};
use crate::error::{Error, Result};
use crate::graph::{ContractionConstants, DigraphSchedule};
use crate::prox::project;

#[derive(Debug, Clone)]
pub struct OdaPsEngine {
    schedule: DigraphSchedule,
    bx: ActionBox,
    blocks: BlockMap,
    states: Vec<AgentState>,
    zbar: DVector<f64>,
    t: usize,
    history: Vec<DVector<f64>>,
    max_residual: f64,
    max_weight_drift: f64,
    min_weight: f64,
}

impl OdaPsEngine {
    /// Starts from `w_i(0) = 1`, `z_i(0) = 0`, `x_i(0) = project(0, alpha0)`.
    pub fn new(schedule: DigraphSchedule, bx: ActionBox, blocks: BlockMap, alpha0: f64) -> Result<Self> {
        check_dims(&blocks, &bx, schedule.n())?;
        let p = blocks.coords();
        let x0 = project(&DVector::zeros(p), alpha0, &bx)?;
        let states = (0..schedule.n())
            .map(|_| AgentState::new(DVector::zeros(p), x0.clone()))
            .collect();
        Ok(Self {
            schedule,
            bx,
            blocks,
            states,
            zbar: DVector::zeros(p),
            t: 0,
            history: Vec::new(),
            max_residual: 0.0,
            max_weight_drift: 0.0,
            min_weight: 1.0,
        })
    }

    pub fn schedule(&self) -> &DigraphSchedule {
        &self.schedule
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.states.len(), self.states.iter().map(|s| s.w))
    }

    /// Largest `|sum_i w_i(t) - n|` seen so far.
    pub fn max_weight_drift(&self) -> f64 {
        self.max_weight_drift
    }

    /// Smallest `w_i(t)` seen so far.
    pub fn min_weight(&self) -> f64 {
        self.min_weight
    }

    pub fn uniform_mean(&self) -> DVector<f64> {
        uniform_mean(&self.states)
    }

    /// Recomputes every dual from the unrolled form
    /// `z_i^k(t) = n sum_{s<t} [A(t-1:s+1)]_{i,owner(k)} u_k(s)` and returns the
    /// largest absolute deviation from the recursively maintained duals.
    pub fn unrolled_dual_check(&self) -> Result<f64> {
        let n = self.schedule.n();
        let p = self.blocks.coords();
        let mut unrolled = DMatrix::<f64>::zeros(n, p);
        // A(t-1:s+1), starting from the identity at s = t-1.
        let mut product = DMatrix::<f64>::identity(n, n);
        for s in (0..self.t).rev() {
            let u = &self.history[s];
            for k in 0..p {
                let owner = self.blocks.owner(k);
                for i in 0..n {
                    unrolled[(i, k)] += n as f64 * product[(i, owner)] * u[k];
                }
            }
            product *= self.schedule.pushsum_matrix(s)?;
        }
        Ok((unrolled - dual_matrix(&self.states)).amax())
    }
}

pub fn uniform_mean(states: &[AgentState]) -> DVector<f64> {
    let p = states.first().map_or(0, |s| s.z.len());
    states.iter().fold(DVector::zeros(p), |acc, s| acc + &s.z) / states.len() as f64
}

/// `sum_i ||z_i / w_i - zbar||` with `zbar = (1/n) sum_i z_i`.
pub fn ratio_disagreement(states: &[AgentState]) -> f64 {
    let zbar = uniform_mean(states);
    states.iter().map(|s| (&s.z / s.w - &zbar).norm()).sum()
}

fn ratio_disagreement_sq(states: &[AgentState]) -> f64 {
    let zbar = uniform_mean(states);
    states.iter().map(|s| (&s.z / s.w - &zbar).norm_squared()).sum()
}

impl DualAveragingEngine for OdaPsEngine {
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
        let a = self.schedule.pushsum_matrix(self.t)?;
        let n = self.states.len();

        let w = &a * self.weights();
        let mut z = &a * dual_matrix(&self.states);
        for k in 0..p {
            z[(self.blocks.owner(k), k)] += n as f64 * u[k];
        }
        for (i, state) in self.states.iter_mut().enumerate() {
            if !(w[i] > 0.0) {
                return Err(Error::Invariant(format!(
                    "push-sum weight of agent {i} is {} at round {}",
                    w[i],
                    self.t + 1
                )));
            }
            state.w = w[i];
            state.z = z.row(i).transpose();
            state.x = project(&(&state.z / state.w), alpha, &self.bx)?;
        }

        self.zbar += u;
        self.history.push(u.clone());
        self.t += 1;
        self.max_residual = self.max_residual.max(self.current_mean_field_residual());
        self.max_weight_drift = self.max_weight_drift.max((w.sum() - n as f64).abs());
        self.min_weight = self.min_weight.min(w.min());
        Ok(())
    }

    fn disagreement(&self) -> f64 {
        ratio_disagreement(&self.states)
    }

    fn disagreement_sq(&self) -> f64 {
        ratio_disagreement_sq(&self.states)
    }

    fn current_mean_field_residual(&self) -> f64 {
        (self.uniform_mean() - &self.zbar).amax()
    }

    fn mean_field_residual(&self) -> f64 {
        self.max_residual
    }
}

/// `sum_i ||z_i/w_i - zbar||^2 <= n^2 (2 beta L / (gamma theta (1 - theta)))^2`,
/// evaluated in log domain. Infinite when `theta` is 0 or rounds to 1.
pub fn ratio_disagreement_sq_bound(n: usize, lipschitz: f64, c: &ContractionConstants) -> f64 {
    if lipschitz == 0.0 {
        return 0.0;
    }
    if n == 1 {
        // A single agent has w = 1 and z = zbar.
        return 0.0;
    }
    if c.theta == 0.0 {
        return f64::INFINITY;
    }
    let ln = (2.0 * c.beta * lipschitz * n as f64).ln() - c.ln_gamma - c.theta.ln() - c.ln_one_minus_theta;
    (2.0 * ln).exp()
}
