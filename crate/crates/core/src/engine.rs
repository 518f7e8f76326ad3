//! Behavior shared by the circulation and push-sum dual-averaging engines.

use nalgebra::{DMatrix, DVector};

use crate::domain::{extract_network_action, ActionBox, AgentState, BlockMap, NetworkAction};
use crate::error::{Error, Result};
use crate::objective::Objective;

/// A decentralized dual-averaging engine advanced one round at a time.
pub trait DualAveragingEngine {
    fn blocks(&self) -> &BlockMap;

    fn action_box(&self) -> &ActionBox;

    fn states(&self) -> &[AgentState];

    /// Number of completed steps.
    fn round(&self) -> usize;

    /// Mean-field dual vector maintained as the running sum of updates.
    fn mean_field(&self) -> &DVector<f64>;

    /// Updates `u(0), u(1), ...` fed to `step` so far.
    fn update_history(&self) -> &[DVector<f64>];

    /// Applies the local updates `u` and step size `alpha`.
    fn step(&mut self, u: &DVector<f64>, alpha: f64) -> Result<()>;

    /// Sum over agents of the distance of the (normalized) dual from the mean field.
    fn disagreement(&self) -> f64;

    /// Sum over agents of the squared distance; the quantity the consensus bounds control.
    fn disagreement_sq(&self) -> f64;

    /// Infinity-norm gap between the averaged agent duals and the running update sum, now.
    fn current_mean_field_residual(&self) -> f64;

    /// Largest `current_mean_field_residual` seen after any step.
    fn mean_field_residual(&self) -> f64;

    fn network_action(&self) -> Result<NetworkAction> {
        extract_network_action(self.states(), self.blocks(), self.round())
    }

    fn local_updates(&self, objective: &dyn Objective) -> Result<DVector<f64>> {
        local_updates(self.states(), self.blocks(), objective)
    }
}

/// Each agent contributes its own block of the gradient evaluated at its own primal iterate.
pub fn local_updates(states: &[AgentState], blocks: &BlockMap, objective: &dyn Objective) -> Result<DVector<f64>> {
    let p = blocks.coords();
    if objective.dim() != p {
        return Err(Error::dim(p, objective.dim(), "objective dimension"));
    }
    if states.len() != blocks.agents() {
        return Err(Error::dim(blocks.agents(), states.len(), "agent states"));
    }
    let mut u = DVector::zeros(p);
    for (i, state) in states.iter().enumerate() {
        let grad = objective.gradient(&state.x);
        for &k in blocks.block(i) {
            u[k] = grad[k];
        }
    }
    Ok(u)
}

/// Stacks agent duals as rows of an `n x p` matrix.
pub(crate) fn dual_matrix(states: &[AgentState]) -> DMatrix<f64> {
    let n = states.len();
    let p = states.first().map_or(0, |s| s.z.len());
    DMatrix::from_fn(n, p, |i, k| states[i].z[k])
}

pub(crate) fn check_step_args(u: &DVector<f64>, alpha: f64, p: usize) -> Result<()> {
    if u.len() != p {
        return Err(Error::dim(p, u.len(), "update vector"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("step size must be positive, got {alpha}")));
    }
    Ok(())
}

pub(crate) fn check_dims(blocks: &BlockMap, bx: &ActionBox, n: usize) -> Result<()> {
    if blocks.agents() != n {
        return Err(Error::Config(format!(
            "block map has {} agents, network has {n}",
            blocks.agents()
        )));
    }
    if bx.dim() != blocks.coords() {
        return Err(Error::dim(blocks.coords(), bx.dim(), "action box"));
    }
    Ok(())
}
