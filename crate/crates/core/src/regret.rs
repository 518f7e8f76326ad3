//! Network regret, its decomposition into consensus and optimization terms,
//! and closed-form regret bounds for both engines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::domain::ActionBox;
use crate::error::{Error, Result};
use crate::graph::ContractionConstants;
use crate::objective::{Objective, SumObjective};
use crate::prox::project;

/// `xbar(0) = project(0, alpha(0))` and `xbar(t+1) = project(sum_{s<=t} u(s), alpha(t))`.
/// Returns `updates.len() + 1` points.
pub fn centralized_reference(updates: &[DVector<f64>], alphas: &[f64], bx: &ActionBox) -> Result<Vec<DVector<f64>>> {
    if alphas.len() < updates.len().max(1) {
        return Err(Error::dim(updates.len().max(1), alphas.len(), "step sizes"));
    }
    let mut sum = DVector::zeros(bx.dim());
    let mut out = Vec::with_capacity(updates.len() + 1);
    out.push(project(&sum, alphas[0], bx)?);
    for (t, u) in updates.iter().enumerate() {
        sum += u;
        out.push(project(&sum, alphas[t], bx)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparator {
    pub point: DVector<f64>,
    /// `sum_t f_t(point)`.
    pub value: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
}

const COMPARATOR_MAX_ITER: usize = 1_000_000;

/// Minimizes `sum_t f_t` over the box by projected gradient descent with step
/// `1 / sum_t G_t`, stopping when the gradient mapping norm
/// `G ||y - clamp(y - grad / G)||` drops to `tol`.
///
/// Smoothness constants are read off each objective's quadratic form.
pub fn offline_comparator(objectives: &[&dyn Objective], bx: &ActionBox, tol: f64) -> Result<Comparator> {
    let mut smoothness = 0.0;
    for f in objectives {
        let form = f.quadratic_form().ok_or_else(|| {
            Error::Domain("comparator needs a smoothness constant; use offline_comparator_with".into())
        })?;
        smoothness += largest_eigenvalue(&form.hessian);
    }
    offline_comparator_with(objectives, bx, smoothness, tol, COMPARATOR_MAX_ITER)
}

fn largest_eigenvalue(h: &DMatrix<f64>) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max().max(0.0)
}

pub fn offline_comparator_with(
    objectives: &[&dyn Objective],
    bx: &ActionBox,
    smoothness: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Comparator> {
    if objectives.is_empty() {
        return Err(Error::Domain("comparator needs at least one objective".into()));
    }
    if let Some(f) = objectives.iter().find(|f| f.dim() != bx.dim()) {
        return Err(Error::dim(bx.dim(), f.dim(), "objective dimension"));
    }
    if !(smoothness >= 0.0) || !smoothness.is_finite() {
        return Err(Error::Domain(format!(
            "smoothness constant must be finite, got {smoothness}"
        )));
    }
    let total = SumObjective::new(objectives.to_vec());
    let finish = |point: DVector<f64>, iterations, pg| Comparator {
        value: total.value(&point),
        point,
        iterations,
        projected_gradient_norm: pg,
    };

    let mut y = bx.center();
    if smoothness == 0.0 {
        // Affine sum: the gradient is constant and the minimizer is a vertex.
        let g = total.gradient(&y);
        for k in 0..y.len() {
            if g[k] > 0.0 {
                y[k] = bx.lo()[k];
            } else if g[k] < 0.0 {
                y[k] = bx.hi()[k];
            }
        }
        return Ok(finish(y, 0, 0.0));
    }

    let step = 1.0 / smoothness;
    let mut best = (f64::INFINITY, y.clone());
    for iteration in 0..=max_iter {
        let g = total.gradient(&y);
        let next = bx.clamp(&(&y - &g * step));
        let pg = smoothness * (&y - &next).norm();
        if pg < best.0 {
            best = (pg, y.clone());
        }
        if pg <= tol {
            return Ok(finish(y, iteration, pg));
        }
        y = next;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: best.0,
        best: best.1.as_slice().to_vec(),
    })
}

/// `sum_t f_t(x(t)) - sum_t f_t(y)`. May be negative when the objectives adapt
/// to the actions.
pub fn network_regret(
    actions: &[DVector<f64>],
    objectives: &[&dyn Objective],
    comparator: &DVector<f64>,
) -> Result<f64> {
    if actions.len() != objectives.len() {
        return Err(Error::dim(objectives.len(), actions.len(), "actions per objective"));
    }
    Ok(actions
        .iter()
        .zip(objectives)
        .map(|(x, f)| f.value(x) - f.value(comparator))
        .sum())
}

/// Running sums of the regret decomposition through round `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegretTerms {
    /// `1/2 sum alpha(s-1) ||u(s)||^2`.
    pub e1: f64,
    /// `L sum_s sum_i ||x_i(s) - xbar(s)||`.
    pub e2: f64,
    /// `sqrt(p) D sum_s ||grad f_s(xbar(s)) - u(s)||`.
    pub e3: f64,
    /// `C / alpha(t)`.
    pub prox_term: f64,
}

impl RegretTerms {
    pub fn bound(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.prox_term
    }
}

/// Constants shared by the regret bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub n: usize,
    /// Number of coordinates of the network action.
    pub p: usize,
    /// Bound on gradient norms over the box.
    pub lipschitz: f64,
    /// Bound on the gradient's Lipschitz constant.
    pub smoothness: f64,
    /// Largest per-coordinate width of the box.
    pub diameter: f64,
    /// `sup psi` over the box.
    pub prox_sup: f64,
}

/// Partial sums of the decomposition for `t = 1..=T`.
///
/// `agent_actions[t-1][i]` is `x_i(t)`, `updates[t-1]` is `u(t)` and
/// `objectives[t-1]` is `f_t`; `alphas` holds `alpha(0..=T)`. The reference
/// point is `xbar(t) = project(sum_{1<=s<t} u(s), alpha(t-1))`.
pub fn regret_terms(
    agent_actions: &[Vec<DVector<f64>>],
    updates: &[DVector<f64>],
    objectives: &[&dyn Objective],
    alphas: &[f64],
    bx: &ActionBox,
    constants: &ProblemConstants,
) -> Result<Vec<RegretTerms>> {
    let horizon = updates.len();
    if agent_actions.len() != horizon || objectives.len() != horizon {
        return Err(Error::dim(horizon, agent_actions.len().min(objectives.len()), "rounds"));
    }
    if alphas.len() < horizon + 1 {
        return Err(Error::dim(horizon + 1, alphas.len(), "step sizes"));
    }
    let e3_scale = (constants.p as f64).sqrt() * constants.diameter;
    let mut sum = DVector::zeros(bx.dim());
    let mut acc = RegretTerms {
        e1: 0.0,
        e2: 0.0,
        e3: 0.0,
        prox_term: 0.0,
    };
    let mut out = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let (u, f) = (&updates[t - 1], objectives[t - 1]);
        let xbar = project(&sum, alphas[t - 1], bx)?;
        acc.e1 += 0.5 * alphas[t - 1] * u.norm_squared();
        acc.e2 += constants.lipschitz * agent_actions[t - 1].iter().map(|x| (x - &xbar).norm()).sum::<f64>();
        acc.e3 += e3_scale * (f.gradient(&xbar) - u).norm();
        acc.prox_term = constants.prox_sup / alphas[t];
        out.push(acc);
        sum += u;
    }
    Ok(out)
}

/// A bound of the form `coefficient sqrt(T) + C sqrt(T + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegretBound {
    pub sqrt_t_coefficient: f64,
    /// Part of the coefficient due to disagreement between agents.
    pub disagreement_coefficient: f64,
    pub prox_sup: f64,
}

impl RegretBound {
    pub fn at(&self, horizon: usize) -> f64 {
        let t = horizon as f64;
        self.sqrt_t_coefficient * t.sqrt() + self.prox_sup * (t + 1.0).sqrt()
    }
}

fn assemble(c: &ProblemConstants, consensus_factor: f64) -> RegretBound {
    let nf = c.n as f64;
    let l = c.lipschitz;
    let gd = (c.p as f64).sqrt() * c.smoothness * c.diameter;
    // 2 K (L + sqrt(p) G D), written without dividing by L.
    let disagreement = if consensus_factor == 0.0 || (l == 0.0 && gd == 0.0) {
        0.0
    } else {
        2.0 * consensus_factor * (l + gd)
    };
    RegretBound {
        sqrt_t_coefficient: nf * l * l + disagreement,
        disagreement_coefficient: disagreement,
        prox_sup: c.prox_sup,
    }
}

/// Circulation engine with inverse square root steps:
/// `n L^2 (1 + 2 (1 + sqrt(p) G D / L) / (r*^{3/2} (1 - sqrt(1 - lambda)))) sqrt(T) + C sqrt(T + 1)`.
pub fn oda_c_bound(c: &ProblemConstants, r_star: f64, gap: f64) -> Result<RegretBound> {
    if !(gap > 0.0 && gap <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "spectral gap {gap} outside (0, 1]; the weight matrix does not mix"
        )));
    }
    if !(r_star > 0.0 && r_star <= 1.0) {
        return Err(Error::Domain(format!(
            "smallest stationary weight {r_star} outside (0, 1]"
        )));
    }
    let mix = 1.0 - (1.0 - gap.min(1.0)).sqrt();
    let k = c.n as f64 * c.lipschitz / (r_star.powf(1.5) * mix);
    Ok(assemble(c, k))
}

pub fn bound_oda_c(c: &ProblemConstants, r_star: f64, gap: f64, horizon: usize) -> Result<f64> {
    Ok(oda_c_bound(c, r_star, gap)?.at(horizon))
}

/// Push-sum engine with inverse square root steps:
/// `n L^2 (1 + (1 + sqrt(p) G D / L) 4 beta sqrt(n) / (gamma theta (1 - theta))) sqrt(T) + C sqrt(T + 1)`.
///
/// A single agent has no disagreement term. For `theta = 0` with `n > 1`, or
/// `theta` rounding to 1, the coefficient is infinite.
pub fn oda_ps_bound(c: &ProblemConstants, k: &ContractionConstants) -> RegretBound {
    let factor = if c.n == 1 || c.lipschitz == 0.0 {
        0.0
    } else if k.theta == 0.0 || k.ln_one_minus_theta == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        let nf = c.n as f64;
        let ln = (nf * nf.sqrt() * 2.0 * k.beta * c.lipschitz).ln() - k.ln_gamma - k.theta.ln() - k.ln_one_minus_theta;
        ln.exp()
    };
    assemble(c, factor)
}

pub fn bound_oda_ps(c: &ProblemConstants, k: &ContractionConstants, horizon: usize) -> f64 {
    oda_ps_bound(c, k).at(horizon)
}

/// What happened in round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// Network action `x(t)`.
    pub action: DVector<f64>,
    /// Every agent's full primal iterate `x_i(t)`.
    pub agent_actions: Vec<DVector<f64>>,
    /// Network update `u(t)`.
    pub update: DVector<f64>,
    /// `f_t(x(t))`.
    pub cost: f64,
    pub disagreement: f64,
    pub disagreement_sq: f64,
    pub mean_field_residual: f64,
}

/// A finished run: per-round records, the comparator, and regret diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub rounds: Vec<RoundRecord>,
    /// `alpha(0..=T)`.
    pub alphas: Vec<f64>,
    /// `None` for an empty run.
    pub comparator: Option<Comparator>,
    /// `sum_{s<=t} f_s(x(s)) - f_s(y*)` against the final comparator.
    pub regret_partial: Vec<f64>,
    pub terms: Vec<RegretTerms>,
    pub regret: f64,
}

impl RegretTrace {
    pub fn empty(alphas: Vec<f64>) -> Self {
        Self {
            rounds: Vec::new(),
            alphas,
            comparator: None,
            regret_partial: Vec::new(),
            terms: Vec::new(),
            regret: 0.0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn avg_regret(&self) -> f64 {
        if self.rounds.is_empty() {
            0.0
        } else {
            self.regret / self.rounds.len() as f64
        }
    }

    /// Completes a trace from its rounds and the realized objectives.
    pub fn finalize(
        rounds: Vec<RoundRecord>,
        objectives: &[&dyn Objective],
        alphas: Vec<f64>,
        bx: &ActionBox,
        constants: &ProblemConstants,
        comparator_tol: f64,
    ) -> Result<Self> {
        if rounds.is_empty() {
            return Ok(Self::empty(alphas));
        }
        let comparator = offline_comparator(objectives, bx, comparator_tol)?;
        let mut acc = 0.0;
        let regret_partial: Vec<f64> = rounds
            .iter()
            .zip(objectives)
            .map(|(r, f)| {
                acc += r.cost - f.value(&comparator.point);
                acc
            })
            .collect();
        let agent_actions: Vec<Vec<DVector<f64>>> = rounds.iter().map(|r| r.agent_actions.clone()).collect();
        let updates: Vec<DVector<f64>> = rounds.iter().map(|r| r.update.clone()).collect();
        let terms = regret_terms(&agent_actions, &updates, objectives, &alphas, bx, constants)?;
        Ok(Self {
            regret: *regret_partial.last().expect("nonempty"),
            rounds,
            alphas,
            comparator: Some(comparator),
            regret_partial,
            terms,
        })
    }
}
