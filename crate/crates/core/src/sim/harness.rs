//! The round loop: act, observe, update, record.

use nalgebra::DVector;
use serde::Serialize;

use super::config::{Algorithm, Experiment};
use super::environment::Certificate;
use crate::circulation::{disagreement_sq_bound, OdaCEngine};
use crate::engine::DualAveragingEngine;
use crate::error::{Error, Result};
use crate::graph::{ContractionConstants, Topology, TopologyReport};
use crate::objective::Objective;
use crate::prox::prox_sup;
use crate::pushsum::{ratio_disagreement_sq_bound, OdaPsEngine};
use crate::regret::{
    network_regret, oda_c_bound, oda_ps_bound, offline_comparator, ProblemConstants, RegretBound, RegretTrace,
    RoundRecord,
};
use crate::step::{step_sum, StepSize};

/// Relative slack allowed when comparing measured quantities to bounds.
const BOUND_SLACK: f64 = 1e-9;
/// Largest tolerated mean-field residual and push-sum weight drift.
const EXACTNESS_TOL: f64 = 1e-8;

enum Engine {
    Circulation(OdaCEngine),
    PushSum(OdaPsEngine),
}

impl Engine {
    fn as_dyn(&mut self) -> &mut dyn DualAveragingEngine {
        match self {
            Engine::Circulation(e) => e,
            Engine::PushSum(e) => e,
        }
    }
}

/// Pass/fail of every per-round property, with the worst values seen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub actions_feasible: bool,
    /// `regret_partial(t) <= E1 + E2 + E3 + C / alpha(t)` for every `t`.
    pub decomposition_holds: bool,
    /// Per-round disagreement stays under its closed-form bound.
    pub disagreement_bound_holds: bool,
    /// Measured `R(T)` under the closed-form regret bound, when one applies.
    pub regret_bound_holds: Option<bool>,
    /// `sum alpha(t-1) <= 2 sqrt(T)` for the inverse square root rule.
    pub step_sum_holds: Option<bool>,
    pub max_mean_field_residual: f64,
    /// Push-sum only: largest `|sum_i w_i - n|`.
    pub max_weight_drift: Option<f64>,
    pub min_weight: Option<f64>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.actions_feasible
            && self.decomposition_holds
            && self.disagreement_bound_holds
            && self.regret_bound_holds != Some(false)
            && self.step_sum_holds != Some(false)
            && self.max_mean_field_residual <= EXACTNESS_TOL
            && self.max_weight_drift.is_none_or(|d| d <= EXACTNESS_TOL)
    }
}

pub struct RunResult {
    pub algorithm: Algorithm,
    pub trace: RegretTrace,
    pub objectives: Vec<Box<dyn Objective>>,
    pub certificate: Certificate,
    pub constants: ProblemConstants,
    /// Per-round bound on the squared disagreement.
    pub disagreement_bound: f64,
    /// Closed-form regret bound; only for the inverse square root rule.
    pub regret_bound: Option<RegretBound>,
    pub invariants: InvariantReport,
}

impl RunResult {
    pub fn theory_bound(&self) -> Option<f64> {
        self.regret_bound.map(|b| b.at(self.trace.horizon()))
    }
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound + BOUND_SLACK * bound.abs().max(1.0)
}

type BoundFn = Box<dyn Fn(&ProblemConstants) -> Result<RegretBound>>;

struct Mixing {
    disagreement_bound: Box<dyn Fn(f64) -> f64>,
    regret_bound: BoundFn,
}

fn mixing(topology: &Topology, report: &TopologyReport) -> Result<Mixing> {
    match topology {
        Topology::Static { pair, .. } => {
            let (n, r_star) = (pair.n(), pair.r_star());
            let gap = report
                .spectral_gap
                .ok_or_else(|| Error::Domain("spectral gap unavailable".into()))?;
            Ok(Mixing {
                disagreement_bound: Box::new(move |l| disagreement_sq_bound(n, l, r_star, gap)),
                regret_bound: Box::new(move |c| oda_c_bound(c, r_star, gap)),
            })
        }
        Topology::Schedule(s) => {
            let n = s.n();
            let k: ContractionConstants = report
                .constants
                .ok_or_else(|| Error::Domain("contraction constants unavailable".into()))?;
            Ok(Mixing {
                disagreement_bound: Box::new(move |l| ratio_disagreement_sq_bound(n, l, &k)),
                regret_bound: Box::new(move |c| Ok(oda_ps_bound(c, &k))),
            })
        }
    }
}

/// Runs `T` rounds. The engines start from zero duals; a zero update is
/// applied at instant 0 so that round `t` acts on `x(t) = project(z(t), alpha(t-1))`.
pub fn run(exp: &Experiment) -> Result<RunResult> {
    let config = &exp.config;
    let report = exp.validate(1e-9);
    if !report.passed() {
        return Err(Error::Validation(report.checks));
    }
    let horizon = config.horizon;
    let alphas = config.alpha.schedule(horizon)?;
    let (bx, blocks) = (&exp.bx, &exp.blocks);

    let mut engine = match (&exp.topology, config.algorithm) {
        (Topology::Static { pair, .. }, Algorithm::OdaC) => {
            Engine::Circulation(OdaCEngine::new(pair.clone(), bx.clone(), blocks.clone(), alphas[0])?)
        }
        (Topology::Schedule(s), Algorithm::OdaPs) => {
            if !s.covers(horizon.saturating_sub(1)) {
                return Err(Error::Config(format!(
                    "explicit schedule has {} graphs but the run needs {horizon}",
                    s.len()
                )));
            }
            Engine::PushSum(OdaPsEngine::new(s.clone(), bx.clone(), blocks.clone(), alphas[0])?)
        }
        (Topology::Static { .. }, Algorithm::OdaPs) => {
            return Err(Error::Config(
                "oda-ps needs a graph schedule (mode \"schedule\")".into(),
            ))
        }
        (Topology::Schedule(_), Algorithm::OdaC) => {
            return Err(Error::Config("oda-c needs a static graph (mode \"static\")".into()))
        }
    };
    let mut env = exp.environment()?;
    if env.dim() != bx.dim() {
        return Err(Error::dim(bx.dim(), env.dim(), "environment dimension"));
    }

    let mut rounds = Vec::with_capacity(horizon);
    let mut objectives: Vec<Box<dyn Objective>> = Vec::with_capacity(horizon);
    if horizon > 0 {
        engine.as_dyn().step(&DVector::zeros(bx.dim()), alphas[0])?;
    }
    #[allow(clippy::needless_range_loop)]
    for t in 1..=horizon {
        let e = engine.as_dyn();
        let action = e.network_action()?;
        let f = env.next_objective(t, &action)?;
        let u = e.local_updates(f.as_ref())?;
        rounds.push(RoundRecord {
            t,
            cost: f.value(&action.x),
            agent_actions: e.states().iter().map(|s| s.x.clone()).collect(),
            action: action.x,
            update: u.clone(),
            disagreement: e.disagreement(),
            disagreement_sq: e.disagreement_sq(),
            mean_field_residual: e.current_mean_field_residual(),
        });
        objectives.push(f);
        if t < horizon {
            e.step(&u, alphas[t])?;
        }
    }

    let certificate = env.certificate(bx)?;
    let constants = ProblemConstants {
        n: blocks.agents(),
        p: bx.dim(),
        lipschitz: certificate.lipschitz,
        smoothness: certificate.smoothness,
        diameter: bx.diameter(),
        prox_sup: prox_sup(bx),
    };
    let refs: Vec<&dyn Objective> = objectives.iter().map(|f| f.as_ref()).collect();
    let tol = comparator_tol(&constants, horizon);
    let trace = RegretTrace::finalize(rounds, &refs, alphas, bx, &constants, tol)?;

    let mix = mixing(&exp.topology, &report)?;
    let disagreement_bound = (mix.disagreement_bound)(certificate.lipschitz);
    let inv_sqrt = config.alpha == StepSize::inv_sqrt();
    let regret_bound = if inv_sqrt {
        Some((mix.regret_bound)(&constants)?)
    } else {
        None
    };

    let (max_weight_drift, min_weight) = match &engine {
        Engine::PushSum(e) => (Some(e.max_weight_drift()), Some(e.min_weight())),
        Engine::Circulation(_) => (None, None),
    };
    let invariants = InvariantReport {
        actions_feasible: trace.rounds.iter().all(|r| bx.contains(&r.action, 0.0)),
        decomposition_holds: trace
            .regret_partial
            .iter()
            .zip(&trace.terms)
            .all(|(r, terms)| within(*r, terms.bound())),
        disagreement_bound_holds: trace
            .rounds
            .iter()
            .all(|r| within(r.disagreement_sq, disagreement_bound)),
        regret_bound_holds: regret_bound.map(|b| within(trace.regret, b.at(horizon))),
        step_sum_holds: inv_sqrt.then(|| step_sum(&trace.alphas, horizon) <= 2.0 * (horizon as f64).sqrt()),
        max_mean_field_residual: trace.rounds.iter().map(|r| r.mean_field_residual).fold(0.0, f64::max),
        max_weight_drift,
        min_weight,
    };

    Ok(RunResult {
        algorithm: config.algorithm,
        trace,
        objectives,
        certificate,
        constants,
        disagreement_bound,
        regret_bound,
        invariants,
    })
}

fn comparator_tol(c: &ProblemConstants, horizon: usize) -> f64 {
    1e-9 * (c.smoothness * horizon as f64).max(1.0)
}

/// One row of a horizon sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub regret: f64,
    pub avg_regret: f64,
    pub theory_bound: Option<f64>,
}

/// Fresh run per horizon (in parallel), or with `cumulative` a single run at
/// the largest horizon whose prefixes are scored against their own comparators.
pub fn sweep(exp: &Experiment, horizons: &[usize], cumulative: bool) -> Result<Vec<SweepRow>> {
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "horizons must be strictly ascending, got {horizons:?}"
        )));
    }
    let Some(&last) = horizons.last() else {
        return Ok(Vec::new());
    };
    if cumulative {
        return cumulative_sweep(exp, horizons, last);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = horizons
            .iter()
            .map(|&t| {
                let e = exp.with_horizon(t);
                scope.spawn(move || {
                    run(&e).map(|r| SweepRow {
                        horizon: t,
                        regret: r.trace.regret,
                        avg_regret: r.trace.avg_regret(),
                        theory_bound: r.theory_bound(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Invariant("sweep worker panicked".into())))
            })
            .collect()
    })
}

fn cumulative_sweep(exp: &Experiment, horizons: &[usize], last: usize) -> Result<Vec<SweepRow>> {
    let result = run(&exp.with_horizon(last))?;
    let refs: Vec<&dyn Objective> = result.objectives.iter().map(|f| f.as_ref()).collect();
    let actions: Vec<DVector<f64>> = result.trace.rounds.iter().map(|r| r.action.clone()).collect();
    horizons
        .iter()
        .map(|&t| {
            let regret = if t == 0 {
                0.0
            } else {
                let tol = comparator_tol(&result.constants, t);
                let c = offline_comparator(&refs[..t], &exp.bx, tol)?;
                network_regret(&actions[..t], &refs[..t], &c.point)?
            };
            Ok(SweepRow {
                horizon: t,
                regret,
                avg_regret: if t == 0 { 0.0 } else { regret / t as f64 },
                theory_bound: result.regret_bound.map(|b| b.at(t)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regret::centralized_reference;
    use crate::sim::config::RunConfig;
    use std::path::Path;

    fn experiment(text: &str) -> Experiment {
        RunConfig::from_json(text).unwrap().resolve(Path::new(".")).unwrap()
    }

    fn cycle(horizon: usize, algorithm: &str, graph: &str) -> Experiment {
        experiment(&format!(
            r#"{{"algorithm": "{algorithm}", "graph": {graph}, "box": [-20, 20], "T": {horizon}, "seed": 42,
                "environment": {{"type": "sensing"}}}}"#
        ))
    }

    const CYCLE: &str = r#"{"n": 5, "mode": "static", "edges": [[0,1],[1,2],[2,3],[3,4],[4,0]]}"#;
    const SCHEDULE: &str = r#"{"n": 5, "mode": "schedule", "B": 3,
        "graphs": [[[0,1],[1,2],[2,1]], [[2,3],[3,4],[4,3]], [[4,0],[0,4]]]}"#;

    #[test]
    fn empty_run() {
        let r = run(&cycle(0, "oda-c", CYCLE)).unwrap();
        assert_eq!(r.trace.horizon(), 0);
        assert_eq!(r.trace.regret, 0.0);
        assert!(r.invariants.passed());
    }

    #[test]
    fn single_agent_follows_centralized_recursion() {
        let exp = experiment(
            r#"{"algorithm": "oda-c", "graph": {"n": 1, "mode": "static", "edges": []},
                "box": [-20, 20], "T": 200,
                "environment": {"type": "fixed", "objectives": [{"A": [[1]], "q": [3]}]}}"#,
        );
        let r = run(&exp).unwrap();
        // prepend the zero update of instant 0
        let updates: Vec<_> = std::iter::once(DVector::zeros(1))
            .chain(r.trace.rounds.iter().map(|x| x.update.clone()))
            .collect();
        let reference = centralized_reference(&updates, &r.trace.alphas, &exp.bx).unwrap();
        for round in &r.trace.rounds {
            assert_eq!(round.action, reference[round.t]);
        }
        assert!(r.trace.avg_regret() < 0.05);
        assert!(r.invariants.passed(), "{:?}", r.invariants);
    }

    #[test]
    fn zero_objectives_give_zero_regret() {
        let exp = experiment(
            r#"{"algorithm": "oda-ps", "graph": {"n": 2, "mode": "schedule", "graphs": [[[0,1],[1,0]]]},
                "box": [-20, 20], "T": 50,
                "environment": {"type": "fixed", "objectives": [{"A": [[0,0],[0,0]], "q": [0,0]}]}}"#,
        );
        for rows in [
            sweep(&exp, &[5, 10, 50], false).unwrap(),
            sweep(&exp, &[5, 10, 50], true).unwrap(),
        ] {
            assert!(rows.iter().all(|r| r.regret == 0.0));
        }
    }

    #[test]
    fn circulation_run_respects_every_bound() {
        let r = run(&cycle(200, "oda-c", CYCLE)).unwrap();
        assert!(r.invariants.passed(), "{:?}", r.invariants);
        assert_eq!(r.trace.horizon(), 200);
    }

    #[test]
    fn push_sum_run_respects_every_bound() {
        let r = run(&cycle(200, "oda-ps", SCHEDULE)).unwrap();
        assert!(r.invariants.passed(), "{:?}", r.invariants);
        assert!(r.invariants.max_weight_drift.unwrap() <= 1e-9);
    }

    #[test]
    fn single_horizon_sweep_equals_run() {
        let exp = cycle(30, "oda-c", CYCLE);
        let rows = sweep(&exp, &[30], false).unwrap();
        let r = run(&exp).unwrap();
        assert_eq!(rows[0].regret, r.trace.regret);
        assert_eq!(rows[0].theory_bound, r.theory_bound());
    }

    #[test]
    fn runs_are_reproducible() {
        let exp = cycle(50, "oda-ps", SCHEDULE);
        let (a, b) = (run(&exp).unwrap(), run(&exp).unwrap());
        assert_eq!(a.trace, b.trace);
        let c = run(&exp.with_seed(43)).unwrap();
        assert_ne!(a.trace.regret, c.trace.regret);
    }

    #[test]
    fn mismatched_algorithm_and_graph() {
        assert!(matches!(run(&cycle(5, "oda-ps", CYCLE)), Err(Error::Config(_))));
        assert!(matches!(run(&cycle(5, "oda-c", SCHEDULE)), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_weights_abort_before_running() {
        let graph = r#"{"n": 2, "mode": "static", "edges": [[0,1]], "r": [0.5, 0.5], "M": [[0.5, 0.4], [0.5, 0.5]]}"#;
        match run(&cycle(5, "oda-c", graph)) {
            Err(Error::Validation(report)) => assert!(report.failures().any(|c| c.name == "row stochastic")),
            other => panic!("expected a validation error, got {:?}", other.map(|r| r.trace.regret)),
        }
    }

    #[test]
    fn descending_horizons_rejected() {
        assert!(sweep(&cycle(5, "oda-c", CYCLE), &[10, 5], false).is_err());
        assert!(sweep(&cycle(5, "oda-c", CYCLE), &[], false).unwrap().is_empty());
    }
}
