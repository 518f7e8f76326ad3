use serde::Serialize;

use super::{
    contraction_constants, spectral_gap, validate_b_strong, validate_reversible_pair, ContractionConstants,
    DigraphSchedule, Topology, ValidationReport,
};

/// Everything a user needs to know before running on a topology.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub kind: &'static str,
    pub n: usize,
    #[serde(flatten)]
    pub checks: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smallest_b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ContractionConstants>,
}

impl TopologyReport {
    pub fn passed(&self) -> bool {
        self.checks.passed()
    }
}

fn is_regular(schedule: &DigraphSchedule) -> Option<usize> {
    let n = schedule.n();
    schedule.graphs().iter().position(|edges| {
        let mut outd = vec![0usize; n];
        let mut ind = vec![0usize; n];
        for &(j, i) in edges {
            outd[j] += 1;
            ind[i] += 1;
        }
        outd.iter().chain(&ind).any(|&d| d != outd[0])
    })
}

/// Validates a topology and derives its mixing constants. Static graphs report
/// the spectral gap; schedules report the smallest connectivity window and
/// contraction constants (for the claimed window when one is given).
pub fn validate_topology(topology: &Topology, regular: bool, sigma2: Option<f64>, tol: f64) -> TopologyReport {
    match topology {
        Topology::Static { graph, pair } => {
            let mut checks = validate_reversible_pair(graph, pair, tol);
            let gap = if checks.passed() { spectral_gap(pair).ok() } else { None };
            if let Some(g) = gap {
                checks.push(
                    "spectral gap positive",
                    g > tol,
                    (-g).max(0.0),
                    format!("lambda = {g:.9}"),
                );
            }
            TopologyReport {
                kind: "static",
                n: graph.n(),
                checks,
                spectral_gap: gap,
                r_star: Some(pair.r_star()),
                smallest_b: None,
                constants: None,
            }
        }
        Topology::Schedule(schedule) => {
            let mut checks = ValidationReport::default();
            let smallest = validate_b_strong(schedule, schedule.len());
            checks.push(
                "B-strongly connected",
                smallest.is_some(),
                if smallest.is_some() { 0.0 } else { 1.0 },
                match smallest {
                    Some(b) => format!("smallest window B = {b}"),
                    None => format!("no window of at most {} instants is strongly connected", schedule.len()),
                },
            );
            if let Some(claimed) = schedule.claimed_b() {
                let ok = smallest.is_some_and(|b| b <= claimed);
                checks.push(
                    "claimed B",
                    ok,
                    if ok { 0.0 } else { 1.0 },
                    format!("claimed B = {claimed}"),
                );
            }
            if regular {
                let bad = is_regular(schedule);
                checks.push(
                    "regular",
                    bad.is_none(),
                    if bad.is_none() { 0.0 } else { 1.0 },
                    bad.map(|t| format!("graph {t} has unequal degrees"))
                        .unwrap_or_default(),
                );
            }
            let b = schedule.claimed_b().or(smallest);
            let constants = match b {
                Some(b) if checks.passed() => match contraction_constants(schedule.n(), b, regular, sigma2) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        checks.push("contraction constants", false, 1.0, e.to_string());
                        None
                    }
                },
                _ => None,
            };
            TopologyReport {
                kind: "schedule",
                n: schedule.n(),
                checks,
                spectral_gap: None,
                r_star: None,
                smallest_b: smallest,
                constants,
            }
        }
    }
}
