//! Communication structures: reversible weight pairs on undirected graphs and
//! time-varying digraph schedules with their push-sum matrices.

mod contraction;
mod digraph;
mod file;
mod report;
mod undirected;

use std::fmt;

use serde::Serialize;

pub use contraction::{check_geometric_decay, contraction_constants, ContractionConstants, DecayReport};
pub use digraph::{backward_product, validate_b_strong, DigraphSchedule, Edge};
pub use file::{GraphMode, GraphSpec, Topology};
pub use report::{validate_topology, TopologyReport};
pub use undirected::{spectral_gap, validate_reversible_pair, ReversiblePair, UndirectedGraph};

/// One checked condition of a validation pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub max_violation: f64,
    pub detail: String,
}

/// Outcome of a validation pass. Violations are collected, never thrown.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub(crate) fn push(&mut self, name: &'static str, passed: bool, max_violation: f64, detail: impl Into<String>) {
        self.checks.push(ConditionCheck {
            name,
            passed,
            max_violation,
            detail: detail.into(),
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {}: max violation {:.3e}{}{}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.max_violation,
                if c.detail.is_empty() { "" } else { "; " },
                c.detail
            )?;
        }
        Ok(())
    }
}
