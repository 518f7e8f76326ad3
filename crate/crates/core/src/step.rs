//! Step-size schedules `alpha(0), alpha(1), ...`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    /// `{"rule": "inv-sqrt"}`: `alpha(t) = 1 / sqrt(t + 1)`.
    Rule { rule: StepRule },
    /// `{"values": [...]}`: explicit values, indexed from `t = 0`.
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    #[serde(rename = "inv-sqrt")]
    InvSqrt,
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Rule {
            rule: StepRule::InvSqrt,
        }
    }
}

impl StepSize {
    pub fn inv_sqrt() -> Self {
        Self::default()
    }

    /// `alpha(0..=horizon)`, checked positive, finite and nonincreasing.
    pub fn schedule(&self, horizon: usize) -> Result<Vec<f64>> {
        let alphas: Vec<f64> = match self {
            StepSize::Rule {
                rule: StepRule::InvSqrt,
            } => (0..=horizon).map(|t| 1.0 / ((t + 1) as f64).sqrt()).collect(),
            StepSize::Values { values } => {
                if values.len() < horizon + 1 {
                    return Err(Error::Config(format!(
                        "need {} step sizes for horizon {horizon}, got {}",
                        horizon + 1,
                        values.len()
                    )));
                }
                values[..=horizon].to_vec()
            }
        };
        if let Some(t) = alphas.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Config(format!(
                "step size alpha({t}) = {} is not positive",
                alphas[t]
            )));
        }
        if let Some(t) = alphas.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::Config(format!(
                "step sizes must be nonincreasing: alpha({}) = {} > alpha({t}) = {}",
                t + 1,
                alphas[t + 1],
                alphas[t]
            )));
        }
        Ok(alphas)
    }
}

/// `sum_{t=1..T} alpha(t-1)`; at most `2 sqrt(T)` for the inverse square root rule.
pub fn step_sum(alphas: &[f64], horizon: usize) -> f64 {
    alphas[..horizon].iter().sum()
}
