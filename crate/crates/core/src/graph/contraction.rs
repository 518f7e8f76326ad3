use nalgebra::DMatrix;
use serde::Serialize;

use super::digraph::DigraphSchedule;
use crate::error::{Error, Result};

/// Geometric-decay constants for backward push-sum products:
/// `|[A(t:s)]_ij - phi_i(t)| <= beta theta^(t-s)` and `min_i [A(t:0) 1]_i >= gamma`.
///
/// `gamma` and `1 - theta` can be far below `f64::MIN_POSITIVE`, so their
/// logarithms are carried alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionConstants {
    pub beta: f64,
    pub theta: f64,
    pub gamma: f64,
    pub ln_gamma: f64,
    pub ln_one_minus_theta: f64,
}

impl ContractionConstants {
    pub fn one_minus_theta(&self) -> f64 {
        self.ln_one_minus_theta.exp()
    }
}

/// `ln(1 - (1 - x)^(1/b))` for `x = exp(ln_x)` in `(0, 1]`.
fn ln_one_minus_root(ln_x: f64, b: f64) -> f64 {
    if ln_x >= 0.0 {
        return 0.0;
    }
    if ln_x > -700.0 {
        let x = ln_x.exp();
        (-((-x).ln_1p() / b).exp_m1()).ln()
    } else {
        // x underflows; 1 - (1 - x)^(1/b) = x/b to double precision
        ln_x - b.ln()
    }
}

/// Constants for a `B`-strongly connected schedule on `n` nodes.
///
/// General graphs: `(4, (1 - n^{-nB})^{1/B}, n^{-nB})`. Regular graphs:
/// `(2 sqrt 2, (1 - 1/(4 n^3))^{1/B}, 1)`, or `(sqrt 2, sigma2_sup, 1)` when a
/// uniform bound `sigma2_sup < 1` on the second singular values is supplied.
pub fn contraction_constants(
    n: usize,
    b: usize,
    regular: bool,
    sigma2_sup: Option<f64>,
) -> Result<ContractionConstants> {
    if n == 0 || b == 0 {
        return Err(Error::Domain(format!("need n >= 1 and B >= 1, got n = {n}, B = {b}")));
    }
    let (nf, bf) = (n as f64, b as f64);
    if regular {
        if let Some(s2) = sigma2_sup {
            if !(0.0..1.0).contains(&s2) {
                return Err(Error::Domain(format!("sigma2 bound must lie in [0, 1), got {s2}")));
            }
            return Ok(ContractionConstants {
                beta: 2f64.sqrt(),
                theta: s2,
                gamma: 1.0,
                ln_gamma: 0.0,
                ln_one_minus_theta: (-s2).ln_1p(),
            });
        }
        let ln_x = -(4.0 * nf.powi(3)).ln();
        let ln_omt = ln_one_minus_root(ln_x, bf);
        return Ok(ContractionConstants {
            beta: 2.0 * 2f64.sqrt(),
            theta: ((-ln_x.exp()).ln_1p() / bf).exp(),
            gamma: 1.0,
            ln_gamma: 0.0,
            ln_one_minus_theta: ln_omt,
        });
    }
    // n^{nB} in log domain
    let ln_x = -(nf * bf) * nf.ln();
    let ln_omt = ln_one_minus_root(ln_x, bf);
    let theta = if ln_x == 0.0 { 0.0 } else { -ln_omt.exp_m1() };
    Ok(ContractionConstants {
        beta: 4.0,
        theta,
        gamma: ln_x.exp(),
        ln_gamma: ln_x,
        ln_one_minus_theta: ln_omt,
    })
}

/// Empirical check of the geometric decay of backward products toward a rank-one limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// `max |[A(t:s)]_ij - phi_i(t)| / (beta theta^(t-s))`; at most 1 certifies the bound.
    pub max_ratio: f64,
    /// `(i, j, s, t)` attaining the maximum.
    pub worst: (usize, usize, usize, usize),
    pub pairs_checked: usize,
    /// `min_{t, i} [A(t:0) 1]_i`, to compare against `gamma`.
    pub min_accumulated_weight: f64,
}

impl DecayReport {
    pub fn certified(&self) -> bool {
        self.max_ratio <= 1.0
    }
}

/// Runs backward products `A(t:s)` for `0 <= s <= t <= horizon`, estimating
/// `phi_i(t)` by the row mean of `A(t:0)`.
pub fn check_geometric_decay(
    schedule: &DigraphSchedule,
    constants: &ContractionConstants,
    horizon: usize,
) -> Result<DecayReport> {
    let n = schedule.n();
    let mut report = DecayReport {
        max_ratio: 0.0,
        worst: (0, 0, 0, 0),
        pairs_checked: 0,
        min_accumulated_weight: f64::INFINITY,
    };
    let matrices: Vec<DMatrix<f64>> = (0..=horizon)
        .map(|t| schedule.pushsum_matrix(t))
        .collect::<Result<_>>()?;
    for t in 0..=horizon {
        // products[t - s] = A(t:s)
        let mut products = Vec::with_capacity(t + 1);
        let mut prod = matrices[t].clone();
        products.push(prod.clone());
        for s in (0..t).rev() {
            prod = &prod * &matrices[s];
            products.push(prod.clone());
        }
        let full = products.last().expect("at least A(t:t)");
        let phi: Vec<f64> = (0..n).map(|i| full.row(i).sum() / n as f64).collect();
        let min_weight = (0..n).map(|i| full.row(i).sum()).fold(f64::INFINITY, f64::min);
        report.min_accumulated_weight = report.min_accumulated_weight.min(min_weight);

        for (gap, p) in products.iter().enumerate() {
            let s = t - gap;
            let envelope = constants.beta * constants.theta.powi(gap as i32);
            for i in 0..n {
                for j in 0..n {
                    let diff = (p[(i, j)] - phi[i]).abs();
                    let ratio = if diff == 0.0 {
                        0.0
                    } else if envelope == 0.0 {
                        f64::INFINITY
                    } else {
                        diff / envelope
                    };
                    if ratio > report.max_ratio {
                        report.max_ratio = ratio;
                        report.worst = (i, j, s, t);
                    }
                }
            }
            report.pairs_checked += 1;
        }
    }
    Ok(report)
}
