//! The dual-to-primal map `argmin_x <z, x> + psi(x) / alpha` over a box.

use nalgebra::DVector;

use crate::domain::ActionBox;
use crate::error::{Error, Result};

/// Proximal function `psi`. Only the Euclidean half-square is supported; it is
/// 1-strongly convex, nonnegative, and gives a closed-form box projection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ProximalFunction {
    #[default]
    EuclideanHalfSquare,
}

impl ProximalFunction {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            ProximalFunction::EuclideanHalfSquare => 0.5 * x.norm_squared(),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            ProximalFunction::EuclideanHalfSquare => x.clone(),
        }
    }
}

/// Closed-form minimizer for `psi = ||x||^2 / 2`: `x[k] = clamp(-alpha z[k], lo[k], hi[k])`.
pub fn project(z: &DVector<f64>, alpha: f64, bx: &ActionBox) -> Result<DVector<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("step size must be positive, got {alpha}")));
    }
    if z.len() != bx.dim() {
        return Err(Error::dim(bx.dim(), z.len(), "dual vector"));
    }
    Ok(bx.clamp(&(z * -alpha)))
}

/// `C = sup_{x in box} psi(x) = 1/2 sum_k max(lo[k]^2, hi[k]^2)`.
pub fn prox_sup(bx: &ActionBox) -> f64 {
    0.5 * bx
        .lo()
        .iter()
        .zip(bx.hi())
        .map(|(l, h)| (l * l).max(h * h))
        .sum::<f64>()
}
