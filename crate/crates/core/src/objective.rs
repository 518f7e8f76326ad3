//! Smooth convex objectives, the quadratic sensing loss, and Lipschitz certificates.

use nalgebra::{DMatrix, DVector};

use crate::domain::ActionBox;
use crate::error::{Error, Result};

/// A differentiable convex function on `R^p`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Exact quadratic representation, when the objective has one.
    fn quadratic_form(&self) -> Option<QuadraticForm> {
        None
    }
}

/// `f(x) = 1/2 ||A x - q||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    pub a: DMatrix<f64>,
    pub q: DVector<f64>,
}

impl QuadraticLoss {
    pub fn new(a: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        if a.nrows() != q.len() {
            return Err(Error::dim(a.nrows(), q.len(), "measurement vector"));
        }
        Ok(Self { a, q })
    }

    /// `1/2 ||x - target||^2`.
    pub fn centered(target: DVector<f64>) -> Self {
        let p = target.len();
        Self {
            a: DMatrix::identity(p, p),
            q: target,
        }
    }

    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.q
    }
}

impl Objective for QuadraticLoss {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&self.residual(x))
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        Some(QuadraticForm {
            hessian: self.a.tr_mul(&self.a),
            linear: self.a.tr_mul(&self.q),
            constant: 0.5 * self.q.norm_squared(),
        })
    }
}

/// `f(x) = 1/2 x' H x - b' x + c` with `H` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn zero(p: usize) -> Self {
        Self {
            hessian: DMatrix::zeros(p, p),
            linear: DVector::zeros(p),
            constant: 0.0,
        }
    }

    pub fn add(&mut self, other: &QuadraticForm) {
        self.hessian += &other.hessian;
        self.linear += &other.linear;
        self.constant += other.constant;
    }
}

impl Objective for QuadraticForm {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) - self.linear.dot(x) + self.constant
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * x - &self.linear
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        Some(self.clone())
    }
}

/// Pointwise sum of objectives; collapses to one quadratic form when every term has one.
pub struct SumObjective<'a> {
    terms: Vec<&'a dyn Objective>,
    collapsed: Option<QuadraticForm>,
}

impl<'a> SumObjective<'a> {
    pub fn new(terms: Vec<&'a dyn Objective>) -> Self {
        let collapsed = terms.first().and_then(|first| {
            let mut acc = QuadraticForm::zero(first.dim());
            for t in &terms {
                acc.add(&t.quadratic_form()?);
            }
            Some(acc)
        });
        Self { terms, collapsed }
    }
}

impl Objective for SumObjective<'_> {
    fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.dim())
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.collapsed {
            Some(q) => q.value(x),
            None => self.terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.collapsed {
            Some(q) => q.gradient(x),
            None => self
                .terms
                .iter()
                .fold(DVector::zeros(self.dim()), |acc, t| acc + t.gradient(x)),
        }
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        self.collapsed.clone()
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
pub fn power_iteration(h: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let p = h.nrows();
    if p == 0 || h.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    // Several fixed starts guard against one being orthogonal to the top eigenvector.
    let starts = [
        DVector::from_fn(p, |k, _| 1.0 + 0.1 * k as f64),
        DVector::from_fn(p, |k, _| if k % 2 == 0 { 1.0 } else { -0.7 }),
        DVector::from_fn(p, |k, _| ((k * 37 + 11) % 17) as f64 - 8.3),
    ];
    starts
        .into_iter()
        .map(|mut v| {
            v.normalize_mut();
            let mut estimate = v.dot(&(h * &v));
            for _ in 0..max_iter {
                let hv = h * &v;
                let norm = hv.norm();
                if norm == 0.0 {
                    return 0.0;
                }
                v = hv / norm;
                let next = v.dot(&(h * &v));
                let done = (next - estimate).abs() <= tol * next.abs().max(1.0);
                estimate = next;
                if done {
                    break;
                }
            }
            estimate
        })
        .fold(0.0, f64::max)
}

/// Certified constants `(L, G)` for the family `x -> 1/2 ||A x - q||^2` with
/// `||q|| <= q_radius`, over `box`.
///
/// `G` is the largest eigenvalue of `A'A`; `L = ||A|| (||A|| rho(box) + q_radius)`
/// where `rho(box)` is the largest norm of a point in the box. `L` is an upper
/// bound on `sup ||grad f||`, not the supremum itself.
pub fn lipschitz_constants(a: &DMatrix<f64>, q_radius: f64, bx: &ActionBox) -> Result<(f64, f64)> {
    if !q_radius.is_finite() || q_radius < 0.0 {
        return Err(Error::Domain(format!(
            "measurement set radius must be finite, got {q_radius}"
        )));
    }
    if a.ncols() != bx.dim() {
        return Err(Error::dim(bx.dim(), a.ncols(), "sensing matrix columns"));
    }
    let g = power_iteration(&a.tr_mul(a), 1e-9, 100_000);
    let norm_a = g.sqrt();
    Ok((norm_a * (norm_a * bx.radius() + q_radius), g))
}

/// Largest deviation of central finite differences from the analytic gradient,
/// relative to `max(|grad_k|, 1)`. The step shrinks to stay inside the box.
pub fn finite_diff_check(obj: &dyn Objective, x: &DVector<f64>, h: f64, bx: &ActionBox) -> Result<f64> {
    if x.len() != obj.dim() || x.len() != bx.dim() {
        return Err(Error::dim(obj.dim(), x.len(), "finite-difference point"));
    }
    let margin = x
        .iter()
        .zip(bx.lo().iter().zip(bx.hi()))
        .map(|(v, (l, u))| (v - l).min(u - v))
        .fold(f64::INFINITY, f64::min);
    if !(margin > 0.0) {
        return Err(Error::Domain(
            "finite-difference point is not interior to the box".into(),
        ));
    }
    let h = if margin > h { h } else { 0.5 * margin };
    let grad = obj.gradient(x);
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[k] += h;
        minus[k] -= h;
        let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / grad[k].abs().max(1.0));
    }
    Ok(worst)
}
