//! Objective sequences: a fixed cycle of quadratics and the adaptive sensing model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::noise::{noise_rng, GaussianSampler, NoiseRng};
use crate::domain::{ActionBox, NetworkAction};
use crate::error::{Error, Result};
use crate::objective::{lipschitz_constants, Objective, QuadraticLoss};

/// Gradient-norm and smoothness bounds valid over the box for every objective emitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub lipschitz: f64,
    pub smoothness: f64,
}

pub trait Environment: Send {
    fn dim(&self) -> usize;

    /// Objective of round `t`, chosen after the network action `x(t)` is fixed.
    fn next_objective(&mut self, t: usize, action: &NetworkAction) -> Result<Box<dyn Objective>>;

    /// Certificate covering every objective emitted so far.
    fn certificate(&self, bx: &ActionBox) -> Result<Certificate>;
}

/// What the sensors observe in round `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// `q_t = A target + noise`: noisy readings of a fixed unknown point.
    #[default]
    Target,
    /// `q_t = A x(t) + noise`: readings of the network's own action.
    Action,
}

/// `f_t(x) = 1/2 ||A x - q_t||^2` with Gaussian measurement noise.
#[derive(Debug, Clone)]
pub struct SensingEnvironment {
    a: DMatrix<f64>,
    target: DVector<f64>,
    measure: Measure,
    sampler: GaussianSampler,
    rng: NoiseRng,
    max_q_norm: f64,
}

impl SensingEnvironment {
    pub fn new(
        a: DMatrix<f64>,
        noise_cov: &DMatrix<f64>,
        target: DVector<f64>,
        measure: Measure,
        noise_seed: u64,
    ) -> Result<Self> {
        let sampler = GaussianSampler::new(noise_cov)?;
        if sampler.dim() != a.nrows() {
            return Err(Error::dim(a.nrows(), sampler.dim(), "noise covariance"));
        }
        if target.len() != a.ncols() {
            return Err(Error::dim(a.ncols(), target.len(), "sensing target"));
        }
        Ok(Self {
            a,
            target,
            measure,
            sampler,
            rng: noise_rng(noise_seed),
            max_q_norm: 0.0,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }
}

impl Environment for SensingEnvironment {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn next_objective(&mut self, _t: usize, action: &NetworkAction) -> Result<Box<dyn Objective>> {
        let point = match self.measure {
            Measure::Target => &self.target,
            Measure::Action => &action.x,
        };
        if point.len() != self.a.ncols() {
            return Err(Error::dim(self.a.ncols(), point.len(), "network action"));
        }
        let q = &self.a * point + self.sampler.sample(&mut self.rng);
        self.max_q_norm = self.max_q_norm.max(q.norm());
        Ok(Box::new(QuadraticLoss::new(self.a.clone(), q)?))
    }

    fn certificate(&self, bx: &ActionBox) -> Result<Certificate> {
        let (lipschitz, smoothness) = lipschitz_constants(&self.a, self.max_q_norm, bx)?;
        Ok(Certificate { lipschitz, smoothness })
    }
}

/// Cycles through a fixed list: `f_t = objectives[(t - 1) mod len]`.
#[derive(Debug, Clone)]
pub struct FixedEnvironment {
    objectives: Vec<QuadraticLoss>,
}

impl FixedEnvironment {
    pub fn new(objectives: Vec<QuadraticLoss>) -> Result<Self> {
        let first = objectives
            .first()
            .ok_or_else(|| Error::Config("fixed environment needs at least one objective".into()))?;
        let p = first.dim();
        if let Some(f) = objectives.iter().find(|f| f.dim() != p) {
            return Err(Error::dim(p, f.dim(), "fixed objective"));
        }
        Ok(Self { objectives })
    }
}

impl Environment for FixedEnvironment {
    fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    fn next_objective(&mut self, t: usize, _action: &NetworkAction) -> Result<Box<dyn Objective>> {
        let k = (t.max(1) - 1) % self.objectives.len();
        Ok(Box::new(self.objectives[k].clone()))
    }

    fn certificate(&self, bx: &ActionBox) -> Result<Certificate> {
        let mut cert = Certificate {
            lipschitz: 0.0,
            smoothness: 0.0,
        };
        for f in &self.objectives {
            let (l, g) = lipschitz_constants(&f.a, f.q.norm(), bx)?;
            cert.lipschitz = cert.lipschitz.max(l);
            cert.smoothness = cert.smoothness.max(g);
        }
        Ok(cert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn action(x: &[f64]) -> NetworkAction {
        NetworkAction {
            x: DVector::from_row_slice(x),
            round: 1,
        }
    }

    #[test]
    fn noiseless_target_readings() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let target = DVector::from_row_slice(&[2.0, -1.0]);
        let mut env =
            SensingEnvironment::new(a.clone(), &DMatrix::zeros(2, 2), target.clone(), Measure::Target, 0).unwrap();
        let f = env.next_objective(1, &action(&[5.0, 5.0])).unwrap();
        assert_eq!(f.value(&target), 0.0);
        assert_eq!(f.gradient(&target), DVector::zeros(2));
    }

    #[test]
    fn action_readings_see_the_current_action() {
        let a = DMatrix::identity(2, 2);
        let mut env = SensingEnvironment::new(a, &DMatrix::zeros(2, 2), DVector::zeros(2), Measure::Action, 0).unwrap();
        let x = action(&[3.0, -4.0]);
        let f = env.next_objective(1, &x).unwrap();
        assert_eq!(f.value(&x.x), 0.0);
    }

    #[test]
    fn certificate_bounds_realized_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { rng.random_range(-0.1..0.1) });
        let bx = ActionBox::uniform(3, -20.0, 20.0).unwrap();
        let cov = DMatrix::identity(3, 3) * 0.25;
        let target = DVector::from_row_slice(&[1.0, -5.0, 8.0]);
        let mut env = SensingEnvironment::new(a, &cov, target, Measure::Target, 11).unwrap();
        let fs: Vec<_> = (1..=200)
            .map(|t| env.next_objective(t, &action(&[0.0; 3])).unwrap())
            .collect();
        let cert = env.certificate(&bx).unwrap();
        for f in &fs {
            for _ in 0..10 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-20.0..20.0));
                assert!(f.gradient(&x).norm() <= cert.lipschitz);
            }
            for corner in 0..8 {
                let x = DVector::from_fn(3, |k, _| if corner >> k & 1 == 1 { 20.0 } else { -20.0 });
                assert!(f.gradient(&x).norm() <= cert.lipschitz);
            }
        }
    }

    #[test]
    fn fixed_environment_cycles() {
        let f1 = QuadraticLoss::centered(DVector::from_row_slice(&[1.0]));
        let f2 = QuadraticLoss::centered(DVector::from_row_slice(&[3.0]));
        let mut env = FixedEnvironment::new(vec![f1, f2]).unwrap();
        let x = action(&[0.0]);
        let vals: Vec<f64> = (1..=4)
            .map(|t| env.next_objective(t, &x).unwrap().value(&x.x))
            .collect();
        assert_eq!(vals, vec![0.5, 4.5, 0.5, 4.5]);
        let bx = ActionBox::uniform(1, -20.0, 20.0).unwrap();
        let cert = env.certificate(&bx).unwrap();
        assert_eq!(
            cert,
            Certificate {
                lipschitz: 23.0,
                smoothness: 1.0
            }
        );
        assert!(FixedEnvironment::new(vec![]).is_err());
    }
}
