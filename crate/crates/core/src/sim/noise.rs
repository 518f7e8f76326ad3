//! Seeded Gaussian noise. Standard normals come from the Marsaglia polar method
//! driven by `ChaCha8Rng`, so streams are identical on every platform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The generator behind every seeded stream. Its identity is part of the
/// reproducibility contract: changing it changes every trace.
pub type NoiseRng = ChaCha8Rng;

pub fn noise_rng(seed: u64) -> NoiseRng {
    NoiseRng::seed_from_u64(seed)
}

/// Standard normal generator; keeps the second value of each polar pair.
#[derive(Debug, Clone, Default)]
pub struct PolarNormal {
    spare: Option<f64>,
}

impl PolarNormal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample(&mut self, rng: &mut impl Rng) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        loop {
            let u: f64 = rng.random_range(-1.0..1.0);
            let v: f64 = rng.random_range(-1.0..1.0);
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * scale);
                return u * scale;
            }
        }
    }
}

/// Symmetric square root `S` with `S S' = cov`. Eigenvalues within round-off
/// of zero are clamped; clearly negative ones are a configuration error.
pub fn covariance_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::Config(format!(
            "noise covariance must be square, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("noise covariance has non-finite entries".into()));
    }
    let asym = (cov - cov.transpose()).amax();
    let scale = cov.amax().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::Config(format!(
            "noise covariance is not symmetric (deviation {asym:.3e})"
        )));
    }
    let eig = SymmetricEigen::new((cov + cov.transpose()) * 0.5);
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::Config(format!(
            "noise covariance is not positive semidefinite (eigenvalue {min:.3e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Draws `N(0, S S')` given the factor `S`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
    normal: PolarNormal,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            factor: covariance_sqrt(cov)?,
            normal: PolarNormal::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample(&mut self, rng: &mut impl Rng) -> DVector<f64> {
        let m = self.dim();
        let xi = DVector::from_fn(m, |_, _| self.normal.sample(rng));
        &self.factor * xi
    }
}

/// One draw of `N(0, cov)`.
pub fn gaussian_noise(rng: &mut impl Rng, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(GaussianSampler::new(cov)?.sample(rng))
}
