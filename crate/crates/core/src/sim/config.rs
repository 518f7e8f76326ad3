//! JSON experiment configuration and its resolution into runnable parts.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::environment::{Environment, FixedEnvironment, Measure, SensingEnvironment};
use super::noise::noise_rng;
use crate::domain::{ActionBox, BlockMap};
use crate::error::{Error, Result};
use crate::graph::{validate_topology, GraphSpec, Topology, TopologyReport};
use crate::objective::QuadraticLoss;
use crate::presets;
use crate::step::StepSize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "oda-c")]
    OdaC,
    #[serde(rename = "oda-ps")]
    OdaPs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphRef {
    /// Path to a graph file, relative to the config file.
    File(PathBuf),
    Inline(GraphSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    /// The same interval for every coordinate.
    Uniform([f64; 2]),
    PerCoordinate {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Sensing {
        #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
        a: Option<Vec<Vec<f64>>>,
        #[serde(default, rename = "P", skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Vec<f64>>,
        #[serde(default)]
        measure: Measure,
    },
    Fixed {
        objectives: Vec<QuadraticSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub graph: GraphRef,
    #[serde(rename = "box")]
    pub bounds: BoxSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha: StepSize,
    pub environment: EnvironmentSpec,
}

/// Seed of the noise stream for a run of length `horizon`.
pub fn derive_seed(seed: u64, horizon: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (horizon as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!(
            "\"{name}\" must be a nonempty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// A config with its graph loaded, ready to validate and run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub graph: GraphSpec,
    pub topology: Topology,
    pub bx: ActionBox,
    pub blocks: BlockMap,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = crate::error::read_file(path)?;
        let config = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    /// Loads the graph (relative paths against `base_dir`) and builds the box and blocks.
    pub fn resolve(&self, base_dir: &Path) -> Result<Experiment> {
        let graph = match &self.graph {
            GraphRef::Inline(spec) => spec.clone(),
            GraphRef::File(p) => GraphSpec::load(&base_dir.join(p))?,
        };
        let topology = graph.build()?;
        let n = topology.n();
        let blocks = match &self.blocks {
            Some(b) => BlockMap::new(b.clone())?,
            None => BlockMap::scalar(n),
        };
        if blocks.agents() != n {
            return Err(Error::Config(format!(
                "blocks list {} agents but the graph has {n}",
                blocks.agents()
            )));
        }
        let p = blocks.coords();
        let bx = match &self.bounds {
            BoxSpec::Uniform([lo, hi]) => ActionBox::uniform(p, *lo, *hi)?,
            BoxSpec::PerCoordinate { lo, hi } => ActionBox::new(lo.clone(), hi.clone())?,
        };
        if bx.dim() != p {
            return Err(Error::dim(p, bx.dim(), "box"));
        }
        Ok(Experiment {
            config: self.clone(),
            graph,
            topology,
            bx,
            blocks,
        })
    }
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let (config, base) = RunConfig::load(path)?;
        config.resolve(&base)
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        let mut e = self.clone();
        e.config.horizon = horizon;
        e
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut e = self.clone();
        e.config.seed = seed;
        e
    }

    pub fn validate(&self, tol: f64) -> TopologyReport {
        validate_topology(&self.topology, self.graph.regular, self.graph.sigma2, tol)
    }

    /// Builds the environment. Sensing matrix and target are drawn from the
    /// base seed; the noise stream from `derive_seed(seed, T)`.
    pub fn environment(&self) -> Result<Box<dyn Environment>> {
        let p = self.bx.dim();
        match &self.config.environment {
            EnvironmentSpec::Sensing {
                a,
                p: cov,
                target,
                measure,
            } => {
                let mut rng = noise_rng(self.config.seed);
                let a = match a {
                    Some(rows) => matrix(rows, "A")?,
                    None => presets::perturbed_identity(p, 0.1, &mut rng),
                };
                if a.ncols() != p {
                    return Err(Error::dim(p, a.ncols(), "sensing matrix columns"));
                }
                let cov = match cov {
                    Some(rows) => matrix(rows, "P")?,
                    None => presets::default_noise_covariance(a.nrows()),
                };
                let target = match target {
                    Some(t) => DVector::from_row_slice(t),
                    None => {
                        // middle half of each interval
                        let (lo, hi) = (self.bx.lo(), self.bx.hi());
                        DVector::from_fn(p, |k, _| {
                            let (l, h) = (lo[k] + 0.25 * (hi[k] - lo[k]), hi[k] - 0.25 * (hi[k] - lo[k]));
                            if l < h {
                                rng.random_range(l..h)
                            } else {
                                l
                            }
                        })
                    }
                };
                let seed = derive_seed(self.config.seed, self.config.horizon);
                Ok(Box::new(SensingEnvironment::new(a, &cov, target, *measure, seed)?))
            }
            EnvironmentSpec::Fixed { objectives } => {
                let fs = objectives
                    .iter()
                    .map(|o| QuadraticLoss::new(matrix(&o.a, "A")?, DVector::from_row_slice(&o.q)))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(f) = fs.iter().find(|f| f.a.ncols() != p) {
                    return Err(Error::dim(p, f.a.ncols(), "fixed objective"));
                }
                Ok(Box::new(FixedEnvironment::new(fs)?))
            }
        }
    }
}
