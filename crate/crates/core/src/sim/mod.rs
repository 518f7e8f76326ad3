//! Experiment driver: environments, noise, configuration, the round loop and CSV output.

pub mod config;
pub mod environment;
pub mod harness;
pub mod noise;
pub mod trace;

pub use config::{derive_seed, Algorithm, EnvironmentSpec, Experiment, RunConfig};
pub use environment::{Certificate, Environment, FixedEnvironment, Measure, SensingEnvironment};
pub use harness::{run, sweep, InvariantReport, RunResult, SweepRow};
pub use noise::{covariance_sqrt, gaussian_noise, noise_rng, GaussianSampler, NoiseRng, PolarNormal};
pub use trace::{format_sig, summary_csv, trace_csv, SUMMARY_HEADER, TRACE_HEADER};
