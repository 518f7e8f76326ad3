//! Small built-in networks used by the demo configs and tests.

use nalgebra::{DMatrix, DVector};

use crate::graph::{DigraphSchedule, ReversiblePair, UndirectedGraph};

/// Lazy random walk on the 5-cycle: uniform weights, 1/2 on the diagonal and
/// 1/4 to each neighbor.
pub fn sensing_cycle_pair() -> ReversiblePair {
    ReversiblePair::lazy_metropolis(&UndirectedGraph::cycle(5))
}

/// Three digraphs on 5 nodes whose union is strongly connected, so any window
/// of 3 consecutive instants suffices.
pub fn sensing_schedule() -> DigraphSchedule {
    let graphs = vec![
        vec![(0, 1), (1, 2), (2, 1)],
        vec![(2, 3), (3, 4), (4, 3)],
        vec![(4, 0), (0, 4)],
    ];
    DigraphSchedule::periodic(5, DigraphSchedule::with_self_loops(5, graphs))
        .expect("preset schedule is well formed")
        .with_claimed_b(3)
}

/// `I + E` with `E` a seeded off-diagonal perturbation in `[-scale, scale]`.
pub fn perturbed_identity(p: usize, scale: f64, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rng.random_range(-scale..=scale) })
}

pub fn default_noise_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::identity(p, p) * 0.25
}

pub fn uniform_weights(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / n as f64)
}
