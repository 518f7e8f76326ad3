use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ValidationReport;
use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl UndirectedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Config(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if i == j {
                // self-neighborhood is implicit
                continue;
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i, (i + 1) % n));
        Self::new(n, edges).expect("cycle edges are in range")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are in range")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete edges are in range")
    }

    /// `cliques` complete subgraphs of `size` nodes, consecutive cliques joined by one edge.
    pub fn ring_of_cliques(cliques: usize, size: usize) -> Self {
        let n = cliques * size;
        let mut edges = Vec::new();
        for c in 0..cliques {
            let base = c * size;
            for a in 0..size {
                for b in a + 1..size {
                    edges.push((base + a, base + b));
                }
            }
            if cliques > 1 {
                edges.push((base + size - 1, ((c + 1) % cliques) * size));
            }
        }
        Self::new(n, edges).expect("ring-of-cliques edges are in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// `j` is in the neighborhood of `i` (which includes `i` itself).
    pub fn is_neighbor(&self, i: usize, j: usize) -> bool {
        i == j || self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Stationary weights `r` and a row-stochastic `M` with `r_i M_ij = r_j M_ji`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversiblePair {
    pub r: DVector<f64>,
    pub m: DMatrix<f64>,
}

impl ReversiblePair {
    pub fn new(r: DVector<f64>, m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != r.len() || m.ncols() != r.len() {
            return Err(Error::Config(format!(
                "weight matrix is {}x{} for {} weights",
                m.nrows(),
                m.ncols(),
                r.len()
            )));
        }
        Ok(Self { r, m })
    }

    /// Lazy Metropolis walk with uniform stationary weights:
    /// `M_ij = 1 / (2 max(d_i, d_j))` on edges and the remainder on the diagonal.
    pub fn lazy_metropolis(g: &UndirectedGraph) -> Self {
        let n = g.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, j) in g.edges() {
            let w = 1.0 / (2.0 * g.degree(i).max(g.degree(j)) as f64);
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            m[(i, i)] = 1.0 - off;
        }
        Self {
            r: DVector::from_element(n, 1.0 / n as f64),
            m,
        }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// `r_* = min_i r_i`.
    pub fn r_star(&self) -> f64 {
        self.r.min()
    }

    fn core_checks(&self, tol: f64, report: &mut ValidationReport) {
        let n = self.n();
        let min_r = self.r.min();
        report.push(
            "positive weights",
            min_r > 0.0,
            (-min_r).max(0.0),
            format!("min r_i = {min_r}"),
        );
        let sum_err = (self.r.sum() - 1.0).abs();
        report.push(
            "weights sum to one",
            sum_err <= tol,
            sum_err,
            format!("sum r = {}", self.r.sum()),
        );

        let min_m = self.m.min();
        report.push(
            "nonnegative matrix",
            min_m >= -tol,
            (-min_m).max(0.0),
            format!("min M_ij = {min_m}"),
        );

        let (worst_row, row_err) = (0..n)
            .map(|i| (i, (self.m.row(i).sum() - 1.0).abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        report.push(
            "row stochastic",
            row_err <= tol,
            row_err,
            if row_err > tol {
                format!("row {worst_row} sums to {}", self.m.row(worst_row).sum())
            } else {
                String::new()
            },
        );

        let mut sym = (0.0, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let d = (self.r[i] * self.m[(i, j)] - self.r[j] * self.m[(j, i)]).abs();
                if d > sym.0 {
                    sym = (d, i, j);
                }
            }
        }
        report.push(
            "symmetry",
            sym.0 <= tol,
            sym.0,
            if sym.0 > tol {
                format!("r_{0} M_{0}{1} != r_{1} M_{1}{0}", sym.1, sym.2)
            } else {
                String::new()
            },
        );
    }
}

/// Checks support, positivity, row sums, and symmetry of `(r, M)` on `g`.
pub fn validate_reversible_pair(g: &UndirectedGraph, pair: &ReversiblePair, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = g.n();
    if pair.n() != n {
        report.push(
            "dimensions",
            false,
            (pair.n() as f64 - n as f64).abs(),
            format!("graph has {n} nodes, weights have {}", pair.n()),
        );
        return report;
    }
    report.push("connected", g.is_connected(), 0.0, "");
    pair.core_checks(tol, &mut report);

    let mut support = (0.0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            if !g.is_neighbor(i, j) && pair.m[(i, j)].abs() > support.0 {
                support = (pair.m[(i, j)].abs(), i, j);
            }
        }
    }
    report.push(
        "support",
        support.0 <= tol,
        support.0,
        if support.0 > tol {
            format!(
                "M_{}{} is nonzero but {} and {} are not neighbors",
                support.1, support.2, support.1, support.2
            )
        } else {
            String::new()
        },
    );
    report
}

/// Spectral gap `lambda = 1 - sigma_2^2` of the r-symmetrized matrix
/// `diag(sqrt r) M diag(1/sqrt r)`.
pub fn spectral_gap(pair: &ReversiblePair) -> Result<f64> {
    let mut report = ValidationReport::default();
    pair.core_checks(1e-9, &mut report);
    if !report.passed() {
        return Err(Error::Domain(format!(
            "pair is not reversible and stochastic:\n{report}"
        )));
    }
    let n = pair.n();
    let sqrt_r = pair.r.map(f64::sqrt);
    let s = DMatrix::from_fn(n, n, |i, j| sqrt_r[i] * pair.m[(i, j)] / sqrt_r[j]);
    // Symmetric up to rounding; drop the stationary direction sqrt(r) with eigenvalue 1.
    let sym = (&s + s.transpose()) * 0.5 - &sqrt_r * sqrt_r.transpose();
    let eig = SymmetricEigen::new(sym);
    let sigma2 = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok((1.0 - sigma2 * sigma2).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lazy_cycle5() -> ReversiblePair {
        let n = 5;
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.5
            } else if (i + 1) % n == j || (j + 1) % n == i {
                0.25
            } else {
                0.0
            }
        });
        ReversiblePair::new(DVector::from_element(n, 0.2), m).unwrap()
    }

    #[test]
    fn sensing_cycle_validates_exactly() {
        let report = validate_reversible_pair(&UndirectedGraph::cycle(5), &lazy_cycle5(), 0.0);
        assert!(report.passed(), "{report}");
        assert!(report.checks.iter().all(|c| c.max_violation <= 1e-15));
    }

    #[test]
    fn lazy_metropolis_reproduces_sensing_cycle() {
        assert_eq!(
            ReversiblePair::lazy_metropolis(&UndirectedGraph::cycle(5)),
            lazy_cycle5()
        );
    }

    #[test]
    fn identity_matrix_is_valid() {
        let r = DVector::from_row_slice(&[0.1, 0.2, 0.3, 0.4]);
        let pair = ReversiblePair::new(r, DMatrix::identity(4, 4)).unwrap();
        let report = validate_reversible_pair(&UndirectedGraph::path(4), &pair, 1e-12);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn asymmetric_path_fails_with_one_twelfth() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5]);
        let pair = ReversiblePair::new(DVector::from_element(3, 1.0 / 3.0), m).unwrap();
        let report = validate_reversible_pair(&UndirectedGraph::path(3), &pair, 1e-12);
        assert!(!report.passed());
        let sym = report.check("symmetry").unwrap();
        assert!(!sym.passed);
        assert!((sym.max_violation - 1.0 / 12.0).abs() < 1e-15);
        assert!(report.check("row stochastic").unwrap().passed);
    }

    #[test]
    fn off_support_and_row_sum_violations_are_named() {
        let mut pair = lazy_cycle5();
        pair.m[(0, 2)] = 0.1;
        let report = validate_reversible_pair(&UndirectedGraph::cycle(5), &pair, 1e-12);
        let support = report.check("support").unwrap();
        assert!(!support.passed);
        assert!((support.max_violation - 0.1).abs() < 1e-15);
        let rows = report.check("row stochastic").unwrap();
        assert!(!rows.passed);
        assert!(rows.detail.contains("row 0"));
    }

    #[test]
    fn disconnected_graph_reported() {
        let g = UndirectedGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let report = validate_reversible_pair(&g, &ReversiblePair::lazy_metropolis(&g), 1e-12);
        assert!(!report.check("connected").unwrap().passed);
    }

    #[test]
    fn gap_of_lazy_cycle_matches_closed_form() {
        let second = 0.5 + 0.5 * (2.0 * PI / 5.0).cos();
        let oracle = 1.0 - second * second;
        let gap = spectral_gap(&lazy_cycle5()).unwrap();
        assert!((gap - oracle).abs() < 1e-12, "{gap} vs {oracle}");
    }

    #[test]
    fn gap_extremes() {
        let n = 6;
        let r = DVector::from_element(n, 1.0 / n as f64);
        let avg = ReversiblePair::new(r.clone(), DMatrix::from_element(n, n, 1.0 / n as f64)).unwrap();
        assert_eq!(spectral_gap(&avg).unwrap(), 1.0);
        let id = ReversiblePair::new(r, DMatrix::identity(n, n)).unwrap();
        assert_eq!(spectral_gap(&id).unwrap(), 0.0);
    }

    #[test]
    fn gap_rejects_non_stochastic() {
        let mut pair = lazy_cycle5();
        pair.m[(0, 0)] = 0.9;
        assert!(matches!(spectral_gap(&pair), Err(Error::Domain(_))));
    }

    #[test]
    fn gap_is_a_lower_bound_on_rayleigh_quotients() {
        // Nonuniform reversible chain: Metropolis walk targeting r on a ring of cliques.
        let g = UndirectedGraph::ring_of_cliques(3, 3);
        let n = g.n();
        let r = DVector::from_fn(n, |i, _| (i + 1) as f64);
        let r = &r / r.sum();
        let mut m = DMatrix::zeros(n, n);
        for (i, j) in g.edges() {
            m[(i, j)] = 0.25 * (r[j] / r[i]).min(1.0) / 2.0;
            m[(j, i)] = 0.25 * (r[i] / r[j]).min(1.0) / 2.0;
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            m[(i, i)] = 1.0 - off;
        }
        let pair = ReversiblePair::new(r.clone(), m.clone()).unwrap();
        assert!(validate_reversible_pair(&g, &pair, 1e-12).passed());
        let gap = spectral_gap(&pair).unwrap();
        assert!(gap > 0.0 && gap <= 1.0);

        let norm_r = |f: &DVector<f64>| f.iter().zip(r.iter()).map(|(a, b)| b * a * a).sum::<f64>();
        let mut seed = 17u64;
        let mut best = f64::INFINITY;
        for _ in 0..2000 {
            let mut f = DVector::from_fn(n, |_, _| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            });
            let mean = f.dot(&r);
            f.add_scalar_mut(-mean);
            let q = (norm_r(&f) - norm_r(&(&m * &f))) / norm_r(&f);
            assert!(q >= gap - 1e-12);
            best = best.min(q);
        }
        assert!(best.is_finite());

        // Independent route: power iteration of f -> M M f on the r-orthogonal complement.
        let mut f = DVector::from_fn(n, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let mut rho = 0.0;
        for _ in 0..20_000 {
            let mean = f.dot(&r);
            f.add_scalar_mut(-mean);
            let g = &m * (&m * &f);
            rho = g
                .iter()
                .zip(f.iter())
                .zip(r.iter())
                .map(|((a, b), w)| w * a * b)
                .sum::<f64>()
                / norm_r(&f);
            f = &g / norm_r(&g).sqrt();
        }
        assert!((gap - (1.0 - rho)).abs() < 1e-9, "{gap} vs {}", 1.0 - rho);
    }
}
