//! Stochastic weight matrices respecting a digraph, their Perron
//! eigenvectors, and contraction estimates.
//!
//! Matrices are dense; the experiments run at n up to a few hundred where
//! dense storage keeps row-sum checks exact and cheap.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::digraph::Digraph;
use crate::error::{FrostError, Result};

/// Stochasticity tag for a weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Row,
    Column,
    Doubly,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Row => "row",
            Kind::Column => "column",
            Kind::Doubly => "doubly",
        }
    }
}

/// Default power-iteration tolerance.
pub const PERRON_TOL: f64 = 1e-12;

/// A dense `n x n` stochastic matrix with cached Perron vectors.
///
/// Entry `(i, j)` is the weight agent `i` assigns to information arriving
/// from agent `j`; it is nonzero only if `(j -> i)` is an edge or `i == j`.
#[derive(Debug, Clone)]
pub struct StochasticMatrix {
    n: usize,
    entries: DMatrix<f64>,
    kind: Kind,
    perron_left: Option<DVector<f64>>,
    perron_right: Option<DVector<f64>>,
}

impl StochasticMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Cached left Perron eigenvector, computing it on first use.
    ///
    /// For a row-stochastic matrix this is the vector `pi` with
    /// `pi^T A = pi^T` and `sum(pi) = 1`.
    pub fn perron_left_cached(&mut self) -> Result<DVector<f64>> {
        if let Some(p) = &self.perron_left {
            return Ok(p.clone());
        }
        let p = perron_left(self, PERRON_TOL, 100 * self.n.max(10))?;
        self.perron_left = Some(p.clone());
        Ok(p)
    }

    /// Cached right Perron eigenvector (normalized to sum 1), computing it
    /// on first use. For a column-stochastic matrix this is `pi_c`.
    pub fn perron_right_cached(&mut self) -> Result<DVector<f64>> {
        if let Some(p) = &self.perron_right {
            return Ok(p.clone());
        }
        let transposed = StochasticMatrix {
            n: self.n,
            entries: self.entries.transpose(),
            kind: Kind::Row,
            perron_left: None,
            perron_right: None,
        };
        let p = perron_left(&transposed, PERRON_TOL, 100 * self.n.max(10))?;
        self.perron_right = Some(p.clone());
        Ok(p)
    }

    /// CSV export: one row per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{:.16e}", self.entries[(i, j)]);
            }
            s.push('\n');
        }
        s
    }
}

fn respects_topology(entries: &DMatrix<f64>, g: &Digraph) -> bool {
    let n = g.n();
    (0..n).all(|i| (0..n).all(|j| entries[(i, j)] == 0.0 || g.has_edge(j, i)))
}

/// Uniform row-stochastic weights: `a_ij = 1/|N_i^in|` for in-neighbors.
pub fn row_stochastic_uniform(g: &Digraph) -> StochasticMatrix {
    let n = g.n();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = 1.0 / g.in_neighbors(i).len() as f64;
        for &j in g.in_neighbors(i) {
            entries[(i, j)] = w;
        }
    }
    debug_assert!(respects_topology(&entries, g));
    StochasticMatrix { n, entries, kind: Kind::Row, perron_left: None, perron_right: None }
}

/// Uniform column-stochastic weights: `b_ij = 1/|N_j^out|` for out-neighbors.
pub fn column_stochastic_uniform(g: &Digraph) -> StochasticMatrix {
    let n = g.n();
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        let w = 1.0 / g.out_neighbors(j).len() as f64;
        for &i in g.out_neighbors(j) {
            entries[(i, j)] = w;
        }
    }
    debug_assert!(respects_topology(&entries, g));
    StochasticMatrix { n, entries, kind: Kind::Column, perron_left: None, perron_right: None }
}

/// Metropolis doubly-stochastic weights on a symmetric graph:
/// `w_ij = 1/(1 + max(d_i, d_j))` for adjacent `i != j` (`d` is the
/// non-self in-degree); the diagonal absorbs the remainder.
pub fn doubly_stochastic_metropolis(g: &Digraph) -> Result<StochasticMatrix> {
    if let Some((j, i)) = g.find_asymmetric_edge() {
        return Err(FrostError::AsymmetricGraph(j, i));
    }
    let n = g.n();
    let degree: Vec<usize> = (0..n).map(|i| g.in_neighbors(i).len() - 1).collect();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off_sum = 0.0;
        for &j in g.in_neighbors(i) {
            if j != i {
                let w = 1.0 / (1.0 + degree[i].max(degree[j]) as f64);
                entries[(i, j)] = w;
                off_sum += w;
            }
        }
        entries[(i, i)] = 1.0 - off_sum;
    }
    debug_assert!(respects_topology(&entries, g));
    Ok(StochasticMatrix { n, entries, kind: Kind::Doubly, perron_left: None, perron_right: None })
}

/// Left Perron eigenvector of a row-stochastic matrix by power iteration on
/// the transpose, stopping when successive iterates differ by less than
/// `tol` in max-norm.
pub fn perron_left(m: &StochasticMatrix, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    if m.kind() != Kind::Row && m.kind() != Kind::Doubly {
        return Err(FrostError::KindMismatch { expected: "row", got: m.kind().name() });
    }
    let n = m.n();
    let at = m.entries.transpose();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = &at * &pi;
        let sum: f64 = next.iter().sum();
        next /= sum;
        residual = (&next - &pi).amax();
        pi = next;
        if residual < tol {
            return Ok(pi);
        }
    }
    Err(FrostError::PowerIterationDiverged { max_iter, residual })
}

/// Spectral-radius estimate of `A - 1 pi^T` for a row-stochastic matrix.
///
/// The Perron eigenvalue is deflated exactly by subtracting `1 pi^T`; the
/// remaining spectral radius is estimated from an Arnoldi projection of the
/// deflated matrix, which handles complex-pair dominant eigenvalues that
/// plain power iteration cannot resolve. Strictly below 1 for a primitive
/// matrix.
pub fn contraction_estimate(m: &StochasticMatrix) -> Result<f64> {
    if m.kind() != Kind::Row && m.kind() != Kind::Doubly {
        return Err(FrostError::KindMismatch { expected: "row", got: m.kind().name() });
    }
    let n = m.n();
    if n == 1 {
        return Ok(0.0);
    }
    let pi = perron_left(m, PERRON_TOL, 100 * n.max(10))?;
    let ones = DVector::from_element(n, 1.0);
    let deflated = &m.entries - &ones * pi.transpose();

    let sigma = arnoldi_spectral_radius(&deflated, n.min(60));
    if sigma >= 1.0 - 1e-12 {
        return Err(FrostError::NotContractive(sigma));
    }
    Ok(sigma)
}

/// Spectral radius of a dense real matrix via an Arnoldi projection of
/// dimension at most `max_krylov` (exact when the Krylov space saturates).
fn arnoldi_spectral_radius(mat: &DMatrix<f64>, max_krylov: usize) -> f64 {
    let n = mat.nrows();
    let m = max_krylov.min(n);
    // deterministic, generically non-degenerate start vector
    let mut v0 = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sin());
    let norm = v0.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v0 /= norm;
    let mut basis: Vec<DVector<f64>> = vec![v0];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut dim = 0;
    for k in 0..m {
        let mut w = mat * &basis[k];
        for (i, q) in basis.iter().enumerate() {
            let hik = q.dot(&w);
            h[(i, k)] = hik;
            w -= q * hik;
        }
        // re-orthogonalize once for accuracy
        for (i, q) in basis.iter().enumerate() {
            let corr = q.dot(&w);
            h[(i, k)] += corr;
            w -= q * corr;
        }
        let wn = w.norm();
        h[(k + 1, k)] = wn;
        dim = k + 1;
        if wn < 1e-14 {
            break;
        }
        basis.push(w / wn);
    }
    let hm = h.view((0, 0), (dim, dim)).into_owned();
    hm.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Spectral 2-norm (largest singular value).
pub fn spectral_norm(mat: &DMatrix<f64>) -> f64 {
    mat.clone().svd(false, false).singular_values.amax()
}

/// Checks the stochasticity sums for the tagged kind within `tol`.
pub fn check_stochasticity(m: &StochasticMatrix, tol: f64) -> bool {
    let n = m.n();
    let rows_ok = (0..n).all(|i| ((0..n).map(|j| m.get(i, j)).sum::<f64>() - 1.0).abs() <= tol);
    let cols_ok = (0..n).all(|j| ((0..n).map(|i| m.get(i, j)).sum::<f64>() - 1.0).abs() <= tol);
    match m.kind() {
        Kind::Row => rows_ok,
        Kind::Column => cols_ok,
        Kind::Doubly => rows_ok && cols_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{gen_complete, gen_random_strongly_connected, gen_ring, symmetrize, Digraph};

    /// Dense eigenvalue oracle: largest non-Perron eigenvalue modulus of A.
    fn second_eigenvalue_oracle(m: &StochasticMatrix) -> f64 {
        let pi = perron_left(m, 1e-14, 10_000).unwrap();
        let ones = DVector::from_element(m.n(), 1.0);
        let deflated = m.entries() - &ones * pi.transpose();
        deflated.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn uniform_row_weights_on_three_cycle() {
        let g = Digraph::from_edge_list(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let a = row_stochastic_uniform(&g);
        for i in 0..3 {
            let nonzero: Vec<f64> =
                (0..3).map(|j| a.get(i, j)).filter(|&v| v != 0.0).collect();
            assert_eq!(nonzero, vec![0.5, 0.5]);
        }
        assert!(check_stochasticity(&a, 1e-12));
    }

    #[test]
    fn single_node_matrices_are_one() {
        let g = Digraph::from_edge_list(1, &[]).unwrap();
        assert_eq!(row_stochastic_uniform(&g).get(0, 0), 1.0);
        assert_eq!(column_stochastic_uniform(&g).get(0, 0), 1.0);
        assert_eq!(doubly_stochastic_metropolis(&g).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn uniform_column_weights_on_three_cycle() {
        let g = Digraph::from_edge_list(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let b = column_stochastic_uniform(&g);
        for j in 0..3 {
            let nonzero: Vec<f64> =
                (0..3).map(|i| b.get(i, j)).filter(|&v| v != 0.0).collect();
            assert_eq!(nonzero, vec![0.5, 0.5]);
        }
        assert!(check_stochasticity(&b, 1e-12));
    }

    #[test]
    fn row_sums_on_random_digraphs() {
        for seed in 0..3 {
            let g = gen_random_strongly_connected(50, 0.10, seed).unwrap();
            let a = row_stochastic_uniform(&g);
            assert!(check_stochasticity(&a, 1e-12));
            let b = column_stochastic_uniform(&g);
            assert!(check_stochasticity(&b, 1e-12));
        }
    }

    #[test]
    fn metropolis_on_symmetric_three_cycle() {
        let g = Digraph::from_edge_list(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)])
            .unwrap();
        let w = doubly_stochastic_metropolis(&g).unwrap();
        // degree 2 everywhere: off-diagonal 1/3, diagonal 1/3
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn metropolis_rejects_asymmetric_graph() {
        let g = Digraph::from_edge_list(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(matches!(
            doubly_stochastic_metropolis(&g),
            Err(FrostError::AsymmetricGraph(_, _))
        ));
    }

    #[test]
    fn metropolis_row_and_column_sums_on_random_symmetric_graphs() {
        for seed in 0..3 {
            let g = symmetrize(&gen_random_strongly_connected(20, 0.15, seed).unwrap());
            let w = doubly_stochastic_metropolis(&g).unwrap();
            assert!(check_stochasticity(&w, 1e-12));
        }
    }

    #[test]
    fn perron_left_is_uniform_for_doubly_stochastic() {
        let g = symmetrize(&gen_ring(6));
        let w = doubly_stochastic_metropolis(&g).unwrap();
        let pi = perron_left(&w, 1e-13, 10_000).unwrap();
        for i in 0..6 {
            assert!((pi[i] - 1.0 / 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn perron_left_single_node() {
        let g = Digraph::from_edge_list(1, &[]).unwrap();
        let a = row_stochastic_uniform(&g);
        let pi = perron_left(&a, 1e-12, 100).unwrap();
        assert_eq!(pi[0], 1.0);
    }

    #[test]
    fn perron_left_residual_and_eigen_oracle() {
        for n in 3..=6 {
            let g = gen_random_strongly_connected(n, 0.6, n as u64).unwrap();
            let a = row_stochastic_uniform(&g);
            let pi = perron_left(&a, 1e-13, 10_000).unwrap();
            let res = (pi.transpose() * a.entries() - pi.transpose()).amax();
            assert!(res < 1e-11, "residual {res} at n={n}");
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(pi.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn contraction_is_zero_for_single_node_and_complete() {
        let g1 = Digraph::from_edge_list(1, &[]).unwrap();
        assert_eq!(contraction_estimate(&row_stochastic_uniform(&g1)).unwrap(), 0.0);
        let gc = gen_complete(5);
        let a = row_stochastic_uniform(&gc);
        assert!(contraction_estimate(&a).unwrap() < 1e-10);
    }

    #[test]
    fn contraction_matches_dense_eigen_oracle() {
        for n in 3..=6 {
            let a = row_stochastic_uniform(&gen_ring(n));
            let est = contraction_estimate(&a).unwrap();
            let oracle = second_eigenvalue_oracle(&a);
            assert!((est - oracle).abs() < 1e-9, "n={n}: est {est} vs oracle {oracle}");
            assert!(est < 1.0);
        }
        // directed ring n=4: eigenvalues of 0.5(I+P) are 0.5(1 + i^k)
        let a4 = row_stochastic_uniform(&gen_ring(4));
        let expected = (0.5f64.powi(2) + 0.5f64.powi(2)).sqrt(); // |0.5 + 0.5i|
        assert!((contraction_estimate(&a4).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn matrix_powers_decay_geometrically() {
        // Lemma-2 style statement: ||A^k - 1 pi^T||_2 <= r * sigma^k,
        // checked via a log-linear fit of the measured norms.
        let a = row_stochastic_uniform(&gen_ring(8));
        let sigma = contraction_estimate(&a).unwrap();
        let pi = perron_left(&a, 1e-14, 10_000).unwrap();
        let ones = DVector::from_element(8, 1.0);
        let limit = &ones * pi.transpose();
        let mut power = a.entries().clone();
        let mut points = Vec::new();
        for k in 1..=200 {
            let norm = spectral_norm(&(&power - &limit));
            if norm > 1e-13 {
                points.push((k as f64, norm.ln()));
            }
            power = a.entries() * power;
        }
        let slope = least_squares_slope(&points);
        assert!(slope <= sigma.ln() + 0.05, "slope {slope} vs log sigma {}", sigma.ln());
    }

    fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn rows_of_matrix_powers_converge_to_perron() {
        let g = gen_random_strongly_connected(10, 0.3, 3).unwrap();
        let a = row_stochastic_uniform(&g);
        let pi = perron_left(&a, 1e-14, 10_000).unwrap();
        let mut power = a.entries().clone();
        for _ in 0..2000 {
            power = a.entries() * power;
        }
        for i in 0..10 {
            for j in 0..10 {
                assert!((power[(i, j)] - pi[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sparsity_pattern_matches_graph() {
        let g = gen_random_strongly_connected(15, 0.2, 9).unwrap();
        let a = row_stochastic_uniform(&g);
        for i in 0..15 {
            for j in 0..15 {
                assert_eq!(a.get(i, j) > 0.0, g.has_edge(j, i));
            }
        }
        for i in 0..15 {
            assert!(a.get(i, i) > 0.0);
        }
    }

    #[test]
    fn csv_has_17_significant_digits() {
        let g = Digraph::from_edge_list(1, &[]).unwrap();
        let a = row_stochastic_uniform(&g);
        assert_eq!(a.to_csv(), "1.0000000000000000e0\n");
    }
}
