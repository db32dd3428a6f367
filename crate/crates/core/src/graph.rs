//! Communication topology and its spectral analysis.
//!
//! The Laplacian `L = D − A` of an undirected weighted graph drives both the
//! consensus dynamics and the analysis. From its eigendecomposition
//! `L = [q Q] diag(0, Λ₁) [q Q]ᵀ` with `q = 𝟙/√n` we build
//! `F_M = [q Q] diag(λ_{n+1}⁻¹, Λ₁⁻¹) [q Q]ᵀ`, which satisfies
//! `F_M L = L F_M = E` where `E = I − 𝟙𝟙ᵀ/n`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Scale-relative threshold used to declare `λ₂ > 0`.
pub const CONNECTIVITY_TOL: f64 = 1e-8;

/// Undirected graph with a symmetric nonnegative weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    weights: DMatrix<f64>,
}

impl Graph {
    /// Validates symmetry, zero diagonal and nonnegative finite weights.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::param("weights", "must be a nonempty square matrix"));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::param("weights", format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::param(
                        "weights",
                        format!("weight ({i},{j}) = {w} is not a nonnegative number"),
                    ));
                }
                if w != weights[(j, i)] {
                    return Err(Error::param("weights", format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Graph { weights })
    }

    /// Builds a graph from `(i, j, weight)` triples; duplicates are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, weight) in edges {
            if i >= n || j >= n {
                return Err(Error::param("edges", format!("index out of range in ({i},{j})")));
            }
            if i == j {
                return Err(Error::param("edges", format!("self-loop at {i}")));
            }
            if w[(i, j)] != 0.0 {
                return Err(Error::param("edges", format!("duplicate edge ({i},{j})")));
            }
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        Graph::from_weights(w)
    }

    /// Each unordered pair is an edge of weight 1 with probability `prob`.
    pub fn erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "erdos_renyi needs at least 2 agents"));
        }
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::param("prob", format!("{prob} is outside [0, 1]")));
        }
        let mut rng = rng::seeded(seed);
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < prob {
                    w[(i, j)] = 1.0;
                    w[(j, i)] = 1.0;
                }
            }
        }
        Ok(Graph { weights: w })
    }

    pub fn complete(n: usize) -> Self {
        let mut w = DMatrix::from_element(n, n, 1.0);
        w.fill_diagonal(0.0);
        Graph { weights: w }
    }

    /// Cycle `0 – 1 – … – (n−1) – 0`; for `n = 2` a single edge.
    pub fn ring(n: usize) -> Self {
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
        Graph { weights: w }
    }

    pub fn path(n: usize) -> Self {
        let mut w = DMatrix::zeros(n, n);
        for i in 1..n {
            w[(i - 1, i)] = 1.0;
            w[(i, i - 1)] = 1.0;
        }
        Graph { weights: w }
    }

    /// Star with centre 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        let n = leaves + 1;
        let mut w = DMatrix::zeros(n, n);
        for i in 1..n {
            w[(0, i)] = 1.0;
            w[(i, 0)] = 1.0;
        }
        Graph { weights: w }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Neighbours of `i` with their edge weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n()).filter_map(move |j| {
            let w = self.weights[(i, j)];
            (w > 0.0).then_some((j, w))
        })
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// `L = D − A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = -self.weights.clone();
        for i in 0..n {
            l[(i, i)] = self.weights.row(i).iter().sum();
        }
        l
    }

    /// Plain-text edge list: a `# nodes N` header, then one `i j weight`
    /// line per edge with `i < j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {}", self.n());
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    let _ = writeln!(out, "{i} {j} {w:?}");
                }
            }
        }
        out
    }

    /// Parses the edge-list format. Blank lines and `#` comments are skipped;
    /// `# nodes N` fixes the node count, otherwise it is one past the
    /// largest index seen.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        let mut max_index = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse_err = |reason: String| Error::Parse {
                line: lineno + 1,
                reason,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut words = comment.split_whitespace();
                if words.next() == Some("nodes") {
                    let count = words
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| parse_err("malformed `# nodes` header".into()))?;
                    if declared.is_some() {
                        return Err(parse_err("repeated `# nodes` header".into()));
                    }
                    declared = Some(count);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `i j weight`, got {} fields", fields.len())));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad index `{}`", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad index `{}`", fields[1])))?;
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| parse_err(format!("bad weight `{}`", fields[2])))?;
            if !w.is_finite() || w <= 0.0 {
                return Err(parse_err(format!("weight {w} must be positive and finite")));
            }
            if i == j {
                return Err(parse_err(format!("self-loop at {i}")));
            }
            max_index = Some(max_index.map_or(i.max(j), |m: usize| m.max(i).max(j)));
            edges.push((i, j, w));
        }
        let inferred = max_index.map_or(0, |m| m + 1);
        let n = match declared {
            Some(d) if d < inferred => {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("edge index {} exceeds declared node count {d}", inferred - 1),
                })
            }
            Some(d) => d,
            None => inferred,
        };
        if n == 0 {
            return Err(Error::Parse {
                line: 1,
                reason: "empty graph".into(),
            });
        }
        // dense storage; refuse absurd sizes coming from untrusted headers
        if n > 1 << 14 {
            return Err(Error::Parse {
                line: 1,
                reason: format!("node count {n} too large"),
            });
        }
        Graph::from_edges(n, &edges)
    }
}

/// Sorted Laplacian spectrum with orthonormal eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Spectral radius `ρ(L) = λₙ`.
    pub rho: f64,
    /// Smallest eigenvalue above the connectivity threshold (0 if none).
    pub rho2: f64,
    pub connected: bool,
}

impl Spectrum {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }
}

/// Laplacian, centering matrix and the sorted spectrum of a graph.
#[derive(Clone, Debug)]
pub struct LaplacianSpectrum {
    pub laplacian: DMatrix<f64>,
    pub centering: DMatrix<f64>,
    pub spectrum: Spectrum,
}

/// `I − 𝟙𝟙ᵀ/n`.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

pub fn laplacian_spectrum(g: &Graph) -> Result<LaplacianSpectrum> {
    let laplacian = g.laplacian();
    let n = g.n();
    let eig = SymmetricEigen::try_new(laplacian.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        eigenvectors.set_column(col, &v);
    }
    let rho = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let tol = CONNECTIVITY_TOL * rho.max(1.0);
    let connected = n == 1 || eigenvalues.get(1).is_some_and(|&l| l > tol);
    let rho2 = eigenvalues
        .iter()
        .copied()
        .find(|&l| l > tol)
        .unwrap_or(0.0);
    Ok(LaplacianSpectrum {
        laplacian,
        centering: centering_matrix(n),
        spectrum: Spectrum {
            eigenvalues,
            eigenvectors,
            rho,
            rho2,
            connected,
        },
    })
}

/// Everything the algorithm and the analysis need from the topology.
#[derive(Clone, Debug)]
pub struct MixingMatrices {
    pub laplacian: DMatrix<f64>,
    pub centering: DMatrix<f64>,
    /// `F_M`.
    pub f: DMatrix<f64>,
    pub lambda_extra: f64,
    /// Orthonormal basis `[q Q]` with `q = 𝟙/√n` in column 0.
    pub basis: DMatrix<f64>,
    /// Eigenvalues of `F_M` on `basis`: `λ_{n+1}⁻¹, λ₂⁻¹, …, λₙ⁻¹`.
    pub f_eigenvalues: Vec<f64>,
    pub spectrum: Spectrum,
}

impl MixingMatrices {
    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }

    /// `‖w‖²_{F⊗I}` for stacked per-agent vectors, as a sum of nonnegative
    /// terms over the eigenbasis.
    pub fn f_norm_sq(&self, w: &[DVector<f64>]) -> f64 {
        let n = self.n();
        (0..n)
            .map(|k| {
                let mut proj = DVector::zeros(w[0].len());
                for (i, wi) in w.iter().enumerate() {
                    proj.axpy(self.basis[(i, k)], wi, 1.0);
                }
                self.f_eigenvalues[k] * proj.norm_squared()
            })
            .sum()
    }
}

/// Builds `F_M`; `lambda_extra` defaults to `λ₂`.
pub fn f_matrix(ls: &LaplacianSpectrum, lambda_extra: Option<f64>) -> Result<MixingMatrices> {
    let spec = &ls.spectrum;
    let n = spec.eigenvalues.len();
    if !spec.connected {
        return Err(Error::Disconnected {
            lambda2: spec.lambda2(),
        });
    }
    if n == 1 {
        // single agent: L = 0 and E = 0, so any positive scalar works
        let extra = lambda_extra.unwrap_or(1.0);
        if !(extra > 0.0 && extra.is_finite()) {
            return Err(Error::param("lambda_extra", format!("{extra} must be positive")));
        }
        return Ok(MixingMatrices {
            laplacian: ls.laplacian.clone(),
            centering: ls.centering.clone(),
            f: DMatrix::from_element(1, 1, 1.0 / extra),
            lambda_extra: extra,
            basis: DMatrix::from_element(1, 1, 1.0),
            f_eigenvalues: vec![1.0 / extra],
            spectrum: spec.clone(),
        });
    }
    let l2 = spec.eigenvalues[1];
    let ln = spec.eigenvalues[n - 1];
    let extra = lambda_extra.unwrap_or(l2);
    if !(extra >= l2 && extra <= ln) {
        return Err(Error::param(
            "lambda_extra",
            format!("{extra} is outside [lambda_2, lambda_n] = [{l2}, {ln}]"),
        ));
    }
    let mut basis = spec.eigenvectors.clone();
    basis.set_column(0, &DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    let mut f_eigenvalues = Vec::with_capacity(n);
    f_eigenvalues.push(1.0 / extra);
    f_eigenvalues.extend(spec.eigenvalues[1..].iter().map(|l| 1.0 / l));
    let scaled = DMatrix::from_fn(n, n, |i, k| basis[(i, k)] * f_eigenvalues[k]);
    let f = &scaled * basis.transpose();
    Ok(MixingMatrices {
        laplacian: ls.laplacian.clone(),
        centering: ls.centering.clone(),
        f,
        lambda_extra: extra,
        basis,
        f_eigenvalues,
        spectrum: spec.clone(),
    })
}

/// Spectrum followed by `F_M` in one call.
pub fn mixing_matrices(g: &Graph, lambda_extra: Option<f64>) -> Result<MixingMatrices> {
    f_matrix(&laplacian_spectrum(g)?, lambda_extra)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    #[test]
    fn erdos_renyi_extremes() {
        let g = Graph::erdos_renyi(4, 1.0, 3).unwrap();
        assert_eq!(g, Graph::complete(4));
        let g = Graph::erdos_renyi(3, 0.0, 3).unwrap();
        assert_eq!(g.edge_count(), 0);
        let ls = laplacian_spectrum(&g).unwrap();
        assert!(!ls.spectrum.connected);
        assert_eq!(ls.spectrum.lambda2(), 0.0);
    }

    #[test]
    fn erdos_renyi_is_seeded() {
        let a = Graph::erdos_renyi(10, 0.4, 7).unwrap();
        let b = Graph::erdos_renyi(10, 0.4, 7).unwrap();
        assert_eq!(a, b);
        assert!(Graph::erdos_renyi(10, 1.3, 7).is_err());
        assert!(Graph::erdos_renyi(1, 0.5, 7).is_err());
    }

    #[test]
    fn path2_spectrum() {
        let ls = laplacian_spectrum(&Graph::path(2)).unwrap();
        assert_eq!(ls.laplacian, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let ev = &ls.spectrum.eigenvalues;
        assert!(ev[0].abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
        assert!((ls.spectrum.rho - 2.0).abs() < 1e-12);
        assert!((ls.spectrum.rho2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_and_star_spectra() {
        let ev = laplacian_spectrum(&Graph::complete(3)).unwrap().spectrum.eigenvalues;
        for (got, want) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{ev:?}");
        }
        let ev = laplacian_spectrum(&Graph::star(3)).unwrap().spectrum.eigenvalues;
        for (got, want) in ev.iter().zip([0.0, 1.0, 1.0, 4.0]) {
            assert!((got - want).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn f_matrix_small_cases() {
        let mix = mixing_matrices(&Graph::path(2), Some(2.0)).unwrap();
        assert!(max_abs(&(&mix.f - DMatrix::identity(2, 2) * 0.5)) < 1e-12);
        let fl = &mix.f * &mix.laplacian;
        assert!(max_abs(&(fl - &mix.centering)) < 1e-12);

        let mix = mixing_matrices(&Graph::complete(3), Some(3.0)).unwrap();
        assert!(max_abs(&(&mix.f - DMatrix::identity(3, 3) / 3.0)) < 1e-12);
        assert!(max_abs(&(&mix.f * &mix.laplacian - &mix.centering)) < 1e-12);
    }

    #[test]
    fn f_matrix_rejects_bad_inputs() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let err = mixing_matrices(&g, None).unwrap_err();
        assert!(err.to_string().contains("graph not connected"));
        let ls = laplacian_spectrum(&Graph::path(3)).unwrap();
        assert!(f_matrix(&ls, Some(100.0)).is_err());
        assert!(f_matrix(&ls, Some(0.5)).is_err());
    }

    #[test]
    fn default_lambda_extra_is_lambda2() {
        let mix = mixing_matrices(&Graph::path(4), None).unwrap();
        assert_eq!(mix.lambda_extra, mix.spectrum.eigenvalues[1]);
    }

    #[test]
    fn centering_spectrum() {
        let e = centering_matrix(6);
        let mut ev: Vec<f64> = SymmetricEigen::new(e).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-10);
        assert!(ev[1..].iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn f_norm_matches_dense_form() {
        let mix = mixing_matrices(&Graph::ring(5), None).unwrap();
        let w: Vec<DVector<f64>> = (0..5)
            .map(|i| DVector::from_vec(vec![i as f64 - 1.5, 0.3 * i as f64]))
            .collect();
        let mut dense = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                dense += mix.f[(i, j)] * w[i].dot(&w[j]);
            }
        }
        assert!((mix.f_norm_sq(&w) - dense).abs() < 1e-12 * dense.abs().max(1.0));
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = Graph::erdos_renyi(7, 0.5, 11).unwrap();
        let parsed = Graph::parse_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(parsed, g);
        assert!(Graph::parse_edge_list("0 0 1").is_err());
        assert!(Graph::parse_edge_list("0 1").is_err());
        assert!(Graph::parse_edge_list("0 1 -2").is_err());
        assert!(Graph::parse_edge_list("0 1 1\n1 0 1").is_err());
        assert!(Graph::parse_edge_list("# nodes 2\n0 3 1").is_err());
        let g = Graph::parse_edge_list("# nodes 5\n0 1 2.5\n").unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.weight(1, 0), 2.5);
    }
}
