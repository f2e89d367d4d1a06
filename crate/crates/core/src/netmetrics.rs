//! Network construction from connectivity data, classical centralities,
//! single-input controllability metrics and correlation aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{finite_gramian, symmetrize, SystemMatrix};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_PAGERANK_TOL: f64 = 1e-10;
pub const PAGERANK_MAX_ITER: usize = 100_000;
/// Relative rank threshold for single-input Gramians, multiplied by `λ_max·n`.
pub const DEFAULT_RANK_TOL: f64 = f64::EPSILON;
/// Relative tolerance for treating two path lengths as equal.
const PATH_TIE_RTOL: f64 = 1e-12;
const LAPLACIAN_ROW_TOL: f64 = 1e-10;

/// Nonnegative weights with `Cᵢⱼ` flowing from region `i` to region `j`.
/// Self-connections are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    weights: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl ConnectivityMatrix {
    pub fn new(mut weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::Dimension(format!(
                "connectivity matrix must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.is_empty() {
            return Err(Error::Dimension("connectivity matrix is empty".into()));
        }
        if let Some(v) = weights.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite connectivity weight {v}")));
        }
        if let Some(v) = weights.iter().find(|v| **v < 0.0) {
            return Err(Error::Domain(format!("negative connectivity weight {v}")));
        }
        weights.fill_diagonal(0.0);
        Ok(Self { weights, labels: None })
    }

    pub fn from_row_slice(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, values.len())));
        }
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension(format!(
                "{} labels for {} regions",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Unit weights on every positive entry.
    pub fn binarized(&self) -> Self {
        Self {
            weights: self.weights.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianMode {
    /// Adjacency `Cᵀ`, so node `j` is driven by its in-neighbours.
    Directed,
    /// Adjacency `(C + Cᵀ)/2`.
    Undirected,
}

impl FromStr for LaplacianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "directed" => Ok(Self::Directed),
            "undirected" => Ok(Self::Undirected),
            other => Err(Error::InvalidInput(format!("unknown Laplacian mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LaplacianSystem {
    pub laplacian: DMatrix<f64>,
    pub system: SystemMatrix,
    pub mode: LaplacianMode,
}

impl LaplacianSystem {
    /// `max_i |Σ_j Lᵢⱼ|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.laplacian.column_sum().amax()
    }
}

pub fn build_laplacian(c: &ConnectivityMatrix, mode: LaplacianMode) -> Result<LaplacianSystem> {
    let adjacency = match mode {
        LaplacianMode::Directed => c.weights.transpose(),
        LaplacianMode::Undirected => (&c.weights + c.weights.transpose()) * 0.5,
    };
    let n = c.n();
    let mut laplacian = -&adjacency;
    for i in 0..n {
        // diagonal is the negated off-diagonal row sum so L·𝟏 cancels exactly
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| laplacian[(i, j)]).sum();
        laplacian[(i, i)] = -off;
    }
    let residual = laplacian.column_sum().amax();
    let scale = laplacian.amax().max(1.0);
    if residual > LAPLACIAN_ROW_TOL * scale {
        return Err(Error::Domain(format!("Laplacian row sums deviate by {residual}")));
    }
    let system = SystemMatrix::new(-&laplacian)?;
    Ok(LaplacianSystem { laplacian, system, mode })
}

/// Weighted (in-degree, out-degree): column and row sums of `C`.
pub fn degree_centrality(c: &ConnectivityMatrix) -> (DVector<f64>, DVector<f64>) {
    let indeg = c.weights.row_sum().transpose();
    let outdeg = c.weights.column_sum();
    (indeg, outdeg)
}

fn edge_lengths(c: &ConnectivityMatrix) -> Vec<Vec<(usize, f64)>> {
    let n = c.n();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && c.weights[(i, j)] > 0.0)
                .map(|j| (j, 1.0 / c.weights[(i, j)]))
                .collect()
        })
        .collect()
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= PATH_TIE_RTOL * a.abs().max(b.abs())
}

/// Directed betweenness with edge length `1/Cᵢⱼ` (Brandes accumulation,
/// unnormalized, ordered pairs).
pub fn betweenness(c: &ConnectivityMatrix) -> DVector<f64> {
    let n = c.n();
    let adj = edge_lengths(c);
    let mut bc = DVector::zeros(n);
    for s in 0..n {
        let mut dist = vec![f64::INFINITY; n];
        let mut sigma = vec![0.0f64; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut settled = vec![false; n];
        let mut order = Vec::with_capacity(n);
        dist[s] = 0.0;
        sigma[s] = 1.0;
        loop {
            let next = (0..n)
                .filter(|&v| !settled[v] && dist[v].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            let Some(v) = next else { break };
            settled[v] = true;
            order.push(v);
            for &(w, len) in &adj[v] {
                if settled[w] {
                    continue;
                }
                let candidate = dist[v] + len;
                if dist[w].is_finite() && same_length(candidate, dist[w]) {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                } else if candidate < dist[w] {
                    dist[w] = candidate;
                    sigma[w] = sigma[v];
                    preds[w].clear();
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    bc
}

/// Largest graph accepted by [`betweenness_bruteforce`].
pub const BETWEENNESS_BRUTEFORCE_MAX_N: usize = 6;

/// Betweenness by enumerating every simple path between every ordered pair.
pub fn betweenness_bruteforce(c: &ConnectivityMatrix) -> Result<DVector<f64>> {
    let n = c.n();
    if n > BETWEENNESS_BRUTEFORCE_MAX_N {
        return Err(Error::Size(format!(
            "brute-force betweenness supports n <= {BETWEENNESS_BRUTEFORCE_MAX_N}, got {n}"
        )));
    }
    let adj = edge_lengths(c);

    fn walk(
        adj: &[Vec<(usize, f64)>],
        v: usize,
        target: usize,
        len: f64,
        path: &mut Vec<usize>,
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        if v == target {
            out.push((len, path.clone()));
            return;
        }
        for &(w, l) in &adj[v] {
            if !path.contains(&w) {
                path.push(w);
                walk(adj, w, target, len + l, path, out);
                path.pop();
            }
        }
    }

    let mut bc = DVector::zeros(n);
    for s in 0..n {
        for t in (0..n).filter(|&t| t != s) {
            let mut paths = Vec::new();
            walk(&adj, s, t, 0.0, &mut vec![s], &mut paths);
            let Some(best) = paths.iter().map(|(l, _)| *l).min_by(f64::total_cmp) else {
                continue;
            };
            let shortest: Vec<&Vec<usize>> = paths
                .iter()
                .filter(|(l, _)| same_length(*l, best))
                .map(|(_, p)| p)
                .collect();
            let total = shortest.len() as f64;
            for p in shortest {
                for &v in &p[1..p.len() - 1] {
                    bc[v] += 1.0 / total;
                }
            }
        }
    }
    Ok(bc)
}

/// Power iteration on the row-normalized transition matrix; dangling nodes
/// spread their mass uniformly.
pub fn pagerank(c: &ConnectivityMatrix, damping: f64, tol: f64) -> Result<DVector<f64>> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::Domain(format!("damping must lie in (0,1), got {damping}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = c.n();
    let nf = n as f64;
    let out = c.weights.column_sum();
    let mut x = DVector::from_element(n, 1.0 / nf);
    for _ in 0..PAGERANK_MAX_ITER {
        let mut next = DVector::zeros(n);
        let mut dangling = 0.0;
        for i in 0..n {
            if out[i] > 0.0 {
                for j in 0..n {
                    let w = c.weights[(i, j)];
                    if w > 0.0 {
                        next[j] += x[i] * w / out[i];
                    }
                }
            } else {
                dangling += x[i];
            }
        }
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next = next * damping;
        next.add_scalar_mut(base);
        let total = next.sum();
        next.unscale_mut(total);
        let change = (&next - &x).lp_norm(1);
        x = next;
        if change < tol {
            return Ok(x);
        }
    }
    Err(Error::Convergence(PAGERANK_MAX_ITER))
}

fn check_node(sys: &SystemMatrix, j: usize) -> Result<()> {
    if j >= sys.n() {
        return Err(Error::Dimension(format!("node {j} out of range for n = {}", sys.n())));
    }
    Ok(())
}

/// `tr Wⱼ(T)` for the system actuated at node `j` alone.
pub fn average_controllability(sys: &SystemMatrix, j: usize, t: f64) -> Result<f64> {
    check_node(sys, j)?;
    Ok(finite_gramian(sys, j, t)?.trace())
}

/// Eigenvalues of a symmetric PSD Gramian above `rank_tol·λ_max·n`, descending.
pub fn significant_eigenvalues(w: &DMatrix<f64>, rank_tol: f64) -> Result<Vec<f64>> {
    let n = w.nrows();
    let eig = SymmetricEigen::new(symmetrize(w)).eigenvalues;
    let lambda_max = eig.max();
    if !(lambda_max > 0.0) {
        return Err(Error::Degenerate("Gramian has no positive eigenvalue".into()));
    }
    let threshold = rank_tol * lambda_max * n as f64;
    let mut kept: Vec<f64> = eig.iter().copied().filter(|&l| l > threshold).collect();
    kept.sort_by(|a, b| b.total_cmp(a));
    Ok(kept)
}

/// Numerical rank of a single-input Gramian.
pub fn gramian_rank(w: &DMatrix<f64>, rank_tol: f64) -> Result<usize> {
    significant_eigenvalues(w, rank_tol).map(|e| e.len())
}

/// Log-volume of the reachable ellipsoid on the controllable subspace.
pub fn vce_from_gramian(w: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    Ok(significant_eigenvalues(w, rank_tol)?.iter().map(|l| l.ln()).sum())
}

/// Trace of the Gramian pseudo-inverse restricted to significant eigenvalues.
pub fn ace_from_gramian(w: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    Ok(significant_eigenvalues(w, rank_tol)?.iter().map(|l| l.recip()).sum())
}

pub fn vce_centrality(sys: &SystemMatrix, j: usize, t: f64, rank_tol: f64) -> Result<f64> {
    check_node(sys, j)?;
    vce_from_gramian(&finite_gramian(sys, j, t)?, rank_tol)
}

pub fn ace_centrality(sys: &SystemMatrix, j: usize, t: f64, rank_tol: f64) -> Result<f64> {
    check_node(sys, j)?;
    ace_from_gramian(&finite_gramian(sys, j, t)?, rank_tol)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {} differ", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("input vector is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Indegree,
    Outdegree,
    Betweenness,
    Pagerank,
    AvgCtrl,
    Vce,
    Ace,
    Vcs,
    Aecs,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Indegree,
        Metric::Outdegree,
        Metric::Betweenness,
        Metric::Pagerank,
        Metric::AvgCtrl,
        Metric::Vce,
        Metric::Ace,
        Metric::Vcs,
        Metric::Aecs,
    ];

    /// Metrics compared against the scores in the correlation table.
    pub const CLASSICAL: [Metric; 5] = [
        Metric::Indegree,
        Metric::Outdegree,
        Metric::Betweenness,
        Metric::Pagerank,
        Metric::AvgCtrl,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Indegree => "indegree",
            Metric::Outdegree => "outdegree",
            Metric::Betweenness => "betweenness",
            Metric::Pagerank => "pagerank",
            Metric::AvgCtrl => "avg_ctrl",
            Metric::Vce => "vce",
            Metric::Ace => "ace",
            Metric::Vcs => "vcs",
            Metric::Aecs => "aecs",
        }
    }

    /// Display name used in the correlation table.
    pub fn display_name(self) -> &'static str {
        match self {
            Metric::Indegree => "Indegree",
            Metric::Outdegree => "Outdegree",
            Metric::Betweenness => "Betweenness",
            Metric::Pagerank => "PageRank",
            Metric::AvgCtrl => "Ave. Con.",
            Metric::Vce => "VCE",
            Metric::Ace => "ACE",
            Metric::Vcs => "VCS",
            Metric::Aecs => "AECS",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Metric::ALL
            .into_iter()
            .find(|m| m.key() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityReport {
    pub metric: Metric,
    pub values: Vec<f64>,
    pub params: BTreeMap<String, f64>,
}

impl CentralityReport {
    pub fn new(metric: Metric, values: Vec<f64>) -> Self {
        Self { metric, values, params: BTreeMap::new() }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// Parameters for [`centrality_reports`].
#[derive(Debug, Clone, Copy)]
pub struct CentralityParams {
    pub t: f64,
    pub damping: f64,
    pub pagerank_tol: f64,
    pub rank_tol: f64,
    pub binarize_paths: bool,
}

impl Default for CentralityParams {
    fn default() -> Self {
        Self {
            t: 100.0,
            damping: DEFAULT_DAMPING,
            pagerank_tol: DEFAULT_PAGERANK_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            binarize_paths: false,
        }
    }
}

fn per_node(sys: &SystemMatrix, f: impl Fn(usize) -> Result<f64>) -> Result<Vec<f64>> {
    (0..sys.n()).map(f).collect()
}

/// Graph and single-input metrics for one individual. Score metrics are
/// produced by the solver and are rejected here.
pub fn centrality_reports(
    c: &ConnectivityMatrix,
    lap: &LaplacianSystem,
    metrics: &[Metric],
    params: &CentralityParams,
) -> Result<Vec<CentralityReport>> {
    let sys = &lap.system;
    metrics
        .iter()
        .map(|&metric| {
            let report = match metric {
                Metric::Indegree => CentralityReport::new(metric, degree_centrality(c).0.as_slice().to_vec()),
                Metric::Outdegree => CentralityReport::new(metric, degree_centrality(c).1.as_slice().to_vec()),
                Metric::Betweenness => {
                    let g = if params.binarize_paths { c.binarized() } else { c.clone() };
                    CentralityReport::new(metric, betweenness(&g).as_slice().to_vec())
                        .with_param("binarized", if params.binarize_paths { 1.0 } else { 0.0 })
                }
                Metric::Pagerank => {
                    CentralityReport::new(metric, pagerank(c, params.damping, params.pagerank_tol)?.as_slice().to_vec())
                        .with_param("damping", params.damping)
                        .with_param("tol", params.pagerank_tol)
                }
                Metric::AvgCtrl => {
                    CentralityReport::new(metric, per_node(sys, |j| average_controllability(sys, j, params.t))?)
                        .with_param("T", params.t)
                }
                Metric::Vce => CentralityReport::new(metric, per_node(sys, |j| vce_centrality(sys, j, params.t, params.rank_tol))?)
                    .with_param("T", params.t)
                    .with_param("rank_tol", params.rank_tol),
                Metric::Ace => CentralityReport::new(metric, per_node(sys, |j| ace_centrality(sys, j, params.t, params.rank_tol))?)
                    .with_param("T", params.t)
                    .with_param("rank_tol", params.rank_tol),
                Metric::Vcs | Metric::Aecs => {
                    return Err(Error::InvalidInput(format!("{metric} is computed by the score solver")))
                }
            };
            Ok(report)
        })
        .collect()
}

/// Reports for one individual keyed by metric.
pub type IndividualReports = BTreeMap<Metric, CentralityReport>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub label: String,
    pub score: Metric,
    pub other: Metric,
    /// `None` when no individual had a defined correlation.
    pub mean: Option<f64>,
    /// Sample standard deviation across individuals.
    pub std: Option<f64>,
    pub individuals_used: usize,
    pub individuals_undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub individuals: usize,
    pub rows: Vec<CorrelationRow>,
}

/// Row order of the aggregate table: AECS then VCS against each classical metric.
pub fn table_pairs() -> Vec<(Metric, Metric)> {
    [Metric::Aecs, Metric::Vcs]
        .into_iter()
        .flat_map(|s| Metric::CLASSICAL.into_iter().map(move |o| (s, o)))
        .collect()
}

fn metric_values<'a>(ind: &'a IndividualReports, m: Metric, idx: usize) -> Result<&'a [f64]> {
    ind.get(&m)
        .map(|r| r.values.as_slice())
        .ok_or_else(|| Error::Schema(format!("individual {idx} lacks metric {m}")))
}

fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    match values.len() {
        0 => (None, None),
        1 => (Some(values[0]), None),
        k => {
            let mean = values.iter().sum::<f64>() / k as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (Some(mean), Some(var.sqrt()))
        }
    }
}

/// Per-individual Pearson correlation of `a` with `b`, then mean and sample
/// standard deviation across individuals.
pub fn correlate_pair(individuals: &[IndividualReports], a: Metric, b: Metric) -> Result<CorrelationRow> {
    let mut coefficients = Vec::with_capacity(individuals.len());
    let mut undefined = 0;
    for (idx, ind) in individuals.iter().enumerate() {
        let x = metric_values(ind, a, idx)?;
        let y = metric_values(ind, b, idx)?;
        if x.len() != y.len() {
            return Err(Error::Schema(format!(
                "individual {idx}: {a} has {} values, {b} has {}",
                x.len(),
                y.len()
            )));
        }
        match pearson(x, y) {
            Ok(r) => coefficients.push(r),
            Err(Error::UndefinedCorrelation(_)) => undefined += 1,
            Err(e) => return Err(e),
        }
    }
    let (mean, std) = mean_and_sample_std(&coefficients);
    Ok(CorrelationRow {
        label: format!("{} and {}", a.display_name(), b.display_name()),
        score: a,
        other: b,
        mean,
        std,
        individuals_used: coefficients.len(),
        individuals_undefined: undefined,
    })
}

pub fn correlation_study(individuals: &[IndividualReports]) -> Result<CorrelationTable> {
    if individuals.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation study needs at least 2 individuals, got {}",
            individuals.len()
        )));
    }
    let rows = table_pairs()
        .into_iter()
        .map(|(a, b)| correlate_pair(individuals, a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationTable { individuals: individuals.len(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn conn(n: usize, v: &[f64]) -> ConnectivityMatrix {
        ConnectivityMatrix::from_row_slice(n, v).unwrap()
    }

    fn path3() -> ConnectivityMatrix {
        conn(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    }

    fn cycle3() -> ConnectivityMatrix {
        conn(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    }

    #[test]
    fn laplacian_examples() {
        let lap = build_laplacian(&conn(2, &[0.0, 1.0, 0.0, 0.0]), LaplacianMode::Directed).unwrap();
        assert_eq!(lap.laplacian, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0]));
        let c = 0.7;
        let lap = build_laplacian(&conn(2, &[0.0, c, c, 0.0]), LaplacianMode::Undirected).unwrap();
        assert_eq!(lap.laplacian, DMatrix::from_row_slice(2, 2, &[c, -c, -c, c]));
        assert!(lap.system.is_symmetric());
        assert!(matches!(
            ConnectivityMatrix::from_row_slice(2, &[0.0, -1.0, 0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn self_loops_are_dropped() {
        let c = conn(2, &[5.0, 1.0, 2.0, 3.0]);
        assert_eq!(c.weights()[(0, 0)], 0.0);
        let lap = build_laplacian(&c, LaplacianMode::Directed).unwrap();
        assert_eq!(lap.row_sum_residual(), 0.0);
    }

    #[test]
    fn degree_examples() {
        let (i, o) = degree_centrality(&path3());
        assert_eq!(i.as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(o.as_slice(), &[1.0, 1.0, 0.0]);
        let (i, o) = degree_centrality(&cycle3());
        assert_eq!(i.as_slice(), &[1.0; 3]);
        assert_eq!(o.as_slice(), &[1.0; 3]);
        let (i, o) = degree_centrality(&conn(2, &[0.0; 4]));
        assert_eq!(i.sum() + o.sum(), 0.0);
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness(&path3()).as_slice(), &[0.0, 1.0, 0.0]);
        let complete = conn(3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(betweenness(&complete).as_slice(), &[0.0; 3]);
        // star, center 0, bidirectional spokes: 3·2 spoke pairs route through 0
        let star = conn(4, &[0., 1., 1., 1., 1., 0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0.]);
        let bc = betweenness(&star);
        assert_eq!(bc.as_slice(), &[6.0, 0.0, 0.0, 0.0]);
        assert_eq!(bc, betweenness_bruteforce(&star).unwrap());
    }

    #[test]
    fn betweenness_splits_ties() {
        // two equal routes 0→1→3 and 0→2→3
        let c = conn(4, &[0., 1., 1., 0., 0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 0.]);
        assert_eq!(betweenness(&c).as_slice(), &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(betweenness_bruteforce(&c).unwrap().as_slice(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn weights_shorten_paths() {
        // heavy direct edge 0→2 (length 0.5) beats 0→1→2 (length 2)
        let c = conn(3, &[0.0, 1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(betweenness(&c)[1], 0.0);
        assert_eq!(betweenness(&c.binarized())[1], 0.0);
        let weak = conn(3, &[0.0, 1.0, 0.25, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(betweenness(&weak)[1], 1.0);
    }

    #[test]
    fn pagerank_examples() {
        let x = pagerank(&cycle3(), 0.85, 1e-10).unwrap();
        for v in x.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-10);
        }
        // x₁ = 0.075 + 0.425·x₂, x₁ + x₂ = 1
        let x = pagerank(&conn(2, &[0.0, 1.0, 0.0, 0.0]), 0.85, 1e-12).unwrap();
        assert_relative_eq!(x[0], 0.5 / 1.425, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0 - 0.5 / 1.425, epsilon = 1e-10);
        let x = pagerank(&conn(4, &[0.0; 16]), 0.85, 1e-10).unwrap();
        assert!(x.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(pagerank(&cycle3(), 1.0, 1e-10).is_err());
    }

    #[test]
    fn controllability_metric_examples() {
        let zero = SystemMatrix::from_row_slice(3, &[0.0; 9]).unwrap();
        assert_relative_eq!(average_controllability(&zero, 1, 5.0).unwrap(), 5.0, max_relative = 1e-14);
        let skew = SystemMatrix::from_row_slice(2, &[0.0, 1.5, -1.5, 0.0]).unwrap();
        assert_relative_eq!(average_controllability(&skew, 0, 2.5).unwrap(), 2.5, max_relative = 1e-10);
        let scalar = SystemMatrix::from_row_slice(1, &[-1.0]).unwrap();
        assert_relative_eq!(average_controllability(&scalar, 0, 40.0).unwrap(), 0.5, max_relative = 1e-12);

        let s0 = SystemMatrix::from_row_slice(1, &[0.0]).unwrap();
        assert_relative_eq!(vce_centrality(&s0, 0, 2.0, DEFAULT_RANK_TOL).unwrap(), 2.0_f64.ln());
        assert_relative_eq!(ace_centrality(&s0, 0, 2.0, DEFAULT_RANK_TOL).unwrap(), 0.5);
        let z2 = SystemMatrix::from_row_slice(2, &[0.0; 4]).unwrap();
        assert_eq!(gramian_rank(&finite_gramian(&z2, 0, 1.0).unwrap(), DEFAULT_RANK_TOL).unwrap(), 1);
        assert!(vce_centrality(&z2, 0, 1.0, DEFAULT_RANK_TOL).unwrap().abs() < 1e-14);
        assert_relative_eq!(ace_centrality(&z2, 0, 1.0, DEFAULT_RANK_TOL).unwrap(), 1.0, max_relative = 1e-14);
        assert!(matches!(vce_from_gramian(&DMatrix::zeros(2, 2), 1e-12), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pearson_examples() {
        assert_relative_eq!(pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap(), 1.0);
        assert_relative_eq!(pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        assert_relative_eq!(pearson(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap(), 0.8, epsilon = 1e-15);
        assert!(matches!(pearson(&[1., 1.], &[1., 2.]), Err(Error::UndefinedCorrelation(_))));
    }

    fn individual(seed: f64) -> IndividualReports {
        Metric::ALL
            .into_iter()
            .enumerate()
            .map(|(k, m)| {
                let values = (0..5).map(|i| ((i * (k + 2)) as f64 * seed).sin()).collect();
                (m, CentralityReport::new(m, values))
            })
            .collect()
    }

    #[test]
    fn correlation_study_structure() {
        let same = vec![individual(0.7), individual(0.7)];
        let table = correlation_study(&same).unwrap();
        assert_eq!(table.rows.len(), 10);
        assert_eq!(table.rows[0].label, "AECS and Indegree");
        assert_eq!(table.rows[4].label, "AECS and Ave. Con.");
        assert_eq!(table.rows[9].label, "VCS and Ave. Con.");
        assert!(table.rows.iter().all(|r| r.std == Some(0.0)));

        let mixed = vec![individual(0.7), individual(1.3), individual(2.1)];
        let row = correlate_pair(&mixed, Metric::Aecs, Metric::Aecs).unwrap();
        assert_relative_eq!(row.mean.unwrap(), 1.0, epsilon = 1e-15);
        assert!(row.std.unwrap() < 1e-15);

        assert!(matches!(correlation_study(&same[..1]), Err(Error::InsufficientData(_))));
        let mut short = individual(0.7);
        short.get_mut(&Metric::Vcs).unwrap().values.pop();
        assert!(matches!(correlation_study(&[individual(0.7), short]), Err(Error::Schema(_))));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.key().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("Avg-Ctrl".parse::<Metric>().unwrap(), Metric::AvgCtrl);
    }
}
