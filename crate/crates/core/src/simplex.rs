//! Euclidean projection onto the standard simplex.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ pᵢ = 1` for a valid score vector.
pub const SUM_TOL: f64 = 1e-12;

/// A point on the standard simplex: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreVector(DVector<f64>);

impl ScoreVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("score vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("score entries must be finite and nonnegative".into()));
        }
        let sum = values.sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Domain(format!("score entries sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "uniform score vector needs n >= 1");
        Self(DVector::from_element(n, 1.0 / n as f64))
    }

    /// The vertex `e_i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Self(v)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    /// Whether every component is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|v| *v > 0.0)
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(v))
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(s: ScoreVector) -> Self {
        s.0.as_slice().to_vec()
    }
}

impl std::ops::Index<usize> for ScoreVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn renormalize(mut p: DVector<f64>) -> ScoreVector {
    let sum = p.sum();
    p.unscale_mut(sum);
    ScoreVector(p)
}

/// `argmin_{p ∈ Δ} ‖p − v‖` by the sort-based threshold rule
/// `pᵢ = max(vᵢ − τ, 0)`.
pub fn project_simplex(v: &DVector<f64>) -> Result<ScoreVector> {
    if v.is_empty() {
        return Err(Error::Dimension("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("cannot project a non-finite vector".into()));
    }
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    let p = v.map(|x| if x - tau > 0.0 { x - tau } else { 0.0 });
    Ok(renormalize(p))
}

/// Largest dimension accepted by [`project_simplex_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 6;

/// Projection by enumerating every support set and solving the
/// equality-constrained least-squares problem on it in closed form.
pub fn project_simplex_bruteforce(v: &DVector<f64>) -> Result<ScoreVector> {
    let n = v.len();
    if n == 0 {
        return Err(Error::Dimension("cannot project an empty vector".into()));
    }
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::Size(format!("brute-force projection supports n <= {BRUTEFORCE_MAX_N}, got {n}")));
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut p = DVector::zeros(n);
        let mut feasible = true;
        for &i in &support {
            p[i] = v[i] - shift;
            if p[i] < 0.0 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let dist = (&p - v).norm_squared();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, p));
        }
    }
    let (_, p) = best.expect("the single-vertex supports always contain a feasible point");
    Ok(renormalize(p))
}
