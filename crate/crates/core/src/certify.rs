//! Numerical certificates for uniqueness of the scoring problem and for the
//! closed-form symmetric and skew-symmetric cases.
//!
//! Uniqueness holds whenever `W(x,T) = O` forces `x = 0`. The diagonal of
//! `W(x,T)` equals `R(T)x` with `R(T)ᵢⱼ = ∫₀ᵀ (e^{At})ᵢⱼ² dt`, so a
//! nonsingular `R(T)` is a sufficient condition. A failed test is reported
//! as inconclusive, never as non-unique.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{matrix_exponential, GramianSet, SystemMatrix};
use crate::objective::{evaluate, ObjectiveKind, DEFAULT_TOL_PSD};
use crate::simplex::ScoreVector;

/// Relative margin `|det R| / Π‖R_{:,j}‖` above which uniqueness is certified.
pub const TOL_CERT: f64 = 1e-10;

/// Absolute tolerance for deciding that `A` and `−A` share an eigenvalue,
/// scaled by `max(1, spectral radius)`.
pub const TOL_COMMON_EIG: f64 = 1e-8;

/// Relative change between successive Simpson refinements that ends the
/// quadrature for `R(T)`.
const R_QUAD_RTOL: f64 = 1e-10;
const R_QUAD_MIN_INTERVALS: usize = 32;
const R_QUAD_MAX_INTERVALS: usize = 1 << 20;
/// Nodes of a refinement level are marched by multiplication and re-anchored
/// with a fresh exponential this often.
const R_QUAD_RESYNC: usize = 64;

/// Tolerance on the max-deviation from `𝟏/n` used by [`classify_table1`].
pub const UNIFORM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedUnique,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessCertificate {
    #[serde(rename = "T")]
    pub t: f64,
    pub det_r: f64,
    pub margin: f64,
    pub verdict: Verdict,
    /// `A` and `−A` share an eigenvalue (the spectral sufficient condition
    /// for uniqueness at every horizon fails).
    pub common_eigs: bool,
    /// Simpson intervals used for `R(T)`.
    pub quadrature_intervals: usize,
}

impl UniquenessCertificate {
    /// Uniqueness holds for every horizon when `A` and `−A` have disjoint spectra.
    pub fn unique_for_all_horizons(&self) -> bool {
        !self.common_eigs
    }
}

fn squared_entries(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v * v)
}

/// Sum of `e^{A t_k}∘e^{A t_k}` over the odd nodes `t_k = (2j+1)h`,
/// `j = 0..count`.
fn odd_node_sum(a: &DMatrix<f64>, h: f64, count: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let step = matrix_exponential(a, 2.0 * h)?;
    let mut acc = DMatrix::zeros(n, n);
    let mut p = DMatrix::zeros(n, n);
    for j in 0..count {
        if j % R_QUAD_RESYNC == 0 {
            p = matrix_exponential(a, (2 * j + 1) as f64 * h)?;
        } else {
            p = &p * &step;
        }
        acc += squared_entries(&p);
    }
    Ok(acc)
}

/// `R(T)` together with the number of Simpson intervals used.
pub fn r_matrix_with_intervals(sys: &SystemMatrix, t: f64) -> Result<(DMatrix<f64>, usize)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("terminal time must be positive, got {t}")));
    }
    let a = sys.matrix();
    let n = sys.n();
    let ends = DMatrix::identity(n, n) + squared_entries(&matrix_exponential(a, t)?);
    // Simpson on N intervals: (h/3)(ends + 4·odd + 2·even interior)
    let mut intervals = 2;
    let mut h = t / 2.0;
    let mut interior_even = DMatrix::zeros(n, n);
    let mut interior_odd = odd_node_sum(a, h, 1)?;
    let mut estimate = (&ends + &interior_odd * 4.0) * (h / 3.0);
    loop {
        interior_even += &interior_odd;
        intervals *= 2;
        h /= 2.0;
        interior_odd = odd_node_sum(a, h, intervals / 2)?;
        let refined = (&ends + &interior_odd * 4.0 + &interior_even * 2.0) * (h / 3.0);
        let change = (&refined - &estimate).norm();
        let scale = refined.norm();
        estimate = refined;
        if intervals >= R_QUAD_MIN_INTERVALS && change <= R_QUAD_RTOL * scale {
            break;
        }
        if intervals >= R_QUAD_MAX_INTERVALS {
            break;
        }
    }
    Ok((estimate, intervals))
}

/// `R(T)ᵢⱼ = ∫₀ᵀ (e^{At})ᵢⱼ² dt` by Simpson's rule with step halving.
pub fn r_matrix(sys: &SystemMatrix, t: f64) -> Result<DMatrix<f64>> {
    r_matrix_with_intervals(sys, t).map(|(r, _)| r)
}

/// `|det R| / Π‖R_{:,j}‖`, computed on the column-normalized matrix.
fn hadamard_margin(r: &DMatrix<f64>) -> f64 {
    let mut normalized = r.clone();
    for mut col in normalized.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return 0.0;
        }
        col.unscale_mut(norm);
    }
    normalized.lu().determinant().abs()
}

/// Whether some pair of eigenvalues satisfies `λᵢ + λⱼ ≈ 0`.
pub fn has_common_eigenvalue_with_negation(sys: &SystemMatrix) -> bool {
    let eig = sys.eigenvalues();
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = TOL_COMMON_EIG * radius.max(1.0);
    eig.iter()
        .enumerate()
        .any(|(i, a)| eig[i..].iter().any(|b| (a + b).norm() <= tol))
}

pub fn uniqueness_certificate(sys: &SystemMatrix, t: f64) -> Result<UniquenessCertificate> {
    let (r, intervals) = r_matrix_with_intervals(sys, t)?;
    let margin = hadamard_margin(&r);
    let det_r = r.clone().lu().determinant();
    Ok(UniquenessCertificate {
        t,
        det_r,
        margin,
        verdict: if margin > TOL_CERT {
            Verdict::CertifiedUnique
        } else {
            Verdict::Inconclusive
        },
        common_eigs: has_common_eigenvalue_with_negation(sys),
        quadrature_intervals: intervals,
    })
}

fn uniform_gradient(gramians: &GramianSet, kind: ObjectiveKind) -> Result<DVector<f64>> {
    let p = ScoreVector::uniform(gramians.n());
    let eval = evaluate(kind, gramians, p.as_vector(), DEFAULT_TOL_PSD)?;
    if !eval.in_domain {
        return Err(Error::Domain("W(𝟏/n, T) is singular".into()));
    }
    Ok(eval.gradient)
}

fn max_deviation(v: &DVector<f64>, target: f64) -> f64 {
    v.iter().map(|x| (x - target).abs()).fold(0.0, f64::max)
}

/// `‖∇f_T(𝟏/n) + n𝟏‖_∞` from precomputed Gramians.
pub fn symmetric_stationarity_residual(gramians: &GramianSet) -> Result<f64> {
    let n = gramians.n() as f64;
    Ok(max_deviation(&uniform_gradient(gramians, ObjectiveKind::Vcs)?, -n))
}

/// For symmetric `A`, `∇f_T(𝟏/n) = −n𝟏`; returns the sup-norm deviation.
pub fn check_symmetric_stationarity(sys: &SystemMatrix, t: f64) -> Result<f64> {
    if !sys.is_symmetric() {
        return Err(Error::Structure("matrix is not symmetric".into()));
    }
    symmetric_stationarity_residual(&GramianSet::compute(sys, t)?)
}

/// `(‖∇f_T(𝟏/n) + n𝟏‖_∞, ‖∇g_T(𝟏/n) + (n²/T)𝟏‖_∞)` from precomputed Gramians.
pub fn skew_uniform_residuals(gramians: &GramianSet) -> Result<(f64, f64)> {
    let n = gramians.n() as f64;
    let t = gramians.horizon();
    let res_f = max_deviation(&uniform_gradient(gramians, ObjectiveKind::Vcs)?, -n);
    let res_g = max_deviation(&uniform_gradient(gramians, ObjectiveKind::Aecs)?, -n * n / t);
    Ok((res_f, res_g))
}

/// For skew-symmetric `A`, both gradients are constant at `𝟏/n`.
pub fn check_skew_uniform(sys: &SystemMatrix, t: f64) -> Result<(f64, f64)> {
    if !sys.is_skew_symmetric() {
        return Err(Error::Structure("matrix is not skew-symmetric".into()));
    }
    skew_uniform_residuals(&GramianSet::compute(sys, t)?)
}

/// Structural class of `A` against the uniformity of its solved scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Classification {
    pub symmetric: bool,
    pub skew_symmetric: bool,
    pub vcs_uniform: bool,
    pub aecs_uniform: bool,
    pub vcs_deviation: f64,
    pub aecs_deviation: f64,
    /// Symmetric ⇒ uniform VCS, skew-symmetric ⇒ both uniform.
    pub consistent: bool,
}

pub fn classify_table1(
    sys: &SystemMatrix,
    vcs: &ScoreVector,
    aecs: &ScoreVector,
) -> Result<Table1Classification> {
    let n = sys.n();
    if vcs.n() != n || aecs.n() != n {
        return Err(Error::Dimension(format!(
            "scores of length {} and {} do not match n = {n}",
            vcs.n(),
            aecs.n()
        )));
    }
    let target = 1.0 / n as f64;
    let vcs_deviation = max_deviation(vcs.as_vector(), target);
    let aecs_deviation = max_deviation(aecs.as_vector(), target);
    let vcs_uniform = vcs_deviation <= UNIFORM_TOL;
    let aecs_uniform = aecs_deviation <= UNIFORM_TOL;
    let symmetric = sys.is_symmetric();
    let skew_symmetric = sys.is_skew_symmetric();
    let consistent = (!symmetric || vcs_uniform) && (!skew_symmetric || (vcs_uniform && aecs_uniform));
    Ok(Table1Classification {
        symmetric,
        skew_symmetric,
        vcs_uniform,
        aecs_uniform,
        vcs_deviation,
        aecs_deviation,
        consistent,
    })
}

/// Solves both objectives at horizon `t` and classifies the result.
pub fn solve_and_classify(sys: &SystemMatrix, t: f64) -> Result<Table1Classification> {
    use crate::objective::ScoringProblem;
    use crate::solver::solve;
    let gramians = Arc::new(GramianSet::compute(sys, t)?);
    let vcs = solve(&ScoringProblem::new(ObjectiveKind::Vcs, gramians.clone()))?.final_point;
    let aecs = solve(&ScoringProblem::new(ObjectiveKind::Aecs, gramians))?.final_point;
    classify_table1(sys, &vcs, &aecs)
}
