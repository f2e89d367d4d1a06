//! The scoring objectives `f_T(p) = −log det W(p,T)` (VCS) and
//! `g_T(p) = tr W(p,T)⁻¹` (AECS), their gradients and Hessians, and the
//! small-horizon surrogates obtained from `W(p,T) ≈ T·diag(p)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{symmetrize, GramianSet};
use crate::simplex::ScoreVector;

/// Pivot threshold of the positive-definiteness guard, relative to `tr W / n`.
pub const DEFAULT_TOL_PSD: f64 = 1e-12;

/// Objective value reported for points outside the domain `W(p,T) ≻ 0`.
pub const OUT_OF_DOMAIN: f64 = f64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// Volumetric controllability score, `−log det W`.
    Vcs,
    /// Average energy controllability score, `tr W⁻¹`.
    Aecs,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 2] = [ObjectiveKind::Vcs, ObjectiveKind::Aecs];

    pub fn label(self) -> &'static str {
        match self {
            ObjectiveKind::Vcs => "VCS",
            ObjectiveKind::Aecs => "AECS",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vcs" => Ok(ObjectiveKind::Vcs),
            "aecs" => Ok(ObjectiveKind::Aecs),
            other => Err(Error::InvalidInput(format!("unknown objective '{other}'"))),
        }
    }
}

/// Armijo constants: sufficient-decrease `sigma`, backtracking factor `rho`,
/// and the initial trial step `alpha0` retried every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub sigma: f64,
    pub rho: f64,
    pub alpha0: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { sigma: 1e-4, rho: 0.5, alpha0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once `‖p^(k+1) − p^(k)‖ ≤ eps_step`.
    pub eps_step: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { eps_step: 1e-10, max_iter: 10_000 }
    }
}

/// One instance of the finite-time scoring problem.
#[derive(Debug, Clone)]
pub struct ScoringProblem {
    pub kind: ObjectiveKind,
    pub gramians: Arc<GramianSet>,
    pub tol_psd: f64,
    pub line_search: LineSearch,
    pub stop: StopRule,
}

impl ScoringProblem {
    pub fn new(kind: ObjectiveKind, gramians: Arc<GramianSet>) -> Self {
        Self {
            kind,
            gramians,
            tol_psd: DEFAULT_TOL_PSD,
            line_search: LineSearch::default(),
            stop: StopRule::default(),
        }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_line_search(mut self, line_search: LineSearch) -> Self {
        self.line_search = line_search;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.gramians.horizon()
    }

    pub fn n(&self) -> usize {
        self.gramians.n()
    }

    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(ls.sigma > 0.0 && ls.sigma < 1.0 && ls.rho > 0.0 && ls.rho < 1.0) {
            return Err(Error::InvalidInput(format!(
                "line search needs sigma, rho in (0,1); got sigma={}, rho={}",
                ls.sigma, ls.rho
            )));
        }
        if !(ls.alpha0 > 0.0 && ls.alpha0.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha0 must be positive, got {}", ls.alpha0)));
        }
        if !(self.stop.eps_step >= 0.0) {
            return Err(Error::InvalidInput("eps_step must be nonnegative".into()));
        }
        if !(self.tol_psd >= 0.0) {
            return Err(Error::InvalidInput("tol_psd must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Objective value and gradient at one point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub in_domain: bool,
    /// The assembled `W(p,T)`.
    pub gramian_weighted: DMatrix<f64>,
}

fn check_dims(len: usize, gramians: &GramianSet) -> Result<()> {
    if len != gramians.n() {
        return Err(Error::Dimension(format!(
            "weight vector has length {len} but the system has {} nodes",
            gramians.n()
        )));
    }
    Ok(())
}

fn weighted_sum(p: &DVector<f64>, gramians: &GramianSet) -> DMatrix<f64> {
    let n = gramians.n();
    let mut w = DMatrix::zeros(n, n);
    for (pi, wi) in p.iter().zip(gramians.iter()) {
        if *pi != 0.0 {
            w += wi * *pi;
        }
    }
    symmetrize(&w)
}

/// `W(p,T) = Σ pᵢ Wᵢ(T)`.
pub fn weighted_gramian(p: &ScoreVector, gramians: &GramianSet) -> Result<DMatrix<f64>> {
    check_dims(p.n(), gramians)?;
    Ok(weighted_sum(p.as_vector(), gramians))
}

/// Cholesky factor of `W` if every pivot clears `tol·tr(W)/n`.
fn guarded_cholesky(w: &DMatrix<f64>, tol: f64) -> Option<Cholesky<f64, Dyn>> {
    let n = w.nrows();
    let floor = tol * w.trace() / n as f64;
    let chol = Cholesky::new(w.clone())?;
    let l = chol.l_dirty();
    if (0..n).all(|i| l[(i, i)] * l[(i, i)] > floor) {
        Some(chol)
    } else {
        None
    }
}

/// Frobenius inner product `tr(XᵀY)`.
fn frob(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.dot(y)
}

/// Evaluates the objective and its gradient at an arbitrary weight vector.
///
/// Points where `W(p,T)` fails the Cholesky guard come back with
/// `in_domain = false` and the [`OUT_OF_DOMAIN`] sentinel value.
pub fn evaluate(
    kind: ObjectiveKind,
    gramians: &GramianSet,
    p: &DVector<f64>,
    tol_psd: f64,
) -> Result<ObjectiveEval> {
    check_dims(p.len(), gramians)?;
    let n = gramians.n();
    let w = weighted_sum(p, gramians);
    let Some(chol) = guarded_cholesky(&w, tol_psd) else {
        return Ok(ObjectiveEval {
            value: OUT_OF_DOMAIN,
            gradient: DVector::zeros(n),
            in_domain: false,
            gramian_weighted: w,
        });
    };
    let l = chol.l_dirty();
    let inv = symmetrize(&chol.solve(&DMatrix::identity(n, n)));
    let (value, gradient) = match kind {
        ObjectiveKind::Vcs => {
            let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
            // (∇f)ᵢ = −tr(W⁻¹Wᵢ)
            let g = DVector::from_iterator(n, gramians.iter().map(|wi| -frob(&inv, wi)));
            (-logdet, g)
        }
        ObjectiveKind::Aecs => {
            let inv2 = symmetrize(&(&inv * &inv));
            // (∇g)ᵢ = −tr(W⁻¹WᵢW⁻¹) = −⟨W⁻², Wᵢ⟩
            let g = DVector::from_iterator(n, gramians.iter().map(|wi| -frob(&inv2, wi)));
            (inv.trace(), g)
        }
    };
    Ok(ObjectiveEval { value, gradient, in_domain: true, gramian_weighted: w })
}

/// `h(q) − h(p)` from `ΔW = Σ (qᵢ − pᵢ)Wᵢ`, free of the cancellation in
/// subtracting two nearly equal values. `None` if either point is outside
/// the domain.
pub fn objective_change(
    kind: ObjectiveKind,
    gramians: &GramianSet,
    p: &DVector<f64>,
    q: &DVector<f64>,
    tol_psd: f64,
) -> Result<Option<f64>> {
    check_dims(q.len(), gramians)?;
    objective_change_along(kind, gramians, p, &(q - p), tol_psd)
}

/// `h(p + d) − h(p)`; see [`objective_change`].
pub fn objective_change_along(
    kind: ObjectiveKind,
    gramians: &GramianSet,
    p: &DVector<f64>,
    d: &DVector<f64>,
    tol_psd: f64,
) -> Result<Option<f64>> {
    check_dims(p.len(), gramians)?;
    check_dims(d.len(), gramians)?;
    let n = gramians.n();
    let (Some(cp), Some(cq)) = (
        guarded_cholesky(&weighted_sum(p, gramians), tol_psd),
        guarded_cholesky(&weighted_sum(&(p + d), gramians), tol_psd),
    ) else {
        return Ok(None);
    };
    let dw = weighted_sum(d, gramians);
    let change = match kind {
        ObjectiveKind::Vcs => {
            // −log det(I + L⁻¹ΔWL⁻ᵀ) with W(p) = LLᵀ
            let l = cp.l();
            let x = l.solve_lower_triangular(&dw).expect("nonsingular factor");
            let s = l.solve_lower_triangular(&x.transpose()).expect("nonsingular factor");
            let mu = SymmetricEigen::new(symmetrize(&s)).eigenvalues;
            -mu.iter().map(|m| m.ln_1p()).sum::<f64>()
        }
        ObjectiveKind::Aecs => {
            // tr W(q)⁻¹ − tr W(p)⁻¹ = −tr(W(q)⁻¹ ΔW W(p)⁻¹)
            let id = DMatrix::identity(n, n);
            let inv_p = cp.solve(&id);
            let inv_q = cq.solve(&id);
            -frob(&inv_q, &(&dw * &inv_p).transpose())
        }
    };
    Ok(Some(change))
}

pub fn eval_objective(p: &ScoreVector, prob: &ScoringProblem) -> Result<ObjectiveEval> {
    evaluate(prob.kind, &prob.gramians, p.as_vector(), prob.tol_psd)
}

/// Hessian at an arbitrary in-domain weight vector.
pub fn hessian_at(
    kind: ObjectiveKind,
    gramians: &GramianSet,
    p: &DVector<f64>,
    tol_psd: f64,
) -> Result<DMatrix<f64>> {
    check_dims(p.len(), gramians)?;
    let n = gramians.n();
    let w = weighted_sum(p, gramians);
    let chol = guarded_cholesky(&w, tol_psd)
        .ok_or_else(|| Error::Domain("W(p,T) is singular at this point".into()))?;
    let inv = symmetrize(&chol.solve(&DMatrix::identity(n, n)));
    // Mᵢ = W⁻¹Wᵢ
    let m: Vec<DMatrix<f64>> = gramians.iter().map(|wi| &inv * wi).collect();
    let mut h = DMatrix::zeros(n, n);
    match kind {
        ObjectiveKind::Vcs => {
            let mt: Vec<DMatrix<f64>> = m.iter().map(|x| x.transpose()).collect();
            for i in 0..n {
                for j in 0..=i {
                    // tr(MᵢMⱼ)
                    let v = frob(&m[i], &mt[j]);
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
        }
        ObjectiveKind::Aecs => {
            // Nⱼ = W⁻¹WⱼW⁻¹ (symmetric)
            let nm: Vec<DMatrix<f64>> = m.iter().map(|mj| symmetrize(&(mj * &inv))).collect();
            for i in 0..n {
                for j in 0..=i {
                    // tr(MᵢNⱼ) + tr(MⱼNᵢ)
                    let v = frob(&m[i].transpose(), &nm[j]) + frob(&m[j].transpose(), &nm[i]);
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
        }
    }
    Ok(h)
}

pub fn eval_hessian(p: &ScoreVector, prob: &ScoringProblem) -> Result<DMatrix<f64>> {
    hessian_at(prob.kind, &prob.gramians, p.as_vector(), prob.tol_psd)
}

/// Small-horizon surrogate of the objective, `W(p,T) ≈ T·diag(p)`:
/// `−n log T − Σ log pᵢ` for VCS and `(1/T) Σ 1/pᵢ` for AECS.
pub fn eval_surrogate(p: &ScoreVector, t: f64, kind: ObjectiveKind) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("terminal time must be positive, got {t}")));
    }
    if !p.is_interior() {
        return Err(Error::Domain("surrogate objectives need strictly positive weights".into()));
    }
    let n = p.n() as f64;
    Ok(match kind {
        ObjectiveKind::Vcs => -n * t.ln() - p.as_slice().iter().map(|x| x.ln()).sum::<f64>(),
        ObjectiveKind::Aecs => p.as_slice().iter().map(|x| 1.0 / x).sum::<f64>() / t,
    })
}

/// The common minimizer of both surrogates: the uniform vector.
pub fn surrogate_minimizer(n: usize) -> ScoreVector {
    ScoreVector::uniform(n)
}
