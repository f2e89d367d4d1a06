//! Projected gradient method on the simplex with an Armijo rule along the
//! projection arc, plus first-order optimality and linear-rate diagnostics.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{eval_objective, hessian_at, objective_change_along, ObjectiveEval, ScoringProblem};
use crate::simplex::{project_simplex, ScoreVector};

/// Backtracking gives up after this many reductions of the trial step.
pub const MAX_BACKTRACKS: usize = 60;


/// Minimum trace length accepted by [`rate_report`].
pub const MIN_RATE_ITERATES: usize = 10;

/// Upper bound on the number of Hessians evaluated by [`rate_report`].
const MAX_HESSIAN_SAMPLES: usize = 200;

/// Accepted Armijo step.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub next: ScoreVector,
    pub alpha: f64,
    /// Evaluation at `next`, reused as the next iteration's starting point.
    pub eval: ObjectiveEval,
    /// `h(next) − h(p)`, computed without cancellation; never positive.
    pub change: f64,
    pub backtracks: usize,
}

/// Largest `alpha0·ρʲ` whose projected point satisfies the sufficient
/// decrease condition. Trial points outside the domain count as failures.
pub fn armijo_step(p: &ScoreVector, eval: &ObjectiveEval, prob: &ScoringProblem) -> Result<ArmijoStep> {
    if !eval.in_domain {
        return Err(Error::Domain("line search started outside the domain".into()));
    }
    let ls = prob.line_search;
    let x = p.as_vector();
    let mut alpha = ls.alpha0;
    for backtracks in 0..=MAX_BACKTRACKS {
        let trial = project_simplex(&(x - &eval.gradient * alpha))?;
        let trial_eval = eval_objective(&trial, prob)?;
        if trial_eval.in_domain {
            // the step lies in the simplex plane; dropping its round-off
            // component along 𝟏 keeps −5·1e-16 drifts from masking the decrease
            let mut d = trial.as_vector() - x;
            d.add_scalar_mut(-d.mean());
            let decrease = eval.gradient.dot(&d);
            let change = objective_change_along(prob.kind, &prob.gramians, x, &d, prob.tol_psd)?;
            if let Some(change) = change.filter(|c| *c <= (ls.sigma * decrease).min(0.0)) {
                return Ok(ArmijoStep { next: trial, alpha, eval: trial_eval, change, backtracks });
            }
        }
        alpha *= ls.rho;
    }
    Err(Error::Stall(MAX_BACKTRACKS))
}

/// Full record of one projected-gradient run.
#[derive(Debug, Clone, Serialize)]
pub struct SolveTrace {
    /// `p^(0), p^(1), …`, starting from the uniform vector.
    pub iterates: Vec<ScoreVector>,
    /// Objective value at each iterate: the value at `𝟏/n` followed by the
    /// accumulated per-step changes.
    pub values: Vec<f64>,
    /// Accepted step size of each iteration.
    pub step_sizes: Vec<f64>,
    pub final_point: ScoreVector,
    pub converged: bool,
    pub iterations: usize,
    /// `‖p^(K) − p^(K−1)‖` of the last iteration.
    pub final_step_norm: f64,
}

/// Runs the projected gradient method from `𝟏/n` until the step norm drops
/// to `eps_step` or `max_iter` iterations have been taken.
pub fn solve(prob: &ScoringProblem) -> Result<SolveTrace> {
    prob.validate()?;
    let n = prob.n();
    let mut p = ScoreVector::uniform(n);
    let mut eval = eval_objective(&p, prob)?;
    if !eval.in_domain {
        return Err(Error::Domain("uniform starting point is outside the domain".into()));
    }
    let mut trace = SolveTrace {
        iterates: vec![p.clone()],
        values: vec![eval.value],
        step_sizes: Vec::new(),
        final_point: p.clone(),
        converged: false,
        iterations: 0,
        final_step_norm: f64::INFINITY,
    };
    for _ in 0..prob.stop.max_iter {
        let step = armijo_step(&p, &eval, prob)?;
        let step_norm = (step.next.as_vector() - p.as_vector()).norm();
        p = step.next;
        eval = step.eval;
        trace.iterates.push(p.clone());
        let last = trace.values[trace.values.len() - 1];
        trace.values.push(last + step.change);
        trace.step_sizes.push(step.alpha);
        trace.iterations += 1;
        trace.final_step_norm = step_norm;
        if step_norm <= prob.stop.eps_step {
            trace.converged = true;
            break;
        }
    }
    trace.final_point = p;
    Ok(trace)
}

/// First-order optimality gap `max_i −∇h(p)ᵀ(e_i − p)`, clipped at zero.
pub fn kkt_residual(p: &ScoreVector, prob: &ScoringProblem) -> Result<f64> {
    let eval = eval_objective(p, prob)?;
    if !eval.in_domain {
        return Err(Error::Domain("KKT residual requested outside the domain".into()));
    }
    Ok(gradient_gap(p, &eval.gradient))
}

fn gradient_gap(p: &ScoreVector, gradient: &DVector<f64>) -> f64 {
    let inner = gradient.dot(p.as_vector());
    (inner - gradient.min()).max(0.0)
}

/// Linear-convergence diagnostics of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Largest Hessian eigenvalue seen along the trace.
    pub l_est: f64,
    /// Smallest Hessian eigenvalue seen along the trace.
    pub m_est: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// `max{|1−α_max L|, |1−α_min L|, |1−α_max m|, |1−α_min m|}`.
    pub r_theoretical: f64,
    /// `exp` of the fitted slope of `log‖p^(k) − p*‖` against `k`.
    pub r_empirical: f64,
    /// Fitted slope of `log‖p^(k) − p*‖`.
    pub slope: f64,
    pub fit_r2: f64,
    /// Whether every accepted step stayed below `2 / L`.
    pub step_condition_holds: bool,
    /// `max_k ‖p^(k+1) − p*‖ − r·‖p^(k) − p*‖`; nonpositive when the
    /// contraction estimate holds along the whole trace.
    pub max_contraction_excess: f64,
}

/// Least-squares line through `(k, log dₖ)`; zero distances are skipped.
/// Returns `(slope, r²)`.
pub fn fit_log_linear(distances: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0 && d.is_finite())
        .map(|(k, d)| (k as f64, d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 nonzero distances for a rate fit, got {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, r2))
}

/// Distances `‖p^(k) − p*‖` with `p*` the final iterate of the trace.
pub fn distances_to_final(trace: &SolveTrace) -> Vec<f64> {
    let target = trace.final_point.as_vector();
    trace.iterates.iter().map(|p| (p.as_vector() - target).norm()).collect()
}

pub fn rate_report(trace: &SolveTrace, prob: &ScoringProblem) -> Result<RateReport> {
    if trace.iterates.len() < MIN_RATE_ITERATES {
        return Err(Error::InsufficientData(format!(
            "rate estimation needs at least {MIN_RATE_ITERATES} iterates, got {}",
            trace.iterates.len()
        )));
    }
    let stride = trace.iterates.len().div_ceil(MAX_HESSIAN_SAMPLES);
    let mut l_est = f64::NEG_INFINITY;
    let mut m_est = f64::INFINITY;
    for p in trace.iterates.iter().step_by(stride) {
        let h = hessian_at(prob.kind, &prob.gramians, p.as_vector(), prob.tol_psd)?;
        let eig = SymmetricEigen::new(h).eigenvalues;
        l_est = l_est.max(eig.max());
        m_est = m_est.min(eig.min());
    }
    let alpha_min = trace.step_sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_max = trace.step_sizes.iter().copied().fold(0.0, f64::max);
    let r_theoretical = [
        (1.0 - alpha_max * l_est).abs(),
        (1.0 - alpha_min * l_est).abs(),
        (1.0 - alpha_max * m_est).abs(),
        (1.0 - alpha_min * m_est).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let dist = distances_to_final(trace);
    let fit_len = dist.len() - 2;
    let (slope, fit_r2) = fit_log_linear(&dist[..fit_len])?;
    let max_contraction_excess = dist
        .windows(2)
        .map(|w| w[1] - r_theoretical * w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RateReport {
        l_est,
        m_est,
        alpha_min,
        alpha_max,
        r_theoretical,
        r_empirical: slope.exp(),
        slope,
        fit_r2,
        step_condition_holds: alpha_max < 2.0 / l_est,
        max_contraction_excess,
    })
}
