//! Dense linear-algebra kernels: matrix exponential, finite- and
//! infinite-horizon single-input controllability Gramians, and the
//! truncation bound relating the two for stable diagonalizable systems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance used for structural detection (symmetry, skew-symmetry,
/// stability).
pub const TOL_STRUCT: f64 = 1e-10;

/// Eigenvector matrices with a larger 2-norm condition number are treated as
/// numerically defective.
pub const MAX_EIGVEC_CONDITION: f64 = 1e8;

/// Target 1-norm of `A·h` on the base interval of the Gramian doubling scheme.
const BASE_STEP_NORM: f64 = 0.5;

/// The state matrix `A` of `ẋ = Ax` together with cached structural flags.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    a: DMatrix<f64>,
    eigenvalues: Vec<Complex64>,
    symmetric: bool,
    skew_symmetric: bool,
    stable: bool,
}

impl SystemMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "system matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::Dimension("system matrix is empty".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("system matrix has non-finite entries".into()));
        }
        let scale = a.amax().max(1.0);
        let n = a.nrows();
        let mut sym_res = 0.0_f64;
        let mut skew_res = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                sym_res = sym_res.max((a[(i, j)] - a[(j, i)]).abs());
                skew_res = skew_res.max((a[(i, j)] + a[(j, i)]).abs());
            }
        }
        let eigenvalues = eigenvalues(&a);
        let abscissa = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            symmetric: sym_res <= TOL_STRUCT * scale,
            skew_symmetric: skew_res <= TOL_STRUCT * scale,
            stable: abscissa < -TOL_STRUCT,
            eigenvalues,
            a,
        })
    }

    pub fn from_row_slice(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_skew_symmetric(&self) -> bool {
        self.skew_symmetric
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Largest real part over the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    a.complex_eigenvalues().iter().copied().collect()
}

fn check_square_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("terminal time must be positive and finite, got {t}")));
    }
    Ok(())
}

fn check_node(n: usize, i: usize) -> Result<()> {
    if i >= n {
        return Err(Error::Dimension(format!("node index {i} out of range for n = {n}")));
    }
    Ok(())
}

/// `e^{At}` by scaling and squaring with Padé approximants.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_square_finite(a)?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    let scaled = a * t;
    let e = scaled.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix exponential overflowed".into()));
    }
    Ok(e)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Van Loan block exponential on `[0, h]`: returns `(W_i(h), e^{Ah})`.
fn van_loan(a: &DMatrix<f64>, i: usize, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a));
    m[(i, n + i)] = 1.0;
    m.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    let e = matrix_exponential(&m, h)?;
    let g2 = e.view((0, n), (n, n)).into_owned();
    let f3 = e.view((n, n), (n, n)).into_owned();
    let w = f3.transpose() * g2;
    Ok((symmetrize(&w), f3.transpose()))
}

/// Number of doublings so that the base interval `T / 2^k` is short relative
/// to `‖A‖₁`.
fn doubling_levels(a: &DMatrix<f64>, t: f64) -> u32 {
    let norm1 = (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let ratio = norm1 * t / BASE_STEP_NORM;
    if ratio <= 1.0 {
        0
    } else {
        (ratio.log2().ceil() as u32).min(60)
    }
}

/// Finite-horizon Gramian `W_i(T) = ∫₀ᵀ e^{At} e_i e_iᵀ e^{Aᵀt} dt` for the
/// zero-based node index `i`.
///
/// The integral over a short base interval `T/2^k` is obtained exactly from
/// the Van Loan block exponential `exp([[−A, e_i e_iᵀ], [0, Aᵀ]]·h)`; the
/// horizon is then doubled with `W(2t) = W(t) + e^{At} W(t) e^{Aᵀt}`, which
/// only ever adds PSD terms and never forms `e^{−AT}` for long horizons.
pub fn finite_gramian(sys: &SystemMatrix, i: usize, t: f64) -> Result<DMatrix<f64>> {
    check_node(sys.n(), i)?;
    check_horizon(t)?;
    let levels = doubling_levels(sys.matrix(), t);
    let h = t / f64::powi(2.0, levels as i32);
    let (mut w, mut e) = van_loan(sys.matrix(), i, h)?;
    for _ in 0..levels {
        w = symmetrize(&(&w + &e * &w * e.transpose()));
        e = &e * &e;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("gramian overflowed".into()));
    }
    Ok(w)
}

/// Composite Simpson approximation of `W_i(T)` with `steps` subintervals.
/// Serves as an independent check of [`finite_gramian`].
pub fn finite_gramian_quadrature(
    sys: &SystemMatrix,
    i: usize,
    t: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    check_node(sys.n(), i)?;
    check_horizon(t)?;
    if steps < 2 || steps % 2 != 0 {
        return Err(Error::InvalidInput(format!("Simpson needs an even step count >= 2, got {steps}")));
    }
    let n = sys.n();
    let h = t / steps as f64;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for k in 0..=steps {
        let weight = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let e = matrix_exponential(sys.matrix(), k as f64 * h)?;
        let col = e.column(i);
        acc += (&col * col.transpose()) * weight;
    }
    Ok(symmetrize(&(acc * (h / 3.0))))
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Infinite-horizon Gramian `W_i^∞`, the PSD solution of
/// `A W + W Aᵀ + e_i e_iᵀ = 0`. Requires `A` stable.
pub fn infinite_gramian(sys: &SystemMatrix, i: usize) -> Result<DMatrix<f64>> {
    check_node(sys.n(), i)?;
    if !sys.is_stable() {
        return Err(Error::NotStable(sys.spectral_abscissa()));
    }
    let mut q = DMatrix::<f64>::zeros(sys.n(), sys.n());
    q[(i, i)] = 1.0;
    lyapunov(sys.matrix(), &q)
}

/// Solves `A X + X Aᵀ + Q = 0` by a complex Schur (Bartels–Stewart) sweep.
fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let (u, s) = to_complex(a).schur().unpack();
    let c = -(u.adjoint() * to_complex(q) * &u);
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut rhs = c[(i, j)];
            for k in (i + 1)..n {
                rhs -= s[(i, k)] * y[(k, j)];
            }
            for k in (j + 1)..n {
                rhs -= y[(i, k)] * s[(j, k)].conj();
            }
            let denom = s[(i, i)] + s[(j, j)].conj();
            if denom.norm() == 0.0 {
                return Err(Error::NotStable(0.0));
            }
            y[(i, j)] = rhs / denom;
        }
    }
    let x = (&u * y * u.adjoint()).map(|z| z.re);
    Ok(symmetrize(&x))
}

/// Unit-norm eigenvector matrix of `A` from back substitution on the complex
/// Schur factor. Near-coincident eigenvalues get a perturbed pivot, so a
/// defective matrix shows up as an exploding condition number.
fn eigenvector_matrix(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let (u, s) = to_complex(a).schur().unpack();
    let smin = (f64::EPSILON * s.iter().map(|z| z.norm()).fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
    let mut x = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let lambda = s[(k, k)];
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in (j + 1)..=k {
                acc += s[(j, m)] * x[(m, k)];
            }
            let mut denom = s[(j, j)] - lambda;
            if denom.norm() < smin {
                denom = Complex64::new(smin, 0.0);
            }
            x[(j, k)] = -acc / denom;
        }
    }
    let mut v = u * x;
    for k in 0..n {
        let norm = v.column(k).norm();
        if norm > 0.0 && norm.is_finite() {
            v.column_mut(k).unscale_mut(norm);
        }
    }
    v
}

/// 2-norm condition number of the unit-column eigenvector matrix.
pub fn eigenvector_condition(sys: &SystemMatrix) -> f64 {
    let v = eigenvector_matrix(sys.matrix());
    if v.iter().any(|z| !z.is_finite()) {
        return f64::INFINITY;
    }
    let sv = v.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Operator 2-norm of a symmetric matrix.
pub fn symmetric_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailBoundReport {
    /// Spectral abscissa `max Re λ`.
    pub alpha: f64,
    /// Bound constant `−κ(V)² / (2α)` with `V` the unit-column eigenvector matrix.
    pub c: f64,
    /// Smallest horizon for which the truncation is below `eps`.
    pub t_star: f64,
    /// Largest `‖W_i^∞ − W_i(T)‖₂` over nodes.
    pub residual_norm: f64,
    /// `c · e^{2αT}`.
    pub bound: f64,
    pub eigvec_condition: f64,
    pub holds: bool,
}

/// Truncation report for a stable diagonalizable `A` at horizon `t`.
pub fn tail_bound(sys: &SystemMatrix, t: f64, eps: f64) -> Result<TailBoundReport> {
    check_horizon(t)?;
    if !sys.is_stable() {
        return Err(Error::NotStable(sys.spectral_abscissa()));
    }
    let kappa = eigenvector_condition(sys);
    if !(kappa <= MAX_EIGVEC_CONDITION) {
        return Err(Error::NotDiagonalizable(kappa));
    }
    let alpha = sys.spectral_abscissa();
    let c = -(kappa * kappa) / (2.0 * alpha);
    if !(eps > 0.0 && eps < c) {
        return Err(Error::Domain(format!("tolerance must satisfy 0 < eps < c = {c}, got {eps}")));
    }
    let t_star = (eps / c).ln() / (2.0 * alpha);
    let bound = c * (2.0 * alpha * t).exp();
    let mut residual_norm = 0.0_f64;
    for i in 0..sys.n() {
        let tail = infinite_gramian(sys, i)? - finite_gramian(sys, i, t)?;
        residual_norm = residual_norm.max(symmetric_norm(&tail));
    }
    Ok(TailBoundReport {
        alpha,
        c,
        t_star,
        residual_norm,
        bound,
        eigvec_condition: kappa,
        holds: residual_norm <= bound * (1.0 + 1e-9),
    })
}

/// All `n` single-input Gramians of one system at a fixed horizon.
#[derive(Debug, Clone)]
pub struct GramianSet {
    t: f64,
    gramians: Vec<DMatrix<f64>>,
}

impl GramianSet {
    pub fn compute(sys: &SystemMatrix, t: f64) -> Result<Self> {
        let gramians = (0..sys.n())
            .map(|i| finite_gramian(sys, i, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t, gramians })
    }

    /// Wraps precomputed Gramians after checking shapes.
    pub fn from_parts(t: f64, gramians: Vec<DMatrix<f64>>) -> Result<Self> {
        check_horizon(t)?;
        let n = gramians.len();
        if n == 0 {
            return Err(Error::Dimension("empty gramian set".into()));
        }
        if gramians.iter().any(|w| w.nrows() != n || w.ncols() != n) {
            return Err(Error::Dimension(format!("every gramian must be {n}x{n}")));
        }
        Ok(Self { t, gramians })
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.gramians.len()
    }

    pub fn get(&self, i: usize) -> &DMatrix<f64> {
        &self.gramians[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.gramians.iter()
    }

    pub fn traces(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.gramians.iter().map(|w| w.trace()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sys(n: usize, v: &[f64]) -> SystemMatrix {
        SystemMatrix::from_row_slice(n, v).unwrap()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&DMatrix::zeros(2, 2), 5.0).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn exp_of_nilpotent() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&a, 1.0).unwrap();
        assert_relative_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn exp_scalar_matches_series() {
        // e^{-1} by direct series summation
        let mut term = 1.0_f64;
        let mut sum = 1.0_f64;
        for k in 1..30 {
            term *= -1.0 / k as f64;
            sum += term;
        }
        let e = matrix_exponential(&DMatrix::from_element(1, 1, -1.0), 1.0).unwrap();
        assert!((e[(0, 0)] - sum).abs() <= 1e-12 * sum);
    }

    #[test]
    fn exp_rejects_bad_input() {
        assert!(matches!(
            matrix_exponential(&DMatrix::zeros(2, 3), 1.0),
            Err(Error::Dimension(_))
        ));
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(matrix_exponential(&a, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn structural_flags() {
        assert!(sys(2, &[0.0, 1.0, -1.0, 0.0]).is_skew_symmetric());
        assert!(!sys(2, &[0.0, 1.0, -1.0, 0.0]).is_stable());
        let s = sys(2, &[-2.0, 1.0, 1.0, -2.0]);
        assert!(s.is_symmetric() && s.is_stable() && !s.is_skew_symmetric());
        let z = sys(2, &[0.0; 4]);
        assert!(z.is_symmetric() && z.is_skew_symmetric() && !z.is_stable());
    }

    #[test]
    fn gramian_scalar_cases() {
        let w = finite_gramian(&sys(1, &[0.0]), 0, 2.0).unwrap();
        assert_relative_eq!(w[(0, 0)], 2.0, epsilon = 1e-14);
        let w = finite_gramian(&sys(1, &[-1.0]), 0, 1.0).unwrap();
        let exact = (1.0 - (-2.0_f64).exp()) / 2.0;
        assert_relative_eq!(w[(0, 0)], exact, max_relative = 1e-13);
        assert_relative_eq!(w[(0, 0)], 0.432332, epsilon = 1e-6);
    }

    #[test]
    fn gramian_rejects_nonpositive_horizon() {
        assert!(matches!(finite_gramian(&sys(1, &[0.0]), 0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(finite_gramian(&sys(1, &[0.0]), 0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(finite_gramian(&sys(1, &[0.0]), 1, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn skew_uniform_weighted_gramian() {
        let s = sys(2, &[0.0, 1.0, -1.0, 0.0]);
        for t in [1.0, 4.0, 30.0] {
            let g = GramianSet::compute(&s, t).unwrap();
            let w = (g.get(0) + g.get(1)) * 0.5;
            assert_relative_eq!(w, DMatrix::identity(2, 2) * (t / 2.0), epsilon = 1e-12 * t);
        }
    }

    #[test]
    fn quadrature_cases() {
        let w = finite_gramian_quadrature(&sys(1, &[0.0]), 0, 2.0, 64).unwrap();
        assert!((w[(0, 0)] - 2.0).abs() < 1e-12);
        let s = sys(1, &[-1.0]);
        let q = finite_gramian_quadrature(&s, 0, 1.0, 256).unwrap();
        let v = finite_gramian(&s, 0, 1.0).unwrap();
        assert!((q[(0, 0)] - v[(0, 0)]).abs() < 1e-10);
        let rot = sys(2, &[0.0, 1.0, -1.0, 0.0]);
        let q = finite_gramian_quadrature(&rot, 0, 3.0, 512).unwrap();
        assert!((q.trace() - 3.0).abs() < 1e-10);
        assert!(min_eigenvalue(&q) >= -1e-10 * q.trace());
        assert!(matches!(
            finite_gramian_quadrature(&rot, 0, 3.0, 3),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn infinite_gramian_cases() {
        let w = infinite_gramian(&sys(1, &[-1.0]), 0).unwrap();
        assert_relative_eq!(w[(0, 0)], 0.5, epsilon = 1e-15);
        let w = infinite_gramian(&sys(2, &[-1.0, 0.0, 0.0, -1.0]), 0).unwrap();
        assert_relative_eq!(w, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]), epsilon = 1e-15);
        let w = infinite_gramian(&sys(2, &[-1.0, 0.0, 0.0, -2.0]), 1).unwrap();
        assert_relative_eq!(w, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.25]), epsilon = 1e-15);
        assert!(matches!(
            infinite_gramian(&sys(2, &[0.0, 1.0, -1.0, 0.0]), 0),
            Err(Error::NotStable(_))
        ));
    }

    #[test]
    fn infinite_gramian_solves_lyapunov() {
        let s = sys(3, &[-1.0, 2.0, 0.0, -0.5, -1.5, 0.3, 0.2, 0.1, -0.7]);
        for i in 0..3 {
            let w = infinite_gramian(&s, i).unwrap();
            let mut r = s.matrix() * &w + &w * s.matrix().transpose();
            r[(i, i)] += 1.0;
            assert!(r.amax() < 1e-12);
        }
    }

    #[test]
    fn tail_bound_scalar_is_tight() {
        let s = sys(1, &[-1.0]);
        let r = tail_bound(&s, 1.0, 0.01).unwrap();
        assert_relative_eq!(r.alpha, -1.0, epsilon = 1e-14);
        assert_relative_eq!(r.c, 0.5, epsilon = 1e-14);
        let expected = (-2.0_f64).exp() / 2.0;
        assert!((r.residual_norm - expected).abs() < 1e-12);
        assert!((r.bound - expected).abs() < 1e-12);
        assert!(r.holds);
        // log(0.02) / (-2)
        assert_relative_eq!(r.t_star, 1.956011502714073, epsilon = 1e-12);
    }

    #[test]
    fn tail_bound_identity_has_unit_condition() {
        let s = sys(2, &[-1.0, 0.0, 0.0, -1.0]);
        for t in [0.3, 1.0, 5.0] {
            let r = tail_bound(&s, t, 0.1).unwrap();
            assert_relative_eq!(r.eigvec_condition, 1.0, epsilon = 1e-12);
            assert!(r.holds);
        }
    }

    #[test]
    fn tail_bound_errors() {
        assert!(matches!(
            tail_bound(&sys(1, &[1.0]), 1.0, 0.01),
            Err(Error::NotStable(_))
        ));
        assert!(matches!(
            tail_bound(&sys(1, &[-1.0]), 1.0, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            tail_bound(&sys(2, &[-1.0, 1.0, 0.0, -1.0]), 1.0, 0.01),
            Err(Error::NotDiagonalizable(_))
        ));
    }

    #[test]
    fn stable_split_identity() {
        let s = sys(3, &[-1.0, 0.4, 0.0, -0.2, -0.8, 0.5, 0.1, 0.0, -1.2]);
        for i in 0..3 {
            let winf = infinite_gramian(&s, i).unwrap();
            let wt = finite_gramian(&s, i, 2.0).unwrap();
            let hat = finite_gramian_quadrature(&s, i, 60.0, 4096).unwrap() - &wt;
            // W^∞ = W(T) + Ŵ(T) with Ŵ approximated by the long-horizon integral
            let diff = (&winf - (&wt + hat)).norm() / winf.norm();
            assert!(diff < 1e-8, "relative split residual {diff}");
        }
    }
}
