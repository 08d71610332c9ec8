//! The robust shrinkage estimator.
//!
//! For a nominal covariance `Σ̂ = V̂·diag(x̂)·V̂ᵀ`, a divergence with generator
//! `d` and a radius `ε`, the estimator keeps the eigenvectors `V̂` and maps
//! every nominal eigenvalue through
//!
//! ```text
//! s(γ, b) = the root a ∈ (0, b) of 2a + γ·∂d/∂a(a, b) = 0      (b, γ > 0)
//! s(γ, b) = 0                                                   (b = 0 or γ = 0)
//! ```
//!
//! where the inverse shrinkage intensity `γ*` is the unique positive root of
//! the strictly decreasing function `F(γ) = Σᵢ d(s(γ, x̂ᵢ), x̂ᵢ) − ε`.
//! Larger radii give smaller `γ*` and stronger shrinkage.

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::lambert::lambert_w0;
use crate::spectral::{
    condition_number_of, eigendecompose, SpectralDecomposition, SymMatrix, DEFAULT_EIGEN_TOL,
};

/// Residual bound (in units of `max(1, b)`) a closed form must meet before it
/// is trusted; otherwise the bisection solver is used instead.
const CLOSED_FORM_TOL: f64 = 1e-9;
const BISECTION_WIDTH: f64 = 1e-13;
const DOUBLING_CAP: f64 = 1e30;
const MAX_BISECTIONS: usize = 4000;

/// `s(γ, b)`: closed forms where they exist, verified against the defining
/// equation.
pub fn eigenvalue_map(kind: Divergence, gamma: f64, b: f64) -> Result<f64> {
    check_map_args(gamma, b)?;
    if gamma == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    if gamma.is_infinite() {
        return Ok(b);
    }
    let a = match kind {
        Divergence::KullbackLeibler => {
            // (−γ + √(γ² + 16b²γ)) / (8b), rationalized.
            let sg = gamma.sqrt();
            2.0 * b * sg / (sg + (gamma + 16.0 * b * b).sqrt())
        }
        Divergence::Wasserstein => {
            // √a solves 2r³ + γr − γ√b = 0.
            let r = depressed_cubic_root(0.5 * gamma, 0.5 * gamma * b.sqrt());
            r * r
        }
        Divergence::FisherRao => b * (-0.5 * lambert_w0(2.0 * b * b / gamma)).exp(),
        Divergence::InverseStein => {
            // 4a³ + γa − γb = 0.
            depressed_cubic_root(0.25 * gamma, 0.25 * gamma * b)
        }
        Divergence::SymmetrizedStein => symmetrized_stein_root(gamma, b),
        Divergence::Quadratic => gamma * b / (1.0 + gamma),
        Divergence::WeightedQuadratic => gamma * b / (gamma + b),
    };
    if closed_form_ok(kind, gamma, b, a) {
        Ok(a)
    } else {
        eigenvalue_map_numeric(kind, gamma, b)
    }
}

/// `s(γ, b)` by bisection of `2a + γ·∂d/∂a(a, b)` on `(0, b)`.
///
/// The left-hand side is strictly increasing in `a`, negative near zero and
/// equal to `2b` at `a = b`, so the bracket is always valid for a correct
/// generator.
pub fn eigenvalue_map_numeric(kind: Divergence, gamma: f64, b: f64) -> Result<f64> {
    if !(gamma > 0.0 && b > 0.0 && gamma.is_finite() && b.is_finite()) {
        return Err(Error::DomainError(format!(
            "numeric eigenvalue map needs γ, b > 0 (got γ={gamma}, b={b})"
        )));
    }
    let h = |a: f64| 2.0 * a + gamma * kind.deriv_unchecked(a, b);
    let mut lo = if kind.allows_zero_a() {
        0.0
    } else {
        (b * 1e-300).max(f64::MIN_POSITIVE)
    };
    let mut hi = b;
    let (h_lo, h_hi) = (h(lo), h(hi));
    if !(h_lo < 0.0 && h_hi > 0.0) {
        return Err(Error::BracketFailure(format!(
            "{kind}: h({lo:e})={h_lo:e}, h({hi:e})={h_hi:e} for γ={gamma:e}, b={b:e}"
        )));
    }
    let width = BISECTION_WIDTH * b;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_map_args(gamma: f64, b: f64) -> Result<()> {
    if gamma >= 0.0 && b >= 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "eigenvalue map needs γ ≥ 0 and b ≥ 0 (got γ={gamma}, b={b})"
        )))
    }
}

/// Unique positive root of `r³ + p·r − q = 0` for `p, q > 0` (Cardano, in a
/// cancellation-free arrangement).
fn depressed_cubic_root(p: f64, q: f64) -> f64 {
    let disc = (0.5 * q).hypot((p / 3.0).powf(1.5));
    let u = (0.5 * q + disc).cbrt();
    let v = p / (3.0 * u);
    q / (u * u + p / 3.0 + v * v)
}

/// Root of `4b·a³ + γ·a² − γ·b² = 0` in `(0, b)` by Newton's method.
///
/// The cubic is increasing and convex on `a > 0`, so iterating from a point
/// right of the root decreases monotonically onto it. Both `b` and
/// `(γb/4)^{1/3}` lie right of the root.
fn symmetrized_stein_root(gamma: f64, b: f64) -> f64 {
    let g = |a: f64| (4.0 * b * a + gamma) * a * a - gamma * b * b;
    let dg = |a: f64| (12.0 * b * a + 2.0 * gamma) * a;
    let mut a = b.min((0.25 * gamma * b).cbrt());
    for _ in 0..200 {
        let step = g(a) / dg(a);
        if !step.is_finite() {
            break;
        }
        let next = a - step;
        if next <= 0.0 || next >= a {
            break;
        }
        a = next;
        if step <= 1e-16 * a {
            break;
        }
    }
    a
}

fn closed_form_ok(kind: Divergence, gamma: f64, b: f64, a: f64) -> bool {
    if !(a > 0.0 && a <= b && a.is_finite()) {
        return false;
    }
    // Newton-step size of the defining equation: an estimate of |a − s(γ, b)|.
    let h = 2.0 * a + gamma * kind.deriv_unchecked(a, b);
    let dh = 2.0 + gamma * kind.curv_unchecked(a, b);
    let err = (h / dh).abs();
    err.is_finite() && err <= CLOSED_FORM_TOL * b.max(1.0)
}

/// `F(γ) = Σ d(s(γ, x̂ᵢ), x̂ᵢ) − ε`; zero nominal eigenvalues contribute
/// nothing once `γ > 0`.
pub fn root_function(
    kind: Divergence,
    gamma: f64,
    nominal: &[f64],
    epsilon: f64,
) -> Result<ExtendedReal> {
    let mut total = ExtendedReal::ZERO;
    for &b in nominal {
        if b == 0.0 && gamma > 0.0 {
            continue;
        }
        let s = eigenvalue_map(kind, gamma, b)?;
        total = total + kind.value(s, b);
    }
    Ok(total.sub_finite(epsilon))
}

/// `F′(γ) = −Σ d′(s)² / (2 + γ·d″(s))`, from implicit differentiation of the
/// defining equation.
pub fn root_function_derivative(kind: Divergence, gamma: f64, nominal: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &b in nominal.iter().filter(|&&b| b > 0.0) {
        let s = eigenvalue_map(kind, gamma, b)?;
        if s <= 0.0 {
            continue;
        }
        let d1 = kind.deriv_unchecked(s, b);
        let d2 = kind.curv_unchecked(s, b);
        total -= d1 * d1 / (2.0 + gamma * d2);
    }
    Ok(total)
}

/// Closed-form upper bound on `γ*`, where one is known.
pub fn gamma_upper_bound(kind: Divergence, nominal: &[f64], epsilon: f64) -> Option<f64> {
    let p = nominal.len() as f64;
    let top = nominal.iter().copied().fold(0.0, f64::max);
    match kind {
        Divergence::KullbackLeibler => {
            Some(4.0 * top * top * (-4.0 * epsilon / p).exp() / -(-2.0 * epsilon / p).exp_m1())
        }
        Divergence::Wasserstein => Some(2.0 * (p * top.powi(3) / epsilon).sqrt()),
        Divergence::FisherRao => {
            let frob_sq: f64 = nominal.iter().map(|x| x * x).sum();
            Some(frob_sq / epsilon.sqrt())
        }
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Root tolerance on `|F(γ*)|`, relative to `max(1, ε)`.
    pub tol: f64,
    /// Finish the bisection with a few safeguarded Newton steps.
    pub newton_polish: bool,
    pub eigen_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            newton_polish: false,
            eigen_tol: DEFAULT_EIGEN_TOL,
        }
    }
}

/// Result of the `γ*` root-find.
#[derive(Debug, Clone)]
pub struct GammaRoot {
    pub gamma: f64,
    /// `|F(γ*)|`.
    pub residual: f64,
    /// Initial bracket `(γ_lo, γ_hi)` and `F` at its ends.
    pub bracket: (f64, f64),
    pub bracket_values: (ExtendedReal, ExtendedReal),
    pub evaluations: usize,
}

fn validate_nominal(kind: Divergence, nominal: &[f64]) -> Result<()> {
    if nominal.is_empty() {
        return Err(Error::DomainError("empty nominal spectrum".into()));
    }
    if nominal.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(&neg) = nominal.iter().find(|&&x| x < 0.0) {
        return Err(Error::NotPsd(neg));
    }
    if nominal.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroNominal);
    }
    if kind.requires_pd_nominal() && nominal.iter().any(|&x| x == 0.0) {
        return Err(Error::SingularNominal);
    }
    Ok(())
}

fn validate_radius(kind: Divergence, nominal: &[f64], epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || epsilon.is_infinite() {
        return Err(Error::RadiusNonPositive(epsilon));
    }
    if let ExtendedReal::Finite(max) = kind.epsilon_max(nominal) {
        if epsilon >= max {
            return Err(Error::RadiusTooLarge { epsilon, max });
        }
    }
    Ok(())
}

fn is_positive(x: ExtendedReal) -> bool {
    match x {
        ExtendedReal::PosInfinity => true,
        ExtendedReal::Finite(v) => v > 0.0,
    }
}

fn abs_value(x: ExtendedReal) -> f64 {
    x.to_f64().abs()
}

/// Finds `γ*`, the positive root of `F`.
///
/// The upper end of the bracket is the closed-form bound for KL, Wasserstein
/// and Fisher-Rao, and is found by doubling from 1 otherwise. The lower end is
/// found by halving. Bisection (geometric while the bracket spans more than a
/// factor of four) stops once `|F| ≤ tol·max(1, ε)`.
pub fn solve_gamma(
    kind: Divergence,
    nominal: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<GammaRoot> {
    validate_nominal(kind, nominal)?;
    validate_radius(kind, nominal, epsilon)?;
    let ftol = opts.tol * epsilon.max(1.0);
    let mut evaluations = 0usize;
    let mut f = |g: f64| {
        evaluations += 1;
        root_function(kind, g, nominal, epsilon)
    };

    let (mut hi, mut f_hi) = match gamma_upper_bound(kind, nominal, epsilon) {
        Some(bound) if bound.is_finite() && bound > 0.0 => (bound, f(bound)?),
        _ => (1.0, f(1.0)?),
    };
    if is_positive(f_hi) && abs_value(f_hi) <= ftol {
        // The bound itself is (numerically) the root.
        let residual = abs_value(f_hi);
        return Ok(GammaRoot {
            gamma: hi,
            residual,
            bracket: (hi, hi),
            bracket_values: (f_hi, f_hi),
            evaluations,
        });
    }
    while is_positive(f_hi) {
        hi *= 2.0;
        if hi > DOUBLING_CAP {
            return Err(Error::BracketFailure(format!(
                "{kind}: F stays positive up to γ={DOUBLING_CAP:e}"
            )));
        }
        f_hi = f(hi)?;
    }

    let mut lo = 0.5 * hi;
    let mut f_lo = f(lo)?;
    while !is_positive(f_lo) {
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        if lo < 1e-300 {
            lo = 0.0;
            f_lo = f(0.0)?;
            break;
        }
        f_lo = f(lo)?;
    }
    let bracket = (lo, hi);
    let bracket_values = (f_lo, f_hi);

    let (mut best, mut best_f) = if abs_value(f_lo) < abs_value(f_hi) {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..MAX_BISECTIONS {
        if abs_value(best_f) <= ftol {
            break;
        }
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if abs_value(fm) < abs_value(best_f) {
            best = mid;
            best_f = fm;
        }
        if is_positive(fm) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    if opts.newton_polish {
        for _ in 0..5 {
            let Some(fv) = best_f.finite() else { break };
            if fv.abs() <= 1e-3 * ftol {
                break;
            }
            let slope = root_function_derivative(kind, best, nominal)?;
            if !(slope < 0.0) {
                break;
            }
            let next = best - fv / slope;
            if !(next > lo && next < hi) {
                break;
            }
            let fn_ = f(next)?;
            if abs_value(fn_) >= abs_value(best_f) {
                break;
            }
            best = next;
            best_f = fn_;
        }
    }

    Ok(GammaRoot {
        gamma: best,
        residual: abs_value(best_f),
        bracket,
        bracket_values,
        evaluations,
    })
}

/// Shrunk spectrum without the eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectrumSolution {
    pub gamma_star: f64,
    /// Ascending nominal spectrum.
    pub nominal_eigenvalues: Vec<f64>,
    pub shrunk_eigenvalues: Vec<f64>,
    /// `Σ d(x*ᵢ, x̂ᵢ)`, equal to `D(X*, Σ̂)` by spectrality.
    pub achieved_divergence: f64,
    pub radius: f64,
    pub kind: Divergence,
    pub residual: f64,
}

impl SpectrumSolution {
    pub fn condition_number(&self) -> f64 {
        condition_number_of(&self.shrunk_eigenvalues)
    }
}

/// Solves for `γ*` and applies the eigenvalue map to a nominal spectrum.
pub fn shrink_spectrum(
    kind: Divergence,
    nominal: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<SpectrumSolution> {
    let root = solve_gamma(kind, nominal, epsilon, opts)?;
    let shrunk = nominal
        .iter()
        .map(|&b| eigenvalue_map(kind, root.gamma, b))
        .collect::<Result<Vec<f64>>>()?;
    let achieved = shrunk
        .iter()
        .zip(nominal)
        .filter(|(_, &b)| b > 0.0)
        .map(|(&a, &b)| kind.value(a, b))
        .sum::<ExtendedReal>()
        .to_f64();
    Ok(SpectrumSolution {
        gamma_star: root.gamma,
        nominal_eigenvalues: nominal.to_vec(),
        shrunk_eigenvalues: shrunk,
        achieved_divergence: achieved,
        radius: epsilon,
        kind,
        residual: root.residual,
    })
}

/// The robust estimator `X*` together with its spectral data.
#[derive(Debug, Clone)]
pub struct ShrinkageSolution {
    pub spectrum: SpectrumSolution,
    pub estimator: SymMatrix,
}

impl ShrinkageSolution {
    pub fn gamma_star(&self) -> f64 {
        self.spectrum.gamma_star
    }

    pub fn shrunk_eigenvalues(&self) -> &[f64] {
        &self.spectrum.shrunk_eigenvalues
    }

    pub fn nominal_eigenvalues(&self) -> &[f64] {
        &self.spectrum.nominal_eigenvalues
    }

    pub fn achieved_divergence(&self) -> f64 {
        self.spectrum.achieved_divergence
    }

    pub fn residual(&self) -> f64 {
        self.spectrum.residual
    }
}

/// Decomposes `nominal` and returns the robust estimator for radius `epsilon`.
pub fn estimate(
    nominal: &SymMatrix,
    kind: Divergence,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<ShrinkageSolution> {
    let decomp = eigendecompose(nominal, opts.eigen_tol)?;
    estimate_decomposed(&decomp, kind, epsilon, opts)
}

/// As [`estimate`], reusing an existing decomposition of the nominal matrix.
pub fn estimate_decomposed(
    decomp: &SpectralDecomposition,
    kind: Divergence,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<ShrinkageSolution> {
    if decomp.min_eigenvalue() < 0.0 {
        return Err(Error::NotPsd(decomp.min_eigenvalue()));
    }
    let spectrum = shrink_spectrum(kind, decomp.eigenvalues(), epsilon, opts)?;
    let estimator = decomp.with_eigenvalues(&spectrum.shrunk_eigenvalues)?;
    Ok(ShrinkageSolution {
        spectrum,
        estimator,
    })
}
