//! Spectral divergences between covariance matrices.
//!
//! Each [`Divergence`] is determined by a scalar generator `d(a, b)`: for
//! commuting arguments the matrix divergence is `Σ d(xᵢ, yᵢ)` over paired
//! eigenvalues. The generator and its first two `a`-derivatives drive the
//! shrinkage estimator; the matrix form ([`Divergence::matrix_divergence`])
//! is used to validate estimates and certify radii.
//!
//! The Kullback-Leibler generator carries the factor ½,
//! `d(a, b) = ½(a/b − 1 − log(a/b))`, i.e. the divergence equals the KL
//! divergence between the zero-mean Gaussians with those covariances. Some
//! references drop the ½; radii are not interchangeable between the two
//! conventions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::spectral::{eigendecompose, SymMatrix, DEFAULT_EIGEN_TOL};

/// Relative eigenvalue floor below which a matrix is treated as singular.
const PD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Divergence {
    #[serde(rename = "kl")]
    KullbackLeibler,
    #[serde(rename = "wasserstein")]
    Wasserstein,
    #[serde(rename = "fisher-rao")]
    FisherRao,
    #[serde(rename = "inverse-stein")]
    InverseStein,
    #[serde(rename = "symmetrized-stein")]
    SymmetrizedStein,
    #[serde(rename = "quadratic")]
    Quadratic,
    #[serde(rename = "weighted-quadratic")]
    WeightedQuadratic,
}

impl Divergence {
    pub const ALL: [Divergence; 7] = [
        Divergence::KullbackLeibler,
        Divergence::Wasserstein,
        Divergence::FisherRao,
        Divergence::InverseStein,
        Divergence::SymmetrizedStein,
        Divergence::Quadratic,
        Divergence::WeightedQuadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Divergence::KullbackLeibler => "kl",
            Divergence::Wasserstein => "wasserstein",
            Divergence::FisherRao => "fisher-rao",
            Divergence::InverseStein => "inverse-stein",
            Divergence::SymmetrizedStein => "symmetrized-stein",
            Divergence::Quadratic => "quadratic",
            Divergence::WeightedQuadratic => "weighted-quadratic",
        }
    }

    /// Whether `(0, b)` lies in the generator's domain for `b > 0`.
    pub fn allows_zero_a(self) -> bool {
        matches!(
            self,
            Divergence::Wasserstein | Divergence::Quadratic | Divergence::WeightedQuadratic
        )
    }

    /// Whether `(0, 0)` lies in the generator's domain.
    pub fn allows_zero_pair(self) -> bool {
        matches!(self, Divergence::Wasserstein | Divergence::Quadratic)
    }

    /// Whether the nominal (second) argument must be positive definite.
    pub fn requires_pd_nominal(self) -> bool {
        !self.allows_zero_pair()
    }

    /// Whether the first argument must be positive definite.
    fn requires_pd_first(self) -> bool {
        !self.allows_zero_a()
    }

    /// The generator `d(a, b)`; `+∞` outside its domain.
    pub fn value(self, a: f64, b: f64) -> ExtendedReal {
        if !(a >= 0.0 && b >= 0.0) || a.is_infinite() || b.is_infinite() {
            return ExtendedReal::PosInfinity;
        }
        let in_domain = match self {
            Divergence::Wasserstein | Divergence::Quadratic => true,
            Divergence::WeightedQuadratic => b > 0.0,
            _ => a > 0.0 && b > 0.0,
        };
        if !in_domain {
            return ExtendedReal::PosInfinity;
        }
        let v = match self {
            Divergence::KullbackLeibler => 0.5 * ratio_gap(a / b),
            Divergence::InverseStein => 0.5 * ratio_gap(b / a),
            Divergence::Wasserstein => {
                // (√a − √b)² written without cancellation near a = b.
                if a == 0.0 || b == 0.0 {
                    a + b
                } else {
                    let g = (a - b) / (a.sqrt() + b.sqrt());
                    g * g
                }
            }
            Divergence::FisherRao => {
                let l = log_ratio(a, b);
                l * l
            }
            Divergence::SymmetrizedStein => {
                let g = a - b;
                g * g / (2.0 * a * b)
            }
            Divergence::Quadratic => (a - b) * (a - b),
            Divergence::WeightedQuadratic => (a - b) * (a - b) / b,
        };
        ExtendedReal::Finite(v)
    }

    /// `∂d/∂a` at `a, b > 0`.
    pub fn deriv(self, a: f64, b: f64) -> Result<f64> {
        check_positive(a, b)?;
        Ok(self.deriv_unchecked(a, b))
    }

    /// `∂²d/∂a²` at `a, b > 0`.
    pub fn curv(self, a: f64, b: f64) -> Result<f64> {
        check_positive(a, b)?;
        Ok(self.curv_unchecked(a, b))
    }

    pub(crate) fn deriv_unchecked(self, a: f64, b: f64) -> f64 {
        match self {
            Divergence::KullbackLeibler => (a - b) / (2.0 * a * b),
            Divergence::Wasserstein => 1.0 - (b / a).sqrt(),
            Divergence::FisherRao => 2.0 * log_ratio(a, b) / a,
            Divergence::InverseStein => (a - b) / (2.0 * a * a),
            Divergence::SymmetrizedStein => (a - b) * (a + b) / (2.0 * a * a * b),
            Divergence::Quadratic => 2.0 * (a - b),
            Divergence::WeightedQuadratic => 2.0 * (a - b) / b,
        }
    }

    pub(crate) fn curv_unchecked(self, a: f64, b: f64) -> f64 {
        match self {
            Divergence::KullbackLeibler => 0.5 / (a * a),
            Divergence::Wasserstein => 0.5 * b.sqrt() / (a * a.sqrt()),
            Divergence::FisherRao => 2.0 * (1.0 - log_ratio(a, b)) / (a * a),
            Divergence::InverseStein => (2.0 * b - a) / (2.0 * a * a * a),
            Divergence::SymmetrizedStein => b / (a * a * a),
            Divergence::Quadratic => 2.0,
            Divergence::WeightedQuadratic => 2.0 / b,
        }
    }

    /// `ε̄ = Σ d(0, x̂ᵢ)`, the radius at which the estimator collapses to zero.
    pub fn epsilon_max(self, eigenvalues: &[f64]) -> ExtendedReal {
        eigenvalues.iter().map(|&b| self.value(0.0, b)).sum()
    }

    /// `D(S1, S2)` with `S2` playing the role of the nominal matrix.
    pub fn matrix_divergence(self, s1: &SymMatrix, s2: &SymMatrix) -> Result<ExtendedReal> {
        if s1.order() != s2.order() {
            return Err(Error::DimensionMismatch {
                expected: s2.order(),
                found: s1.order(),
            });
        }
        let e2 = eigendecompose(s2, DEFAULT_EIGEN_TOL)?;
        let floor2 = PD_TOL * s2.frobenius_norm();
        if e2.min_eigenvalue() < 0.0
            || (self.requires_pd_nominal() && e2.min_eigenvalue() <= floor2)
        {
            return Ok(ExtendedReal::PosInfinity);
        }
        let e1 = eigendecompose(s1, DEFAULT_EIGEN_TOL)?;
        let floor1 = PD_TOL * s1.frobenius_norm();
        if e1.min_eigenvalue() < 0.0 || (self.requires_pd_first() && e1.min_eigenvalue() <= floor1)
        {
            return Ok(ExtendedReal::PosInfinity);
        }

        let value = match self {
            Divergence::KullbackLeibler
            | Divergence::FisherRao
            | Divergence::InverseStein
            | Divergence::SymmetrizedStein => {
                // All four are congruence invariant: D(S1, S2) = Σ d(μᵢ, 1)
                // over the eigenvalues μ of S2^{-1/2} S1 S2^{-1/2}.
                let inv_sqrt = e2.map(|x| 1.0 / x.sqrt());
                let whitened = s1.congruence(inv_sqrt.entries())?;
                let mu = eigendecompose(&whitened, DEFAULT_EIGEN_TOL)?;
                if mu.min_eigenvalue() <= 0.0 {
                    return Ok(ExtendedReal::PosInfinity);
                }
                return Ok(mu.eigenvalues().iter().map(|&m| self.value(m, 1.0)).sum());
            }
            Divergence::Wasserstein => {
                let root2 = e2.map(|x| x.max(0.0).sqrt());
                let cross = s1.congruence(root2.entries())?;
                let ce = eigendecompose(&cross, DEFAULT_EIGEN_TOL)?;
                let fidelity: f64 = ce.eigenvalues().iter().map(|&x| x.max(0.0).sqrt()).sum();
                (s1.trace() + s2.trace() - 2.0 * fidelity).max(0.0)
            }
            Divergence::Quadratic => {
                let f = s1.sub(s2)?.frobenius_norm();
                f * f
            }
            Divergence::WeightedQuadratic => {
                let delta = s1.sub(s2)?;
                let mut acc = 0.0;
                for j in 0..e2.order() {
                    let dv = delta.matvec(&e2.eigenvector(j));
                    let sq: f64 = dv.iter().map(|x| x * x).sum();
                    acc += sq / e2.eigenvalues()[j];
                }
                acc
            }
        };
        Ok(ExtendedReal::Finite(value))
    }
}

/// `r − 1 − log r`, accurate near `r = 1`.
fn ratio_gap(r: f64) -> f64 {
    let t = r - 1.0;
    if t.abs() < 0.5 {
        t - t.ln_1p()
    } else {
        t - r.ln()
    }
}

fn log_ratio(a: f64, b: f64) -> f64 {
    let r = a / b;
    if r.is_normal() {
        r.ln()
    } else {
        a.ln() - b.ln()
    }
}

fn check_positive(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "generator derivatives need a, b > 0 (got a={a}, b={b})"
        )))
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Divergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Divergence::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDivergence(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Divergence::*;

    fn fin(x: ExtendedReal) -> f64 {
        x.finite().expect("finite value")
    }

    #[test]
    fn generator_examples() {
        assert_eq!(fin(KullbackLeibler.value(1.0, 1.0)), 0.0);
        assert_eq!(fin(Wasserstein.value(0.0, 4.0)), 4.0);
        let fr = fin(FisherRao.value(std::f64::consts::E, 1.0));
        assert!((fr - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_flags_follow_the_domains() {
        let zero_a: Vec<_> = Divergence::ALL.into_iter().filter(|d| d.allows_zero_a()).collect();
        assert_eq!(zero_a, vec![Wasserstein, Quadratic, WeightedQuadratic]);
        let zero_pair: Vec<_> = Divergence::ALL
            .into_iter()
            .filter(|d| d.allows_zero_pair())
            .collect();
        assert_eq!(zero_pair, vec![Wasserstein, Quadratic]);
        for d in Divergence::ALL {
            assert_eq!(d.value(0.0, 1.0).is_finite(), d.allows_zero_a(), "{d}");
            assert_eq!(d.value(0.0, 0.0).is_finite(), d.allows_zero_pair(), "{d}");
        }
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(Quadratic.deriv(1.0, 3.0).unwrap(), -4.0);
        assert!((KullbackLeibler.deriv(1.0, 2.0).unwrap() + 0.25).abs() < 1e-15);
        assert_eq!(Wasserstein.deriv(1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(KullbackLeibler.deriv(0.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(Quadratic.curv(1.0, -1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn derivative_vanishes_on_the_diagonal_and_is_negative_below() {
        for d in Divergence::ALL {
            for &b in &[0.01, 1.0, 70.0] {
                assert!(d.deriv(b, b).unwrap().abs() < 1e-14, "{d}");
                assert!(d.deriv(0.5 * b, b).unwrap() < 0.0, "{d}");
            }
        }
    }

    #[test]
    fn epsilon_max_examples() {
        assert_eq!(Wasserstein.epsilon_max(&[1.0, 2.0, 3.0]), ExtendedReal::Finite(6.0));
        assert_eq!(Quadratic.epsilon_max(&[1.0, 2.0, 3.0]), ExtendedReal::Finite(14.0));
        assert_eq!(
            KullbackLeibler.epsilon_max(&[1.0, 2.0, 3.0]),
            ExtendedReal::PosInfinity
        );
        // Zero eigenvalues contribute d(0, 0).
        assert_eq!(Wasserstein.epsilon_max(&[0.0, 2.0]), ExtendedReal::Finite(2.0));
        assert_eq!(
            WeightedQuadratic.epsilon_max(&[0.0, 2.0]),
            ExtendedReal::PosInfinity
        );
    }

    #[test]
    fn matrix_divergence_examples() {
        let s = SymMatrix::from_diagonal(&[1.0, 2.0]);
        for d in Divergence::ALL {
            assert!(fin(d.matrix_divergence(&s, &s).unwrap()).abs() < 1e-12, "{d}");
        }
        // D(Σ, 2Σ) = (p/2)(log 2 − ½) and D(2Σ, Σ) = (p/2)(1 − log 2).
        let two = SymMatrix::scaled_identity(2, 2.0);
        let id = SymMatrix::identity(2);
        let kl = fin(KullbackLeibler.matrix_divergence(&id, &two).unwrap());
        assert!((kl - (2f64.ln() - 0.5)).abs() < 1e-12);
        let kl = fin(KullbackLeibler.matrix_divergence(&two, &id).unwrap());
        assert!((kl - (1.0 - 2f64.ln())).abs() < 1e-12);
        let w = fin(Wasserstein
            .matrix_divergence(&SymMatrix::from_diagonal(&[4.0, 1.0]), &SymMatrix::identity(2))
            .unwrap());
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_divergence_domains() {
        let singular = SymMatrix::from_diagonal(&[0.0, 1.0]);
        let id = SymMatrix::identity(2);
        assert_eq!(
            KullbackLeibler.matrix_divergence(&id, &singular).unwrap(),
            ExtendedReal::PosInfinity
        );
        assert_eq!(
            FisherRao.matrix_divergence(&singular, &id).unwrap(),
            ExtendedReal::PosInfinity
        );
        assert!(WeightedQuadratic.matrix_divergence(&singular, &id).unwrap().is_finite());
        assert!(Wasserstein.matrix_divergence(&singular, &singular).unwrap().is_finite());
        assert!(matches!(
            Quadratic.matrix_divergence(&id, &SymMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn names_round_trip() {
        for d in Divergence::ALL {
            assert_eq!(d.name().parse::<Divergence>().unwrap(), d);
            let json = serde_json::to_string(&d).unwrap();
            assert_eq!(json, format!("\"{}\"", d.name()));
        }
        assert!(matches!(
            "stein".parse::<Divergence>(),
            Err(Error::UnknownDivergence(_))
        ));
    }
}
