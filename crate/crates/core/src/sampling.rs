//! Seeded Gaussian sampling and the synthetic covariance models used by the
//! experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{Centering, SampleSet};
use crate::error::Result;
use crate::spectral::{eigendecompose, SymMatrix, DEFAULT_EIGEN_TOL};

/// Name of the generator recorded in experiment metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3), Box-Muller normals";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draws by the Box–Muller transform, both outputs used.
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        BoxMuller { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Draws from `N(0, Σ₀)` through the symmetric square root of `Σ₀`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    p: usize,
    factor: SymMatrix,
}

impl GaussianSampler {
    pub fn new(sigma: &SymMatrix) -> Result<Self> {
        let decomp = eigendecompose(sigma, DEFAULT_EIGEN_TOL)?;
        if decomp.min_eigenvalue() < 0.0 {
            return Err(crate::Error::NotPsd(decomp.min_eigenvalue()));
        }
        Ok(GaussianSampler {
            p: sigma.order(),
            factor: decomp.map(f64::sqrt),
        })
    }

    pub fn sample<R: Rng>(
        &self,
        n: usize,
        normals: &mut BoxMuller<R>,
        centering: Centering,
    ) -> Result<SampleSet> {
        let mut data = Vec::with_capacity(n * self.p);
        let mut z = vec![0.0; self.p];
        for _ in 0..n {
            z.iter_mut().for_each(|x| *x = normals.next_normal());
            data.extend(self.factor.matvec(&z));
        }
        SampleSet::new(n, self.p, data, centering)
    }
}

/// `n` samples from `N(0, Σ₀)` using a fresh generator seeded with `seed`.
pub fn gaussian_samples(
    sigma: &SymMatrix,
    n: usize,
    seed: u64,
    centering: Centering,
) -> Result<SampleSet> {
    let mut normals = BoxMuller::new(rng(seed));
    GaussianSampler::new(sigma)?.sample(n, &mut normals, centering)
}

/// Diagonal matrix with `p − spikes` unit eigenvalues followed by `spikes`
/// eigenvalues equal to `m`.
pub fn spiked_covariance(p: usize, spikes: usize, m: f64) -> SymMatrix {
    let diag: Vec<f64> = (0..p).map(|i| if i + spikes >= p { m } else { 1.0 }).collect();
    SymMatrix::from_diagonal(&diag)
}

/// Ones on the diagonal and `off` on the first super- and sub-diagonals.
pub fn banded_covariance(p: usize, off: f64) -> SymMatrix {
    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        entries[i * p + i] = 1.0;
        if i + 1 < p {
            entries[i * p + i + 1] = off;
            entries[(i + 1) * p + i] = off;
        }
    }
    SymMatrix::new(p, entries).expect("finite entries")
}

/// Haar-distributed orthogonal matrix (row-major) from Gram–Schmidt on a
/// Gaussian matrix.
pub fn random_orthogonal<R: Rng>(p: usize, normals: &mut BoxMuller<R>) -> Vec<f64> {
    let mut q = vec![0.0; p * p];
    let mut col = vec![0.0; p];
    for j in 0..p {
        loop {
            col.iter_mut().for_each(|x| *x = normals.next_normal());
            for k in 0..j {
                let dot: f64 = (0..p).map(|i| q[i * p + k] * col[i]).sum();
                for i in 0..p {
                    col[i] -= dot * q[i * p + k];
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for i in 0..p {
                    q[i * p + j] = col[i] / norm;
                }
                break;
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::sample_covariance;
    use crate::spectral::orthonormality_error;

    #[test]
    fn normal_moments() {
        let mut g = BoxMuller::new(rng(7));
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| g.next_normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn seeded_streams_repeat() {
        let a = gaussian_samples(&SymMatrix::identity(3), 5, 11, Centering::SampleMean).unwrap();
        let b = gaussian_samples(&SymMatrix::identity(3), 5, 11, Centering::SampleMean).unwrap();
        let c = gaussian_samples(&SymMatrix::identity(3), 5, 12, Centering::SampleMean).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn large_sample_covariance_near_truth() {
        let s = gaussian_samples(&SymMatrix::identity(3), 10_000, 3, Centering::SampleMean).unwrap();
        let err = sample_covariance(&s)
            .unwrap()
            .sub(&SymMatrix::identity(3))
            .unwrap()
            .frobenius_norm();
        assert!(err <= 0.2, "err {err}");
    }

    #[test]
    fn model_matrices() {
        let s = spiked_covariance(5, 2, 10.0);
        assert_eq!(s.diagonal(), vec![1.0, 1.0, 1.0, 10.0, 10.0]);
        let b = banded_covariance(3, 0.5);
        assert_eq!(b.row(1), &[0.5, 1.0, 0.5]);
        assert_eq!(b.get(0, 2), 0.0);
        let mut g = BoxMuller::new(rng(1));
        let q = random_orthogonal(6, &mut g);
        assert!(orthonormality_error(&q, 6) < 1e-12);
    }
}
