//! Dense symmetric linear algebra.
//!
//! Everything downstream works on the spectrum of a symmetric matrix, so this
//! module carries the eigensolver (cyclic Jacobi), reassembly from an
//! eigenbasis, and the handful of norms the estimators and experiments need.
//! Matrices are small and dense; storage is a row-major `Vec<f64>`.

use crate::error::{Error, Result};

/// Relative tolerance used when none is given explicitly.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;

/// Jacobi sweep budget.
pub const MAX_SWEEPS: usize = 100;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// A real symmetric `p × p` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, symmetrizing by averaging
    /// `(A + Aᵀ) / 2`.
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::DomainError("matrix order must be at least 1".into()));
        }
        if entries.len() != order * order {
            return Err(Error::DimensionMismatch {
                expected: order * order,
                found: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut m = SymMatrix { order, entries };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let mut entries = Vec::with_capacity(p * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(p, entries)
    }

    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            entries: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::scaled_identity(order, 1.0)
    }

    pub fn scaled_identity(order: usize, c: f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.entries[i * order + i] = c;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let p = diag.len();
        let mut m = Self::zeros(p);
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * p + i] = d;
        }
        m
    }

    fn symmetrize(&mut self) {
        let p = self.order;
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (self.entries[i * p + j] + self.entries[j * p + i]);
                self.entries[i * p + j] = avg;
                self.entries[j * p + i] = avg;
            }
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            order: self.order,
            entries: self.entries.iter().map(|x| c * x).collect(),
        }
    }

    /// `alpha·self + beta·other`.
    pub fn lin_comb(&self, alpha: f64, other: &SymMatrix, beta: f64) -> Result<SymMatrix> {
        check_same_order(self, other)?;
        Ok(SymMatrix {
            order: self.order,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.order)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Q·A·Qᵀ` for a general square `Q` (row-major).
    pub fn congruence(&self, q: &[f64]) -> Result<SymMatrix> {
        let p = self.order;
        if q.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                found: q.len(),
            });
        }
        let qa = matmul(q, &self.entries, p);
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..p {
                    s += qa[i * p + k] * q[j * p + k];
                }
                out[i * p + j] = s;
            }
        }
        SymMatrix::new(p, out)
    }

    /// Largest entrywise asymmetry `max |A_ij − A_ji|` of raw row-major data.
    pub fn max_asymmetry(order: usize, entries: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..order {
            for j in (i + 1)..order {
                worst = worst.max((entries[i * order + j] - entries[j * order + i]).abs());
            }
        }
        worst
    }

    pub fn eigen(&self) -> Result<SpectralDecomposition> {
        eigendecompose(self, DEFAULT_EIGEN_TOL)
    }
}

fn check_same_order(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.order != b.order {
        return Err(Error::DimensionMismatch {
            expected: a.order,
            found: b.order,
        });
    }
    Ok(())
}

/// Row-major product of two `p × p` matrices.
pub(crate) fn matmul(a: &[f64], b: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            let aik = a[i * p + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * p..(k + 1) * p];
            let orow = &mut out[i * p..(i + 1) * p];
            for (o, bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// `‖AB − BA‖_F`.
pub fn commutator_norm(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_same_order(a, b)?;
    let p = a.order;
    let ab = matmul(&a.entries, &b.entries, p);
    // BA = (AB)ᵀ for symmetric A and B.
    let mut s = 0.0;
    for i in 0..p {
        for j in 0..p {
            let d = ab[i * p + j] - ab[j * p + i];
            s += d * d;
        }
    }
    Ok(s.sqrt())
}

/// Eigenvalues in ascending order with the matching orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Row-major; column `j` is the eigenvector of `eigenvalues[j]`.
    eigenvectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[f64] {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        let p = self.order();
        (0..p).map(|i| self.eigenvectors[i * p + j]).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.order() - 1]
    }

    /// `V·diag(values)·Vᵀ` in this eigenbasis. The basis is orthonormal by
    /// construction, so no check is repeated here.
    pub fn with_eigenvalues(&self, values: &[f64]) -> Result<SymMatrix> {
        if values.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: values.len(),
            });
        }
        Ok(assemble_unchecked(values, &self.eigenvectors))
    }

    /// The same eigenbasis carrying a new non-decreasing spectrum.
    pub fn with_spectrum(&self, values: Vec<f64>) -> Result<SpectralDecomposition> {
        if values.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: values.len(),
            });
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::DomainError("spectrum must be non-decreasing".into()));
        }
        Ok(SpectralDecomposition {
            eigenvalues: values,
            eigenvectors: self.eigenvectors.clone(),
        })
    }

    /// `V·diag(e)·Vᵀ`.
    pub fn to_matrix(&self) -> SymMatrix {
        assemble_unchecked(&self.eigenvalues, &self.eigenvectors)
    }

    /// Functional calculus: `V·diag(f(e))·Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        assemble_unchecked(&values, &self.eigenvectors)
    }

    /// `Vᵀ·x`, the coordinates of `x` in the eigenbasis.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let p = self.order();
        (0..p)
            .map(|j| (0..p).map(|i| self.eigenvectors[i * p + j] * x[i]).sum())
            .collect()
    }

    /// `V·y`, mapping eigenbasis coordinates back.
    pub fn unproject(&self, y: &[f64]) -> Vec<f64> {
        let p = self.order();
        (0..p)
            .map(|i| (0..p).map(|j| self.eigenvectors[i * p + j] * y[j]).sum())
            .collect()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Iterates until the Frobenius mass of the off-diagonal part drops to
/// `tol·‖A‖_F`. Eigenvalues with `|e| ≤ tol·‖A‖_F` are snapped to zero so a
/// PSD input comes back PSD; larger negative eigenvalues are left alone.
pub fn eigendecompose(a: &SymMatrix, tol: f64) -> Result<SpectralDecomposition> {
    if !(tol > 0.0) {
        return Err(Error::DomainError(format!("eigen tolerance {tol} must be positive")));
    }
    if a.entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.order;
    let mut m = a.entries.clone();
    let mut v = SymMatrix::identity(n).entries;
    let scale = a.frobenius_norm();

    if scale > 0.0 {
        let target = tol * scale;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&m, n) <= target {
                converged = true;
                break;
            }
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, n, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&m, n) > target {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));

    let snap = tol * scale;
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&k| {
            let e = m[k * n + k];
            if e.abs() <= snap {
                0.0
            } else {
                e
            }
        })
        .collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[i * n + col] = v[i * n + k];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += m[i * n + j] * m[i * n + j];
        }
    }
    (2.0 * s).sqrt()
}

/// One Jacobi rotation annihilating `m[p][q]`.
fn rotate(m: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    if t == 0.0 {
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let mkp = m[k * n + p];
        let mkq = m[k * n + q];
        m[k * n + p] = c * mkp - s * mkq;
        m[k * n + q] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[p * n + k];
        let mqk = m[q * n + k];
        m[p * n + k] = c * mpk - s * mqk;
        m[q * n + k] = s * mpk + c * mqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

fn assemble_unchecked(values: &[f64], basis: &[f64]) -> SymMatrix {
    let p = values.len();
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let mut s = 0.0;
            for k in 0..p {
                s += basis[i * p + k] * values[k] * basis[j * p + k];
            }
            out[i * p + j] = s;
            out[j * p + i] = s;
        }
    }
    SymMatrix { order: p, entries: out }
}

/// Largest entry of `|VᵀV − I|` for a row-major square `V`.
pub fn orthonormality_error(basis: &[f64], p: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let dot: f64 = (0..p).map(|k| basis[k * p + i] * basis[k * p + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// `V·diag(e)·Vᵀ` for an orthonormal `V` given row-major.
pub fn assemble(eigenvalues: &[f64], basis: &[f64]) -> Result<SymMatrix> {
    let p = eigenvalues.len();
    if p == 0 {
        return Err(Error::DomainError("empty spectrum".into()));
    }
    if basis.len() != p * p {
        return Err(Error::DimensionMismatch {
            expected: p * p,
            found: basis.len(),
        });
    }
    if eigenvalues.iter().chain(basis).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let err = orthonormality_error(basis, p);
    if err > ORTHONORMAL_TOL {
        return Err(Error::DomainError(format!(
            "eigenbasis is not orthonormal (error {err:.3e})"
        )));
    }
    Ok(assemble_unchecked(eigenvalues, basis))
}

/// `λ_max / λ_min`; `+∞` for a singular (or indefinite) spectrum.
pub fn condition_number(d: &SpectralDecomposition) -> f64 {
    condition_number_of(d.eigenvalues())
}

pub fn condition_number_of(ascending: &[f64]) -> f64 {
    let lo = ascending[0];
    let hi = ascending[ascending.len() - 1];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn frobenius_norm(a: &SymMatrix) -> f64 {
    a.frobenius_norm()
}

/// Spectral norm of `A − B`.
pub fn spectral_distance(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    let diff = a.sub(b)?;
    let d = eigendecompose(&diff, DEFAULT_EIGEN_TOL)?;
    Ok(d.min_eigenvalue().abs().max(d.max_eigenvalue().abs()))
}
