//! Dense complex-matrix kernel.
//!
//! Everything here operates on small matrices (dimension at most a few
//! hundred; in practice d^2 x d^2 blocks with d <= 8), stored row-major in
//! double precision. The Hermitian eigensolver is a cyclic Jacobi iteration,
//! which is dependency-free and numerically robust at these sizes.

use crate::{Error, Result};
pub use num_complex::Complex64;

pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows of `(re, im)` pairs.
    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j].0, rows[i][j].1))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        m
    }

    /// |k><k| on a `dim`-dimensional space.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        m.set(k, k, Complex64::new(1.0, 0.0));
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_assign_at(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> ComplexMatrix {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn conjugate(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Kronecker product, row-major pair packing: out[(i*p+k), (j*q+l)] = a[i,j] * b[k,l].
    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let (p, q) = (other.rows, other.cols);
        ComplexMatrix::from_fn(self.rows * p, self.cols * q, |r, c| {
            self.get(r / p, c / q) * other.get(r % p, c % q)
        })
    }

    /// (A + A†)/2. Absorbs floating-point drift before Hermitian-only operations.
    pub fn hermitized(&self) -> ComplexMatrix {
        debug_assert!(self.is_square());
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        })
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).frobenius_norm()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a Hermitian matrix: `A = V diag(values) V†`,
/// eigenvalues ascending, eigenvectors as the columns of a unitary matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// V diag(f(lambda)) V†.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let d = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let flam = f(lam);
            if flam.norm_sqr() == 0.0 {
                continue;
            }
            for i in 0..d {
                let vik = v.get(i, k);
                for j in 0..d {
                    out.add_assign_at(i, j, flam * vik * v.get(j, k).conj());
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_spectral(|l| Complex64::new(l, 0.0))
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_REL_TOL: f64 = 1e-12;

fn offdiag_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a.get(i, j).norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as (A + A†)/2 first. Converges when the
/// off-diagonal Frobenius norm drops below `1e-12 * ||A||_F`.
pub fn herm_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = a.hermitized();
    let mut v = ComplexMatrix::identity(n);
    let norm = m.frobenius_norm();
    let tol = JACOBI_REL_TOL * norm.max(f64::MIN_POSITIVE);

    if norm > 0.0 {
        let mut converged = false;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            if offdiag_norm(&m) <= tol {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let b = m.get(p, q);
                    let absb = b.norm();
                    if absb <= tol / (n as f64) {
                        continue;
                    }
                    let app = m.get(p, p).re;
                    let aqq = m.get(q, q).re;
                    let phase = b / absb;
                    let tau = (app - aqq) / (2.0 * absb);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let sigma = t * c;
                    // Unitary U = I except U[p,p]=c, U[p,q]=-conj(s), U[q,p]=s, U[q,q]=c
                    // with s = sigma * conj(phase); update M <- U† M U, V <- V U.
                    let s = phase.conj() * sigma;

                    for i in 0..n {
                        let mip = m.get(i, p);
                        let miq = m.get(i, q);
                        m.set(i, p, mip * c + miq * s);
                        m.set(i, q, mip * (-s.conj()) + miq * c);
                    }
                    for j in 0..n {
                        let mpj = m.get(p, j);
                        let mqj = m.get(q, j);
                        m.set(p, j, mpj * c + mqj * s.conj());
                        m.set(q, j, mpj * (-s) + mqj * c);
                    }
                    m.set(p, q, Complex64::new(0.0, 0.0));
                    m.set(q, p, Complex64::new(0.0, 0.0));
                    let dp = m.get(p, p);
                    let dq = m.get(q, q);
                    m.set(p, p, Complex64::new(dp.re, 0.0));
                    m.set(q, q, Complex64::new(dq.re, 0.0));

                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, vip * c + viq * s);
                        v.set(i, q, vip * (-s.conj()) + viq * c);
                    }
                }
            }
        }
        if !converged && offdiag_norm(&m) > tol {
            return Err(Error::EigNonConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                offdiag: offdiag_norm(&m),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).re.partial_cmp(&m.get(j, j).re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i).re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// exp(-i * alpha * H) for Hermitian H, via eigendecomposition.
pub fn unitary_exp(h: &ComplexMatrix, alpha: f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(h)?;
    Ok(eig.apply_spectral(|lam| Complex64::from_polar(1.0, -alpha * lam)))
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on H_A (x) H_B with composite index `a*dim_b + b`.
pub fn partial_trace(
    rho: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    let d = dim_a * dim_b;
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: rho.rows(),
            context: "partial_trace input",
        });
    }
    match keep {
        Subsystem::A => Ok(ComplexMatrix::from_fn(dim_a, dim_a, |a, ap| {
            (0..dim_b)
                .map(|b| rho.get(a * dim_b + b, ap * dim_b + b))
                .sum()
        })),
        Subsystem::B => Ok(ComplexMatrix::from_fn(dim_b, dim_b, |b, bp| {
            (0..dim_a)
                .map(|a| rho.get(a * dim_b + b, a * dim_b + bp))
                .sum()
        })),
    }
}

/// Trace distance: half the sum of singular values of A - B.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::Dimension {
            expected: a.rows(),
            got: b.rows(),
            context: "trace_distance operands",
        });
    }
    let m = a.sub(b);
    // Singular values of M are the square roots of the eigenvalues of M†M.
    let gram = m.adjoint().matmul(&m);
    let eig = herm_eig(&gram)?;
    Ok(0.5
        * eig
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .sum::<f64>())
}

/// Nearest positive semidefinite matrix in Frobenius norm (eigenvalue clipping).
pub fn psd_project(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(a)?;
    Ok(eig.apply_spectral(|lam| Complex64::new(lam.max(0.0), 0.0)))
}

/// Von Neumann entropy in bits of a density operator.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64> {
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidDensity {
            reason: format!("trace {tr} deviates from 1 by more than 1e-8"),
        });
    }
    let eig = herm_eig(rho)?;
    let mut h = 0.0;
    for &lam in &eig.eigenvalues {
        if lam > 1e-15 {
            h -= lam * lam.log2();
        }
    }
    Ok(h)
}

/// Standard-normal sample via Box-Muller; used for random Hermitian/PSD draws.
pub(crate) fn randn(rng: &mut impl rand::Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > f64::MIN_POSITIVE {
            let v: f64 = rng.gen();
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

/// Random matrix with i.i.d. standard complex Gaussian entries.
pub fn random_complex_gaussian(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(randn(rng), randn(rng))
    })
}

/// Random Hermitian matrix: (G + G†)/2 with Gaussian G.
pub fn random_hermitian(dim: usize, rng: &mut impl rand::Rng) -> ComplexMatrix {
    random_complex_gaussian(dim, dim, rng).hermitized()
}
