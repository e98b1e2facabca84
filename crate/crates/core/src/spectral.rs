//! Dense linear-algebra kernel: thin SVD, rank truncation, singular-value
//! hard thresholding, eigenvalue statistics and controllability Gramians.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::{Mat, MatRef, Par};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real dense matrix. Every matrix in the crate (targets, designs,
/// covariances, Gramians) is carried in this type.
pub type DenseMatrix = DMatrix<f64>;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Tolerated absolute asymmetry (scaled by `max(1, ‖S‖_F)`) before a
/// "symmetric" input is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;

const SMITH_MAX_ITERS: usize = 64;

// Decompositions run sequentially inside faer; parallelism lives at the
// trial level, and single-threaded kernels keep results independent of the
// worker count.
fn to_faer(m: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn svd_failed() -> Error {
    Error::NoConvergence { what: "svd", iterations: 0 }
}

fn eig_failed() -> Error {
    Error::NoConvergence { what: "eigensolver", iterations: 0 }
}

fn faer_svd(m: &DenseMatrix, vectors: bool) -> Result<(Vec<f64>, Option<(DenseMatrix, DenseMatrix)>)> {
    let (rows, cols) = m.shape();
    let p = rows.min(cols);
    let a = to_faer(m);
    let mut s = Diag::<f64>::zeros(p);
    let compute = if vectors { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let mut buf = MemBuffer::new(faer_svd::svd_scratch::<f64>(rows, cols, compute, compute, Par::Seq, Default::default()));
    let stack = MemStack::new(&mut buf);
    if vectors {
        let mut u = Mat::<f64>::zeros(rows, p);
        let mut v = Mat::<f64>::zeros(cols, p);
        faer_svd::svd(a.as_ref(), s.as_mut(), Some(u.as_mut()), Some(v.as_mut()), Par::Seq, stack, Default::default())
            .map_err(|_| svd_failed())?;
        let vals = s.column_vector().iter().map(|x| x.max(0.0)).collect();
        Ok((vals, Some((from_faer(u.as_ref()), from_faer(v.as_ref())))))
    } else {
        faer_svd::svd(a.as_ref(), s.as_mut(), None, None, Par::Seq, stack, Default::default())
            .map_err(|_| svd_failed())?;
        Ok((s.column_vector().iter().map(|x| x.max(0.0)).collect(), None))
    }
}

fn faer_symmetric_eigen(sym: &DenseMatrix, vectors: bool) -> Result<(Vec<f64>, Option<DenseMatrix>)> {
    let n = sym.nrows();
    let a = to_faer(sym);
    let mut s = Diag::<f64>::zeros(n);
    let compute = if vectors { ComputeEigenvectors::Yes } else { ComputeEigenvectors::No };
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(n, compute, Par::Seq, Default::default()));
    let stack = MemStack::new(&mut buf);
    if vectors {
        let mut u = Mat::<f64>::zeros(n, n);
        evd::self_adjoint_evd(a.as_ref(), s.as_mut(), Some(u.as_mut()), Par::Seq, stack, Default::default())
            .map_err(|_| eig_failed())?;
        Ok((s.column_vector().iter().copied().collect(), Some(from_faer(u.as_ref()))))
    } else {
        evd::self_adjoint_evd(a.as_ref(), s.as_mut(), None, Par::Seq, stack, Default::default())
            .map_err(|_| eig_failed())?;
        Ok((s.column_vector().iter().copied().collect(), None))
    }
}

pub fn ensure_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn ensure_square(m: &DenseMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Shape(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())))
    }
}

/// Thin SVD `M = U diag(s) Vᵀ` with `s` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `rows × min(rows, cols)`, orthonormal columns.
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    /// `cols × min(rows, cols)`, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// Sum of the leading `k` rank-one terms `s_i u_i v_iᵀ`.
    pub fn truncated(&self, k: usize) -> DenseMatrix {
        let k = k.min(self.s.len());
        let mut out = DenseMatrix::zeros(self.rows(), self.cols());
        if k == 0 {
            return out;
        }
        let mut us = self.u.columns(0, k).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[j];
        }
        us.mul_to(&self.v.columns(0, k).transpose(), &mut out);
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.truncated(self.s.len())
    }

    /// Number of singular values above `rel_tol · s₁`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        count_numerical_rank(&self.s, rel_tol)
    }

    /// Number of singular values strictly above `xi`.
    pub fn count_above(&self, xi: f64) -> usize {
        self.s.iter().take_while(|&&s| s > xi).count()
    }
}

pub(crate) fn count_numerical_rank(s: &[f64], rel_tol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().take_while(|&&x| x > rel_tol * s1).count(),
        _ => 0,
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdFactors> {
    ensure_finite(m)?;
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(rows, 0),
            s: Vec::new(),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    let (s, uv) = faer_svd(m, true)?;
    let (u, v) = uv.expect("vectors requested");
    Ok(SvdFactors { u, s, v })
}

/// Singular values, nonincreasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    ensure_finite(m)?;
    if m.nrows().min(m.ncols()) == 0 {
        return Ok(Vec::new());
    }
    Ok(faer_svd(m, false)?.0)
}

/// Best rank-`k` approximation `Π_k(M)`.
pub fn truncate_rank(m: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    ensure_finite(m)?;
    if k >= m.nrows().min(m.ncols()) {
        return Ok(m.clone());
    }
    if k == 0 {
        return Ok(DenseMatrix::zeros(m.nrows(), m.ncols()));
    }
    Ok(svd(m)?.truncated(k))
}

/// Keeps the singular triplets with `s_i > xi` (strict).
pub fn hard_threshold(m: &DenseMatrix, xi: f64) -> Result<DenseMatrix> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {xi}")));
    }
    let f = svd(m)?;
    Ok(threshold_factors(m, &f, xi).0)
}

/// Thresholds a matrix whose SVD is already known. Returns the estimate
/// and the number of retained triplets.
pub(crate) fn threshold_factors(m: &DenseMatrix, f: &SvdFactors, xi: f64) -> (DenseMatrix, usize) {
    let k = f.count_above(xi);
    if k >= f.s.len() {
        (m.clone(), k)
    } else {
        (f.truncated(k), k)
    }
}

pub fn operator_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Eigenvalues of a symmetric matrix, sorted nonincreasing. Inputs that are
/// symmetric up to [`SYMMETRY_TOL`] are symmetrized first.
pub fn symmetric_eigenvalues(s: &DenseMatrix) -> Result<Vec<f64>> {
    let sym = symmetrize_checked(s)?;
    let mut ev = faer_symmetric_eigen(&sym, false)?.0;
    ev.reverse();
    Ok(ev)
}

/// Full symmetric eigendecomposition; eigenvalues nonincreasing with
/// eigenvectors in matching columns.
pub fn symmetric_eigen(s: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let sym = symmetrize_checked(s)?;
    let (mut vals, vecs) = faer_symmetric_eigen(&sym, true)?;
    let vecs = vecs.expect("vectors requested");
    vals.reverse();
    let n = vals.len();
    let flipped = DenseMatrix::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
    Ok((vals, flipped))
}

fn symmetrize_checked(s: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_finite(s)?;
    ensure_square(s)?;
    let asym = (s - s.transpose()).amax();
    if asym > SYMMETRY_TOL * s.norm().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok((s + s.transpose()) * 0.5)
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DenseMatrix) -> Result<f64> {
    ensure_finite(a)?;
    ensure_square(a)?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let ev = to_faer(a).eigenvalues().map_err(|_| eig_failed())?;
    Ok(ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalue statistics used by the rate and bound formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    /// Mean of the `k` largest eigenvalues.
    pub lambda_bar_k: f64,
    /// Mean of the `k` smallest eigenvalues.
    pub lambda_under_k: f64,
    /// Harmonic mean of the `k` smallest eigenvalues; `0` when one of them
    /// vanishes.
    pub lambda_harmonic_k: f64,
    /// `λ₁/λ_d`, `+∞` when `λ_d = 0`.
    pub kappa: f64,
    /// Set when the smallest eigenvalue is zero.
    pub singular: bool,
}

pub fn spectral_summary(s: &DenseMatrix, k: usize) -> Result<SpectralSummary> {
    let ev = symmetric_eigenvalues(s)?;
    let tol = 1e-12 * ev.first().copied().unwrap_or(0.0).abs().max(1.0);
    if ev.iter().any(|&l| l < -tol) {
        return Err(Error::Domain("spectral summary needs a positive semidefinite matrix".into()));
    }
    let ev: Vec<f64> = ev.into_iter().map(|l| l.max(0.0)).collect();
    summary_from_spectrum(&ev, k)
}

/// Same statistics, computed from an already sorted (nonincreasing) spectrum.
pub fn summary_from_spectrum(spectrum: &[f64], k: usize) -> Result<SpectralSummary> {
    let d = spectrum.len();
    if k == 0 || k > d {
        return Err(Error::Domain(format!("k must lie in 1..={d}, got {k}")));
    }
    let smallest = spectrum[d - 1];
    let singular = smallest <= 0.0;
    Ok(SpectralSummary {
        lambda_bar_k: mean_top(spectrum, k),
        lambda_under_k: mean_bottom(spectrum, k),
        lambda_harmonic_k: harmonic_bottom(spectrum, k),
        kappa: if singular { f64::INFINITY } else { spectrum[0] / smallest },
        singular,
    })
}

/// `λ̄_k`: arithmetic mean of the `k` largest entries of a nonincreasing spectrum.
pub fn mean_top(spectrum: &[f64], k: usize) -> f64 {
    spectrum[..k].iter().sum::<f64>() / k as f64
}

/// Arithmetic mean of the `k` smallest entries.
pub fn mean_bottom(spectrum: &[f64], k: usize) -> f64 {
    spectrum[spectrum.len() - k..].iter().sum::<f64>() / k as f64
}

/// `λ^H_k`: harmonic mean of the `k` smallest entries; zero if any is zero.
pub fn harmonic_bottom(spectrum: &[f64], k: usize) -> f64 {
    let tail = &spectrum[spectrum.len() - k..];
    if tail.iter().any(|&l| l <= 0.0) {
        return 0.0;
    }
    k as f64 / tail.iter().map(|l| 1.0 / l).sum::<f64>()
}

/// `Γ_p(A) = Σ_{k=0}^p A^k (A^k)ᵀ`.
pub fn gramian_finite(a: &DenseMatrix, p: usize) -> Result<DenseMatrix> {
    ensure_finite(a)?;
    ensure_square(a)?;
    let d = a.nrows();
    let mut power = DenseMatrix::identity(d, d);
    let mut acc = DenseMatrix::identity(d, d);
    for _ in 0..p {
        power = a * &power;
        acc += &power * power.transpose();
    }
    Ok((&acc + acc.transpose()) * 0.5)
}

/// Residual `‖A G Aᵀ + I − G‖_F` of the discrete Lyapunov equation.
pub fn lyapunov_residual(a: &DenseMatrix, g: &DenseMatrix) -> f64 {
    let d = a.nrows();
    (a * g * a.transpose() + DenseMatrix::identity(d, d) - g).norm()
}

/// Default residual tolerance for [`gramian_infinite`].
pub const GRAMIAN_TOL: f64 = 1e-12;

/// `Γ_∞(A)`, the solution of `G = A G Aᵀ + I`, by Smith doubling.
pub fn gramian_infinite(a: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let rho = spectral_radius(a)?;
    if rho >= 1.0 - 1e-8 {
        return Err(Error::Unstable(rho));
    }
    let d = a.nrows();
    let mut g = DenseMatrix::identity(d, d);
    let mut ak = a.clone();
    for _ in 0..SMITH_MAX_ITERS {
        if lyapunov_residual(a, &g) <= tol {
            return Ok(g);
        }
        g += &ak * &g * ak.transpose();
        g = (&g + g.transpose()) * 0.5;
        ak = &ak * &ak;
    }
    if lyapunov_residual(a, &g) <= tol {
        return Ok(g);
    }
    Err(Error::NoConvergence { what: "smith doubling", iterations: SMITH_MAX_ITERS })
}
