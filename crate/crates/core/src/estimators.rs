//! Estimators of the target matrix: least squares, rank-constrained and
//! thresholded least squares, nuclear-norm proximal gradient (plain and
//! thresholded), and a rank-selection baseline in prediction space.
//!
//! All estimates use the `d_y × d_x` orientation of the target, i.e. the
//! model is `Y = X Aᵀ + E`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::problem::{ProblemInstance, Setting};
use crate::spectral::{self, DenseMatrix, SvdFactors, RANK_REL_TOL};

/// Output of an estimator, optionally scored against the true target.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    #[serde(serialize_with = "serialize_rows")]
    pub a_hat: DenseMatrix,
    pub effective_rank: usize,
    pub threshold_used: Option<f64>,
    pub frob_error: Option<f64>,
    /// `‖Â − A‖_F² / ‖A‖_F²`.
    pub relative_error: Option<f64>,
}

fn serialize_rows<S: Serializer>(m: &DenseMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl EstimateReport {
    pub fn new(a_hat: DenseMatrix, threshold_used: Option<f64>) -> Result<Self> {
        let effective_rank = effective_rank(&a_hat, RANK_REL_TOL)?;
        Ok(Self { a_hat, effective_rank, threshold_used, frob_error: None, relative_error: None })
    }

    fn with_rank(a_hat: DenseMatrix, effective_rank: usize, threshold_used: Option<f64>) -> Self {
        Self { a_hat, effective_rank, threshold_used, frob_error: None, relative_error: None }
    }

    /// Fills in the error fields against the true target.
    pub fn scored(mut self, truth: &DenseMatrix) -> Self {
        let err = (&self.a_hat - truth).norm();
        self.frob_error = Some(err);
        let scale = truth.norm_squared();
        self.relative_error = Some(if scale > 0.0 { err * err / scale } else { err * err });
        self
    }

    pub fn frob_error_sq(&self) -> Option<f64> {
        self.frob_error.map(|e| e * e)
    }
}

/// Proximal-gradient settings for the nuclear-norm estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 5000, rel_tol: 1e-9, step_scale: 1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be positive".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::Domain("rel_tol must be >= 0".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(Error::Domain(format!("step_scale must lie in (0, 1], got {}", self.step_scale)));
        }
        Ok(())
    }
}

/// Which covariance the data-driven thresholds read their eigenvalues from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceSource {
    /// Eigenvalues of `Σ̂ = XᵀX/n`.
    Empirical,
    /// Caller-supplied population eigenvalue (smallest, largest).
    Population { lambda_min: f64, lambda_max: f64 },
}

/// A design matrix with its pseudo-inverse and the spectrum of `Σ̂`
/// precomputed, so many observation matrices can share one factorization.
#[derive(Debug, Clone)]
pub struct Design {
    x: DenseMatrix,
    pinv: DenseMatrix,
    rank: usize,
    /// Eigenvalues of `XᵀX/n`, nonincreasing, length `d_x`.
    cov_spectrum: Vec<f64>,
}

impl Design {
    pub fn new(x: DenseMatrix) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Shape(format!("empty design {}x{}", x.nrows(), x.ncols())));
        }
        let f = spectral::svd(&x)?;
        let (n, d) = x.shape();
        let rank = f.numerical_rank(RANK_REL_TOL);

        let mut v_scaled = f.v.columns(0, rank).into_owned();
        for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
            col /= f.s[j];
        }
        let pinv = v_scaled * f.u.columns(0, rank).transpose();

        let mut cov_spectrum: Vec<f64> = f.s.iter().map(|s| s * s / n as f64).collect();
        cov_spectrum.resize(d, 0.0);
        Ok(Self { x, pinv, rank, cov_spectrum })
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d_x(&self) -> usize {
        self.x.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cov_spectrum(&self) -> &[f64] {
        &self.cov_spectrum
    }

    pub fn lambda_min(&self) -> f64 {
        *self.cov_spectrum.last().expect("nonempty design")
    }

    pub fn lambda_max(&self) -> f64 {
        self.cov_spectrum[0]
    }

    fn check_obs(&self, y: &DenseMatrix) -> Result<()> {
        if y.nrows() != self.n() {
            return Err(Error::Shape(format!("design has {} rows, observations have {}", self.n(), y.nrows())));
        }
        spectral::ensure_finite(y)
    }

    /// `Ā = (YᵀX)(XᵀX)^† = (X^† Y)ᵀ`.
    pub fn lse(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_obs(y)?;
        Ok((&self.pinv * y).transpose())
    }

    fn thresholds_lambda(&self, source: CovarianceSource) -> (f64, f64) {
        match source {
            CovarianceSource::Empirical => (self.lambda_min(), self.lambda_max()),
            CovarianceSource::Population { lambda_min, lambda_max } => (lambda_min, lambda_max),
        }
    }

    /// Hard-thresholded LSE at the data-driven level for `setting`.
    pub fn t_lse(
        &self,
        y: &DenseMatrix,
        setting: Setting,
        sigma: f64,
        delta: f64,
        source: CovarianceSource,
    ) -> Result<EstimateReport> {
        let abar = self.lse(y)?;
        let (lambda_min, _) = self.thresholds_lambda(source);
        let xi = match setting {
            Setting::Regression => threshold_mr(self.n(), self.d_x(), y.ncols(), sigma, delta, lambda_min)?,
            Setting::Sysid => threshold_sysid(self.n(), self.d_x(), sigma, delta, lambda_min)?,
        };
        let f = spectral::svd(&abar)?;
        let (a_hat, k) = spectral::threshold_factors(&abar, &f, xi);
        Ok(EstimateReport::with_rank(a_hat, k.min(f.numerical_rank(RANK_REL_TOL)), Some(xi)))
    }

    pub fn r_lse(&self, y: &DenseMatrix, r: usize) -> Result<EstimateReport> {
        let abar = self.lse(y)?;
        let max_rank = abar.nrows().min(abar.ncols());
        if r > max_rank {
            return Err(Error::Domain(format!("rank budget {r} exceeds min(d_x, d_y) = {max_rank}")));
        }
        EstimateReport::new(spectral::truncate_rank(&abar, r)?, None)
    }

    /// Rank selection on the fitted values `X Āᵀ`, mapped back through `X^†`.
    pub fn rsc(&self, y: &DenseMatrix, sigma: f64) -> Result<EstimateReport> {
        self.check_obs(y)?;
        let fitted = &self.x * (&self.pinv * y);
        let level = rsc_level(sigma, y.ncols(), self.rank);
        let f: SvdFactors = spectral::svd(&fitted)?;
        let k = f.count_above(level);
        let a_hat = if k == 0 {
            DenseMatrix::zeros(y.ncols(), self.d_x())
        } else {
            (&self.pinv * f.truncated(k)).transpose()
        };
        EstimateReport::new(a_hat, Some(level))
    }
}

/// `μ_RSC = 2σ(√d_y + √rank(X))`.
pub fn rsc_level(sigma: f64, d_y: usize, design_rank: usize) -> f64 {
    2.0 * sigma * ((d_y as f64).sqrt() + (design_rank as f64).sqrt())
}

/// Numerical rank: count of `s_i > rel_tol · s₁`.
pub fn effective_rank(m: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    Ok(spectral::count_numerical_rank(&spectral::singular_values(m)?, rel_tol))
}

pub fn lse(x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    Design::new(x.clone())?.lse(y)
}

/// `Π_r(Ā)`.
pub fn r_lse(x: &DenseMatrix, y: &DenseMatrix, r: usize) -> Result<EstimateReport> {
    Design::new(x.clone())?.r_lse(y, r)
}

fn check_threshold_args(sigma: f64, delta: f64, lambda_min_hat: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    if !(lambda_min_hat > 0.0) {
        return Err(Error::SingularDesign(lambda_min_hat));
    }
    Ok(())
}

/// `ξ_MR = 2σ(√d_x + √d_y + √log(1/δ)) / √(n λ_min(Σ̂))`.
pub fn threshold_mr(n: usize, d_x: usize, d_y: usize, sigma: f64, delta: f64, lambda_min_hat: f64) -> Result<f64> {
    check_threshold_args(sigma, delta, lambda_min_hat)?;
    let spread = (d_x as f64).sqrt() + (d_y as f64).sqrt() + (1.0 / delta).ln().sqrt();
    Ok(2.0 * sigma * spread / (n as f64 * lambda_min_hat).sqrt())
}

/// `ξ_SysID = 2σ √((d_x + log(1/δ)) / (n λ_min(Σ̂)))`.
pub fn threshold_sysid(n: usize, d_x: usize, sigma: f64, delta: f64, lambda_min_hat: f64) -> Result<f64> {
    check_threshold_args(sigma, delta, lambda_min_hat)?;
    Ok(2.0 * sigma * ((d_x as f64 + (1.0 / delta).ln()) / (n as f64 * lambda_min_hat)).sqrt())
}

/// Thresholded LSE with the level chosen by the instance's data model.
pub fn t_lse(instance: &ProblemInstance, delta: f64) -> Result<EstimateReport> {
    t_lse_with(instance, delta, CovarianceSource::Empirical)
}

pub fn t_lse_with(instance: &ProblemInstance, delta: f64, source: CovarianceSource) -> Result<EstimateReport> {
    let design = Design::new(instance.x.clone())?;
    Ok(design.t_lse(&instance.y, instance.setting, instance.sigma, delta, source)?.scored(&instance.a))
}

pub fn rsc_baseline(x: &DenseMatrix, y: &DenseMatrix, sigma: f64) -> Result<EstimateReport> {
    Design::new(x.clone())?.rsc(y, sigma)
}

/// Result of the nuclear-norm proximal-gradient solver.
#[derive(Debug, Clone)]
pub struct NuclearSolution {
    /// `d_y × d_x` estimate (transpose of the solver's `B`).
    pub estimate: DenseMatrix,
    /// Objective `‖Y − XB‖_F² + μ‖B‖_*`, starting with the value at `B = 0`.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when `X = 0`, where the step size is undefined and zero is returned.
    pub degenerate: bool,
}

impl NuclearSolution {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("objective starts at B = 0")
    }
}

/// Singular-value soft thresholding. Returns the shrunk matrix and its
/// nuclear norm.
fn sv_soft(m: &DenseMatrix, t: f64) -> Result<(DenseMatrix, f64)> {
    let mut f = spectral::svd(m)?;
    for s in f.s.iter_mut() {
        *s = (*s - t).max(0.0);
    }
    let k = f.s.iter().take_while(|&&s| s > 0.0).count();
    Ok((f.truncated(k), f.s.iter().sum()))
}

/// Minimizes `‖Y − XB‖_F² + μ‖B‖_*` over `B ∈ R^{d_x × d_y}` by proximal
/// gradient with step `step_scale / (2 λ_max(XᵀX))`, starting at `B = 0`.
pub fn nuclear_norm_estimate(x: &DenseMatrix, y: &DenseMatrix, mu: f64, cfg: &SolverConfig) -> Result<NuclearSolution> {
    cfg.validate()?;
    if !(mu >= 0.0) {
        return Err(Error::Domain(format!("mu must be >= 0, got {mu}")));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!("X has {} rows, Y has {}", x.nrows(), y.nrows())));
    }
    spectral::ensure_finite(x)?;
    spectral::ensure_finite(y)?;
    let (d_x, d_y) = (x.ncols(), y.ncols());
    let gram = x.tr_mul(x);
    let cross = x.tr_mul(y);
    let y_sq = y.norm_squared();

    let lambda_max = spectral::symmetric_eigenvalues(&gram)?.first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Ok(NuclearSolution {
            estimate: DenseMatrix::zeros(d_y, d_x),
            objective: vec![y_sq],
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }
    let step = cfg.step_scale / (2.0 * lambda_max);

    // ‖Y − XB‖² = ‖Y‖² − 2⟨B, XᵀY⟩ + ⟨B, XᵀX B⟩
    let smooth = |b: &DenseMatrix, gb: &DenseMatrix| (y_sq - 2.0 * b.dot(&cross) + b.dot(gb)).max(0.0);

    let mut b = DenseMatrix::zeros(d_x, d_y);
    let mut gb = DenseMatrix::zeros(d_x, d_y);
    let mut objective = vec![y_sq];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let grad = (&gb - &cross) * 2.0;
        let (next, nuc) = sv_soft(&(&b - grad * step), step * mu)?;
        b = next;
        gb = &gram * &b;
        let value = smooth(&b, &gb) + mu * nuc;
        let prev = *objective.last().unwrap();
        objective.push(value);
        if (prev - value).abs() <= cfg.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(NuclearSolution { estimate: b.transpose(), objective, iterations, converged, degenerate: false })
}

/// `μ = 10σ√λ_max(Σ̂) (√((d_x+d_y)/n) + √(log(1/(2δ))/(2n)))`.
pub fn nuclear_penalty(n: usize, d_x: usize, d_y: usize, sigma: f64, delta: f64, lambda_max_hat: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Domain(format!("delta must lie in (0, 0.5) for the nuclear penalty, got {delta}")));
    }
    if !(sigma >= 0.0) || !(lambda_max_hat >= 0.0) {
        return Err(Error::Domain("sigma and lambda_max must be >= 0".into()));
    }
    let n = n as f64;
    let rate = ((d_x + d_y) as f64 / n).sqrt() + ((1.0 / (2.0 * delta)).ln() / (2.0 * n)).sqrt();
    Ok(10.0 * sigma * lambda_max_hat.sqrt() * rate)
}

/// Nuclear-norm estimate hard-thresholded at `ξ = 2μ / λ_min(Σ̂)`.
pub fn thresholded_nuclear(instance: &ProblemInstance, delta: f64, cfg: &SolverConfig) -> Result<EstimateReport> {
    if instance.setting != Setting::Regression {
        return Err(Error::Domain("the thresholded nuclear-norm estimator is defined for regression".into()));
    }
    let design = Design::new(instance.x.clone())?;
    let lambda_min = design.lambda_min();
    if !(lambda_min > 0.0) {
        return Err(Error::SingularDesign(lambda_min));
    }
    let mu = nuclear_penalty(design.n(), design.d_x(), instance.d_y(), instance.sigma, delta, design.lambda_max())?;
    let xi = 2.0 * mu / lambda_min;
    let sol = nuclear_norm_estimate(&instance.x, &instance.y, mu, cfg)?;
    let f = spectral::svd(&sol.estimate)?;
    let (a_hat, k) = spectral::threshold_factors(&sol.estimate, &f, xi);
    Ok(EstimateReport::with_rank(a_hat, k.min(f.numerical_rank(RANK_REL_TOL)), Some(xi)).scored(&instance.a))
}
