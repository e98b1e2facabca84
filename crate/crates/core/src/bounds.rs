//! Closed-form error bounds and sample-complexity evaluators.
//!
//! Evaluators that come with explicit constants (18, 864, 6√2, 32/log 2,
//! 640/log 2) carry them exactly. Rate evaluators (`err_reg`, `err_lti`,
//! `gamma_delta`, `beta_delta`, `theorem_full_lb`) omit the unspecified
//! universal constant and are orders of growth, not certified values.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Setting;
use crate::spectral::{self, DenseMatrix};

/// Constant in the denoising and thresholding bounds.
pub const DENOISE_CONST: f64 = 18.0;
/// `C_T-LSE = 18 · 16 · 3`.
pub const TLSE_CONST: f64 = 864.0;
/// `6√2`, the R-LSE constant.
pub const RLSE_CONST: f64 = 6.0 * SQRT_2;

/// Spectra and scalars feeding the bound evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub n: u64,
    pub delta: f64,
    pub sigma: f64,
    pub d_x: usize,
    pub d_y: usize,
    pub r: usize,
    /// `s_i(A)`, nonincreasing.
    pub target_spectrum: Vec<f64>,
    /// Eigenvalues of `Σ`, `Σ̂` or `Γ_∞(A)`, nonincreasing.
    pub cov_spectrum: Vec<f64>,
}

/// A bound value with the rank that attains it, when it is a minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub minimizer_k: Option<usize>,
}

/// Range of ranks a minimization runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRange {
    /// `k ∈ {1, …, r}`.
    #[default]
    OneToR,
    /// `k ∈ {0, …, r}`; `k = 0` is the all-tail (zero estimate) option.
    ZeroToR,
}

impl RankRange {
    fn ks(self, r: usize) -> std::ops::RangeInclusive<usize> {
        match self {
            RankRange::OneToR => 1..=r,
            RankRange::ZeroToR => 0..=r,
        }
    }
}

fn is_nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.r == 0 || self.r > self.d_x.min(self.d_y) {
            return Err(Error::Domain(format!("r = {} outside 1..=min(d_x, d_y)", self.r)));
        }
        if !is_nonincreasing(&self.target_spectrum) || self.target_spectrum.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Domain("target spectrum must be nonnegative and nonincreasing".into()));
        }
        if !is_nonincreasing(&self.cov_spectrum) || self.cov_spectrum.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::Domain("covariance spectrum must be nonnegative and nonincreasing".into()));
        }
        if self.cov_spectrum.len() < self.r {
            return Err(Error::Domain(format!(
                "covariance spectrum has {} entries, need at least r = {}",
                self.cov_spectrum.len(),
                self.r
            )));
        }
        Ok(())
    }

    fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }

    fn d_bar(&self) -> f64 {
        self.d_x.max(self.d_y) as f64
    }

    fn with_n(&self, n: u64) -> Self {
        Self { n, ..self.clone() }
    }
}

/// `Σ_{i>k} s_i²`.
pub fn tail_energy(spectrum: &[f64], k: usize) -> f64 {
    spectrum.iter().skip(k).map(|s| s * s).sum()
}

/// `f(τ) = ((4+2τ)√(2/τ) + √(2+τ))²`.
pub fn chatterjee_factor(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    Ok(((4.0 + 2.0 * tau) * (2.0 / tau).sqrt() + (2.0 + tau).sqrt()).powi(2))
}

/// Prior USVT bound `f(τ) ‖Z‖₂ ‖A‖_*`.
pub fn chatterjee_bound(tau: f64, z_op_norm: f64, a_nuclear_norm: f64) -> Result<f64> {
    Ok(chatterjee_factor(tau)? * z_op_norm * a_nuclear_norm)
}

/// `18 (k(τ)‖Z‖₂² + Σ_{i>k(τ)} s_i²(A))` with
/// `k(τ) = #{i : s_i(Ā) ≥ (1+τ)‖Z‖₂}`. When `‖Z‖₂ = 0`, `k(τ)` is the
/// numerical rank of `Ā`.
pub fn adaptive_denoise_bound(abar_spectrum: &[f64], a_spectrum: &[f64], z_op_norm: f64, tau: f64) -> Result<BoundValue> {
    if !(tau >= 0.0) || !(z_op_norm >= 0.0) {
        return Err(Error::Domain("tau and ‖Z‖₂ must be >= 0".into()));
    }
    if !is_nonincreasing(abar_spectrum) || !is_nonincreasing(a_spectrum) {
        return Err(Error::Domain("spectra must be nonincreasing".into()));
    }
    let k = if z_op_norm == 0.0 {
        spectral::count_numerical_rank(abar_spectrum, spectral::RANK_REL_TOL)
    } else {
        let level = (1.0 + tau) * z_op_norm;
        abar_spectrum.iter().take_while(|&&s| s >= level).count()
    };
    let value = DENOISE_CONST * (k as f64 * z_op_norm * z_op_norm + tail_energy(a_spectrum, k));
    Ok(BoundValue { value, minimizer_k: Some(k) })
}

/// Minimizes `objective(k)` over `range`, ties to the smallest `k`.
fn argmin_k(range: std::ops::RangeInclusive<usize>, objective: impl Fn(usize) -> f64) -> BoundValue {
    let mut best = BoundValue { value: f64::INFINITY, minimizer_k: None };
    for k in range {
        let v = objective(k);
        if v < best.value || best.minimizer_k.is_none() {
            best = BoundValue { value: v, minimizer_k: Some(k) };
        }
    }
    best
}

/// `18 min_k (4kξ² + Σ_{i>k} s_i²(A))`.
pub fn theorem1_bound(a_spectrum: &[f64], xi: f64, r: usize, range: RankRange) -> Result<BoundValue> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("xi must be >= 0, got {xi}")));
    }
    if r == 0 && range == RankRange::OneToR {
        return Err(Error::Domain("r must be positive".into()));
    }
    Ok(argmin_k(range.ks(r), |k| DENOISE_CONST * (4.0 * k as f64 * xi * xi + tail_energy(a_spectrum, k))))
}

/// `σ² max((k d_x + log 1/δ)/(n λ̄_k), (k d_y + log 1/δ)/(n λ̲_k))`.
pub fn err_reg(k: usize, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    check_k(k, inputs)?;
    Ok(err_reg_unchecked(k, inputs))
}

/// `σ² (k d_x + log 1/δ)/(n λ̲_k(Γ_∞))`.
pub fn err_lti(k: usize, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    check_k(k, inputs)?;
    Ok(err_lti_unchecked(k, inputs))
}

fn check_k(k: usize, inputs: &BoundInputs) -> Result<()> {
    if k == 0 || k > inputs.r {
        return Err(Error::Domain(format!("k = {k} outside 1..={}", inputs.r)));
    }
    Ok(())
}

fn err_reg_unchecked(k: usize, inputs: &BoundInputs) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let l = inputs.log_inv_delta();
    let n = inputs.n as f64;
    let kf = k as f64;
    let top = spectral::mean_top(&inputs.cov_spectrum, k);
    let bottom = spectral::mean_bottom(&inputs.cov_spectrum, k);
    let a = (kf * inputs.d_x as f64 + l) / (n * top);
    let b = (kf * inputs.d_y as f64 + l) / (n * bottom);
    inputs.sigma * inputs.sigma * a.max(b)
}

fn err_lti_unchecked(k: usize, inputs: &BoundInputs) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let l = inputs.log_inv_delta();
    let bottom = spectral::mean_bottom(&inputs.cov_spectrum, k);
    inputs.sigma * inputs.sigma * (k as f64 * inputs.d_x as f64 + l) / (inputs.n as f64 * bottom)
}

fn rate_plus_tail(inputs: &BoundInputs, setting: Setting, range: RankRange) -> BoundValue {
    argmin_k(range.ks(inputs.r), |k| {
        let rate = match setting {
            Setting::Regression => err_reg_unchecked(k, inputs),
            Setting::Sysid => err_lti_unchecked(k, inputs),
        };
        rate + tail_energy(&inputs.target_spectrum, k)
    })
}

/// `γ_A^δ(n) = min_k ErrReg(k) + Σ_{i>k} s_i²(A)`; the minimizer is `k*_{A,n}`.
pub fn gamma_delta(inputs: &BoundInputs, range: RankRange) -> Result<BoundValue> {
    inputs.validate()?;
    Ok(rate_plus_tail(inputs, Setting::Regression, range))
}

/// `β_A^δ(n)`, the system-identification analogue with `cov_spectrum`
/// holding the eigenvalues of `Γ_∞(A)`.
pub fn beta_delta(inputs: &BoundInputs, range: RankRange) -> Result<BoundValue> {
    inputs.validate()?;
    Ok(rate_plus_tail(inputs, Setting::Sysid, range))
}

/// Threshold constant `32/log 2` (regression) or `640/log 2` (sysid).
pub fn lower_bound_constant(setting: Setting) -> f64 {
    match setting {
        Setting::Regression => 32.0 / LN_2,
        Setting::Sysid => 640.0 / LN_2,
    }
}

/// Smallest `n` with `γ (or β)(n) ≤ threshold`, by exponential then
/// binary search over the nonincreasing map `n ↦ γ(n)`.
pub fn min_samples_for(inputs: &BoundInputs, setting: Setting, threshold: f64, range: RankRange) -> Result<u64> {
    inputs.validate()?;
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("threshold must be >= 0, got {threshold}")));
    }
    let at = |n: u64| rate_plus_tail(&inputs.with_n(n), setting, range).value;
    if at(1) <= threshold {
        return Ok(1);
    }
    let floor = tail_energy(&inputs.target_spectrum, inputs.r);
    if floor >= threshold {
        return Err(Error::Infeasible { rank: inputs.r, tail: floor, threshold });
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while at(hi) > threshold {
        lo = hi;
        hi = hi.checked_mul(2).ok_or(Error::Infeasible { rank: inputs.r, tail: floor, threshold })?;
    }
    // invariant: at(lo) > threshold >= at(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid) <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Sample-complexity lower bound: `min{n : γ(n) ≤ C ε²}`.
pub fn sample_complexity_lb(inputs: &BoundInputs, setting: Setting, epsilon: f64, range: RankRange) -> Result<u64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    min_samples_for(inputs, setting, lower_bound_constant(setting) * epsilon * epsilon, range)
}

/// Rank-constrained lower-bound rate (universal constant omitted):
/// `(σ²/ε²) max((r d_x + log 1/δ)/λ̄_r, (r d_y + log 1/δ)/λ̲_r)` for
/// regression and `(σ²/ε²)(r d_x + log 1/δ)/λ̲_r(Γ_∞)` for sysid.
pub fn theorem_full_lb(inputs: &BoundInputs, setting: Setting, epsilon: f64) -> Result<f64> {
    inputs.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let l = inputs.log_inv_delta();
    let r = inputs.r;
    let rf = r as f64;
    let bottom = spectral::mean_bottom(&inputs.cov_spectrum, r);
    let ratio = match setting {
        Setting::Regression => {
            let top = spectral::mean_top(&inputs.cov_spectrum, r);
            ((rf * inputs.d_x as f64 + l) / top).max((rf * inputs.d_y as f64 + l) / bottom)
        }
        Setting::Sysid => (rf * inputs.d_x as f64 + l) / bottom,
    };
    Ok(inputs.sigma * inputs.sigma / (epsilon * epsilon) * ratio)
}

/// `6√2 r σ² (d̄ + log 1/δ) / (n λ^H_r)`.
pub fn rlse_upper(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let harmonic = spectral::harmonic_bottom(&inputs.cov_spectrum, inputs.r);
    let num = RLSE_CONST * inputs.r as f64 * inputs.sigma * inputs.sigma * (inputs.d_bar() + inputs.log_inv_delta());
    if num == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (inputs.n as f64 * harmonic))
}

/// `864 min_k (k σ² (d̄ + log 1/δ)/(n λ_min) + Σ_{i>k} s_i²(A))`.
pub fn tlse_upper(inputs: &BoundInputs, range: RankRange) -> Result<BoundValue> {
    inputs.validate()?;
    let lambda_min = *inputs.cov_spectrum.last().expect("validated nonempty");
    let per_rank = inputs.sigma * inputs.sigma * (inputs.d_bar() + inputs.log_inv_delta());
    let per_rank = if per_rank == 0.0 { 0.0 } else { per_rank / (inputs.n as f64 * lambda_min) };
    let best = argmin_k(range.ks(inputs.r), |k| k as f64 * per_rank + tail_energy(&inputs.target_spectrum, k));
    Ok(BoundValue { value: TLSE_CONST * best.value, minimizer_k: best.minimizer_k })
}

/// Checks `‖Π_k(Ā) − A‖_F ≤ 2√2 ‖Π_k(Ā − A)‖_F + 3 ‖A − Π_k(A)‖_F` (+1e-9).
pub fn lemma1_check(abar: &DenseMatrix, a: &DenseMatrix, k: usize) -> Result<bool> {
    if abar.shape() != a.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", abar.shape(), a.shape())));
    }
    let z = abar - a;
    let lhs = (spectral::truncate_rank(abar, k)? - a).norm();
    let rhs = 2.0 * SQRT_2 * spectral::truncate_rank(&z, k)?.norm() + 3.0 * (a - spectral::truncate_rank(a, k)?).norm();
    Ok(lhs <= rhs + 1e-9)
}
