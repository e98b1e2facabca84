//! Seeded synthetic problem construction: spectral-profile targets, aligned
//! targets, stable symmetric system matrices, Gaussian regression samples
//! and linear time-invariant trajectories.

use nalgebra::{Cholesky, DVector};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamKey};
use crate::spectral::{self, DenseMatrix};

/// Which data model produced an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// `y_i = A x_i + η_i` with i.i.d. Gaussian covariates.
    Regression,
    /// `x_{t+1} = A x_t + η_t` observed along one trajectory.
    Sysid,
}

/// Index convention of a decaying spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumOffset {
    /// `s_j = j^{-b}`
    J,
    /// `s_j = (j+1)^{-b}`
    JPlus1,
}

/// A rank-`r` power-law spectrum in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProfile {
    pub d: usize,
    pub r: usize,
    pub b: f64,
    pub offset: SpectrumOffset,
}

impl SpectrumProfile {
    pub fn new(d: usize, r: usize, b: f64, offset: SpectrumOffset) -> Result<Self> {
        let p = Self { d, r, b, offset };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.d {
            return Err(Error::Domain(format!("rank {} outside 1..={}", self.r, self.d)));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(Error::Domain(format!("decay exponent must be finite and >= 0, got {}", self.b)));
        }
        Ok(())
    }

    /// The `d` singular values, zero past index `r`.
    pub fn values(&self) -> Vec<f64> {
        (1..=self.d)
            .map(|j| {
                if j > self.r {
                    return 0.0;
                }
                let base = match self.offset {
                    SpectrumOffset::J => j as f64,
                    SpectrumOffset::JPlus1 => (j + 1) as f64,
                };
                base.powf(-self.b)
            })
            .collect()
    }
}

/// A generated estimation task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    /// `d_y × d_x` target.
    pub a: DenseMatrix,
    /// `n × d_x` covariates (or states `x_1..x_n`).
    pub x: DenseMatrix,
    /// `n × d_y` observations (or states `x_2..x_{n+1}`).
    pub y: DenseMatrix,
    pub sigma: f64,
    pub setting: Setting,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d_x(&self) -> usize {
        self.x.ncols()
    }

    pub fn d_y(&self) -> usize {
        self.y.ncols()
    }

    /// Realized noise `Y − X Aᵀ`.
    pub fn noise(&self) -> DenseMatrix {
        &self.y - &self.x * self.a.transpose()
    }
}

pub fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> DenseMatrix {
    let dist = Uniform::new(lo, hi).expect("valid uniform range");
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(dist))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> DenseMatrix {
    // Column-major fill order is part of the determinism contract.
    DenseMatrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

fn with_singular_values(u: &DenseMatrix, s: &[f64], vt_rows: &DenseMatrix) -> DenseMatrix {
    let mut us = u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= s[j];
    }
    us * vt_rows
}

/// `d × d` target with the singular vectors of a Uniform[0,1] matrix and
/// the singular values of `profile`.
pub fn make_target<R: Rng + ?Sized>(profile: &SpectrumProfile, rng: &mut R) -> Result<DenseMatrix> {
    profile.validate()?;
    let base = uniform_matrix(profile.d, profile.d, 0.0, 1.0, rng);
    let f = spectral::svd(&base)?;
    Ok(with_singular_values(&f.u, &profile.values(), &f.v.transpose()))
}

/// `A = U S P Fᵀ`: right singular vectors taken from the design `X`, with
/// the rows of `Fᵀ` circularly shifted by `shift`.
pub fn make_aligned_target<R: Rng + ?Sized>(
    x: &DenseMatrix,
    profile: &SpectrumProfile,
    shift: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    profile.validate()?;
    let d = profile.d;
    if x.ncols() != d {
        return Err(Error::Shape(format!("design has {} columns, profile dimension is {d}", x.ncols())));
    }
    if shift > d {
        return Err(Error::Domain(format!("shift {shift} outside 0..={d}")));
    }
    let fx = spectral::svd(x)?;
    let rank = fx.numerical_rank(spectral::RANK_REL_TOL);
    if fx.s.len() < d || rank < d {
        return Err(Error::RankDeficient { rank, cols: d });
    }
    let ft = fx.v.transpose();
    let shifted = DenseMatrix::from_fn(d, d, |i, j| ft[((i + shift) % d, j)]);
    let u = spectral::svd(&uniform_matrix(d, d, 0.0, 1.0, rng))?.u;
    Ok(with_singular_values(&u, &profile.values(), &shifted))
}

/// Symmetric PSD `U S Uᵀ` with `s_j = (j+1)^{-b}`; spectral radius `2^{-b}`.
pub fn make_stable_symmetric<R: Rng + ?Sized>(profile: &SpectrumProfile, rng: &mut R) -> Result<DenseMatrix> {
    profile.validate()?;
    if profile.offset != SpectrumOffset::JPlus1 {
        return Err(Error::Domain("stable symmetric targets use the (j+1)^-b profile".into()));
    }
    let u = spectral::svd(&uniform_matrix(profile.d, profile.d, 0.0, 1.0, rng))?.u;
    let a = with_singular_values(&u, &profile.values(), &u.transpose());
    Ok((&a + a.transpose()) * 0.5)
}

pub fn empirical_covariance(x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.nrows() == 0 {
        return Err(Error::Domain("empirical covariance needs at least one sample".into()));
    }
    Ok(x.tr_mul(x) / x.nrows() as f64)
}

/// Draws `n` regression samples with covariates `N(0, Σ)` and noise
/// `N(0, σ² I)`. The design stream and the noise stream are separate so
/// that a design can be held fixed while the noise is resampled.
pub fn sample_regression<R: Rng + ?Sized>(
    a: &DenseMatrix,
    cov: &DenseMatrix,
    n: usize,
    sigma: f64,
    design_rng: &mut R,
    noise_rng: &mut R,
) -> Result<ProblemInstance> {
    let x = sample_design(cov, n, design_rng)?;
    sample_observations(a, x, sigma, noise_rng)
}

/// `n × d` matrix with i.i.d. `N(0, Σ)` rows.
pub fn sample_design<R: Rng + ?Sized>(cov: &DenseMatrix, n: usize, rng: &mut R) -> Result<DenseMatrix> {
    spectral::ensure_finite(cov)?;
    spectral::ensure_square(cov)?;
    let d = cov.nrows();
    if n < d {
        return Err(Error::Domain(format!("need n >= d_x, got n={n}, d_x={d}")));
    }
    let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
    let g = gaussian_matrix(n, d, 1.0, rng);
    Ok(g * chol.l().transpose())
}

/// Completes an instance from a fixed design: `Y = X Aᵀ + E`.
pub fn sample_observations<R: Rng + ?Sized>(
    a: &DenseMatrix,
    x: DenseMatrix,
    sigma: f64,
    noise_rng: &mut R,
) -> Result<ProblemInstance> {
    if a.ncols() != x.ncols() {
        return Err(Error::Shape(format!("target has {} columns, design has {}", a.ncols(), x.ncols())));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise level must be >= 0, got {sigma}")));
    }
    let noise = gaussian_matrix(x.nrows(), a.nrows(), sigma, noise_rng);
    let y = &x * a.transpose() + noise;
    Ok(ProblemInstance { a: a.clone(), x, y, sigma, setting: Setting::Regression, seed: 0 })
}

/// One trajectory of `x_{t+1} = A x_t + η_t` from `x_1 = 0`, split into
/// `X = (x_1..x_n)` and `Y = (x_2..x_{n+1})`.
pub fn simulate_lti<R: Rng + ?Sized>(a: &DenseMatrix, n: usize, sigma: f64, rng: &mut R) -> Result<ProblemInstance> {
    spectral::ensure_square(a)?;
    if n == 0 {
        return Err(Error::Domain("trajectory length must be positive".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise level must be >= 0, got {sigma}")));
    }
    let rho = spectral::spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let d = a.nrows();
    let mut states = DenseMatrix::zeros(n + 1, d);
    let mut x = DVector::zeros(d);
    for t in 1..=n {
        let eta = DVector::from_fn(d, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        x = a * &x + eta;
        states.set_row(t, &x.transpose());
    }
    Ok(ProblemInstance {
        a: a.clone(),
        x: states.rows(0, n).into_owned(),
        y: states.rows(1, n).into_owned(),
        sigma,
        setting: Setting::Sysid,
        seed: 0,
    })
}

/// [`sample_regression`] with design and noise streams derived from `seed`;
/// the seed is recorded on the instance.
pub fn regression_instance(a: &DenseMatrix, cov: &DenseMatrix, n: usize, sigma: f64, seed: u64) -> Result<ProblemInstance> {
    let key = StreamKey::new(seed, 0, 0);
    let mut inst = sample_regression(a, cov, n, sigma, &mut key.rng(Stream::Design), &mut key.rng(Stream::Noise))?;
    inst.seed = seed;
    Ok(inst)
}

/// [`simulate_lti`] with the noise stream derived from `seed`.
pub fn lti_instance(a: &DenseMatrix, n: usize, sigma: f64, seed: u64) -> Result<ProblemInstance> {
    let mut inst = simulate_lti(a, n, sigma, &mut StreamKey::new(seed, 0, 0).rng(Stream::Noise))?;
    inst.seed = seed;
    Ok(inst)
}
