use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rankadapt::bounds::*;
use rankadapt::estimators::{t_lse, Design};
use rankadapt::problem::*;
use rankadapt::rng::{Stream, StreamKey};
use rankadapt::spectral::{self, DenseMatrix};

fn random_spectrum(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..3.0)).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn inputs(n: u64, sigma: f64, r: usize, rng: &mut ChaCha8Rng) -> BoundInputs {
    let d = r + rng.random_range(0..4);
    let mut cov = random_spectrum(d, rng);
    cov.iter_mut().for_each(|v| *v += 0.1);
    BoundInputs {
        n,
        delta: 0.05,
        sigma,
        d_x: d,
        d_y: d,
        r,
        target_spectrum: random_spectrum(r, rng),
        cov_spectrum: cov,
    }
}

#[test]
fn hard_threshold_error_is_below_theorem1_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..10_000 {
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=8);
        let rank = rng.random_range(1..=rows.min(cols));
        let a = gaussian_matrix(rows, rank, 1.0, &mut rng) * gaussian_matrix(rank, cols, 1.0, &mut rng);
        let z = gaussian_matrix(rows, cols, rng.random_range(0.01..2.0), &mut rng);
        let zn = spectral::operator_norm(&z).unwrap();
        let xi = rng.random_range(2.0 * zn..=4.0 * zn);
        let err = (spectral::hard_threshold(&(&a + &z), xi).unwrap() - &a).norm_squared();
        let spec = spectral::singular_values(&a).unwrap();
        let bound = theorem1_bound(&spec, xi, spec.len(), RankRange::OneToR).unwrap().value;
        if err > bound + 1e-9 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn lemma1_holds_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let rows = rng.random_range(1..=10);
        let cols = rng.random_range(1..=10);
        let a = gaussian_matrix(rows, cols, 1.0, &mut rng);
        let z = gaussian_matrix(rows, cols, rng.random_range(0.0..3.0), &mut rng);
        let k = rng.random_range(0..=rows.min(cols));
        assert!(lemma1_check(&(&a + &z), &a, k).unwrap());
    }
}

#[test]
fn gamma_is_monotone_in_n_and_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let r = rng.random_range(1..6);
        let base = inputs(10, 0.5, r, &mut rng);
        let mut prev = f64::INFINITY;
        let mut prev_k = 0;
        for n in (0..20).map(|e| 10u64 << e) {
            let g = gamma_delta(&BoundInputs { n, ..base.clone() }, RankRange::OneToR).unwrap();
            assert!(g.value <= prev);
            let k = g.minimizer_k.unwrap();
            assert!(k >= prev_k, "k* fell from {prev_k} to {k}");
            prev = g.value;
            prev_k = k;
        }
        let lo = gamma_delta(&base, RankRange::OneToR).unwrap().value;
        let hi = gamma_delta(&BoundInputs { sigma: 1.0, ..base.clone() }, RankRange::OneToR).unwrap().value;
        assert!(lo <= hi);
    }
}

#[test]
fn sample_complexity_is_the_first_crossing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for _ in 0..200 {
        let r = rng.random_range(1..5);
        let base = inputs(1, 0.3, r, &mut rng);
        let floor = base.target_spectrum.iter().skip(r).map(|s| s * s).sum::<f64>();
        let threshold = floor + rng.random_range(1e-4..0.5);
        let setting = if rng.random_bool(0.5) { Setting::Regression } else { Setting::Sysid };
        let value = |n: u64| {
            let i = BoundInputs { n, ..base.clone() };
            match setting {
                Setting::Regression => gamma_delta(&i, RankRange::OneToR).unwrap().value,
                Setting::Sysid => beta_delta(&i, RankRange::OneToR).unwrap().value,
            }
        };
        let n = min_samples_for(&base, setting, threshold, RankRange::OneToR).unwrap();
        assert!(value(n) <= threshold);
        if n > 1 {
            assert!(value(n - 1) > threshold);
        }
        // oracle: linear scan when the answer is small
        if n < 5000 {
            let scan = (1..).find(|&m| value(m) <= threshold).unwrap();
            assert_eq!(scan, n);
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn tlse_upper_covers_observed_error() {
    let (d, r, n, sigma, delta) = (20, 5, 500, 0.1, 0.05);
    let profile = SpectrumProfile::new(d, r, 1.0, SpectrumOffset::J).unwrap();
    let a = make_target(&profile, &mut StreamKey::new(5, 0, 0).rng(Stream::Target)).unwrap();
    let spectrum = spectral::singular_values(&a).unwrap();
    let mut covered = 0;
    for trial in 0..200 {
        let inst = regression_instance(&a, &DenseMatrix::identity(d, d), n, sigma, 700 + trial).unwrap();
        let design = Design::new(inst.x.clone()).unwrap();
        let err = t_lse(&inst, delta).unwrap().frob_error_sq().unwrap();
        let bound = tlse_upper(
            &BoundInputs {
                n: n as u64,
                delta,
                sigma,
                d_x: d,
                d_y: d,
                r,
                target_spectrum: spectrum.clone(),
                cov_spectrum: design.cov_spectrum().to_vec(),
            },
            RankRange::OneToR,
        )
        .unwrap();
        if err <= bound.value {
            covered += 1;
        }
    }
    assert!(covered >= 180, "{covered}/200");
}

#[test]
fn adaptive_bound_beats_chatterjee_on_low_rank_targets() {
    let d = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = spectral::truncate_rank(&uniform_matrix(d, d, -1.0, 1.0, &mut rng), 5).unwrap();
    let z = gaussian_matrix(d, d, 1.0, &mut rng);
    let zn = spectral::operator_norm(&z).unwrap();
    let a_spec = spectral::singular_values(&a).unwrap();
    let abar_spec = spectral::singular_values(&(&a + &z)).unwrap();
    let nuclear = spectral::nuclear_norm(&a).unwrap();
    for tau in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let ours = adaptive_denoise_bound(&abar_spec, &a_spec, zn, tau).unwrap().value;
        let theirs = chatterjee_bound(tau, zn, nuclear).unwrap();
        assert!(ours < theirs, "tau {tau}: {ours} vs {theirs}");
        assert!(ours <= DENOISE_CONST * a.norm_squared() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn including_zero_rank_never_raises_minima(seed in any::<u64>(), r in 1usize..6, xi in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spectrum(r, &mut rng);
        let one = theorem1_bound(&spec, xi, r, RankRange::OneToR).unwrap();
        let zero = theorem1_bound(&spec, xi, r, RankRange::ZeroToR).unwrap();
        prop_assert!(zero.value <= one.value);
        let inp = inputs(100, 0.5, r, &mut rng);
        prop_assert!(tlse_upper(&inp, RankRange::ZeroToR).unwrap().value <= tlse_upper(&inp, RankRange::OneToR).unwrap().value);
    }

    #[test]
    fn theorem1_minimizer_attains_value(seed in any::<u64>(), r in 1usize..8, xi in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spectrum(r, &mut rng);
        let b = theorem1_bound(&spec, xi, r, RankRange::OneToR).unwrap();
        let k = b.minimizer_k.unwrap();
        // oracle: direct evaluation of every candidate
        let eval = |k: usize| 18.0 * (4.0 * k as f64 * xi * xi + spec[k..].iter().map(|s| s * s).sum::<f64>());
        prop_assert!((eval(k) - b.value).abs() <= 1e-12 * b.value.max(1.0));
        for j in 1..=r {
            prop_assert!(eval(j) >= b.value - 1e-12);
            if j < k {
                prop_assert!(eval(j) > b.value);
            }
        }
    }
}
