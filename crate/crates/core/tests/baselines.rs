mod common;

use lgnb::baselines::{
    estimate_r_mle_univariate, estimate_r_mme, estimate_r_mqle, fit_nb_fixed_r, fit_nb_mle, fit_poisson_mle,
    nb_log_likelihood, poisson_log_likelihood, univariate_gibbs, univariate_vb, UnivariateSample,
};
use lgnb::data::{Dataset, Hyperparameters};
use lgnb::diagnostics::autocorrelation;
use lgnb::gibbs::GibbsConfig;
use lgnb::io::bundled_redmites;
use lgnb::rng::RngStream;
use lgnb::simulate::sample_nb_mean;
use lgnb::vb::VbConfig;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

fn covariate_data(n: usize, seed: u64, r: Option<f64>) -> Dataset {
    let mut rng = RngStream::new(seed);
    let mut y = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(-1.0..1.0);
        let x2: f64 = rng.random_range(0.0..2.0);
        let mean = (0.3 + 0.5 * x1 - 0.2 * x2).exp();
        y.push(match r {
            Some(r) => sample_nb_mean(mean, r, &mut rng).unwrap(),
            None => Poisson::new(mean).unwrap().sample(&mut rng) as u64,
        });
        rows.push(vec![x1, x2]);
    }
    Dataset::from_covariates(y, &rows).unwrap()
}

#[test]
fn poisson_fit_is_a_stationary_point() {
    let data = covariate_data(500, 1, Some(3.0));
    let fit = fit_poisson_mle(&data, 1e-10).unwrap();
    assert!(fit.converged);
    let scale: f64 = data.y().iter().map(|&y| y as f64).sum();
    for p in 0..fit.beta.len() {
        let h = 1e-5;
        let mut up = fit.beta.clone();
        let mut down = fit.beta.clone();
        up[p] += h;
        down[p] -= h;
        let fd = (poisson_log_likelihood(&data, &up) - poisson_log_likelihood(&data, &down)) / (2.0 * h);
        // score Σ (y_i - μ_i) x_ip written out directly
        let score: f64 = (0..data.n())
            .map(|i| {
                let eta: f64 = (0..fit.beta.len()).map(|q| data.x()[(i, q)] * fit.beta[q]).sum();
                (data.y()[i] as f64 - eta.exp()) * data.x()[(i, p)]
            })
            .sum();
        assert!(fd.abs() < 1e-6 * scale, "coef {p}: finite-difference gradient {fd}");
        assert!(score.abs() < 1e-6 * scale, "coef {p}: score {score}");
    }
}

#[test]
fn finite_difference_gradient_matches_score_away_from_optimum() {
    let data = covariate_data(200, 2, None);
    let beta = [0.1, -0.3, 0.4];
    for p in 0..3 {
        let h = 1e-6;
        let mut up = beta.to_vec();
        let mut down = beta.to_vec();
        up[p] += h;
        down[p] -= h;
        let fd = (poisson_log_likelihood(&data, &up) - poisson_log_likelihood(&data, &down)) / (2.0 * h);
        let score: f64 = (0..data.n())
            .map(|i| {
                let eta = beta[0] + beta[1] * data.x()[(i, 1)] + beta[2] * data.x()[(i, 2)];
                (data.y()[i] as f64 - eta.exp()) * data.x()[(i, p)]
            })
            .sum();
        assert!((fd - score).abs() <= 1e-6 * score.abs().max(1.0), "{fd} vs {score}");
    }
}

#[test]
fn nb_profile_likelihood_is_a_local_maximum() {
    let data = covariate_data(800, 3, Some(2.0));
    let fit = fit_nb_mle(&data, 1e-10).unwrap();
    assert!(fit.converged && !fit.poisson_boundary);
    let profile = |ln_r: f64| fit_nb_fixed_r(&data, ln_r.exp(), 1e-12).unwrap().log_likelihood;
    let t = fit.r().ln();
    let h = 1e-2;
    let (lo, mid, hi) = (profile(t - h), profile(t), profile(t + h));
    let second = (hi - 2.0 * mid + lo) / (h * h);
    assert!(second < 0.0, "second derivative {second}");
    assert!(mid >= lo && mid >= hi);
    assert!((mid - fit.log_likelihood).abs() < 1e-6 * mid.abs());
    assert!((mid - nb_log_likelihood(&data, &fit.beta, fit.r())).abs() < 1e-6 * mid.abs());
}

#[test]
fn huge_r_reproduces_poisson() {
    let data = covariate_data(400, 4, Some(5.0));
    let poisson = fit_poisson_mle(&data, 1e-12).unwrap();
    let nb = fit_nb_fixed_r(&data, 1e8, 1e-12).unwrap();
    for (a, b) in poisson.beta.iter().zip(&nb.beta) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn equidispersed_data_approaches_the_poisson_boundary() {
    let data = covariate_data(20_000, 5, None);
    let fit = fit_nb_mle(&data, 1e-8).unwrap();
    assert!(fit.poisson_boundary || fit.nb_inverse_dispersion < 0.01, "φ = {}", fit.nb_inverse_dispersion);
    if fit.poisson_boundary {
        assert_eq!(fit.nb_inverse_dispersion, 0.0);
        assert!(fit.r().is_infinite());
    }
}

fn nb_sample(n: usize, r: f64, p: f64, seed: u64) -> UnivariateSample {
    let mut rng = RngStream::new(seed);
    let mean = r * p / (1.0 - p);
    UnivariateSample::new((0..n).map(|_| sample_nb_mean(mean, r, &mut rng).unwrap()).collect())
}

#[test]
fn univariate_mle_recovers_r() {
    let s = nb_sample(100_000, 5.0, 0.5, 6);
    let r = estimate_r_mle_univariate(&s).unwrap();
    assert!((r - 5.0).abs() < 0.2, "{r}");
}

#[test]
fn point_estimators_agree_at_scale() {
    let s = nb_sample(1_000_000, 2.0, 0.5, 7);
    let mme = estimate_r_mme(&s).unwrap();
    let mle = estimate_r_mle_univariate(&s).unwrap();
    let mqle = estimate_r_mqle(&s).unwrap();
    for (a, b) in [(mme, mle), (mme, mqle), (mle, mqle)] {
        assert!((a / b - 1.0).abs() < 0.01, "{mme} {mle} {mqle}");
    }
}

#[test]
fn underdispersed_samples_are_rejected() {
    let s = UnivariateSample::new(vec![2, 2, 3, 2, 1, 2]);
    assert!(estimate_r_mme(&s).is_err());
    assert!(estimate_r_mle_univariate(&s).is_err());
    assert!(estimate_r_mqle(&s).is_err());
}

fn redmites_gibbs(seed: u64) -> lgnb::baselines::UnivariateTrace {
    let config = GibbsConfig { iterations: 20_000, burn_in: 10_000, thin: 1, ..GibbsConfig::default() };
    univariate_gibbs(&bundled_redmites(), &Hyperparameters::default(), &config, &mut RngStream::new(seed)).unwrap()
}

#[test]
fn redmites_bayesian_estimates() {
    let trace = redmites_gibbs(11);
    let vb = univariate_vb(&bundled_redmites(), &Hyperparameters::default(), &VbConfig::default()).unwrap();
    assert!(vb.converged);
    let (g, v) = (trace.mean_r(), vb.mean_r());
    assert!((g - 1.0812).abs() < 0.05, "Gibbs {g}");
    assert!((v - 0.9988).abs() < 0.05, "VB {v}");
    assert!((g - v).abs() / g.max(v) < 0.10, "Gibbs {g} vs VB {v}");
    assert!(vb.elbo.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
}

#[test]
fn redmites_chain_mixes_within_twenty_lags() {
    let trace = redmites_gibbs(12);
    let first_small = (1..=20).find(|&k| autocorrelation(&trace.r, k).is_some_and(|a| a < 0.2));
    assert!(first_small.is_some(), "lag-20 autocorrelation {:?}", autocorrelation(&trace.r, 20));
}

#[test]
fn all_zero_sample() {
    let sample = UnivariateSample::new(vec![0; 50]);
    let hyper = Hyperparameters { a0: 2.0, b0: 1.0, ..Hyperparameters::default() };
    let config = GibbsConfig { iterations: 30_000, burn_in: 5_000, thin: 1, r_init: 2.0, ..GibbsConfig::default() };
    let trace = univariate_gibbs(&sample, &hyper, &config, &mut RngStream::new(13)).unwrap();
    assert!(trace.mean_p() < 0.01, "p {}", trace.mean_p());
    let (mean_r, var_r, _) = common::mean_var_and_se(&trace.r);
    assert!((mean_r - 2.0).abs() < 0.2, "r {mean_r}");
    assert!((var_r - 2.0).abs() < 0.4, "var r {var_r}");
}
