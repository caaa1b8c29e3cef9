mod common;

use lgnb::kernels::{
    log1p_exp, nb_log_pmf, polya_gamma_mean, sample_logarithmic, sample_polya_gamma, PgParams, PgSampler,
};
use lgnb::rng::RngStream;

#[test]
fn nb_pmf_matches_gamma_poisson_quadrature() {
    let (r, p) = (2.5, 0.3);
    for y in 0..=20 {
        let direct = nb_log_pmf(y, r, p).unwrap().exp();
        let quad = common::nb_pmf_quadrature(y, r, p);
        assert!((direct - quad).abs() < 1e-8, "y={y}: {direct} vs {quad}");
    }
}

#[test]
fn nb_pmf_normalizes() {
    for &(r, p) in &[(0.3f64, 0.9f64), (2.5, 0.3), (50.0, 0.5), (1e-2, 0.99)] {
        let mean = r * p / (1.0 - p);
        let top = (mean * 20.0 + 40.0 / -p.ln()).ceil() as u64;
        let total: f64 = (0..=top).map(|y| nb_log_pmf(y, r, p).unwrap().exp()).sum();
        assert!(total >= 1.0 - 1e-9 && total <= 1.0 + 1e-9, "r={r} p={p}: {total}");
    }
}

#[test]
fn log1p_exp_extremes() {
    assert!((log1p_exp(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
    assert_eq!(log1p_exp(1000.0), 1000.0);
    assert_eq!(log1p_exp(f64::MAX), f64::MAX);
    let tiny = log1p_exp(-50.0);
    assert!((tiny / (-50.0f64).exp() - 1.0).abs() < 1e-12);
    assert!(log1p_exp(f64::NAN).is_nan());
}

fn logarithmic_pmf(p: f64, k: usize) -> f64 {
    -p.powi(k as i32) / (k as f64 * (-p).ln_1p())
}

#[test]
fn logarithmic_chi_square() {
    let n = 1_000_000u64;
    for (s, &p) in [0.1, 0.5, 0.9].iter().enumerate() {
        let mut rng = RngStream::new(100 + s as u64);
        let cells = 200;
        let mut counts = vec![0u64; cells + 1];
        for _ in 0..n {
            let k = sample_logarithmic(p, &mut rng).unwrap() as usize;
            counts[k.min(cells)] += 1;
        }
        let mut probs: Vec<f64> = (0..cells).map(|k| if k == 0 { 0.0 } else { logarithmic_pmf(p, k) }).collect();
        probs.push(1.0 - probs.iter().sum::<f64>());
        let (o, e) = common::pool_tail(&counts[1..], &probs[1..], n, 5.0);
        let (stat, pval) = common::chi_square(&o, &e);
        assert!(pval > 0.001, "p={p}: chi2 {stat}, p-value {pval}");
    }
}

#[test]
fn logarithmic_moments_at_one_half() {
    let n = 1_000_000;
    let mut rng = RngStream::new(5);
    let draws: Vec<f64> = (0..n).map(|_| sample_logarithmic(0.5, &mut rng).unwrap() as f64).collect();
    let ones = draws.iter().filter(|&&k| k == 1.0).count() as f64 / n as f64;
    let f1 = -0.5 / 0.5f64.ln();
    assert!((ones - f1).abs() < 3.0 * (f1 * (1.0 - f1) / n as f64).sqrt());
    let (mean, var, _) = common::mean_var_and_se(&draws);
    let expected = -0.5 / (0.5 * 0.5f64.ln());
    assert!((mean - expected).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expected}");
}

fn pg_mean_and_se(b: f64, c: f64, k: usize, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = RngStream::new(seed);
    let params = PgParams::new(b, c, k).unwrap();
    let draws: Vec<f64> = (0..n).map(|_| sample_polya_gamma(&params, &mut rng).unwrap()).collect();
    let (mean, var, _) = common::mean_var_and_se(&draws);
    (mean, (var / n as f64).sqrt())
}

#[test]
fn polya_gamma_means() {
    for (i, &(b, c)) in [(1.0, 2.0), (1.0, 0.0), (3.7, 1.5), (10.0, 0.01), (0.3, -4.0)].iter().enumerate() {
        let (mean, se) = pg_mean_and_se(b, c, 2000, 100_000, i as u64);
        let target = polya_gamma_mean(b, c);
        assert!((mean - target).abs() < 3.0 * se, "b={b} c={c}: {mean} vs {target} (se {se})");
    }
    assert!((polya_gamma_mean(1.0, 2.0) - 0.25 * 1.0f64.tanh()).abs() < 1e-15);
}

#[test]
fn polya_gamma_truncation_self_consistency() {
    let (short, _) = pg_mean_and_se(3.7, 1.5, 2000, 20_000, 77);
    let (long, _) = pg_mean_and_se(3.7, 1.5, 20_000, 20_000, 77);
    assert!((short / long - 1.0).abs() < 0.005, "{short} vs {long}");
}

#[test]
fn pg_sampler_matches_one_shot_sampler() {
    let sampler = PgSampler::new(500).unwrap();
    let params = PgParams::new(2.2, -0.7, 500).unwrap();
    let mut a = RngStream::new(9);
    let mut b = RngStream::new(9);
    for _ in 0..20 {
        assert_eq!(sampler.sample(2.2, -0.7, &mut a).unwrap(), sample_polya_gamma(&params, &mut b).unwrap());
    }
}
