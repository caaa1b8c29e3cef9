//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Pearson chi-square statistic and its upper-tail p-value.
pub fn chi_square(observed: &[u64], expected_prob: &[f64]) -> (f64, f64) {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected_prob)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    (stat, p)
}

/// Pool trailing cells so every expected count is at least `min_expected`.
pub fn pool_tail(observed: &[u64], prob: &[f64], n: u64, min_expected: f64) -> (Vec<u64>, Vec<f64>) {
    let mut o = Vec::new();
    let mut p = Vec::new();
    let mut acc_o = 0;
    let mut acc_p = 0.0;
    for (&oi, &pi) in observed.iter().zip(prob) {
        if pi * n as f64 >= min_expected && acc_p == 0.0 {
            o.push(oi);
            p.push(pi);
        } else {
            acc_o += oi;
            acc_p += pi;
        }
    }
    if acc_p > 0.0 {
        o.push(acc_o);
        p.push(acc_p);
    }
    (o, p)
}

/// Two-sided Kolmogorov-Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance 0.001.
pub fn ks_critical_001(n: usize) -> f64 {
    1.9495 / (n as f64).sqrt()
}

/// Gauss-Hermite nodes and weights for `∫ e^{-x²} f(x) dx` (Golub-Welsch).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v * v)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `E[f(ψ)]` for `ψ ~ N(mu, var)` by Gauss-Hermite quadrature.
pub fn normal_expectation(mu: f64, var: f64, nodes: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    let s = (2.0 * var).sqrt();
    nodes.iter().map(|&(x, w)| w * f(mu + s * x)).sum::<f64>() / std::f64::consts::PI.sqrt()
}

/// NB(r, p) pmf as the gamma-Poisson mixture `∫ Pois(y; λ) Gamma(λ; r, p/(1-p)) dλ`,
/// integrated over `λ = u²` with composite Simpson.
pub fn nb_pmf_quadrature(y: u64, r: f64, p: f64) -> f64 {
    let scale = p / (1.0 - p);
    let yf = y as f64;
    let log_integrand = |u: f64| {
        let lambda = u * u;
        if lambda == 0.0 {
            return f64::NEG_INFINITY;
        }
        let ln_pois = yf * lambda.ln() - lambda - ln_gamma(yf + 1.0);
        let ln_gam = (r - 1.0) * lambda.ln() - lambda / scale - ln_gamma(r) - r * scale.ln();
        (2.0 * u).ln() + ln_pois + ln_gam
    };
    let upper = (yf + r + 200.0 * scale + 60.0).sqrt() * 2.0;
    let m = 200_000;
    let h = upper / m as f64;
    let mut sum = 0.0;
    for k in 0..=m {
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * log_integrand(k as f64 * h).exp();
    }
    sum * h / 3.0
}

/// Unsigned Stirling numbers of the first kind, rows `0..=m`, exact in `u128`.
pub fn stirling_first(m: usize) -> Vec<Vec<u128>> {
    let mut rows = vec![vec![1u128]];
    for n in 1..=m {
        let prev = &rows[n - 1];
        let row = (0..=n)
            .map(|j| {
                let a = if j < prev.len() { (n as u128 - 1) * prev[j] } else { 0 };
                let b = if j >= 1 { prev[j - 1] } else { 0 };
                a + b
            })
            .collect();
        rows.push(row);
    }
    rows
}

/// Coefficients of `z^0..=z^m` in `(-ln(1 - pz))^j` by truncated power-series multiplication.
pub fn neg_log_series_power(p: f64, j: usize, m: usize) -> Vec<f64> {
    let base: Vec<f64> = (0..=m).map(|k| if k == 0 { 0.0 } else { p.powi(k as i32) / k as f64 }).collect();
    let mut acc = vec![0.0; m + 1];
    acc[0] = 1.0;
    for _ in 0..j {
        let mut next = vec![0.0; m + 1];
        for (a, &x) in acc.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in base.iter().enumerate().take(m + 1 - a) {
                next[a + b] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// Exact table-count law for `y` customers at concentration `r` by enumerating
/// every open-new-table / join sequence.
pub fn table_count_enumeration(y: usize, r: f64) -> Vec<f64> {
    let mut probs = vec![0.0; y + 1];
    for mask in 0..(1u32 << (y - 1)) {
        // the first customer always opens a table
        let mut prob = 1.0;
        let mut tables = 1;
        for k in 1..y {
            let new = mask >> (k - 1) & 1 == 1;
            let denom = r + k as f64;
            if new {
                prob *= r / denom;
                tables += 1;
            } else {
                prob *= k as f64 / denom;
            }
        }
        probs[tables] += prob;
    }
    probs
}

/// Variance of the sample variance estimator, `(m4 - s⁴)/n`, from the draws.
pub fn mean_var_and_se(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (mean, m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}
