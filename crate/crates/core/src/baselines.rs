//! Classical estimators: Poisson and NB regression by Newton-Raphson, the
//! univariate NB dispersion estimators, and the conjugate univariate NB model.
//!
//! NB regression uses the mean-dispersion form
//!
//! ```text
//! y_i ~ NB(mean μ_i, variance μ_i + φ μ_i²),   μ_i = exp(x_iᵀβ),   r = 1/φ
//! ```
//!
//! and is optimized jointly over `(β, ln φ)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::crt::{build_f_table, build_rr_table, expected_table_count, sample_table_count, table_count_entropy};
use crate::data::{Dataset, Hyperparameters};
use crate::error::{LgnbError, Result};
use crate::gibbs::GibbsConfig;
use crate::kernels::sample_gamma;
use crate::rng::RngStream;
use crate::vb::VbConfig;

const MAX_NEWTON_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;
/// `ln φ` below which the NB fit is treated as having reached the Poisson boundary.
const LN_PHI_FLOOR: f64 = -25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub beta: Vec<f64>,
    /// `φ = 1/r`; zero for Poisson fits and for NB fits that hit the boundary.
    pub nb_inverse_dispersion: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
    /// The NB fit collapsed to the Poisson model (`φ → 0`).
    pub poisson_boundary: bool,
}

impl MleFit {
    /// `r = 1/φ`, infinite for Poisson fits.
    pub fn r(&self) -> f64 {
        if self.nb_inverse_dispersion > 0.0 {
            1.0 / self.nb_inverse_dispersion
        } else {
            f64::INFINITY
        }
    }
}

fn check_rank(data: &Dataset) -> Result<()> {
    let sv = data.x().clone().singular_values();
    let max = sv.max();
    if data.n() < data.n_coef() || sv.min() <= max * 1e-12 * data.n() as f64 {
        return Err(LgnbError::domain("design matrix is not of full column rank"));
    }
    Ok(())
}

fn mu_of(data: &Dataset, beta: &DVector<f64>) -> DVector<f64> {
    data.linear_predictor(beta).map(f64::exp)
}

pub fn poisson_log_likelihood(data: &Dataset, beta: &[f64]) -> f64 {
    let eta = data.linear_predictor(&DVector::from_column_slice(beta));
    data.y()
        .iter()
        .zip(eta.iter())
        .map(|(&y, &e)| {
            let y = y as f64;
            y * e - e.exp() - ln_gamma(y + 1.0)
        })
        .sum()
}

/// NB log-likelihood in the mean-dispersion form with `r = 1/φ`.
pub fn nb_log_likelihood(data: &Dataset, beta: &[f64], r: f64) -> f64 {
    let eta = data.linear_predictor(&DVector::from_column_slice(beta));
    data.y()
        .iter()
        .zip(eta.iter())
        .map(|(&y, &e)| {
            let y = y as f64;
            let mu = e.exp();
            // ln(r/(r+μ)) and ln(μ/(r+μ)) without cancellation for large r
            let ln_r_part = -(mu / r).ln_1p();
            let ln_mu_part = e - r.ln() - (mu / r).ln_1p();
            ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + r * ln_r_part + y * ln_mu_part
        })
        .sum()
}

/// `Σ_{k<y} 1/(r+k)` and `Σ_{k<y} 1/(r+k)²`.
fn digamma_diffs(y: u64, r: f64) -> (f64, f64) {
    (0..y).fold((0.0, 0.0), |(a, b), k| {
        let t = 1.0 / (r + k as f64);
        (a + t, b + t * t)
    })
}

/// Maximize a concave-ish objective by Newton's method with step halving.
/// `eval` returns `(value, gradient, hessian)`; a Hessian that is not negative
/// definite is shifted until it is.
fn newton<F>(mut theta: DVector<f64>, tol: f64, mut eval: F, stop: impl Fn(&DVector<f64>) -> bool) -> Result<(DVector<f64>, usize, bool, f64)>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>),
{
    let (mut value, mut grad, mut hess) = eval(&theta);
    for it in 1..=MAX_NEWTON_ITERATIONS {
        if !value.is_finite() {
            return Err(LgnbError::fault("log-likelihood is not finite"));
        }
        if grad.norm() < tol {
            return Ok((theta, it - 1, true, grad.norm()));
        }
        let mut neg = -hess.clone();
        let mut shift = 0.0;
        let chol = loop {
            if let Some(c) = neg.clone().cholesky() {
                break c;
            }
            shift = if shift == 0.0 { 1e-6 * (1.0 + neg.diagonal().amax()) } else { shift * 10.0 };
            neg = -hess.clone() + DMatrix::identity(theta.len(), theta.len()) * shift;
            if !shift.is_finite() {
                return Err(LgnbError::fault("cannot regularize the Hessian"));
            }
        };
        let step = chol.solve(&grad);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &theta + &step * scale;
            let (v, g, h) = eval(&candidate);
            if v.is_finite() && v >= value - 1e-12 * value.abs() {
                theta = candidate;
                value = v;
                grad = g;
                hess = h;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || stop(&theta) {
            return Ok((theta, it, grad.norm() < tol, grad.norm()));
        }
    }
    Ok((theta, MAX_NEWTON_ITERATIONS, grad.norm() < tol, grad.norm()))
}

fn start_beta(data: &Dataset) -> DVector<f64> {
    let mean = data.y().iter().sum::<u64>() as f64 / data.n() as f64;
    let mut beta = DVector::zeros(data.n_coef());
    beta[0] = mean.max(1e-8).ln();
    beta
}

/// Poisson regression MLE.
pub fn fit_poisson_mle(data: &Dataset, tol: f64) -> Result<MleFit> {
    check_rank(data)?;
    let eval = |beta: &DVector<f64>| {
        let mu = mu_of(data, beta);
        let resid = DVector::from_fn(data.n(), |i, _| data.y()[i] as f64 - mu[i]);
        let grad = data.x().tr_mul(&resid);
        let weighted = DMatrix::from_fn(data.n(), data.n_coef(), |i, j| data.x()[(i, j)] * mu[i]);
        let hess = -(data.x().tr_mul(&weighted));
        (poisson_log_likelihood(data, beta.as_slice()), grad, hess)
    };
    let (beta, iterations, converged, gradient_norm) = newton(start_beta(data), tol, eval, |_| false)?;
    Ok(MleFit {
        log_likelihood: poisson_log_likelihood(data, beta.as_slice()),
        beta: beta.iter().copied().collect(),
        nb_inverse_dispersion: 0.0,
        converged,
        iterations,
        gradient_norm,
        poisson_boundary: false,
    })
}

/// NB regression MLE for `β` with `r` held fixed.
pub fn fit_nb_fixed_r(data: &Dataset, r: f64, tol: f64) -> Result<MleFit> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LgnbError::domain(format!("r must be positive, got {r}")));
    }
    check_rank(data)?;
    let eval = |beta: &DVector<f64>| {
        let mu = mu_of(data, beta);
        let mut score = DVector::zeros(data.n());
        let mut weight = DVector::zeros(data.n());
        for i in 0..data.n() {
            let y = data.y()[i] as f64;
            // r(y-μ)/(r+μ) and rμ(r+y)/(r+μ)², written for large r
            let ratio = 1.0 / (1.0 + mu[i] / r);
            score[i] = (y - mu[i]) * ratio;
            weight[i] = mu[i] * (1.0 + y / r) * ratio * ratio;
        }
        let weighted = DMatrix::from_fn(data.n(), data.n_coef(), |i, j| data.x()[(i, j)] * weight[i]);
        let hess = -(data.x().tr_mul(&weighted));
        (nb_log_likelihood(data, beta.as_slice(), r), data.x().tr_mul(&score), hess)
    };
    let (beta, iterations, converged, gradient_norm) = newton(start_beta(data), tol, eval, |_| false)?;
    Ok(MleFit {
        log_likelihood: nb_log_likelihood(data, beta.as_slice(), r),
        beta: beta.iter().copied().collect(),
        nb_inverse_dispersion: 1.0 / r,
        converged,
        iterations,
        gradient_norm,
        poisson_boundary: false,
    })
}

/// Joint NB regression MLE of `(β, φ)`.
///
/// When the Poisson fit shows no overdispersion (the score for `φ` at `φ = 0`,
/// `½ Σ[(y_i - μ_i)² - y_i]`, is not positive) or `φ` runs to zero, the Poisson
/// fit is returned with `poisson_boundary` set.
pub fn fit_nb_mle(data: &Dataset, tol: f64) -> Result<MleFit> {
    let poisson = fit_poisson_mle(data, tol)?;
    let beta0 = DVector::from_column_slice(&poisson.beta);
    let mu0 = mu_of(data, &beta0);
    let mut excess = 0.0;
    let mut mu_sq = 0.0;
    for (i, &y) in data.y().iter().enumerate() {
        let y = y as f64;
        excess += (y - mu0[i]).powi(2) - y;
        mu_sq += mu0[i] * mu0[i];
    }
    let boundary = |mut fit: MleFit| {
        fit.poisson_boundary = true;
        fit
    };
    if excess <= 0.0 {
        return Ok(boundary(poisson));
    }

    let p = data.n_coef();
    let eval = |theta: &DVector<f64>| {
        let beta = theta.rows(0, p).into_owned();
        let tau = theta[p];
        let r = (-tau).exp();
        let mu = mu_of(data, &beta);
        let mut g_eta = DVector::zeros(data.n());
        let mut h_eta = DVector::zeros(data.n());
        let mut h_eta_r = DVector::zeros(data.n());
        let (mut g_r, mut h_r) = (0.0, 0.0);
        for i in 0..data.n() {
            let y = data.y()[i] as f64;
            let m = mu[i];
            let rm = r + m;
            g_eta[i] = r * (y - m) / rm;
            h_eta[i] = -r * m * (r + y) / (rm * rm);
            h_eta_r[i] = (y - m) * m / (rm * rm);
            let (d1, d2) = digamma_diffs(data.y()[i], r);
            g_r += d1 - (m / r).ln_1p() + 1.0 - (r + y) / rm;
            h_r += -d2 + 1.0 / r - 1.0 / rm - (m - y) / (rm * rm);
        }
        let mut grad = DVector::zeros(p + 1);
        grad.rows_mut(0, p).copy_from(&data.x().tr_mul(&g_eta));
        grad[p] = -r * g_r;
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        let weighted = DMatrix::from_fn(data.n(), p, |i, j| data.x()[(i, j)] * h_eta[i]);
        hess.view_mut((0, 0), (p, p)).copy_from(&data.x().tr_mul(&weighted));
        let cross = data.x().tr_mul(&h_eta_r) * (-r);
        for j in 0..p {
            hess[(j, p)] = cross[j];
            hess[(p, j)] = cross[j];
        }
        hess[(p, p)] = r * r * h_r + r * g_r;
        (nb_log_likelihood(data, beta.as_slice(), r), grad, hess)
    };

    let phi0 = (excess / mu_sq).max(1e-4);
    let mut theta = DVector::zeros(p + 1);
    theta.rows_mut(0, p).copy_from(&beta0);
    theta[p] = phi0.ln();
    let (theta, iterations, converged, gradient_norm) = newton(theta, tol, eval, |t| t[p] < LN_PHI_FLOOR)?;
    if theta[p] < LN_PHI_FLOOR {
        return Ok(boundary(poisson));
    }
    let beta: Vec<f64> = theta.rows(0, p).iter().copied().collect();
    let r = (-theta[p]).exp();
    Ok(MleFit {
        log_likelihood: nb_log_likelihood(data, &beta, r),
        beta,
        nb_inverse_dispersion: theta[p].exp(),
        converged,
        iterations,
        gradient_norm,
        poisson_boundary: false,
    })
}

/// An iid count sample with its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateSample {
    y: Vec<u64>,
    mean: f64,
    variance: f64,
}

impl UnivariateSample {
    /// Mean and variance (denominator `N - 1`); both are zero for fewer than two values
    /// where undefined.
    pub fn new(y: Vec<u64>) -> Self {
        let n = y.len() as f64;
        let mean = if y.is_empty() { 0.0 } else { y.iter().sum::<u64>() as f64 / n };
        let variance = if y.len() < 2 {
            0.0
        } else {
            y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        Self { y, mean, variance }
    }

    /// Expand a `(value, frequency)` table.
    pub fn from_frequencies(table: &[(u64, u64)]) -> Self {
        let y = table
            .iter()
            .flat_map(|&(value, count)| std::iter::repeat_n(value, count as usize))
            .collect();
        Self::new(y)
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sum(&self) -> u64 {
        self.y.iter().sum()
    }

    fn require_overdispersion(&self) -> Result<()> {
        if self.n() < 2 || self.variance <= self.mean {
            return Err(LgnbError::domain(format!(
                "sample is not overdispersed (mean {}, variance {})",
                self.mean, self.variance
            )));
        }
        Ok(())
    }
}

/// Method of moments: `r = mean² / (variance - mean)`.
pub fn estimate_r_mme(sample: &UnivariateSample) -> Result<f64> {
    sample.require_overdispersion()?;
    Ok(sample.mean.powi(2) / (sample.variance - sample.mean))
}

/// Find the root of a decreasing function on `ln r ∈ [ln lo, ln hi]` by bisection.
/// `Ok(None)` when `f(hi) > 0`, i.e. the root lies beyond `hi`.
fn bisect_ln_r(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Option<f64>> {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    if f(hi) > 0.0 {
        return Ok(None);
    }
    if f(lo) < 0.0 {
        return Err(LgnbError::fault("estimating equation has no sign change"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid.exp()) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok(Some((0.5 * (a + b)).exp()))
}

/// Profile likelihood equation of the NB dispersion, `p` replaced by `mean/(r + mean)`.
fn profile_score(sample: &UnivariateSample, r: f64) -> f64 {
    let n = sample.n() as f64;
    let sum: f64 = sample.y.iter().map(|&y| digamma_diffs(y, r).0).sum();
    sum - n * (sample.mean / r).ln_1p()
}

/// Maximum likelihood estimate of `r` with `p` profiled out.
pub fn estimate_r_mle_univariate(sample: &UnivariateSample) -> Result<f64> {
    sample.require_overdispersion()?;
    bisect_ln_r(|r| profile_score(sample, r), 1e-10, 1e8)?
        .ok_or_else(|| LgnbError::NonConvergence("likelihood increases without bound in r (Poisson boundary)".into()))
}

/// Quasi-likelihood estimate of `r`: the root of
/// `Σ (y_i - ȳ)² / (ȳ (1 + ȳ/r)) = N - 1`.
pub fn estimate_r_mqle(sample: &UnivariateSample) -> Result<f64> {
    if sample.n() < 2 || sample.mean <= 0.0 {
        return Err(LgnbError::domain("need at least two values with a positive mean"));
    }
    let ss: f64 = sample.y.iter().map(|&y| (y as f64 - sample.mean).powi(2)).sum();
    let df = sample.n() as f64 - 1.0;
    let pearson = |r: f64| df - ss / (sample.mean * (1.0 + sample.mean / r));
    bisect_ln_r(pearson, 1e-10, 1e8)?
        .ok_or_else(|| LgnbError::NonConvergence("quasi-likelihood equation has no root below 1e8 (Poisson boundary)".into()))
}

/// Retained draws of the univariate NB model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateTrace {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
}

impl UnivariateTrace {
    pub fn mean_r(&self) -> f64 {
        self.r.iter().sum::<f64>() / self.r.len() as f64
    }

    pub fn mean_p(&self) -> f64 {
        self.p.iter().sum::<f64>() / self.p.len() as f64
    }
}

/// Gibbs sampler for `y_i ~ NB(r, p)`, `r ~ Gamma(a0, 1/b0)`, `p ~ Beta(beta_a, beta_b)`.
///
/// Uses `iterations`, `burn_in`, `thin` and `r_init` from `config`.
pub fn univariate_gibbs(
    sample: &UnivariateSample,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<UnivariateTrace> {
    config.validate()?;
    hyper.validate()?;
    let n = sample.n() as f64;
    let total = sample.sum() as f64;
    let m_max = sample.y.iter().copied().max().unwrap_or(0).max(1) as usize;
    let mut r = config.fixed_r.unwrap_or(config.r_init);
    let mut p: f64 = 0.5;
    let mut trace = UnivariateTrace {
        r: Vec::with_capacity(config.retained()),
        p: Vec::with_capacity(config.retained()),
    };
    for it in 1..=config.iterations {
        if config.fixed_r.is_none() {
            let table = build_rr_table(m_max, r)?;
            let mut tables = 0u64;
            for &y in &sample.y {
                tables += sample_table_count(y, &table, rng)?;
            }
            let rate = hyper.b0 - n * (-p).ln_1p();
            r = sample_gamma(hyper.a0 + tables as f64, 1.0 / rate, rng)?;
        }
        let beta = Beta::new(hyper.beta_a + total, hyper.beta_b + n * r)
            .map_err(|e| LgnbError::fault(format!("iteration {it}: {e}")))?;
        p = beta.sample(rng);
        if p >= 1.0 {
            p = 1.0 - f64::EPSILON;
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(LgnbError::fault(format!("iteration {it}: r = {r}")));
        }
        if it > config.burn_in && (it - config.burn_in) % config.thin == 0 {
            trace.r.push(r);
            trace.p.push(p);
        }
    }
    Ok(trace)
}

/// Variational posterior `Q_r = Gamma(ã, 1/h̃)`, `Q_p = Beta(α̃, β̃)` of the univariate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateVbFit {
    pub a_tilde: f64,
    pub h_tilde: f64,
    pub alpha_tilde: f64,
    pub beta_tilde: f64,
    /// Exact lower bound after each sweep.
    pub elbo: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

impl UnivariateVbFit {
    pub fn mean_r(&self) -> f64 {
        self.a_tilde / self.h_tilde
    }

    pub fn mean_p(&self) -> f64 {
        self.alpha_tilde / (self.alpha_tilde + self.beta_tilde)
    }
}

fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Mean-field VB for the univariate model. Every expectation is closed form, so
/// the lower bound is exact. Uses `max_sweeps`, `tolerance` and `r_init` from `config`.
pub fn univariate_vb(sample: &UnivariateSample, hyper: &Hyperparameters, config: &VbConfig) -> Result<UnivariateVbFit> {
    config.validate()?;
    hyper.validate()?;
    let n = sample.n() as f64;
    let total = sample.sum() as f64;
    let m_max = sample.y.iter().copied().max().unwrap_or(0).max(1) as usize;
    let f_table = build_f_table(m_max)?;
    let r0 = config.r_init;
    let mut fit = UnivariateVbFit {
        a_tilde: 10.0,
        h_tilde: 10.0 / r0,
        alpha_tilde: hyper.beta_a + total,
        beta_tilde: hyper.beta_b + n * r0,
        elbo: Vec::new(),
        converged: false,
        sweeps: 0,
    };
    for _ in 0..config.max_sweeps {
        let ln_r = digamma(fit.a_tilde) - fit.h_tilde.ln();
        let table = build_rr_table(m_max, ln_r.exp())?;
        let mut sum_tables = 0.0;
        let mut l_terms = 0.0;
        for &y in &sample.y {
            if y == 0 {
                continue;
            }
            sum_tables += expected_table_count(y, &table)?;
            let row = table.row(y as usize);
            l_terms += row
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0.0)
                .map(|(j, &q)| q * f_table.ln_get(y as usize, j))
                .sum::<f64>();
            l_terms += table_count_entropy(y, &table)?;
        }
        let ln_1mp = digamma(fit.beta_tilde) - digamma(fit.alpha_tilde + fit.beta_tilde);
        fit.a_tilde = hyper.a0 + sum_tables;
        fit.h_tilde = hyper.b0 - n * ln_1mp;
        fit.alpha_tilde = hyper.beta_a + total;
        fit.beta_tilde = hyper.beta_b + n * fit.mean_r();

        // lower bound with Q_L held at the table just used
        let (a, h) = (fit.a_tilde, fit.h_tilde);
        let (al, be) = (fit.alpha_tilde, fit.beta_tilde);
        let mean_r = a / h;
        let ln_r = digamma(a) - h.ln();
        let ln_p = digamma(al) - digamma(al + be);
        let ln_1mp = digamma(be) - digamma(al + be);
        let mut elbo = sum_tables * ln_r + l_terms + total * ln_p + n * mean_r * ln_1mp;
        elbo += hyper.a0 * hyper.b0.ln() - ln_gamma(hyper.a0) + (hyper.a0 - 1.0) * ln_r - hyper.b0 * mean_r;
        elbo += -ln_beta_fn(hyper.beta_a, hyper.beta_b) + (hyper.beta_a - 1.0) * ln_p + (hyper.beta_b - 1.0) * ln_1mp;
        elbo += a - h.ln() + ln_gamma(a) + (1.0 - a) * digamma(a);
        elbo += ln_beta_fn(al, be) - (al - 1.0) * digamma(al) - (be - 1.0) * digamma(be)
            + (al + be - 2.0) * digamma(al + be);
        if !elbo.is_finite() {
            return Err(LgnbError::fault(format!("lower bound is {elbo} at sweep {}", fit.sweeps + 1)));
        }
        let change = fit
            .elbo
            .last()
            .map_or(f64::INFINITY, |prev| ((elbo - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs());
        fit.elbo.push(elbo);
        fit.sweeps += 1;
        if change <= config.tolerance {
            fit.converged = true;
            break;
        }
    }
    Ok(fit)
}
