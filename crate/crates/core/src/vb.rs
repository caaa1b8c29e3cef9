//! Mean-field variational Bayes for lognormal-gamma mixed negative binomial regression.
//!
//! The approximating family is
//!
//! ```text
//! Q = Q_ψ(ψ) Q_β(β) Q_r(r) Q_h(h) Q_φ(φ) Π_p Q_α_p(α_p) Π_i Q_L_i(L_i) Q_ω_i(ω_i)
//! Q_ψ = N(μ̃, diag Σ̃)     Q_β = N(μ̃_β, Σ̃_β)     Q_r = Gamma(ã, 1/h̃)
//! Q_h = Gamma(b̃, 1/g̃)    Q_φ = Gamma(ẽ, 1/f̃)    Q_α_p = Gamma(c̃_p, 1/d̃_p)
//! ```
//!
//! `Q_ω_i` has no closed form; only `⟨ω_i⟩ = (y_i + ⟨r⟩) ⟨tanh(ψ_i/2)/(2ψ_i)⟩` is
//! tracked. That expectation and `⟨ln(1 + e^ψ_i)⟩` are Monte Carlo estimates
//! under `Q_ψ` using antithetic pairs `(ψ, 2μ̃ - ψ)`.
//!
//! # Lower bound
//!
//! Convergence is monitored with the evidence lower bound of the model with
//! `L` and `ω` integrated out,
//!
//! ```text
//! ELBO = Σ_i [⟨lnΓ(y_i + r) - lnΓ(r)⟩ - ln y_i! + y_i μ̃_i - (y_i + ⟨r⟩)⟨ln(1 + e^ψ_i)⟩]
//!      + E[ln N(ψ; Xβ, φ⁻¹I)] + Σ_p E[ln N(β_p; 0, α_p⁻¹)]
//!      + E[ln p(r | h)] + E[ln p(h)] + E[ln p(φ)] + Σ_p E[ln p(α_p)]
//!      + H[Q_ψ] + H[Q_β] + H[Q_r] + H[Q_h] + H[Q_φ] + Σ_p H[Q_α_p]
//! ```
//!
//! which is a valid bound for any `Q` over the non-augmented variables. All
//! Gaussian and gamma terms are closed form. `⟨lnΓ(y_i + r) - lnΓ(r)⟩` is
//! estimated from draws of `Q_r` and `⟨ln(1 + e^ψ_i)⟩` from draws of `Q_ψ`;
//! the reported standard error covers those two terms only. This bound is
//! derived here from the factorization above; its value is used for
//! convergence monitoring, not as a reference number.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::crt::{build_rr_table, expected_table_count, RrTable};
use crate::data::{Dataset, Hyperparameters};
use crate::error::{LgnbError, Result};
use crate::gibbs::beta_precision_factor;
use crate::kernels::{log1p_exp, sample_gamma, sample_standard_normal, tanh_ratio};
use crate::rng::{per_observation, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbConfig {
    pub max_sweeps: usize,
    /// Relative change of the smoothed lower bound that counts as converged.
    pub tolerance: f64,
    /// Width of the moving average applied to the lower bound.
    pub window: usize,
    /// Monte Carlo draws per observation per expectation.
    pub n_mc: usize,
    pub seed: u64,
    pub fixed_r: Option<f64>,
    pub r_init: f64,
}

impl Default for VbConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            tolerance: 1e-6,
            window: 5,
            n_mc: 1000,
            seed: 0,
            fixed_r: None,
            r_init: 100.0,
        }
    }
}

impl VbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(LgnbError::config("max sweeps must be at least 1"));
        }
        if self.n_mc == 0 {
            return Err(LgnbError::config("Monte Carlo sample size must be at least 1"));
        }
        if self.window == 0 {
            return Err(LgnbError::config("smoothing window must be at least 1"));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(LgnbError::config("tolerance must be non-negative"));
        }
        if let Some(r) = self.fixed_r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(LgnbError::config(format!("fixed r must be positive, got {r}")));
            }
        }
        if !(self.r_init > 0.0 && self.r_init.is_finite()) {
            return Err(LgnbError::config("initial r must be positive"));
        }
        Ok(())
    }
}

/// Monte Carlo estimates under `ψ ~ N(μ̃, σ̃²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiExpectations {
    /// `⟨ln(1 + e^ψ)⟩`
    pub log1p_exp: f64,
    /// `⟨tanh(ψ/2) / (2ψ)⟩`
    pub tanh_ratio: f64,
    /// Estimated variance of the `log1p_exp` estimate.
    pub log1p_exp_var: f64,
    /// Estimated variance of the `tanh_ratio` estimate.
    pub tanh_ratio_var: f64,
}

/// Antithetic Monte Carlo estimates of `⟨ln(1+e^ψ)⟩` and `⟨tanh(ψ/2)/(2ψ)⟩`.
///
/// `n_mc` draws are taken as `n_mc / 2` pairs `(μ̃ + σ̃z, μ̃ - σ̃z)`, plus one
/// unpaired draw when `n_mc` is odd.
pub fn mc_psi_expectations<R: RngCore + ?Sized>(
    mu: f64,
    sigma2: f64,
    n_mc: usize,
    rng: &mut R,
) -> PsiExpectations {
    let sd = sigma2.max(0.0).sqrt();
    let pairs = n_mc / 2;
    let mut units: Vec<(f64, f64)> = Vec::with_capacity(pairs + 1);
    for _ in 0..pairs {
        let z = sample_standard_normal(rng);
        let (a, b) = (mu + sd * z, mu - sd * z);
        units.push((
            0.5 * (log1p_exp(a) + log1p_exp(b)),
            0.5 * (tanh_ratio(a) + tanh_ratio(b)),
        ));
    }
    let mut weights = vec![2.0; pairs];
    if n_mc % 2 == 1 {
        let psi = mu + sd * sample_standard_normal(rng);
        units.push((log1p_exp(psi), tanh_ratio(psi)));
        weights.push(1.0);
    }
    let total: f64 = weights.iter().sum();
    let mean = |f: fn(&(f64, f64)) -> f64| -> f64 {
        units.iter().zip(&weights).map(|(u, w)| w * f(u)).sum::<f64>() / total
    };
    let m1 = mean(|u| u.0);
    let m2 = mean(|u| u.1);
    let var_of_mean = |f: fn(&(f64, f64)) -> f64, m: f64| -> f64 {
        if units.len() < 2 {
            return 0.0;
        }
        let v = units.iter().map(|u| (f(u) - m).powi(2)).sum::<f64>() / (units.len() - 1) as f64;
        v / units.len() as f64
    };
    PsiExpectations {
        log1p_exp: m1,
        tanh_ratio: m2,
        log1p_exp_var: var_of_mean(|u| u.0, m1),
        tanh_ratio_var: var_of_mean(|u| u.1, m2),
    }
}

/// Variational parameters and cached expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct VbPosterior {
    pub a_tilde: f64,
    pub h_tilde: f64,
    pub b_tilde: f64,
    pub g_tilde: f64,
    pub e_tilde: f64,
    pub f_tilde: f64,
    pub c_tilde: DVector<f64>,
    pub d_tilde: DVector<f64>,
    pub mu: DVector<f64>,
    /// Diagonal of `Σ̃`.
    pub sigma: DVector<f64>,
    pub mu_beta: DVector<f64>,
    pub sigma_beta: DMatrix<f64>,
    /// `r` held fixed instead of carrying `Q_r` and `Q_h`.
    pub fixed_r: Option<f64>,
    pub mean_omega: DVector<f64>,
    pub mean_tables: DVector<f64>,
    pub mean_log1p_exp: DVector<f64>,
    pub mean_tanh_ratio: DVector<f64>,
    log1p_exp_var: DVector<f64>,
}

impl VbPosterior {
    /// Deterministic starting point: `⟨r⟩ = r_init` (or the fixed value),
    /// `μ̃_i = ln((y_i + 1/2)/⟨r⟩)`, `μ̃_β` the least-squares fit of `μ̃` on `X`,
    /// unit `⟨φ⟩`, `⟨α_p⟩` and `⟨h⟩`-scale.
    pub fn initialize(data: &Dataset, hyper: &Hyperparameters, config: &VbConfig) -> Result<Self> {
        let n = data.n();
        let p = data.n_coef();
        let r0 = config.fixed_r.unwrap_or(config.r_init);
        let mu = DVector::from_iterator(n, data.y().iter().map(|&y| ((y as f64 + 0.5) / r0).ln()));
        let sigma = DVector::from_iterator(n, data.y().iter().map(|&y| 1.0 / (1.0 + 0.25 * (y as f64 + r0))));
        let mut ridge = data.xtx().clone();
        for k in 0..p {
            ridge[(k, k)] += 1e-6;
        }
        let chol = ridge
            .cholesky()
            .ok_or_else(|| LgnbError::fault("cannot initialize: XᵀX is not positive definite"))?;
        let mu_beta = chol.solve(&data.x().tr_mul(&mu));
        let alpha = DVector::from_element(p, 1.0);
        let sigma_beta = beta_precision_factor(data.xtx(), 1.0, &alpha)?.inverse();
        let e_tilde = hyper.e0 + 0.5 * n as f64;
        let c_tilde = DVector::from_element(p, hyper.c0 + 0.5);
        Ok(Self {
            a_tilde: 10.0,
            h_tilde: 10.0 / r0,
            b_tilde: hyper.a0 + hyper.b0,
            g_tilde: hyper.g0 + r0,
            e_tilde,
            f_tilde: e_tilde,
            d_tilde: c_tilde.clone(),
            c_tilde,
            mu,
            sigma,
            mu_beta,
            sigma_beta,
            fixed_r: config.fixed_r,
            mean_omega: DVector::zeros(n),
            mean_tables: DVector::zeros(n),
            mean_log1p_exp: DVector::zeros(n),
            mean_tanh_ratio: DVector::zeros(n),
            log1p_exp_var: DVector::zeros(n),
        })
    }

    pub fn mean_r(&self) -> f64 {
        self.fixed_r.unwrap_or(self.a_tilde / self.h_tilde)
    }

    /// `⟨ln r⟩ = digamma(ã) - ln h̃`.
    pub fn mean_ln_r(&self) -> f64 {
        match self.fixed_r {
            Some(r) => r.ln(),
            None => digamma(self.a_tilde) - self.h_tilde.ln(),
        }
    }

    /// `r̃ = exp⟨ln r⟩`, the value the table-count distribution is built at.
    pub fn r_tilde(&self) -> f64 {
        self.mean_ln_r().exp()
    }

    pub fn mean_h(&self) -> f64 {
        self.b_tilde / self.g_tilde
    }

    pub fn mean_phi(&self) -> f64 {
        self.e_tilde / self.f_tilde
    }

    /// `⟨σ²⟩ = ⟨1/φ⟩ = f̃/(ẽ - 1)`; falls back to `1/⟨φ⟩` when `ẽ <= 1`.
    pub fn mean_sigma2(&self) -> f64 {
        if self.e_tilde > 1.0 {
            self.f_tilde / (self.e_tilde - 1.0)
        } else {
            1.0 / self.mean_phi()
        }
    }

    pub fn mean_alpha(&self) -> DVector<f64> {
        self.c_tilde.component_div(&self.d_tilde)
    }

    pub fn mean_beta(&self) -> &DVector<f64> {
        &self.mu_beta
    }

    /// `⟨β_p²⟩ = μ̃_βp² + Σ̃_β,pp`.
    pub fn mean_beta_sq(&self) -> DVector<f64> {
        DVector::from_fn(self.mu_beta.len(), |p, _| self.mu_beta[p].powi(2) + self.sigma_beta[(p, p)])
    }

    /// `⟨‖ψ - Xβ‖²⟩ = ⟨ψᵀψ⟩ - 2⟨ψ⟩ᵀX⟨β⟩ + tr(X⟨ββᵀ⟩Xᵀ)`.
    pub fn expected_residual_ss(&self, data: &Dataset) -> f64 {
        let psi_sq = self.mu.norm_squared() + self.sigma.sum();
        let cross = self.mu.dot(&(data.x() * &self.mu_beta));
        let outer = &self.mu_beta * self.mu_beta.transpose() + &self.sigma_beta;
        let trace = (data.xtx() * outer).trace();
        psi_sq - 2.0 * cross + trace
    }

    /// Recompute the cached Monte Carlo expectations under the current `Q_ψ`.
    pub fn refresh_psi_expectations(&mut self, n_mc: usize, rng: &mut RngStream) -> Result<()> {
        let (mu, sigma) = (&self.mu, &self.sigma);
        let est = per_observation(mu.len(), rng, |i, s| Ok(mc_psi_expectations(mu[i], sigma[i], n_mc, s)))?;
        for (i, e) in est.iter().enumerate() {
            self.mean_log1p_exp[i] = e.log1p_exp;
            self.mean_tanh_ratio[i] = e.tanh_ratio;
            self.log1p_exp_var[i] = e.log1p_exp_var;
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let scalars = [self.a_tilde, self.h_tilde, self.b_tilde, self.g_tilde, self.e_tilde, self.f_tilde];
        let ok = scalars.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.c_tilde.iter().chain(self.d_tilde.iter()).all(|v| v.is_finite() && *v > 0.0)
            && self.sigma.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.mu.iter().chain(self.mu_beta.iter()).all(|v| v.is_finite())
            && self.sigma_beta.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(LgnbError::fault("variational parameters left their valid range"))
        }
    }
}

/// Lower-bound estimate for one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    pub value: f64,
    /// Monte Carlo standard error of `value`.
    pub std_error: f64,
}

fn gamma_entropy(shape: f64, rate: f64) -> f64 {
    shape - rate.ln() + ln_gamma(shape) + (1.0 - shape) * digamma(shape)
}

/// `E[ln Gamma(x; shape, rate)]` for a constant `shape` and `rate`.
fn gamma_log_prior(shape: f64, rate: f64, mean_x: f64, mean_ln_x: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * mean_ln_x - rate * mean_x
}

/// Lower bound under the current `post`, whose ψ-expectations must be fresh.
pub fn lower_bound(
    post: &VbPosterior,
    data: &Dataset,
    hyper: &Hyperparameters,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<ElboEstimate> {
    let n = data.n() as f64;
    let mean_r = post.mean_r();
    let mean_ln_r = post.mean_ln_r();
    let ln2pi = (2.0 * PI).ln();

    // distinct counts and their multiplicities
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for &y in data.y() {
        *counts.entry(y).or_insert(0.0) += 1.0;
    }
    let gamma_ratio = |r: f64| -> f64 {
        counts
            .iter()
            .map(|(&y, &m)| m * (ln_gamma(y as f64 + r) - ln_gamma(r)))
            .sum()
    };
    let (ratio_mean, ratio_var) = match post.fixed_r {
        Some(r) => (gamma_ratio(r), 0.0),
        None => {
            let draws: Vec<f64> = (0..n_mc)
                .map(|_| sample_gamma(post.a_tilde, 1.0 / post.h_tilde, rng).map(gamma_ratio))
                .collect::<Result<_>>()?;
            let m = draws.iter().sum::<f64>() / draws.len() as f64;
            let v = if draws.len() > 1 {
                draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64
            } else {
                0.0
            };
            (m, v / draws.len() as f64)
        }
    };

    let mut value = ratio_mean;
    let mut var = ratio_var;
    for i in 0..data.n() {
        let y = data.y()[i] as f64;
        value += -ln_gamma(y + 1.0) + y * post.mu[i] - (y + mean_r) * post.mean_log1p_exp[i];
        var += (y + mean_r).powi(2) * post.log1p_exp_var[i];
    }

    // ψ | β, φ
    let mean_phi = post.mean_phi();
    let mean_ln_phi = digamma(post.e_tilde) - post.f_tilde.ln();
    value += 0.5 * n * (mean_ln_phi - ln2pi) - 0.5 * mean_phi * post.expected_residual_ss(data);

    // β | α and α
    let beta_sq = post.mean_beta_sq();
    for p in 0..post.mu_beta.len() {
        let (c, d) = (post.c_tilde[p], post.d_tilde[p]);
        let mean_alpha = c / d;
        let mean_ln_alpha = digamma(c) - d.ln();
        value += 0.5 * (mean_ln_alpha - ln2pi) - 0.5 * mean_alpha * beta_sq[p];
        value += gamma_log_prior(hyper.c0, hyper.d0, mean_alpha, mean_ln_alpha);
        value += gamma_entropy(c, d);
    }

    // φ
    value += gamma_log_prior(hyper.e0, hyper.f0, mean_phi, mean_ln_phi);
    value += gamma_entropy(post.e_tilde, post.f_tilde);

    // r and h
    if post.fixed_r.is_none() {
        let mean_h = post.mean_h();
        let mean_ln_h = digamma(post.b_tilde) - post.g_tilde.ln();
        value += hyper.a0 * mean_ln_h - ln_gamma(hyper.a0) + (hyper.a0 - 1.0) * mean_ln_r - mean_h * mean_r;
        value += gamma_log_prior(hyper.b0, hyper.g0, mean_h, mean_ln_h);
        value += gamma_entropy(post.a_tilde, post.h_tilde);
        value += gamma_entropy(post.b_tilde, post.g_tilde);
    }

    // Gaussian entropies
    value += post.sigma.iter().map(|s| 0.5 * (2.0 * PI * std::f64::consts::E * s).ln()).sum::<f64>();
    let k = post.mu_beta.len() as f64;
    let chol = post
        .sigma_beta
        .clone()
        .cholesky()
        .ok_or_else(|| LgnbError::fault("Σ̃_β is not positive definite"))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    value += 0.5 * (k * (2.0 * PI * std::f64::consts::E).ln() + log_det);

    Ok(ElboEstimate {
        value,
        std_error: var.sqrt(),
    })
}

/// One coordinate-ascent sweep. `table` must be built at `post.r_tilde()` and the
/// cached ψ-expectations must be those of the current `Q_ψ`. On return the cache
/// reflects the updated `Q_ψ` and the lower bound of the new posterior is returned.
pub fn vb_sweep(
    post: &mut VbPosterior,
    data: &Dataset,
    hyper: &Hyperparameters,
    table: &RrTable,
    config: &VbConfig,
    rng: &mut RngStream,
) -> Result<ElboEstimate> {
    let n = data.n();
    let y: Vec<f64> = data.y().iter().map(|&v| v as f64).collect();

    // (1)-(2) table counts and Q_r
    if post.fixed_r.is_none() {
        for i in 0..n {
            post.mean_tables[i] = expected_table_count(data.y()[i], table)?;
        }
        post.a_tilde = hyper.a0 + post.mean_tables.sum();
        post.h_tilde = post.mean_h() + post.mean_log1p_exp.sum();
    }
    let mean_r = post.mean_r();

    // (3) PG auxiliaries
    for i in 0..n {
        post.mean_omega[i] = (y[i] + mean_r) * post.mean_tanh_ratio[i];
    }

    // (4) Q_ψ
    let mean_phi = post.mean_phi();
    let eta = data.x() * &post.mu_beta;
    for i in 0..n {
        let precision = mean_phi + post.mean_omega[i];
        post.sigma[i] = 1.0 / precision;
        post.mu[i] = (0.5 * (y[i] - mean_r) + mean_phi * eta[i]) / precision;
    }

    // (5) Q_β
    let chol = beta_precision_factor(data.xtx(), mean_phi, &post.mean_alpha())?;
    let sigma_beta = chol.inverse();
    post.mu_beta = &sigma_beta * data.x().tr_mul(&post.mu) * mean_phi;
    post.sigma_beta = 0.5 * (&sigma_beta + sigma_beta.transpose());

    // (6) Q_h, Q_φ
    if post.fixed_r.is_none() {
        post.b_tilde = hyper.a0 + hyper.b0;
        post.g_tilde = mean_r + hyper.g0;
    }
    post.e_tilde = hyper.e0 + 0.5 * n as f64;
    post.f_tilde = hyper.f0 + 0.5 * post.expected_residual_ss(data);

    // (7) Q_α
    let beta_sq = post.mean_beta_sq();
    for p in 0..post.c_tilde.len() {
        post.c_tilde[p] = hyper.c0 + 0.5;
        post.d_tilde[p] = hyper.d0 + 0.5 * beta_sq[p];
    }

    post.check()?;
    post.refresh_psi_expectations(config.n_mc, rng)?;
    lower_bound(post, data, hyper, config.n_mc, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbFit {
    pub posterior: VbPosterior,
    pub elbo: Vec<ElboEstimate>,
    /// Moving average of `elbo` over the configured window.
    pub smoothed_elbo: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Iterate [`vb_sweep`] until the smoothed lower bound changes by less than
/// `tolerance` (relative) between sweeps, or `max_sweeps` is reached.
/// Non-convergence is reported through [`VbFit::converged`].
///
/// Every sweep reuses the same random numbers for its Monte Carlo estimates,
/// so the updates are a deterministic map and the bound estimate moves only
/// when the variational parameters do.
pub fn run_vb(data: &Dataset, hyper: &Hyperparameters, config: &VbConfig) -> Result<VbFit> {
    config.validate()?;
    hyper.validate()?;
    let stream = RngStream::new(config.seed).next_u64();
    let sweep_rng = || RngStream::with_stream(config.seed, stream);
    let mut post = VbPosterior::initialize(data, hyper, config)?;
    post.refresh_psi_expectations(config.n_mc, &mut sweep_rng())?;
    let m_max = data.max_y().max(1) as usize;

    let mut elbo = Vec::new();
    let mut smoothed: Vec<f64> = Vec::new();
    let mut converged = false;
    for sweep in 1..=config.max_sweeps {
        let table = build_rr_table(m_max, post.r_tilde())?;
        let est = vb_sweep(&mut post, data, hyper, &table, config, &mut sweep_rng()).map_err(|e| match e {
            LgnbError::NumericalFault(m) => LgnbError::NumericalFault(format!("sweep {sweep}: {m}")),
            other => other,
        })?;
        elbo.push(est);
        let start = elbo.len().saturating_sub(config.window);
        let window = &elbo[start..];
        let avg = window.iter().map(|e| e.value).sum::<f64>() / window.len() as f64;
        let change = match smoothed.last() {
            Some(prev) => ((avg - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs(),
            None => f64::INFINITY,
        };
        smoothed.push(avg);
        if change <= config.tolerance {
            converged = true;
            break;
        }
    }
    let sweeps = elbo.len();
    Ok(VbFit {
        posterior: post,
        elbo,
        smoothed_elbo: smoothed,
        converged,
        sweeps,
    })
}

/// Draws from the fitted `Q` factors, for posterior summaries comparable to a sampler trace.
#[derive(Debug, Clone, PartialEq)]
pub struct VbSamples {
    pub r: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub kappa: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

pub fn sample_vb_posterior(post: &VbPosterior, n: usize, rng: &mut RngStream) -> Result<VbSamples> {
    let chol = post
        .sigma_beta
        .clone()
        .cholesky()
        .ok_or_else(|| LgnbError::fault("Σ̃_β is not positive definite"))?;
    let l = chol.l();
    let mut out = VbSamples {
        r: Vec::with_capacity(n),
        sigma2: Vec::with_capacity(n),
        kappa: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let r = match post.fixed_r {
            Some(r) => r,
            None => sample_gamma(post.a_tilde, 1.0 / post.h_tilde, rng)?,
        };
        let phi = sample_gamma(post.e_tilde, 1.0 / post.f_tilde, rng)?;
        let sigma2 = 1.0 / phi;
        let z = DVector::from_fn(post.mu_beta.len(), |_, _| sample_standard_normal(rng));
        let beta = &post.mu_beta + &l * z;
        out.r.push(r);
        out.sigma2.push(sigma2);
        out.kappa.push(sigma2.exp_m1() + sigma2.exp() / r);
        out.beta.push(beta.iter().copied().collect());
    }
    Ok(out)
}
