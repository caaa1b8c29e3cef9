//! Closed-form Gibbs sampler for lognormal-gamma mixed negative binomial regression.
//!
//! Model, with `ψ_i = logit(p_i)`:
//!
//! ```text
//! y_i ~ NB(r, p_i)          ψ ~ N(Xβ, φ⁻¹ I)
//! r ~ Gamma(a0, 1/h)        h ~ Gamma(b0, 1/g0)
//! β_p ~ N(0, 1/α_p)         α_p ~ Gamma(c0, 1/d0)      φ ~ Gamma(e0, 1/f0)
//! ```
//!
//! Each sweep runs in a fixed order:
//!
//! 1. table counts `L_i` from the `R_r` table;
//! 2. structural: `r`, `h`, `φ`;
//! 3. Polya-Gamma auxiliaries `ω_i ~ PG(y_i + r, ψ_i)` at the new `r`;
//! 4. regression: `ψ`, `β`, `α`.
//!
//! `Σ = (φI + Ω)⁻¹` is diagonal, so `ψ` is drawn coordinate by coordinate.
//! `p_i` itself is never formed; `-ln(1 - p_i)` is `log1p_exp(ψ_i)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crt::{build_rr_table, sample_table_count, RrTable};
use crate::data::{Dataset, Hyperparameters};
use crate::error::{LgnbError, Result};
use crate::kernels::{log1p_exp, sample_gamma, sample_standard_normal, PgSampler, DEFAULT_PG_TRUNCATION};
use crate::rng::{per_observation, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub pg_truncation: usize,
    /// Hold `r` at this value and skip the `r` and `h` updates.
    pub fixed_r: Option<f64>,
    pub r_init: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 5,
            seed: 0,
            pg_truncation: DEFAULT_PG_TRUNCATION,
            fixed_r: None,
            r_init: 100.0,
        }
    }
}

impl GibbsConfig {
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.iterations <= self.burn_in {
            0
        } else {
            (self.iterations - self.burn_in) / self.thin
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(LgnbError::config("thin must be at least 1"));
        }
        if self.iterations <= self.burn_in {
            return Err(LgnbError::config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.retained() == 0 {
            return Err(LgnbError::config("no draws would be retained after burn-in and thinning"));
        }
        if self.pg_truncation == 0 {
            return Err(LgnbError::config("Polya-Gamma truncation must be at least 1"));
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

/// One full assignment of the sampler's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub r: f64,
    pub h: f64,
    /// Lognormal precision `φ = 1/σ²`.
    pub phi: f64,
    pub beta: DVector<f64>,
    pub alpha: DVector<f64>,
    pub psi: DVector<f64>,
    pub omega: DVector<f64>,
    pub tables: Vec<u64>,
}

impl GibbsState {
    /// `r = r_init` and `α = h = φ = 1`. Each `ψ_i` starts at `ln((y_i + 1/2)/r)`, the log-odds that
    /// matches `y_i` in mean, plus `N(0, 1)` noise, and `β` at the least-squares fit of `ψ` on `X`.
    /// Starting on the scale of the data keeps unstandardized covariates from putting `ψ` hundreds
    /// of units out. Without observations `β_p ~ N(0, 1)`. One PG draw for `ω`.
    pub fn initialize(
        data: &Dataset,
        config: &GibbsConfig,
        pg: &PgSampler,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let r = config.fixed_r.unwrap_or(config.r_init);
        let p = data.n_coef();
        let psi = DVector::from_iterator(
            data.n(),
            data.y().iter().map(|&y| ((y as f64 + 0.5) / r).ln() + sample_standard_normal(rng)),
        );
        let beta = match data.xtx().clone().cholesky() {
            Some(chol) if data.n() >= p => chol.solve(&data.x().tr_mul(&psi)),
            _ => DVector::from_fn(p, |_, _| sample_standard_normal(rng)),
        };
        let mut state = Self {
            r,
            h: 1.0,
            phi: 1.0,
            beta,
            alpha: DVector::from_element(p, 1.0),
            psi,
            omega: DVector::zeros(data.n()),
            tables: vec![0; data.n()],
        };
        draw_omega(&mut state, data, pg, rng)?;
        Ok(state)
    }

    pub fn sigma2(&self) -> f64 {
        1.0 / self.phi
    }

    pub fn is_finite(&self) -> bool {
        [self.r, self.h, self.phi].iter().all(|v| v.is_finite())
            && self.beta.iter().chain(self.alpha.iter()).all(|v| v.is_finite())
            && self.psi.iter().chain(self.omega.iter()).all(|v| v.is_finite())
    }
}

fn draw_omega(state: &mut GibbsState, data: &Dataset, pg: &PgSampler, rng: &mut RngStream) -> Result<()> {
    let (r, psi, y) = (state.r, &state.psi, data.y());
    let omega = per_observation(data.n(), rng, |i, s| pg.sample(y[i] as f64 + r, psi[i], s))?;
    state.omega = DVector::from_vec(omega);
    Ok(())
}

/// Redraw `L_i` from row `y_i` of `table`.
pub fn update_tables(state: &mut GibbsState, data: &Dataset, table: &RrTable, rng: &mut RngStream) -> Result<()> {
    for (l, &y) in state.tables.iter_mut().zip(data.y()) {
        *l = sample_table_count(y, table, rng)?;
    }
    Ok(())
}

/// Redraw `ω_i ~ PG(y_i + r, ψ_i)` at the current `r`.
pub fn update_omega(state: &mut GibbsState, data: &Dataset, pg: &PgSampler, rng: &mut RngStream) -> Result<()> {
    draw_omega(state, data, pg, rng)
}

/// [`update_tables`] then [`update_omega`], for use while `r` is held fixed.
pub fn update_augmentation(
    state: &mut GibbsState,
    data: &Dataset,
    table: &RrTable,
    pg: &PgSampler,
    rng: &mut RngStream,
) -> Result<()> {
    update_tables(state, data, table, rng)?;
    draw_omega(state, data, pg, rng)
}

/// Redraw `r`, `h` and `φ`. With `fixed_r` set, `r` and `h` are left alone.
pub fn update_structural(
    state: &mut GibbsState,
    data: &Dataset,
    hyper: &Hyperparameters,
    fixed_r: Option<f64>,
    rng: &mut RngStream,
) -> Result<()> {
    if let Some(r) = fixed_r {
        state.r = r;
    } else {
        let total_tables: u64 = state.tables.iter().sum();
        let rate = state.h + state.psi.iter().map(|&p| log1p_exp(p)).sum::<f64>();
        if !(rate > 0.0) {
            return Err(LgnbError::fault(format!("rate of the r conditional is {rate}")));
        }
        state.r = sample_gamma(hyper.a0 + total_tables as f64, 1.0 / rate, rng)?;
        state.h = sample_gamma(hyper.a0 + hyper.b0, 1.0 / (hyper.g0 + state.r), rng)?;
    }

    let resid = &state.psi - data.linear_predictor(&state.beta);
    let rate = hyper.f0 + 0.5 * resid.norm_squared();
    if !(rate > 0.0) {
        return Err(LgnbError::fault(format!("rate of the φ conditional is {rate}")));
    }
    state.phi = sample_gamma(hyper.e0 + 0.5 * data.n() as f64, 1.0 / rate, rng)?;
    Ok(())
}

/// `ψ_i ~ N(((y_i - r)/2 + φ x_iᵀβ) / (φ + ω_i), 1/(φ + ω_i))`.
pub fn update_psi(state: &mut GibbsState, data: &Dataset, rng: &mut RngStream) -> Result<()> {
    let eta = data.linear_predictor(&state.beta);
    for i in 0..data.n() {
        let precision = state.phi + state.omega[i];
        let mean = (0.5 * (data.y()[i] as f64 - state.r) + state.phi * eta[i]) / precision;
        state.psi[i] = mean + sample_standard_normal(rng) / precision.sqrt();
    }
    Ok(())
}

/// Precision `φXᵀX + diag(α)` of the β conditional and its Cholesky factor.
pub(crate) fn beta_precision_factor(
    xtx: &DMatrix<f64>,
    phi: f64,
    alpha: &DVector<f64>,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut precision = xtx * phi;
    for (p, a) in alpha.iter().enumerate() {
        precision[(p, p)] += a;
    }
    precision.cholesky().ok_or_else(|| {
        LgnbError::fault(
            "β precision φXᵀX + A is not positive definite; the design is ill-conditioned \
             or the coefficient precisions have collapsed"
                .to_string(),
        )
    })
}

/// `β ~ N(μ_β, Σ_β)`, `Σ_β = (φXᵀX + A)⁻¹`, `μ_β = φ Σ_β Xᵀψ`.
pub fn update_beta(state: &mut GibbsState, data: &Dataset, rng: &mut RngStream) -> Result<()> {
    let chol = beta_precision_factor(data.xtx(), state.phi, &state.alpha)?;
    let rhs = data.x().tr_mul(&state.psi) * state.phi;
    let mean = chol.solve(&rhs);
    let z = DVector::from_fn(data.n_coef(), |_, _| sample_standard_normal(rng));
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| LgnbError::fault("singular Cholesky factor in β update"))?;
    state.beta = mean + noise;
    Ok(())
}

/// `α_p ~ Gamma(c0 + 1/2, 1/(d0 + β_p²/2))`.
pub fn update_alpha(state: &mut GibbsState, hyper: &Hyperparameters, rng: &mut RngStream) -> Result<()> {
    for p in 0..state.alpha.len() {
        let rate = hyper.d0 + 0.5 * state.beta[p] * state.beta[p];
        state.alpha[p] = sample_gamma(hyper.c0 + 0.5, 1.0 / rate, rng)?;
    }
    Ok(())
}

pub fn update_regression(
    state: &mut GibbsState,
    data: &Dataset,
    hyper: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<()> {
    update_psi(state, data, rng)?;
    update_beta(state, data, rng)?;
    update_alpha(state, hyper, rng)
}

/// One full sweep; the `R_r` table is rebuilt at the current `r`.
///
/// `r` is drawn with `ω` integrated out, and the law of `ω` depends on `r`, so `ω` is
/// drawn after the structural block and before `ψ` uses it.
pub fn gibbs_sweep(
    state: &mut GibbsState,
    data: &Dataset,
    hyper: &Hyperparameters,
    fixed_r: Option<f64>,
    pg: &PgSampler,
    rng: &mut RngStream,
) -> Result<()> {
    let table = build_rr_table(data.max_y().max(1) as usize, state.r)?;
    update_tables(state, data, &table, rng)?;
    update_structural(state, data, hyper, fixed_r, rng)?;
    update_omega(state, data, pg, rng)?;
    update_regression(state, data, hyper, rng)
}

/// A retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsDraw {
    pub iteration: usize,
    pub r: f64,
    pub h: f64,
    pub phi: f64,
    pub sigma2: f64,
    /// Quasi-dispersion `e^{σ²}(1 + 1/r) - 1`.
    pub kappa: f64,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl GibbsDraw {
    fn from_state(iteration: usize, s: &GibbsState) -> Self {
        let sigma2 = s.sigma2();
        Self {
            iteration,
            r: s.r,
            h: s.h,
            phi: s.phi,
            sigma2,
            kappa: sigma2.exp_m1() + sigma2.exp() / s.r,
            beta: s.beta.iter().copied().collect(),
            alpha: s.alpha.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsTrace {
    pub config: GibbsConfig,
    pub coef_names: Vec<String>,
    pub draws: Vec<GibbsDraw>,
}

impl GibbsTrace {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Names of the scalar columns returned by [`GibbsTrace::column`].
    pub fn column_names(&self) -> Vec<String> {
        let p = self.coef_names.len();
        let mut names: Vec<String> = ["r", "h", "phi", "sigma2", "kappa"].iter().map(|s| s.to_string()).collect();
        names.extend((0..p).map(|k| format!("beta{k}")));
        names.extend((0..p).map(|k| format!("alpha{k}")));
        names
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let pick: Box<dyn Fn(&GibbsDraw) -> f64> = match name {
            "r" => Box::new(|d| d.r),
            "h" => Box::new(|d| d.h),
            "phi" => Box::new(|d| d.phi),
            "sigma2" => Box::new(|d| d.sigma2),
            "kappa" => Box::new(|d| d.kappa),
            other => {
                let (vec_name, idx) = if let Some(k) = other.strip_prefix("beta") {
                    ("beta", k.parse::<usize>().ok()?)
                } else if let Some(k) = other.strip_prefix("alpha") {
                    ("alpha", k.parse::<usize>().ok()?)
                } else {
                    return None;
                };
                if idx >= self.coef_names.len() {
                    return None;
                }
                if vec_name == "beta" {
                    Box::new(move |d| d.beta[idx])
                } else {
                    Box::new(move |d| d.alpha[idx])
                }
            }
        };
        Some(self.draws.iter().map(|d| pick(d)).collect())
    }

    fn mean_of(&self, f: impl Fn(&GibbsDraw) -> f64) -> f64 {
        self.draws.iter().map(f).sum::<f64>() / self.draws.len() as f64
    }

    pub fn mean_r(&self) -> f64 {
        self.mean_of(|d| d.r)
    }

    /// Posterior mean of `σ² = 1/φ` (mean of the per-draw reciprocals).
    pub fn mean_sigma2(&self) -> f64 {
        self.mean_of(|d| d.sigma2)
    }

    pub fn mean_beta(&self) -> Vec<f64> {
        (0..self.coef_names.len())
            .map(|k| self.mean_of(|d| d.beta[k]))
            .collect()
    }

    /// Tab-separated table, one retained draw per row.
    pub fn write_tsv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let names = self.column_names();
        writeln!(out, "iteration\t{}", names.join("\t"))?;
        for d in &self.draws {
            let mut row = vec![d.iteration.to_string()];
            row.extend([d.r, d.h, d.phi, d.sigma2, d.kappa].iter().map(|v| v.to_string()));
            row.extend(d.beta.iter().chain(d.alpha.iter()).map(|v| v.to_string()));
            writeln!(out, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

/// Run one chain seeded from `config.seed`.
pub fn run_gibbs(data: &Dataset, hyper: &Hyperparameters, config: &GibbsConfig) -> Result<GibbsTrace> {
    let mut rng = RngStream::new(config.seed);
    run_gibbs_with_rng(data, hyper, config, &mut rng)
}

pub fn run_gibbs_with_rng(
    data: &Dataset,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<GibbsTrace> {
    config.validate()?;
    hyper.validate()?;
    let pg = PgSampler::new(config.pg_truncation)?;
    let mut state = GibbsState::initialize(data, config, &pg, rng)?;
    let mut draws = Vec::with_capacity(config.retained());
    for it in 1..=config.iterations {
        gibbs_sweep(&mut state, data, hyper, config.fixed_r, &pg, rng)
            .map_err(|e| annotate(e, it))?;
        if !state.is_finite() {
            return Err(LgnbError::fault(format!("non-finite state at iteration {it}")));
        }
        if it > config.burn_in && (it - config.burn_in) % config.thin == 0 {
            draws.push(GibbsDraw::from_state(it, &state));
        }
    }
    Ok(GibbsTrace {
        config: config.clone(),
        coef_names: data.coef_names().to_vec(),
        draws,
    })
}

fn annotate(err: LgnbError, iteration: usize) -> LgnbError {
    match err {
        LgnbError::NumericalFault(msg) => LgnbError::NumericalFault(format!("iteration {iteration}: {msg}")),
        other => other,
    }
}

/// Run `chains` independent chains concurrently; chain `k` uses stream `k` of `config.seed`.
pub fn run_chains(
    data: &Dataset,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    chains: usize,
) -> Result<Vec<GibbsTrace>> {
    if chains == 0 {
        return Err(LgnbError::config("need at least one chain"));
    }
    (0..chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::with_stream(config.seed, k as u64 + 1);
            run_gibbs_with_rng(data, hyper, config, &mut rng)
        })
        .collect()
}
