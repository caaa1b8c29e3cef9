//! The `lgnb fit` command: configuration, dispatch and the JSON report.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    fit_nb_mle, fit_poisson_mle, univariate_gibbs, univariate_vb, MleFit, UnivariateSample,
};
use crate::data::{Dataset, Hyperparameters};
use crate::diagnostics::{
    beta_correlation, extended_f64, pearson_statistic, sample_correlation, trace_summary, Binning, DiagnosticsReport,
    FitParams, TraceSummary,
};
use crate::error::{LgnbError, Result};
use crate::gibbs::{run_chains, run_gibbs, GibbsConfig, GibbsTrace};
use crate::io::{bundled_dataset, load_csv, load_csv_verified};
use crate::kernels::{sample_gamma, DEFAULT_PG_TRUNCATION};
use crate::rng::RngStream;
use crate::vb::{run_vb, sample_vb_posterior, VbConfig, VbSamples};

/// Draws taken from fitted variational factors for summaries and trace files.
pub const VB_SUMMARY_DRAWS: usize = 2000;
/// Stream of the run seed used for those draws.
const VB_SUMMARY_STREAM: u64 = 0x5eed_0f0a;
pub const DEFAULT_LAGS: [usize; 4] = [1, 5, 10, 20];
pub const MLE_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_FIXED_R: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Poisson,
    Nb,
    Lgnb,
    /// LGNB with `r` held at `--fixed-r` (default 1000).
    LgnbFixedR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mle,
    Gibbs,
    Vb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub method: Method,
    pub fixed_r: f64,
    /// Starting value of `r` for gibbs and vb.
    pub r_init: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub vb_max_sweeps: usize,
    #[serde(with = "extended_f64")]
    pub vb_tolerance: f64,
    pub mc_samples: usize,
    pub pg_truncation: usize,
    pub seed: u64,
    pub chains: usize,
    pub hyper: Hyperparameters,
    /// A file path or the name of a bundled dataset.
    pub data: String,
    pub response: Option<String>,
    pub weight: Option<String>,
    pub sha256: Option<String>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub lags: Vec<usize>,
    pub timestamps: bool,
}

impl RunConfig {
    /// Defaults for everything but the model, method and data source.
    pub fn new(model: ModelKind, method: Method, data: impl Into<String>) -> Self {
        let g = GibbsConfig::default();
        let v = VbConfig::default();
        Self {
            model,
            method,
            fixed_r: DEFAULT_FIXED_R,
            r_init: g.r_init,
            iterations: g.iterations,
            burn_in: g.burn_in,
            thin: g.thin,
            vb_max_sweeps: v.max_sweeps,
            vb_tolerance: v.tolerance,
            mc_samples: v.n_mc,
            pg_truncation: DEFAULT_PG_TRUNCATION,
            seed: 0,
            chains: 1,
            hyper: Hyperparameters::default(),
            data: data.into(),
            response: None,
            weight: None,
            sha256: None,
            out: None,
            trace: None,
            lags: DEFAULT_LAGS.to_vec(),
            timestamps: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.model, self.method) {
            (ModelKind::Lgnb | ModelKind::LgnbFixedR, Method::Mle) => {
                return Err(LgnbError::config("--method mle is not available for LGNB models; use gibbs or vb"))
            }
            (ModelKind::Poisson, Method::Gibbs | Method::Vb) => {
                return Err(LgnbError::config("--model poisson is fitted by --method mle only"))
            }
            _ => {}
        }
        if self.chains == 0 {
            return Err(LgnbError::config("--chains must be at least 1"));
        }
        if self.chains > 1 && self.method != Method::Gibbs {
            return Err(LgnbError::config("--chains applies to --method gibbs only"));
        }
        if self.trace.is_some() && self.method == Method::Mle {
            return Err(LgnbError::config("--trace needs --method gibbs or vb"));
        }
        if !(self.fixed_r > 0.0 && self.fixed_r.is_finite()) {
            return Err(LgnbError::config(format!("--fixed-r must be positive, got {}", self.fixed_r)));
        }
        self.hyper.validate()?;
        if self.method == Method::Gibbs {
            self.gibbs_config().validate()?;
        }
        if self.method == Method::Vb {
            self.vb_config().validate()?;
        }
        Ok(())
    }

    fn fixed(&self) -> Option<f64> {
        (self.model == ModelKind::LgnbFixedR).then_some(self.fixed_r)
    }

    pub fn gibbs_config(&self) -> GibbsConfig {
        GibbsConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            pg_truncation: self.pg_truncation,
            fixed_r: self.fixed(),
            r_init: self.r_init,
        }
    }

    pub fn vb_config(&self) -> VbConfig {
        VbConfig {
            max_sweeps: self.vb_max_sweeps,
            tolerance: self.vb_tolerance,
            n_mc: self.mc_samples,
            seed: self.seed,
            fixed_r: self.fixed(),
            r_init: self.r_init,
            ..VbConfig::default()
        }
    }

    pub fn load_data(&self) -> Result<Dataset> {
        let path = Path::new(&self.data);
        if !path.exists() {
            if let Some(d) = bundled_dataset(&self.data) {
                return Ok(d);
            }
        }
        match &self.sha256 {
            Some(sum) => load_csv_verified(path, sum, self.response.as_deref(), self.weight.as_deref()),
            None => load_csv(path, self.response.as_deref(), self.weight.as_deref()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbSummary {
    pub sweeps: usize,
    pub converged: bool,
    pub elbo: Vec<f64>,
    pub elbo_std_error: Vec<f64>,
    pub smoothed_elbo: Vec<f64>,
    pub mean_r: f64,
    pub mean_sigma2: f64,
    pub mean_beta: Vec<f64>,
    pub sigma_beta: Vec<Vec<f64>>,
}

/// Posterior of the intercept-only NB model `y_i ~ NB(r, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateSummary {
    pub mean_r: f64,
    pub mean_p: f64,
    /// VB only: `Q_r = Gamma(a_tilde, 1/h_tilde)`, `Q_p = Beta(alpha_tilde, beta_tilde)`.
    pub variational: Option<[f64; 4]>,
    pub sweeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub model: ModelKind,
    pub method: Method,
    pub observations: usize,
    pub coef_names: Vec<String>,
    /// Point estimates; posterior means for Bayesian fits.
    pub params: FitParams,
    pub converged: bool,
    pub mle: Option<MleFit>,
    pub vb: Option<VbSummary>,
    pub univariate: Option<UnivariateSummary>,
    /// Correlations among the non-intercept coefficients.
    pub beta_correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub config: RunConfig,
    pub fit: FitSummary,
    pub diagnostics: DiagnosticsReport,
    pub trace_summary: Option<TraceSummary>,
    /// One summary per chain when more than one chain ran.
    pub chain_summaries: Vec<TraceSummary>,
    pub provenance: Provenance,
}

impl ReportEnvelope {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LgnbError::fault(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LgnbError::Ingestion {
            location: "report".into(),
            message: e.to_string(),
        })
    }

    /// Exit status the report implies: 0, or 5 when the fit did not converge.
    pub fn exit_code(&self) -> i32 {
        if self.fit.converged {
            0
        } else {
            5
        }
    }
}

/// A finished run: the report and the rows of the optional trace file.
pub struct RunOutput {
    pub report: ReportEnvelope,
    pub trace: Option<String>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn slope_correlation_from_cov(cov: &DMatrix<f64>) -> Result<Option<Vec<Vec<f64>>>> {
    let p = cov.nrows();
    if p < 3 {
        return Ok(None);
    }
    let sub = cov.view((1, 1), (p - 1, p - 1)).into_owned();
    Ok(Some(to_rows(&beta_correlation(&sub)?)))
}

fn slope_correlation_from_draws(beta: &[Vec<f64>]) -> Result<Option<Vec<Vec<f64>>>> {
    if beta.first().is_none_or(|b| b.len() < 3) || beta.len() < 2 {
        return Ok(None);
    }
    let slopes: Vec<Vec<f64>> = beta.iter().map(|b| b[1..].to_vec()).collect();
    Ok(Some(to_rows(&sample_correlation(&slopes)?)))
}

fn tsv(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

fn gibbs_columns(trace: &GibbsTrace) -> Vec<(String, Vec<f64>)> {
    let mut names = vec!["r".to_string(), "sigma2".into(), "kappa".into(), "phi".into(), "h".into()];
    names.extend((0..trace.coef_names.len()).map(|k| format!("beta{k}")));
    names
        .into_iter()
        .map(|n| {
            let col = trace.column(&n).unwrap_or_default();
            (n, col)
        })
        .collect()
}

fn gibbs_trace_tsv(traces: &[GibbsTrace]) -> String {
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(traces[0].column_names());
    let rows = traces.iter().enumerate().flat_map(|(k, t)| {
        t.draws.iter().map(move |d| {
            let mut row = vec![(k + 1).to_string(), d.iteration.to_string()];
            row.extend([d.r, d.h, d.phi, d.sigma2, d.kappa].iter().map(|v| v.to_string()));
            row.extend(d.beta.iter().chain(d.alpha.iter()).map(|v| v.to_string()));
            row
        })
    });
    tsv(&header, rows)
}

fn vb_columns(s: &VbSamples) -> Vec<(String, Vec<f64>)> {
    let mut cols = vec![
        ("r".to_string(), s.r.clone()),
        ("sigma2".to_string(), s.sigma2.clone()),
        ("kappa".to_string(), s.kappa.clone()),
    ];
    let p = s.beta.first().map_or(0, Vec::len);
    for k in 0..p {
        cols.push((format!("beta{k}"), s.beta.iter().map(|b| b[k]).collect()));
    }
    cols
}

fn columns_tsv(cols: &[(String, Vec<f64>)]) -> String {
    let mut header = vec!["draw".to_string()];
    header.extend(cols.iter().map(|c| c.0.clone()));
    let n = cols.first().map_or(0, |c| c.1.len());
    tsv(
        &header,
        (0..n).map(|i| {
            std::iter::once((i + 1).to_string())
                .chain(cols.iter().map(|c| c.1[i].to_string()))
                .collect()
        }),
    )
}

fn mle_params(model: ModelKind, fit: &MleFit) -> FitParams {
    match model {
        ModelKind::Poisson => FitParams::poisson(fit.beta.clone()),
        _ => FitParams::nb(fit.beta.clone(), fit.nb_inverse_dispersion),
    }
}

struct Fitted {
    fit: FitSummary,
    trace_summary: Option<TraceSummary>,
    chain_summaries: Vec<TraceSummary>,
    trace: Option<String>,
}

fn fit_mle(cfg: &RunConfig, data: &Dataset) -> Result<Fitted> {
    let mle = match cfg.model {
        ModelKind::Poisson => fit_poisson_mle(data, MLE_TOLERANCE)?,
        _ => fit_nb_mle(data, MLE_TOLERANCE)?,
    };
    Ok(Fitted {
        fit: FitSummary {
            model: cfg.model,
            method: cfg.method,
            observations: data.n(),
            coef_names: data.coef_names().to_vec(),
            params: mle_params(cfg.model, &mle),
            converged: mle.converged,
            mle: Some(mle),
            vb: None,
            univariate: None,
            beta_correlation: None,
        },
        trace_summary: None,
        chain_summaries: Vec::new(),
        trace: None,
    })
}

fn fit_univariate(cfg: &RunConfig, data: &Dataset) -> Result<Fitted> {
    if data.n_coef() != 1 {
        return Err(LgnbError::config(
            "Bayesian NB fits use the intercept-only model; the data has covariates (use --model lgnb)",
        ));
    }
    let sample = UnivariateSample::new(data.y().to_vec());
    let (summary, r, p, converged) = match cfg.method {
        Method::Gibbs => {
            let trace = univariate_gibbs(&sample, &cfg.hyper, &cfg.gibbs_config(), &mut RngStream::new(cfg.seed))?;
            let s = UnivariateSummary {
                mean_r: trace.mean_r(),
                mean_p: trace.mean_p(),
                variational: None,
                sweeps: None,
            };
            (s, trace.r, trace.p, true)
        }
        _ => {
            let fit = univariate_vb(&sample, &cfg.hyper, &cfg.vb_config())?;
            let mut rng = RngStream::with_stream(cfg.seed, VB_SUMMARY_STREAM);
            let q_p = Beta::new(fit.alpha_tilde, fit.beta_tilde).map_err(|e| LgnbError::fault(e.to_string()))?;
            let mut r = Vec::with_capacity(VB_SUMMARY_DRAWS);
            let mut p = Vec::with_capacity(VB_SUMMARY_DRAWS);
            for _ in 0..VB_SUMMARY_DRAWS {
                r.push(sample_gamma(fit.a_tilde, 1.0 / fit.h_tilde, &mut rng)?);
                p.push(q_p.sample(&mut rng));
            }
            let s = UnivariateSummary {
                mean_r: fit.mean_r(),
                mean_p: fit.mean_p(),
                variational: Some([fit.a_tilde, fit.h_tilde, fit.alpha_tilde, fit.beta_tilde]),
                sweeps: Some(fit.sweeps),
            };
            (s, r, p, fit.converged)
        }
    };
    let mean = summary.mean_r * summary.mean_p / (1.0 - summary.mean_p);
    let cols = vec![("r".to_string(), r), ("p".to_string(), p)];
    Ok(Fitted {
        fit: FitSummary {
            model: cfg.model,
            method: cfg.method,
            observations: data.n(),
            coef_names: data.coef_names().to_vec(),
            params: FitParams::nb(vec![mean.ln()], 1.0 / summary.mean_r),
            converged,
            mle: None,
            vb: None,
            univariate: Some(summary),
            beta_correlation: None,
        },
        trace_summary: Some(trace_summary(&cols, &cfg.lags, Binning::default())?),
        chain_summaries: Vec::new(),
        trace: cfg.trace.as_ref().map(|_| columns_tsv(&cols)),
    })
}

fn fit_lgnb_gibbs(cfg: &RunConfig, data: &Dataset) -> Result<Fitted> {
    let gcfg = cfg.gibbs_config();
    let traces = if cfg.chains == 1 {
        vec![run_gibbs(data, &cfg.hyper, &gcfg)?]
    } else {
        run_chains(data, &cfg.hyper, &gcfg, cfg.chains)?
    };
    let mut pooled = traces[0].clone();
    for t in &traces[1..] {
        pooled.draws.extend(t.draws.iter().cloned());
    }
    let chain_summaries = if traces.len() > 1 {
        traces
            .iter()
            .map(|t| trace_summary(&gibbs_columns(t), &cfg.lags, Binning::default()))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let betas: Vec<Vec<f64>> = pooled.draws.iter().map(|d| d.beta.clone()).collect();
    Ok(Fitted {
        fit: FitSummary {
            model: cfg.model,
            method: cfg.method,
            observations: data.n(),
            coef_names: data.coef_names().to_vec(),
            params: FitParams::lgnb(pooled.mean_beta(), pooled.mean_sigma2(), pooled.mean_r()),
            converged: true,
            mle: None,
            vb: None,
            univariate: None,
            beta_correlation: slope_correlation_from_draws(&betas)?,
        },
        trace_summary: Some(trace_summary(&gibbs_columns(&pooled), &cfg.lags, Binning::default())?),
        chain_summaries,
        trace: cfg.trace.as_ref().map(|_| gibbs_trace_tsv(&traces)),
    })
}

fn fit_lgnb_vb(cfg: &RunConfig, data: &Dataset) -> Result<Fitted> {
    let fit = run_vb(data, &cfg.hyper, &cfg.vb_config())?;
    let post = &fit.posterior;
    let samples = sample_vb_posterior(post, VB_SUMMARY_DRAWS, &mut RngStream::with_stream(cfg.seed, VB_SUMMARY_STREAM))?;
    let cols = vb_columns(&samples);
    let mean_beta: Vec<f64> = post.mean_beta().iter().copied().collect();
    Ok(Fitted {
        fit: FitSummary {
            model: cfg.model,
            method: cfg.method,
            observations: data.n(),
            coef_names: data.coef_names().to_vec(),
            params: FitParams::lgnb(mean_beta.clone(), post.mean_sigma2(), post.mean_r()),
            converged: fit.converged,
            mle: None,
            vb: Some(VbSummary {
                sweeps: fit.sweeps,
                converged: fit.converged,
                elbo: fit.elbo.iter().map(|e| e.value).collect(),
                elbo_std_error: fit.elbo.iter().map(|e| e.std_error).collect(),
                smoothed_elbo: fit.smoothed_elbo.clone(),
                mean_r: post.mean_r(),
                mean_sigma2: post.mean_sigma2(),
                mean_beta,
                sigma_beta: to_rows(&post.sigma_beta),
            }),
            univariate: None,
            beta_correlation: slope_correlation_from_cov(&post.sigma_beta)?,
        },
        trace_summary: Some(trace_summary(&cols, &cfg.lags, Binning::default())?),
        chain_summaries: Vec::new(),
        trace: cfg.trace.as_ref().map(|_| columns_tsv(&cols)),
    })
}

/// Load the data, fit, and assemble the report. Nothing is written.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = cfg.timestamps.then(unix_now);
    let data = cfg.load_data()?;
    let fitted = match (cfg.model, cfg.method) {
        (_, Method::Mle) => fit_mle(cfg, &data)?,
        (ModelKind::Nb, _) => fit_univariate(cfg, &data)?,
        (_, Method::Gibbs) => fit_lgnb_gibbs(cfg, &data)?,
        (_, Method::Vb) => fit_lgnb_vb(cfg, &data)?,
    };
    let diagnostics = pearson_statistic(&fitted.fit.params, &data)?;
    let report = ReportEnvelope {
        config: cfg.clone(),
        fit: fitted.fit,
        diagnostics,
        trace_summary: fitted.trace_summary,
        chain_summaries: fitted.chain_summaries,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            started_unix: started,
            finished_unix: cfg.timestamps.then(unix_now),
        },
    };
    Ok(RunOutput {
        report,
        trace: fitted.trace,
    })
}

#[derive(Debug, Parser)]
#[command(name = "lgnb", version, about = "Lognormal-gamma mixed negative binomial regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a count model and write a JSON report.
    Fit(FitArgs),
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long, value_enum)]
    pub method: Method,
    /// CSV file with a header row, or a bundled dataset name (redmites).
    #[arg(long)]
    pub data: String,
    /// Count column; defaults to the first column.
    #[arg(long)]
    pub response: Option<String>,
    /// Frequency column for tabulated data.
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long = "vb-sweeps")]
    pub vb_sweeps: Option<usize>,
    #[arg(long = "vb-tol")]
    pub vb_tol: Option<f64>,
    #[arg(long = "mc-samples")]
    pub mc_samples: Option<usize>,
    #[arg(long = "pg-trunc")]
    pub pg_trunc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Value of r for --model lgnb-fixed-r (default 1000).
    #[arg(long = "fixed-r", num_args = 0..=1, default_missing_value = "1000")]
    pub fixed_r: Option<f64>,
    /// Starting value of r for gibbs and vb (default 100).
    #[arg(long = "r-init")]
    pub r_init: Option<f64>,
    /// Prior override, e.g. --hyper a0=0.1; repeatable.
    #[arg(long, value_name = "NAME=VALUE")]
    pub hyper: Vec<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write retained draws (or draws from the variational posterior) as a tab-separated table.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Autocorrelation lags in the trace summary.
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<usize>>,
    /// Expected SHA-256 of the data file.
    #[arg(long)]
    pub sha256: Option<String>,
    /// Record wall-clock start and finish times in the report.
    #[arg(long)]
    pub timestamps: bool,
}

impl FitArgs {
    pub fn into_config(self) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(self.model, self.method, self.data);
        if let Some(r) = self.fixed_r {
            if self.model != ModelKind::LgnbFixedR {
                return Err(LgnbError::config("--fixed-r requires --model lgnb-fixed-r"));
            }
            cfg.fixed_r = r;
        }
        cfg.r_init = self.r_init.unwrap_or(cfg.r_init);
        cfg.response = self.response;
        cfg.weight = self.weight;
        cfg.iterations = self.iters.unwrap_or(cfg.iterations);
        cfg.burn_in = self.burnin.unwrap_or(cfg.burn_in);
        cfg.thin = self.thin.unwrap_or(cfg.thin);
        cfg.vb_max_sweeps = self.vb_sweeps.unwrap_or(cfg.vb_max_sweeps);
        cfg.vb_tolerance = self.vb_tol.unwrap_or(cfg.vb_tolerance);
        cfg.mc_samples = self.mc_samples.unwrap_or(cfg.mc_samples);
        cfg.pg_truncation = self.pg_trunc.unwrap_or(cfg.pg_truncation);
        cfg.seed = self.seed;
        cfg.chains = self.chains;
        for item in &self.hyper {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| LgnbError::config(format!("--hyper expects name=value, got {item:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| LgnbError::config(format!("--hyper {name}: {value:?} is not a number")))?;
            cfg.hyper.set(name.trim(), value)?;
        }
        cfg.out = self.out;
        cfg.trace = self.trace;
        if let Some(lags) = self.lags {
            cfg.lags = lags;
        }
        cfg.sha256 = self.sha256;
        cfg.timestamps = self.timestamps;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(LgnbError::from)
}

/// Run the command line `args` (program name first) and return the exit status.
/// The report goes to `--out` or standard output; diagnostics go to standard error.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Command::Fit(fit) = cli.command;
    let result = fit.into_config().and_then(|cfg| {
        let output = run(&cfg)?;
        let json = output.report.to_json()? + "\n";
        match &cfg.out {
            Some(path) => write_file(path, &json)?,
            None => std::io::stdout().write_all(json.as_bytes())?,
        }
        if let (Some(path), Some(trace)) = (&cfg.trace, &output.trace) {
            write_file(path, trace)?;
        }
        Ok(output.report.exit_code())
    });
    match result {
        Ok(code) => {
            if code != 0 {
                eprintln!("lgnb: fit did not converge; report written");
            }
            code
        }
        Err(e) => {
            eprintln!("lgnb: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Vec<String> {
        ["lgnb", "fit"].iter().chain(extra).map(|s| s.to_string()).collect()
    }

    #[test]
    fn incompatible_combinations() {
        for (model, method) in [("lgnb", "mle"), ("lgnb-fixed-r", "mle"), ("poisson", "gibbs"), ("poisson", "vb")] {
            let code = run_command(args(&["--model", model, "--method", method, "--data", "redmites"]));
            assert_eq!(code, 2, "{model} {method}");
        }
        let code = run_command(args(&["--model", "lgnb", "--method", "gibbs", "--fixed-r", "--data", "redmites"]));
        assert_eq!(code, 2);
        let code = run_command(args(&["--model", "nb", "--method", "mle", "--data", "redmites", "--hyper", "a0"]));
        assert_eq!(code, 2);
    }

    #[test]
    fn missing_file_is_ingestion_error() {
        let code = run_command(args(&["--model", "poisson", "--method", "mle", "--data", "/nonexistent/x.csv"]));
        assert_eq!(code, 3);
    }

    #[test]
    fn fixed_r_default() {
        let cli = Cli::try_parse_from(args(&["--model", "lgnb-fixed-r", "--method", "gibbs", "--data", "redmites", "--fixed-r"]))
            .unwrap();
        let Command::Fit(fit) = cli.command;
        assert_eq!(fit.into_config().unwrap().fixed_r, 1000.0);
    }

    #[test]
    fn report_round_trips() {
        let cfg = RunConfig::new(ModelKind::Nb, Method::Mle, "redmites");
        let report = run(&cfg).unwrap().report;
        let back = ReportEnvelope::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        let mut cfg = RunConfig::new(ModelKind::Poisson, Method::Mle, "redmites");
        cfg.vb_tolerance = f64::INFINITY;
        let report = run(&cfg).unwrap().report;
        assert!(report.fit.params.r.is_infinite());
        let back = ReportEnvelope::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
