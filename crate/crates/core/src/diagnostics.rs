//! Fitted means, quasi-dispersion, Pearson goodness of fit and posterior trace summaries.
//!
//! Every model here has `Var[y|x] = E[y|x] + κ E[y|x]²`:
//!
//! | family           | `E[y|x]`                     | `κ`                      |
//! |------------------|------------------------------|--------------------------|
//! | Poisson          | `exp(xᵀβ)`                   | `0`                      |
//! | NB               | `exp(xᵀβ)`                   | `φ`                      |
//! | lognormal-Poisson| `exp(xᵀβ + σ²/2)`            | `e^{σ²} - 1`             |
//! | LGNB             | `exp(xᵀβ + σ²/2 + ln r)`     | `e^{σ²}(1 + 1/r) - 1`    |

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{LgnbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Poisson,
    Nb,
    LognormalPoisson,
    Lgnb,
}

impl ModelFamily {
    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::Poisson => "poisson",
            ModelFamily::Nb => "nb",
            ModelFamily::LognormalPoisson => "lognormal-poisson",
            ModelFamily::Lgnb => "lgnb",
        }
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = LgnbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(ModelFamily::Poisson),
            "nb" => Ok(ModelFamily::Nb),
            "lognormal-poisson" | "ln-poisson" => Ok(ModelFamily::LognormalPoisson),
            "lgnb" => Ok(ModelFamily::Lgnb),
            other => Err(LgnbError::domain(format!("unknown model family {other:?}"))),
        }
    }
}

/// Point parameters of a fitted model. Fields a family does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub family: ModelFamily,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub sigma2: f64,
    /// `r`; may be infinite.
    #[serde(default = "infinite", with = "extended_f64")]
    pub r: f64,
    /// NB `φ = 1/r`.
    #[serde(default)]
    pub nb_inverse_dispersion: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// Serde adapter writing non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`,
/// which plain JSON numbers cannot hold.
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

impl FitParams {
    pub fn poisson(beta: Vec<f64>) -> Self {
        Self {
            family: ModelFamily::Poisson,
            beta,
            sigma2: 0.0,
            r: f64::INFINITY,
            nb_inverse_dispersion: 0.0,
        }
    }

    pub fn nb(beta: Vec<f64>, nb_inverse_dispersion: f64) -> Self {
        Self {
            family: ModelFamily::Nb,
            beta,
            sigma2: 0.0,
            r: 1.0 / nb_inverse_dispersion,
            nb_inverse_dispersion,
        }
    }

    pub fn lognormal_poisson(beta: Vec<f64>, sigma2: f64) -> Self {
        Self {
            family: ModelFamily::LognormalPoisson,
            beta,
            sigma2,
            r: f64::INFINITY,
            nb_inverse_dispersion: 0.0,
        }
    }

    pub fn lgnb(beta: Vec<f64>, sigma2: f64, r: f64) -> Self {
        Self {
            family: ModelFamily::Lgnb,
            beta,
            sigma2,
            r,
            nb_inverse_dispersion: 0.0,
        }
    }

    pub fn quasi_dispersion(&self) -> Result<f64> {
        quasi_dispersion(self.family, self.sigma2, self.r, self.nb_inverse_dispersion)
    }
}

/// Conditional mean of the family at covariate row `x` (intercept included).
pub fn model_mean(x: &[f64], params: &FitParams) -> Result<f64> {
    if x.len() != params.beta.len() {
        return Err(LgnbError::domain(format!(
            "covariate row has {} entries, β has {}",
            x.len(),
            params.beta.len()
        )));
    }
    let eta: f64 = x.iter().zip(&params.beta).map(|(a, b)| a * b).sum();
    let log_mean = match params.family {
        ModelFamily::Poisson | ModelFamily::Nb => eta,
        ModelFamily::LognormalPoisson => eta + 0.5 * params.sigma2,
        ModelFamily::Lgnb => {
            if !(params.r > 0.0 && params.r.is_finite()) {
                return Err(LgnbError::domain(format!("LGNB mean needs finite positive r, got {}", params.r)));
            }
            eta + 0.5 * params.sigma2 + params.r.ln()
        }
    };
    Ok(log_mean.exp())
}

/// Coefficient `κ` of `E[y|x]²` in `Var[y|x]`.
pub fn quasi_dispersion(family: ModelFamily, sigma2: f64, r: f64, nb_inverse_dispersion: f64) -> Result<f64> {
    if sigma2 < 0.0 || sigma2.is_nan() {
        return Err(LgnbError::domain(format!("σ² must be non-negative, got {sigma2}")));
    }
    if r.is_nan() || r <= 0.0 {
        return Err(LgnbError::domain(format!("r must be positive, got {r}")));
    }
    if nb_inverse_dispersion < 0.0 || nb_inverse_dispersion.is_nan() {
        return Err(LgnbError::domain("NB inverse dispersion must be non-negative"));
    }
    Ok(match family {
        ModelFamily::Poisson => 0.0,
        ModelFamily::Nb => nb_inverse_dispersion,
        ModelFamily::LognormalPoisson => sigma2.exp_m1(),
        // e^{σ²}(1 + 1/r) - 1 = (e^{σ²} - 1) + e^{σ²}/r
        ModelFamily::Lgnb => sigma2.exp_m1() + sigma2.exp() / r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub model: String,
    pub fitted_mean: Vec<f64>,
    pub quasi_dispersion: f64,
    pub pearson: f64,
    pub residuals: Vec<f64>,
}

/// Pearson residuals `e_i = (y_i - μ_i)/√(μ_i(1 + κ μ_i))` and `E = Σ e_i²`.
pub fn pearson_statistic(params: &FitParams, data: &Dataset) -> Result<DiagnosticsReport> {
    let kappa = params.quasi_dispersion()?;
    let mut fitted_mean = Vec::with_capacity(data.n());
    let mut residuals = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let row: Vec<f64> = data.x().row(i).iter().copied().collect();
        let mu = model_mean(&row, params)?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(LgnbError::fault(format!("fitted mean {mu} at observation {}", i + 1)));
        }
        let y = data.y()[i] as f64;
        residuals.push((y - mu) / (mu * (1.0 + kappa * mu)).sqrt());
        fitted_mean.push(mu);
    }
    Ok(DiagnosticsReport {
        model: params.family.label().to_string(),
        pearson: residuals.iter().map(|e| e * e).sum(),
        fitted_mean,
        quasi_dispersion: kappa,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `edges.len() == counts.len() + 1`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// How many histogram bins to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Binning {
    #[default]
    FreedmanDiaconis,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// `(probability, quantile)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    /// `(lag, autocorrelation)`; `None` when the trace is constant.
    pub autocorrelation: Vec<(usize, Option<f64>)>,
    pub constant: bool,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub draws: usize,
    pub parameters: Vec<ParameterSummary>,
}

impl TraceSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

pub const SUMMARY_PROBABILITIES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample autocorrelation at `lag`; `None` for a constant series.
pub fn autocorrelation(values: &[f64], lag: usize) -> Option<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom <= 0.0 {
        return None;
    }
    if lag >= n {
        return Some(0.0);
    }
    let num: f64 = (0..n - lag).map(|t| (values[t] - mean) * (values[t + lag] - mean)).sum();
    Some(num / denom)
}

pub fn histogram(values: &[f64], binning: Binning) -> Histogram {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if max <= min {
        return Histogram {
            edges: vec![min, max],
            counts: vec![values.len() as u64],
        };
    }
    let bins = match binning {
        Binning::Fixed(k) => k.max(1),
        Binning::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let width = 2.0 * iqr / (values.len() as f64).cbrt();
            if width > 0.0 {
                (((max - min) / width).ceil() as usize).clamp(1, 1000)
            } else {
                (values.len() as f64).sqrt().ceil() as usize
            }
        }
    };
    let width = (max - min) / bins as f64;
    let edges = (0..=bins).map(|k| min + width * k as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = (((v - min) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

pub fn summarize_parameter(name: &str, values: &[f64], lags: &[usize], binning: Binning) -> Result<ParameterSummary> {
    if values.is_empty() {
        return Err(LgnbError::domain(format!("no draws for {name}")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let constant = sorted[0] == sorted[sorted.len() - 1];
    Ok(ParameterSummary {
        name: name.to_string(),
        mean,
        std,
        quantiles: SUMMARY_PROBABILITIES.iter().map(|&p| (p, quantile(&sorted, p))).collect(),
        autocorrelation: lags.iter().map(|&l| (l, autocorrelation(values, l))).collect(),
        constant,
        histogram: histogram(values, binning),
    })
}

/// Summaries of named columns of draws; all columns must have the same length.
pub fn trace_summary(columns: &[(String, Vec<f64>)], lags: &[usize], binning: Binning) -> Result<TraceSummary> {
    let draws = columns.first().map_or(0, |c| c.1.len());
    if draws == 0 {
        return Err(LgnbError::domain("trace is empty"));
    }
    if columns.iter().any(|c| c.1.len() != draws) {
        return Err(LgnbError::domain("trace columns have different lengths"));
    }
    let parameters = columns
        .iter()
        .map(|(name, values)| summarize_parameter(name, values, lags, binning))
        .collect::<Result<_>>()?;
    Ok(TraceSummary { draws, parameters })
}

/// Correlation matrix `D^{-1/2} Σ D^{-1/2}` of a symmetric positive definite `Σ`.
pub fn beta_correlation(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(LgnbError::domain("covariance must be a non-empty square matrix"));
    }
    if (sigma - sigma.transpose()).amax() > 1e-10 * sigma.amax() {
        return Err(LgnbError::domain("covariance is not symmetric"));
    }
    if sigma.clone().cholesky().is_none() {
        return Err(LgnbError::domain("covariance is not positive definite"));
    }
    let d = DVector::from_iterator(sigma.nrows(), sigma.diagonal().iter().map(|v| 1.0 / v.sqrt()));
    let mut corr = DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| sigma[(i, j)] * d[i] * d[j]);
    corr.fill_diagonal(1.0);
    Ok(corr)
}

/// Sample correlation matrix of draws given as rows.
pub fn sample_correlation(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() < 2 {
        return Err(LgnbError::domain("need at least two draws"));
    }
    let k = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let cov = DMatrix::from_fn(k, k, |a, b| {
        rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0)
    });
    beta_correlation(&cov)
}
