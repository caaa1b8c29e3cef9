//! Density evaluators and samplers for the distributions the model is built from.
//!
//! Probabilities of the negative binomial are always carried through the
//! logit `psi = ln(p / (1 - p))`, so `ln(1 - p) = -log1p_exp(psi)` and
//! `ln p = psi - log1p_exp(psi)` never lose precision as `p -> 1`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{LgnbError, Result};

/// Default number of gamma terms in the truncated Polya-Gamma series.
pub const DEFAULT_PG_TRUNCATION: usize = 2000;

/// `ln(1 + e^x)` without overflow for large `x` or cancellation for very negative `x`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 36.0 {
        x + (-x).exp()
    } else if x > -37.0 {
        x.exp().ln_1p()
    } else {
        x.exp()
    }
}

/// `tanh(x / 2) / (2 x)`, the Polya-Gamma mean per unit shape, with its limit 1/4 at 0.
pub fn tanh_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        0.25
    } else {
        (0.5 * x).tanh() / (2.0 * x)
    }
}

/// Mean of PG(b, c).
pub fn polya_gamma_mean(b: f64, c: f64) -> f64 {
    b * tanh_ratio(c)
}

fn check_count_params(r: f64) -> Result<()> {
    if !r.is_finite() || r <= 0.0 {
        return Err(LgnbError::domain(format!("dispersion r must be positive and finite, got {r}")));
    }
    Ok(())
}

/// Log pmf of NB(r, p): `ln Γ(r+y) - ln Γ(r) - ln y! + r ln(1-p) + y ln p`.
pub fn nb_log_pmf(y: u64, r: f64, p: f64) -> Result<f64> {
    check_count_params(r)?;
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(LgnbError::domain(format!("probability p must lie in (0, 1), got {p}")));
    }
    let y = y as f64;
    Ok(ln_gamma(r + y) - ln_gamma(r) - ln_gamma(y + 1.0) + r * (-p).ln_1p() + y * p.ln())
}

/// Log pmf of NB(r, p) with `p` given by its logit `psi`.
pub fn nb_log_pmf_logit(y: u64, r: f64, psi: f64) -> Result<f64> {
    check_count_params(r)?;
    if !psi.is_finite() {
        return Err(LgnbError::domain(format!("logit must be finite, got {psi}")));
    }
    let yf = y as f64;
    Ok(ln_gamma(r + yf) - ln_gamma(r) - ln_gamma(yf + 1.0) + yf * psi - (yf + r) * log1p_exp(psi))
}

/// Draw from the logarithmic distribution Log(p), `f(k) = -p^k / (k ln(1-p))`, by inverse CDF.
pub fn sample_logarithmic<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(LgnbError::domain(format!("logarithmic p must lie in (0, 1), got {p}")));
    }
    let u: f64 = rng.random();
    let mut k = 1u64;
    let mut mass = -p / (-p).ln_1p();
    let mut cdf = mass;
    while u > cdf {
        mass *= p * k as f64 / (k + 1) as f64;
        k += 1;
        cdf += mass;
        if mass == 0.0 {
            // the remaining tail is below double resolution
            break;
        }
    }
    Ok(k)
}

/// Gamma(shape, scale) draw. Underflow to exactly zero (possible for shapes
/// far below one) is reported as the smallest positive normal double.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
        return Err(LgnbError::fault(format!(
            "invalid gamma parameters: shape {shape}, scale {scale}"
        )));
    }
    let dist = Gamma::new(shape, scale).map_err(|e| LgnbError::fault(e.to_string()))?;
    Ok(dist.sample(rng).max(f64::MIN_POSITIVE))
}

pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Parameters of a truncated Polya-Gamma draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgParams {
    b: f64,
    c: f64,
    truncation: usize,
}

impl PgParams {
    pub fn new(b: f64, c: f64, truncation: usize) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(LgnbError::domain(format!("Polya-Gamma shape b must be positive, got {b}")));
        }
        if !c.is_finite() {
            return Err(LgnbError::domain(format!("Polya-Gamma tilt c must be finite, got {c}")));
        }
        if truncation == 0 {
            return Err(LgnbError::domain("Polya-Gamma truncation must be at least 1"));
        }
        Ok(Self { b, c, truncation })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }
}

/// Truncated-series sampler for PG(b, c):
///
/// ```text
/// ω = 1/(2π²) Σ_{k=1..K} g_k / ((k - 1/2)² + c²/(4π²)),   g_k ~ Gamma(b, 1)
/// ```
///
/// Holds the `(k - 1/2)²` table so repeated draws at the same truncation
/// do not recompute it.
#[derive(Debug, Clone)]
pub struct PgSampler {
    offsets: Vec<f64>,
}

impl PgSampler {
    pub fn new(truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(LgnbError::domain("Polya-Gamma truncation must be at least 1"));
        }
        let offsets = (1..=truncation)
            .map(|k| {
                let h = k as f64 - 0.5;
                h * h
            })
            .collect();
        Ok(Self { offsets })
    }

    pub fn truncation(&self) -> usize {
        self.offsets.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, b: f64, c: f64, rng: &mut R) -> Result<f64> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(LgnbError::domain(format!("Polya-Gamma shape b must be positive, got {b}")));
        }
        if !c.is_finite() {
            return Err(LgnbError::domain(format!("Polya-Gamma tilt c must be finite, got {c}")));
        }
        let gamma = Gamma::new(b, 1.0).map_err(|e| LgnbError::fault(e.to_string()))?;
        let tilt = c * c / (4.0 * PI * PI);
        let sum: f64 = self
            .offsets
            .iter()
            .map(|d| gamma.sample(rng) / (d + tilt))
            .sum();
        Ok(sum / (2.0 * PI * PI))
    }
}

pub fn sample_polya_gamma<R: Rng + ?Sized>(params: &PgParams, rng: &mut R) -> Result<f64> {
    PgSampler::new(params.truncation)?.sample(params.b, params.c, rng)
}
