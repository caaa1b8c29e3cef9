//! Draw counts from the generative forms of the models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::data::Dataset;
use crate::error::{LgnbError, Result};
use crate::kernels::{sample_gamma, sample_standard_normal};

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|e| LgnbError::fault(format!("Poisson({lambda}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// `y ~ Pois(λ)`, `λ ~ Gamma(r, μ/r)`: NB with mean `μ` and variance `μ + μ²/r`.
pub fn sample_nb_mean<R: Rng + ?Sized>(mean: f64, r: f64, rng: &mut R) -> Result<u64> {
    poisson(sample_gamma(r, mean / r, rng)?, rng)
}

/// `y ~ Pois(exp(η + ε))`, `ε ~ N(0, σ²)`.
pub fn sample_lognormal_poisson<R: Rng + ?Sized>(eta: f64, sigma2: f64, rng: &mut R) -> Result<u64> {
    poisson((eta + sigma2.sqrt() * sample_standard_normal(rng)).exp(), rng)
}

/// `y ~ NB(r, p)` with `logit p = η + ε`, `ε ~ N(0, σ²)`.
pub fn sample_lgnb<R: Rng + ?Sized>(eta: f64, sigma2: f64, r: f64, rng: &mut R) -> Result<u64> {
    let psi = eta + sigma2.sqrt() * sample_standard_normal(rng);
    poisson(sample_gamma(r, psi.exp(), rng)?, rng)
}

/// Synthetic LGNB regression data: covariates iid `N(0, 1)` and counts from [`sample_lgnb`].
pub fn simulate_lgnb_dataset<R: Rng + ?Sized>(
    n: usize,
    beta: &[f64],
    sigma2: f64,
    r: f64,
    rng: &mut R,
) -> Result<Dataset> {
    let p = beta.len();
    if p == 0 {
        return Err(LgnbError::domain("β needs an intercept"));
    }
    let mut x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { 0.0 });
    for i in 0..n {
        for j in 1..p {
            x[(i, j)] = sample_standard_normal(rng);
        }
    }
    let eta = &x * DVector::from_column_slice(beta);
    let y = eta.iter().map(|&e| sample_lgnb(e, sigma2, r, rng)).collect::<Result<Vec<_>>>()?;
    Dataset::new(y, x)
}
