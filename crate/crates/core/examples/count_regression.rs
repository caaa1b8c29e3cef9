//! Poisson and NB maximum likelihood on overdispersed counts, with Pearson goodness of fit.
use lgnb::baselines::{fit_nb_mle, fit_poisson_mle};
use lgnb::diagnostics::{pearson_statistic, FitParams};
use lgnb::rng::RngStream;
use lgnb::simulate::simulate_lgnb_dataset;

fn main() -> lgnb::Result<()> {
    let data = simulate_lgnb_dataset(300, &[0.5, 0.6, -0.4], 0.3, 3.0, &mut RngStream::new(11))?;
    let poisson = fit_poisson_mle(&data, 1e-8)?;
    let nb = fit_nb_mle(&data, 1e-8)?;
    println!("Poisson  beta = {:.4?}  loglik {:.2}", poisson.beta, poisson.log_likelihood);
    println!("NB       beta = {:.4?}  loglik {:.2}  r = {:.3}", nb.beta, nb.log_likelihood, nb.r());

    for params in [FitParams::poisson(poisson.beta), FitParams::nb(nb.beta, nb.nb_inverse_dispersion)] {
        let report = pearson_statistic(&params, &data)?;
        println!(
            "{:8} kappa = {:.4}  E = {:.1}  (N = {})",
            report.model,
            report.quasi_dispersion,
            report.pearson,
            data.n()
        );
    }
    Ok(())
}
