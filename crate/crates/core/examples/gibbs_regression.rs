//! Gibbs sampling on simulated LGNB data, compared with the NB maximum likelihood fit.
use lgnb::baselines::fit_nb_mle;
use lgnb::data::Hyperparameters;
use lgnb::diagnostics::{summarize_parameter, Binning};
use lgnb::gibbs::{run_gibbs, GibbsConfig};
use lgnb::rng::RngStream;
use lgnb::simulate::simulate_lgnb_dataset;

fn main() -> lgnb::Result<()> {
    let truth = [-1.0, 0.4, -0.3];
    let data = simulate_lgnb_dataset(400, &truth, 0.2, 4.0, &mut RngStream::new(3))?;

    let nb = fit_nb_mle(&data, 1e-8)?;
    println!("NB MLE: r = {:.3}, beta = {:.3?}", nb.r(), nb.beta);

    let config = GibbsConfig {
        iterations: 6000,
        burn_in: 3000,
        thin: 2,
        seed: 7,
        // start at the NB estimate; from the default r = 100 the chain can stall in the near-Poisson tail
        r_init: nb.r(),
        ..GibbsConfig::default()
    };
    let trace = run_gibbs(&data, &Hyperparameters::default(), &config)?;
    println!("Gibbs, {} draws", trace.len());
    for name in ["r", "sigma2", "kappa", "beta0", "beta1", "beta2"] {
        let s = summarize_parameter(name, &trace.column(name).unwrap(), &[1, 20], Binning::default())?;
        let acf20 = s.autocorrelation[1].1.unwrap_or(f64::NAN);
        println!(
            "{name:>7}: mean {:8.4}  sd {:7.4}  95% [{:8.4}, {:8.4}]  acf(20) {acf20:.2}",
            s.mean, s.std, s.quantiles[0].1, s.quantiles[4].1
        );
    }
    Ok(())
}
