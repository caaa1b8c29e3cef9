//! Dispersion of the red mites counts by five estimators.
use lgnb::baselines::{
    estimate_r_mle_univariate, estimate_r_mme, estimate_r_mqle, univariate_gibbs, univariate_vb, UnivariateSample,
};
use lgnb::data::Hyperparameters;
use lgnb::gibbs::GibbsConfig;
use lgnb::rng::RngStream;
use lgnb::vb::VbConfig;

fn main() -> lgnb::Result<()> {
    let mites = UnivariateSample::from_frequencies(&[(0, 70), (1, 38), (2, 17), (3, 10), (4, 9), (5, 3), (6, 2), (7, 1)]);
    println!("N = {}, mean = {:.4}, variance = {:.4}", mites.n(), mites.mean(), mites.variance());
    println!("MME   r = {:.4}", estimate_r_mme(&mites)?);
    println!("MLE   r = {:.4}", estimate_r_mle_univariate(&mites)?);
    println!("MQLE  r = {:.4}", estimate_r_mqle(&mites)?);

    let hyper = Hyperparameters::default();
    let trace = univariate_gibbs(&mites, &hyper, &GibbsConfig::default(), &mut RngStream::new(1))?;
    println!("Gibbs E[r] = {:.4} ({} draws)", trace.mean_r(), trace.r.len());
    let vb = univariate_vb(&mites, &hyper, &VbConfig::default())?;
    println!("VB    <r> = {:.4} ({} sweeps)", vb.mean_r(), vb.sweeps);
    Ok(())
}
