//! Draws from the sampling kernels next to their closed-form moments.
use lgnb::kernels::{nb_log_pmf, polya_gamma_mean, sample_logarithmic, PgSampler};
use lgnb::rng::RngStream;

fn main() -> lgnb::Result<()> {
    let mut rng = RngStream::new(42);
    let pg = PgSampler::new(2000)?;
    let n = 20_000;
    for (b, c) in [(1.0, 0.0), (1.0, 2.0), (3.7, 1.5), (10.0, -4.0)] {
        let mean = (0..n).map(|_| pg.sample(b, c, &mut rng)).sum::<lgnb::Result<f64>>()? / n as f64;
        println!("PG({b:4}, {c:4})  sample mean {mean:.5}  exact {:.5}", polya_gamma_mean(b, c));
    }

    let p = 0.7;
    let draws: Vec<u64> = (0..n).map(|_| sample_logarithmic(p, &mut rng)).collect::<lgnb::Result<_>>()?;
    let mean = draws.iter().sum::<u64>() as f64 / n as f64;
    println!("Log({p})  sample mean {mean:.4}  exact {:.4}", -p / ((1.0 - p) * (-p as f64).ln_1p()));

    // NB(r, p) pmf; the mass sums to one and the mean is rp/(1-p)
    let (r, p) = (2.5, 0.3);
    let pmf: Vec<f64> = (0..200).map(|y| nb_log_pmf(y, r, p).map(f64::exp)).collect::<lgnb::Result<_>>()?;
    let mean: f64 = pmf.iter().enumerate().map(|(y, q)| y as f64 * q).sum();
    println!("NB({r}, {p})  total mass {:.12}  mean {mean:.6}", pmf.iter().sum::<f64>());
    for (y, q) in pmf.iter().enumerate().take(6) {
        println!("  P(y = {y}) = {q:.6}");
    }
    Ok(())
}
