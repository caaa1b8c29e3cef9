//! Programmatic runs: load a CSV, fit through the command dispatcher, write the report and trace.
use lgnb::cli::{run, Method, ModelKind, RunConfig};
use lgnb::rng::RngStream;
use lgnb::simulate::simulate_lgnb_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("lgnb-run-report");
    std::fs::create_dir_all(&dir)?;
    let data = simulate_lgnb_dataset(400, &[1.5, 0.5], 0.05, 1.0, &mut RngStream::new(5))?;
    let mut csv = String::from("count,dose\n");
    for i in 0..data.n() {
        csv += &format!("{},{}\n", data.y()[i], data.x()[(i, 1)]);
    }
    let path = dir.join("counts.csv");
    std::fs::write(&path, csv)?;

    let mut cfg = RunConfig::new(ModelKind::Lgnb, Method::Gibbs, path.to_string_lossy());
    cfg.response = Some("count".into());
    cfg.iterations = 2000;
    cfg.burn_in = 1000;
    cfg.seed = 9;
    // from r = 100 the chain can settle in the near-Poisson tail, where vague priors give no pull back
    cfg.r_init = 2.0;
    let out = run(&cfg)?;
    let report = &out.report;
    println!("r = {:.3}, sigma2 = {:.3}, beta = {:.3?}", report.fit.params.r, report.fit.params.sigma2, report.fit.params.beta);
    println!("Pearson E = {:.1}, kappa = {:.4}", report.diagnostics.pearson, report.diagnostics.quasi_dispersion);
    if let Some(summary) = &report.trace_summary {
        for p in &summary.parameters {
            println!("{:7} mean {:9.4}  sd {:8.4}  acf {:?}", p.name, p.mean, p.std, p.autocorrelation);
        }
    }

    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    if let Some(trace) = &out.trace {
        std::fs::write(dir.join("trace.tsv"), trace)?;
    }
    println!("wrote {}", dir.display());

    // the same fit from the command line:
    //   lgnb fit --model lgnb --method gibbs --data counts.csv --response count \
    //       --iters 2000 --burnin 1000 --seed 9 --r-init 2 --out report.json --trace trace.tsv
    Ok(())
}
