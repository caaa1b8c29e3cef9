use std::path::Path;
use std::process::Command;

use lgnb::cli::{run, run_command, Method, ModelKind, ReportEnvelope, RunConfig};
use lgnb::io::{bundled_redmites, load_csv, load_csv_sample, load_csv_verified, read_table, sha256_hex};
use lgnb::rng::RngStream;
use lgnb::LgnbError;

fn write_regression_csv(dir: &Path) -> String {
    let mut rng = RngStream::new(77);
    let data = lgnb::simulate::simulate_lgnb_dataset(40, &[0.6, 0.3, -0.2], 0.2, 4.0, &mut rng).unwrap();
    let mut text = String::from("count,a,b\n");
    for i in 0..data.n() {
        text += &format!("{},{},{}\n", data.y()[i], data.x()[(i, 1)], data.x()[(i, 2)]);
    }
    let path = dir.join("sim.csv");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn fit(args: &[&str]) -> i32 {
    run_command(std::iter::once("lgnb").chain(["fit"]).chain(args.iter().copied()))
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_regression_csv(dir.path());
    let out = dir.path().join("report.json");
    let outs: Vec<String> = (0..2)
        .map(|_| {
            let code = fit(&[
                "--model", "lgnb", "--method", "gibbs", "--data", &data, "--response", "count", "--seed", "7",
                "--iters", "80", "--burnin", "40", "--thin", "2", "--pg-trunc", "200", "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
            std::fs::read_to_string(&out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let report = ReportEnvelope::from_json(&outs[0]).unwrap();
    assert_eq!(report.provenance.seed, 7);
    assert_eq!(report.config.iterations, 80);
    assert_eq!(report.fit.observations, 40);
    assert!(report.trace_summary.unwrap().get("kappa").is_some());
}

#[test]
fn vb_replays_and_reports_correlations() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(ModelKind::Lgnb, Method::Vb, write_regression_csv(dir.path()));
    cfg.response = Some("count".into());
    cfg.vb_max_sweeps = 30;
    cfg.mc_samples = 200;
    cfg.seed = 3;
    let a = run(&cfg).unwrap().report;
    let b = run(&cfg).unwrap().report;
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let corr = a.fit.beta_correlation.as_ref().unwrap();
    assert_eq!(corr.len(), 2);
    assert!((corr[0][0] - 1.0).abs() < 1e-12 && (corr[0][1] - corr[1][0]).abs() < 1e-12);
    assert_eq!(ReportEnvelope::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn trace_file_and_chains() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_regression_csv(dir.path());
    let trace = dir.path().join("trace.tsv");
    let out = dir.path().join("report.json");
    let code = fit(&[
        "--model", "lgnb", "--method", "gibbs", "--data", &data, "--iters", "30", "--burnin", "10", "--thin",
        "1", "--pg-trunc", "100", "--chains", "2", "--trace", trace.to_str().unwrap(), "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(&header[..4], ["chain", "iteration", "r", "h"]);
    assert!(header.contains(&"kappa") && header.contains(&"beta2"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert_eq!(rows.iter().filter(|r| r[0] == "2").count(), 20);
    let report = ReportEnvelope::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report.chain_summaries.len(), 2);
    assert_eq!(report.trace_summary.unwrap().draws, 40);
}

#[test]
fn fixed_r_holds_r_constant() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_regression_csv(dir.path());
    let trace = dir.path().join("trace.tsv");
    let out = dir.path().join("report.json");
    let code = fit(&[
        "--model", "lgnb-fixed-r", "--method", "gibbs", "--fixed-r", "--data", &data, "--iters", "20", "--burnin",
        "5", "--pg-trunc", "100", "--thin", "1", "--trace", trace.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split('\t').nth(2) == Some("1000")));
    let report = ReportEnvelope::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report.fit.params.r, 1000.0);
}

#[test]
fn exit_codes() {
    // config: incompatible model and method, --fixed-r misuse, bad hyperparameter, unknown flag
    assert_eq!(fit(&["--model", "lgnb", "--method", "mle", "--data", "redmites"]), 2);
    assert_eq!(fit(&["--model", "poisson", "--method", "gibbs", "--data", "redmites"]), 2);
    assert_eq!(fit(&["--model", "lgnb", "--method", "gibbs", "--fixed-r", "--data", "redmites"]), 2);
    assert_eq!(fit(&["--model", "nb", "--method", "mle", "--data", "redmites", "--hyper", "zz=1"]), 2);
    assert_eq!(fit(&["--model", "nb", "--method", "mle", "--data", "redmites", "--bogus"]), 2);

    // ingestion
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,x\n1,0.5\n-2,0.1\n").unwrap();
    assert_eq!(fit(&["--model", "poisson", "--method", "mle", "--data", bad.to_str().unwrap()]), 3);
    assert_eq!(fit(&["--model", "poisson", "--method", "mle", "--data", "/no/such/file.csv"]), 3);

    // non-convergence is reported, the report still written
    let out = dir.path().join("nc.json");
    let code = fit(&[
        "--model", "nb", "--method", "vb", "--data", "redmites", "--vb-sweeps", "2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 5);
    assert!(!ReportEnvelope::from_json(&std::fs::read_to_string(out).unwrap()).unwrap().fit.converged);
}

#[test]
fn binary_runs_redmites_mle() {
    let output = Command::new(env!("CARGO_BIN_EXE_lgnb"))
        .args(["fit", "--model", "nb", "--method", "mle", "--data", "redmites"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = ReportEnvelope::from_json(&String::from_utf8(output.stdout).unwrap()).unwrap();
    let r = report.fit.mle.unwrap().r();
    assert!((r - 1.0246).abs() < 1e-3, "{r}");

    let output = Command::new(env!("CARGO_BIN_EXE_lgnb"))
        .args(["fit", "--model", "lgnb", "--method", "mle", "--data", "redmites"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).starts_with("lgnb: "));
}

#[test]
fn ingestion() {
    let s = bundled_redmites();
    assert_eq!((s.n(), s.sum(), *s.y().iter().max().unwrap()), (150, 172, 7));
    assert!((s.mean() - 1.1467).abs() < 5e-5 && (s.variance() - 2.2736).abs() < 5e-5);

    let dir = tempfile::tempdir().unwrap();
    let freq = dir.path().join("freq.csv");
    std::fs::write(&freq, "value,leaves\n0,70\n1,38\n2,17\n3,10\n4,9\n5,3\n6,2\n7,1\n").unwrap();
    let from_file = load_csv_sample(&freq, Some("value"), Some("leaves")).unwrap();
    assert_eq!(from_file.y(), s.y());

    let table = dir.path().join("t.csv");
    std::fs::write(&table, "x1,y,x2\n0.5,3,1e-1\n-1.25,0,2\n").unwrap();
    let data = load_csv(&table, Some("y"), None).unwrap();
    assert_eq!(data.y(), [3, 0]);
    assert_eq!(data.coef_names(), ["intercept", "x1", "x2"]);
    assert_eq!(data.x()[(1, 1)], -1.25);
    assert_eq!(data.x()[(0, 2)], 0.1);

    let digest = sha256_hex(&table).unwrap();
    assert!(load_csv_verified(&table, &digest, Some("y"), None).is_ok());
    assert!(matches!(
        load_csv_verified(&table, &"0".repeat(64), Some("y"), None),
        Err(LgnbError::Ingestion { .. })
    ));

    for (text, needle) in [
        ("y,x\n1,abc\n", "line 2"),
        ("y,x\n1.5,0\n", "column \"y\""),
        ("y,x\n1,0\n2\n", "line 3"),
    ] {
        let err = read_table(text.as_bytes(), Some("y"), None).unwrap_err();
        assert!(err.to_string().contains(needle), "{err}");
    }
    assert!(read_table("a,b\n1,2\n".as_bytes(), Some("y"), None).is_err());
    // decimal comma is not a number
    assert!(read_table("y,x\n1,\"0,5\"\n".as_bytes(), Some("y"), None).is_err());
}
