use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mcpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcpd"))
        .args(args)
        .output()
        .expect("spawn mcpd")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A temporary directory holding a short simulated series.
fn series() -> (TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = mcpd(&[
        "simulate",
        "--scenario",
        "scenario1",
        "--seed",
        "4",
        "--out",
        p(&sim),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file = sim.join("series.csv");
    (dir, p(&file).to_string())
}

fn fit(input: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "fit",
        "--input",
        input,
        "--out",
        p(out),
        "--iters",
        "400",
        "--warmup",
        "200",
    ];
    args.extend_from_slice(extra);
    mcpd(&args)
}

#[test]
fn simulate_writes_series_and_truth() {
    let (dir, file) = series();
    let text = fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().count(), 101);
    let truth = fs::read_to_string(dir.path().join("sim/truth.csv")).unwrap();
    assert!(truth.starts_with("instant,mu,sigma2\n"));
    let spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim/truth.json")).unwrap())
            .unwrap();
    assert_eq!(spec["n"], 100);
}

#[test]
fn fit_writes_summaries_and_run_record() {
    let (dir, file) = series();
    let out = dir.path().join("fit");
    let o = fit(&file, &out, &["--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("retained draws = 400"), "{stdout}");
    assert!(!out.join("samples.csv.gz").exists());

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 100);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "fit");
    assert_eq!(run["mcmc"]["seed"], 3);
    assert_eq!(run["model"]["model"], "bmcp");
}

#[test]
fn summarize_reproduces_fit_outputs() {
    let (dir, file) = series();
    let out = dir.path().join("fit");
    assert_eq!(code(&fit(&file, &out, &["--keep-samples"])), 0);
    let again = dir.path().join("again");
    let samples = out.join("samples.csv.gz");
    let o = mcpd(&["summarize", "--input", p(&samples), "--out", p(&again)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "change_prob_mu.csv",
        "change_prob_sigma2.csv",
        "summary.json",
    ] {
        assert_eq!(
            fs::read(out.join(name)).unwrap(),
            fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn baselines_and_presets_run() {
    let (dir, file) = series();
    for (i, extra) in [
        vec!["--model", "lcia05"],
        vec!["--model", "bh93"],
        vec!["--config", "preset:C2"],
    ]
    .iter()
    .enumerate()
    {
        let o = fit(&file, &dir.path().join(format!("run{i}")), extra);
        assert_eq!(
            code(&o),
            0,
            "{extra:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn config_file_overrides_defaults() {
    let (dir, file) = series();
    let cfg = dir.path().join("prior.cfg");
    fs::write(&cfg, "# tighter mean prior\nsigma0sq = 4\nalpha1 = 2\n").unwrap();
    let out = dir.path().join("fit");
    let o = fit(&file, &out, &["--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["model"]["hyper"]["sigma0sq"], 4.0);
    assert_eq!(run["model"]["yao1"]["alpha"], 2.0);
}

#[test]
fn replicate_writes_monte_carlo_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    let o = mcpd(&[
        "replicate",
        "--scenario",
        "scenario1",
        "--reps",
        "2",
        "--iters",
        "200",
        "--warmup",
        "200",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(out.join("mc_replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(out.join("run.json").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let (dir, file) = series();
    let out = dir.path().join("x");
    assert_eq!(code(&mcpd(&["fit", "--bogus"])), 1);
    assert_eq!(code(&mcpd(&["frobnicate"])), 1);
    assert_eq!(code(&fit(&file, &out, &["--thin", "0"])), 1);
    assert_eq!(code(&fit(&file, &out, &["--hpd-level", "1.5"])), 1);
    assert_eq!(code(&fit(&file, &out, &["--config", "preset:C9"])), 1);
    assert_eq!(
        code(&mcpd(&["simulate", "--scenario", "nope", "--out", p(&out)])),
        1
    );
    assert_eq!(
        code(&mcpd(&[
            "replicate",
            "--scenario",
            "scenario1",
            "--reps",
            "0",
            "--out",
            p(&out)
        ])),
        1
    );
    assert_eq!(code(&mcpd(&["--help"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&fit(p(&missing), &out, &[])), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x\n1.0\nabc\n2.0\n").unwrap();
    let o = fit(p(&bad), &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:3:"));

    let nonfinite = dir.path().join("nan.csv");
    fs::write(&nonfinite, "1.0\nNaN\n2.0\n").unwrap();
    assert_eq!(code(&fit(p(&nonfinite), &out, &[])), 2);

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "sigma0sq = \n").unwrap();
    let good = dir.path().join("good.csv");
    fs::write(&good, "1\n2\n3\n").unwrap();
    assert_eq!(code(&fit(p(&good), &out, &["--config", p(&cfg)])), 2);

    let not_samples = dir.path().join("plain.csv");
    fs::write(&not_samples, "1\n2\n").unwrap();
    assert_eq!(
        code(&mcpd(&[
            "summarize",
            "--input",
            p(&not_samples),
            "--out",
            p(&out)
        ])),
        2
    );
}
