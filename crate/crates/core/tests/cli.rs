use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn freetci(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_freetci"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("FREETCI_OUT")
        .output()
        .expect("spawn freetci")
}

fn read_report(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{command}_report.json"))).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let schema: Value = serde_json::from_str(freetci::cli::REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{command}: {errors:?}");
    v
}

fn ok(out: &Path, args: &[&str]) -> Value {
    let o = freetci(out, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    read_report(out, args[0])
}

#[test]
fn equilibrium_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(dir.path(), &["equilibrium", "--q", "quadratic", "--R", "3", "--grid", "1000"]);
    let r = &v["result"];
    assert!(r["l1_to_semicircle"].as_f64().unwrap() < 1e-3);
    assert!((r["b_constant"].as_f64().unwrap() - 0.918_938_533_204_672_7).abs() < 1e-4);
    assert!((r["multiplier"].as_f64().unwrap() + 1.0).abs() < 1e-3);
    assert!(dir.path().join("equilibrium_measure.csv").exists());
    let mu = freetci::measures::GridMeasure::load(&dir.path().join("equilibrium_measure")).unwrap();
    assert_eq!(mu.len(), 1000);
}

#[test]
fn tci_shifted_semicircles_hold_at_equality() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(dir.path(), &["tci", "--family", "shifted-semicircle", "--q", "quadratic", "--rho", "1"]);
    let reports = v["result"].as_array().unwrap();
    assert_eq!(reports.len(), 9);
    for r in reports {
        let verdict = r["verdict"].as_str().unwrap();
        assert!(verdict == "holds_at_equality" || verdict == "holds", "{r}");
        assert!(r["slack"].as_f64().unwrap().abs() <= r["combined_error"].as_f64().unwrap() + 1e-6);
    }
}

#[test]
fn every_subcommand_writes_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["sample", "--q", "quadratic", "--n", "8", "--count", "5"]);
    ok(p, &["sample", "--q", "cosine:0.5", "--n", "6", "--count", "5", "--special", "true"]);
    ok(p, &["moments", "--q", "quadratic", "--q", "quartic@0.5", "--degree", "3"]);
    ok(p, &["freeness", "--n", "16", "--count", "4", "--degree", "2"]);
    let t = ok(p, &["transport", "--first", "semicircle", "--second", "semicircle:c=0.5", "--grid", "600"]);
    assert!((t["result"]["wasserstein"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    ok(p, &["transport", "--first", "uniform-circle", "--second", "trig:c1=0.5"]);
    let pr = ok(p, &["pressure", "--dims", "8,16"]);
    assert!((pr["result"]["estimate"]["extrapolated"].as_f64().unwrap() - 0.9189).abs() < 5e-2);
    ok(p, &["tci", "--mode", "matrix", "--dims", "2,4"]);
    ok(p, &["tci", "--mode", "product", "--samples", "5"]);
    ok(p, &["report", "--q", "quartic@0.5", "--grid", "200"]);
    for f in ["density.dat", "b_convergence.dat", "sample_spectra.csv"] {
        assert!(p.join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\n[equilibrium]\nq = \"scaled-quadratic:2\"\ngrid = 200\n").unwrap();
    let v = ok(dir.path(), &["equilibrium", "--config", cfg.to_str().unwrap(), "--grid", "300"]);
    assert_eq!(v["seed"], 11);
    assert_eq!(v["config"]["grid"], 300);
    assert_eq!(v["config"]["q"], "scaled-quadratic:2");
}

#[test]
fn runs_are_deterministic_across_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sample", "--q", "quadratic", "--n", "12", "--count", "6", "--seed", "5"];
    ok(a.path(), &args);
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "2"]);
    ok(b.path(), &with_workers);
    for f in ["sample_report.json", "sample_spectra.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(freetci(p, &[]).status.code(), Some(2));
    assert_eq!(freetci(p, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(freetci(p, &["equilibrium", "--q", "cubic"]).status.code(), Some(2));
    assert_eq!(freetci(p, &["moments", "--degree", "99"]).status.code(), Some(2));
    let cfg = p.join("bad.toml");
    std::fs::write(&cfg, "[equilibrium]\ngrdi = 3\n").unwrap();
    assert_eq!(freetci(p, &["equilibrium", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(freetci(&p.join("missing"), &["equilibrium"]).status.code(), Some(2));
    assert_eq!(freetci(p, &["tci", "--q", "line:0,0,0,0,0.25@1"]).status.code(), Some(2));
    // An unreachable error budget is a numerical failure, not a usage error.
    let tight = p.join("tight.toml");
    std::fs::write(&tight, "[pressure]\nh = [\"quartic@0\"]\ndims = [4]\nsamples = 20\nmax_std_error = 1e-12\n")
        .unwrap();
    let o = freetci(p, &["pressure", "--config", tight.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(freetci(p, &["--help"]).status.success());
}
