use std::fs;
use std::path::Path;
use std::process::Command;

use fsi_core::metrics::l1_error;
use fsi_core::scenario::Scenario;
use fsi_harness::cache::ReferenceKey;
use fsi_harness::config::config_from_settings;
use fsi_harness::report::{read_errors, read_profile, read_timeseries};
use fsi_harness::{bench, parse_sweep, run, RunConfig};

fn config(dir: &Path, settings: &[(&str, &str)]) -> RunConfig {
    let out = dir.join("run").to_string_lossy().into_owned();
    let refs = dir.join("refs").to_string_lossy().into_owned();
    let mut all: Vec<(usize, &str, &str)> = settings.iter().map(|&(k, v)| (0, k, v)).collect();
    all.push((0, "out", &out));
    all.push((0, "reference-dir", &refs));
    config_from_settings(&all).unwrap()
}

const FILES: [&str; 3] = ["profile.csv", "timeseries.csv", "errors.csv"];

#[test]
fn runs_are_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let settings = [("scenario", "accuracy"), ("solver", "fsi1"), ("epsilon", "1e-4"), ("seed", "42")];
    let mut a = config(dir.path(), &settings);
    a.out = dir.path().join("a");
    let mut b = a.clone();
    b.out = dir.path().join("b");
    run(&a).unwrap();
    run(&b).unwrap();
    for f in FILES {
        let x = fs::read(a.out.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.out.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn errors_are_recomputable_from_the_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), &[("scenario", "lax"), ("solver", "fsi"), ("cells", "50"), ("ppc", "100")]);
    let report = run(&c).unwrap();
    let profile = read_profile(&c.out.join("profile.csv")).unwrap();
    let reference = read_profile(&ReferenceKey::for_run(&c.spec).path_in(&c.reference_dir)).unwrap();
    let dx = Scenario::new(c.spec.scenario).grid(c.spec.cells).unwrap().dx;
    let recomputed = l1_error(&profile, &reference, dx).unwrap();
    let written = read_errors(&c.out.join("errors.csv")).unwrap();
    for ((_, a), (_, b)) in recomputed.as_array().iter().zip(written.as_array()) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    assert_eq!(written, report.errors);
    let series = read_timeseries(&c.out.join("timeseries.csv")).unwrap();
    assert_eq!(series.len() as u64, report.outcome.steps + 1);
}

#[test]
fn periodic_totals_are_constant_in_the_written_series() {
    let dir = tempfile::tempdir().unwrap();
    for solver in ["mcm", "fsi", "fsi1", "dvm", "euler"] {
        let mut c = config(dir.path(), &[("solver", solver), ("cells", "40"), ("ppc", "50"), ("tfinal", "0.02")]);
        c.out = dir.path().join(solver);
        run(&c).unwrap();
        let series = read_timeseries(&c.out.join("timeseries.csv")).unwrap();
        let first = series[0];
        for r in &series {
            assert!(((r.mass - first.mass) / first.mass).abs() <= 1e-10, "{solver}");
            if matches!(solver, "fsi" | "fsi1" | "dvm" | "euler") {
                assert!(((r.momentum - first.momentum) / first.momentum).abs() <= 1e-10, "{solver}");
                assert!(((r.energy - first.energy) / first.energy).abs() <= 1e-10, "{solver}");
            }
        }
    }
}

#[test]
fn monte_carlo_error_has_the_expected_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), &[("solver", "mcm"), ("epsilon", "1e-2"), ("seed", "3")]);
    let rho = run(&c).unwrap().errors.rho;
    assert!((1.5e-2..1.5e-1).contains(&rho), "mcm density error {rho}");
}

#[test]
fn bench_covers_the_table_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "scenario = accuracy\nsolver = mcm, fsi, fsi1\nepsilon = 1e-2, 1e-3, 5e-4, 1e-4\ncells = 20\nppc = 20\nout = {}\nreference-dir = {}\n",
        dir.path().join("bench").display(),
        dir.path().join("refs").display()
    );
    let configs = parse_sweep(&text).unwrap();
    let reports = bench(&configs, 4);
    assert_eq!(reports.len(), 12);
    for (c, r) in configs.iter().zip(reports) {
        let r = r.unwrap();
        assert_eq!(r.config, *c);
        assert!(r.errors.as_array().iter().all(|(_, e)| *e >= 0.0));
        for f in FILES {
            assert!(c.out.join(f).exists());
        }
    }
    assert_eq!(fs::read_dir(dir.path().join("refs")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")
    }).count(), 4);
}

#[test]
fn cli_run_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_fsi");
    let out = dir.path().join("cli");
    let status = Command::new(exe)
        .args(["run", "--scenario", "shock", "--solver", "fsi1", "--cells", "30", "--ppc", "40", "--tfinal", "0.01"])
        .args(["--matching", "on", "--beta-estimator", "bound", "--fluid-solver", "muscl_relaxed"])
        .arg("--out")
        .arg(&out)
        .arg("--reference-dir")
        .arg(dir.path().join("refs"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(read_profile(&out.join("profile.csv")).unwrap().len(), 30);
    let reference = dir.path().join("reference.csv");
    let status = Command::new(exe)
        .args(["reference", "--scenario", "lax", "--epsilon", "1e-3", "--cells", "60", "--tfinal", "0.01"])
        .arg("--out")
        .arg(&reference)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(read_profile(&reference).unwrap().len(), 60);
    let status = Command::new(exe).args(["run", "--solver", "pic"]).output().unwrap().status;
    assert!(!status.success());
}

#[test]
fn shipped_sweeps_parse() {
    let accuracy = parse_sweep(include_str!("../../../sweeps/accuracy.sweep")).unwrap();
    assert_eq!(accuracy.len(), 60);
    for text in [include_str!("../../../sweeps/shock.sweep"), include_str!("../../../sweeps/lax.sweep")] {
        let runs = parse_sweep(text).unwrap();
        assert_eq!(runs.len(), 12);
        assert!(runs.iter().any(|r| r.spec.epsilon == 5e-2));
    }
}
