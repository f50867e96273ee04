use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cloudprice_cli::InstanceConfig;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudprice")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cloudprice-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// `quantity,value` output as pairs; every value must be a finite real.
fn quantities(o: &Output) -> Vec<(String, f64)> {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["quantity", "value"]);
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let v: f64 = r[1].parse().unwrap();
            assert!(v.is_finite(), "{} = {v}", &r[0]);
            (r[0].to_string(), v)
        })
        .collect()
}

fn get(rows: &[(String, f64)], key: &str) -> f64 {
    rows.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no row {key}")).1
}

fn cfg_arg(name: &str) -> String {
    config(name).to_str().unwrap().to_string()
}

#[test]
fn evaluate_warmup() {
    let rows = quantities(&run(&["evaluate", &cfg_arg("warmup.toml"), "--csv"]));
    // per-length prices (0, 3 - sqrt(15/2)) are welfare optimal
    assert!((get(&rows, "welfare") - (6.0 - 30f64.sqrt())).abs() < 1e-9);
    assert_eq!(get(&rows, "accept[0]"), 1.0);
}

#[test]
fn optimize_flat_revenue() {
    let rows = quantities(&run(&["optimize", &cfg_arg("warmup.toml"), "--csv", "--lambda", "0", "--scheme", "flat"]));
    assert!((get(&rows, "objective") - (15.0 - 6.0 * 6f64.sqrt())).abs() < 1e-9);
    assert!((get(&rows, "price") - (3.0 - 6f64.sqrt())).abs() < 1e-6);
}

#[test]
fn optimize_multi_reports_single_ratio() {
    let rows = quantities(&run(&["optimize", &cfg_arg("warmup.toml"), "--csv"]));
    let ratio = get(&rows, "single_ratio");
    assert!((0.5..=1.0).contains(&ratio));
}

#[test]
fn bounds_thirds() {
    let rows = quantities(&run(&["bounds", &cfg_arg("thirds.toml"), "--csv"]));
    assert!((get(&rows, "h_corner_min") - 44.0 / 49.0).abs() < 1e-12);
    assert_eq!(get(&rows, "witness[1]"), 1.0);
}

#[test]
fn bounds_fleet_is_at_most_one() {
    let rows = quantities(&run(&["bounds", &cfg_arg("fleet.toml"), "--csv"]));
    let b = get(&rows, "fleet_bound");
    assert!(b > 0.0 && b <= 1.0);
}

#[test]
fn half_opt_simulation_passes() {
    let o = run(&["simulate", &cfg_arg("correlated.toml"), "--price", "half-opt", "--horizon", "20000", "--reps", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("half-opt price"));
}

#[test]
fn simulate_csv_is_reproducible_and_numeric() {
    let args = ["simulate", &cfg_arg("fleet.toml"), "--csv", "--horizon", "20000", "--reps", "3", "--seed", "5"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let mut rdr = csv::Reader::from_reader(a.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["row", "welfare", "revenue", "surplus", "occupancy"]);
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r.get(0).unwrap()).collect();
    assert_eq!(labels, ["0", "1", "2", "mean", "se", "closed_form"]);
    for r in &rows {
        for cell in r.iter().skip(1) {
            if cell.is_empty() {
                continue;
            }
            assert!(cell.parse::<f64>().unwrap().is_finite(), "{cell}");
        }
    }
    let c = run(&["simulate", &cfg_arg("fleet.toml"), "--csv", "--horizon", "20000", "--reps", "3", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn offline_trace_round_trip() {
    let trace = scratch("trace.csv");
    let t = trace.to_str().unwrap();
    let cfg = cfg_arg("correlated.toml");
    let wrote = quantities(&run(&["offline", &cfg, "--csv", "--horizon", "5000", "--trace-out", t]));
    let read = quantities(&run(&["offline", &cfg, "--csv", "--horizon", "5000", "--trace-in", t]));
    assert_eq!(get(&wrote, "dp_per_step"), get(&read, "dp_per_step"));
    assert_eq!(get(&wrote, "trace_jobs"), get(&read, "trace_jobs"));
    assert_eq!(get(&wrote, "opt"), 1.75);
    assert!(get(&wrote, "dp_over_opt") <= 1.02);
}

#[test]
fn dump_config_round_trips() {
    for name in ["warmup.toml", "thirds.toml", "fleet.toml", "correlated.toml", "full.toml"] {
        let path = config(name);
        let (cfg, inst) = InstanceConfig::load(&path).unwrap();
        let o = run(&["evaluate", path.to_str().unwrap(), "--dump-config"]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        let dumped = scratch(name);
        std::fs::write(&dumped, &o.stdout).unwrap();
        let (cfg2, inst2) = InstanceConfig::load(&dumped).unwrap();
        assert_eq!(cfg, cfg2, "{name}");
        assert_eq!(inst, inst2, "{name}");
    }
}

#[test]
fn dump_config_applies_overrides() {
    let o = run(&["simulate", &cfg_arg("warmup.toml"), "--dump-config", "--seed", "99", "--lambda", "0.25"]);
    let text = stdout(&o);
    let cfg = InstanceConfig::parse(&text, Path::new("dump")).unwrap();
    let inst = cfg.validate(&text, Path::new("dump")).unwrap();
    assert_eq!(inst.lambda, 0.25);
    assert_eq!(inst.sim.seed, 99);
}

#[test]
fn config_errors_exit_2_with_line_and_key() {
    let bad = scratch("bad.toml");
    std::fs::write(
        &bad,
        "[model]\nkind = \"single\"\nlengths = [1, 2]\nprobs = [0.7, 0.5]\n\n[distribution]\nkind = \"uniform\"\nlo = 0.0\nhi = 1.0\n",
    )
    .unwrap();
    let o = run(&["evaluate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":4:") && err.contains("model.probs"), "{err}");

    let o = run(&["evaluate", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["evaluate", &cfg_arg("warmup.toml"), "--lambda", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["optimize", &cfg_arg("correlated.toml"), "--scheme", "per-server"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn paper_suite_exit_codes() {
    let o = run(&["paper-suite", "--filter", "h", "--csv"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[0].starts_with("h/") && &r[6] == "1"));

    // rationals stay exact at zero tolerance, irrational closed forms cannot
    let o = run(&["paper-suite", "--filter", "rho", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["paper-suite", "--filter", "closed-form", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["paper-suite", "--filter", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
