use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use b92sim::engine::SimConfig;

fn b92sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_b92sim")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("link.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn empty_config_echoes_defaults_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("c.csv");
    let o = b92sim(&["analytic", "--config", &cfg, "--curve", "qber_vs_clock", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert_eq!(text(&o.stdout).trim(), out.display().to_string());
    let echoed = text(&o.stderr);
    let toml = echoed.strip_prefix("# resolved configuration\n").unwrap();
    assert_eq!(SimConfig::from_toml_str(toml).unwrap(), SimConfig::default());
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("clock_ghz,qber_standard,qber_enhanced,improvement"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn override_is_echoed() {
    let o = b92sim(&["analytic", "--curve", "rate_vs_distance", "--points", "0,6.55,11", "--set", "clock_ghz=3.3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stderr).contains("clock_ghz = 3.3"));
    let csv = text(&o.stdout);
    assert_eq!(csv.lines().next(), Some("distance_km,r_sift,r_net"));
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(2).unwrap().starts_with("6.55,"));
}

#[test]
fn usage_errors_exit_one() {
    let bad_range = b92sim(&["analytic", "--curve", "qber_vs_clock", "--set", "clock_ghz=-1"]);
    assert_eq!(bad_range.status.code(), Some(1));
    assert!(text(&bad_range.stderr).contains("clock_ghz"));
    assert!(bad_range.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "clock_ghz = 1.0\nwavelength_nm = 850\n");
    let unknown = b92sim(&["simulate", "--config", &cfg]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(text(&unknown.stderr).contains("wavelength_nm"));

    let cfg = write_config(dir.path(), "mu = [");
    assert_eq!(b92sim(&["simulate", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(b92sim(&["simulate", "--config", "/nonexistent/link.toml"]).status.code(), Some(1));
    assert_eq!(b92sim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(b92sim(&["analytic", "--curve", "sideways"]).status.code(), Some(1));
    assert_eq!(b92sim(&["sweep", "--axis", "colour=1,2"]).status.code(), Some(1));
    assert_eq!(b92sim(&["analytic", "--curve", "qber_vs_clock", "--points", "2,1"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let o = b92sim(&["analytic", "--curve", "qber_vs_clock", "--out", "/nonexistent/dir/c.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn simulate_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = b92sim(&["simulate", "--set", "n_slots=2000000", "--set", "distance_km=0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("seed,clock_ghz,slots_simulated,"));
    assert!(csv.lines().nth(1).unwrap().contains(",completed,"));

    let kv = b92sim(&["simulate", "--set", "n_slots=100000", "--format", "kv"]);
    assert!(text(&kv.stdout).contains("slots_simulated = 100000\n"));
}

#[test]
fn failed_protocol_run_exits_two() {
    let o = b92sim(&["simulate", "--set", "n_slots=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stdout).contains("no_sifted_key"));
    assert!(text(&o.stderr).contains("no_sifted_key"));
}

#[test]
fn sweep_writes_header_and_one_row_per_point() {
    let o = b92sim(&["sweep", "--set", "n_slots=1000000", "--set", "distance_km=1", "--axis", "clock_ghz=1.0,2.0,3.3"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let csv = text(&o.stdout);
    assert_eq!(csv.lines().count(), 4);
    let clocks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(clocks, ["1", "2", "3.3"]);
}

#[test]
fn histogram_export_schema() {
    let o = b92sim(&["histogram", "--samples", "200000", "--rate", "1e5"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = text(&o.stdout);
    assert_eq!(csv.lines().next(), Some("bin_start_ps,count"));
    let total: u64 = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert!(total > 199_000);
}

#[test]
fn shipped_config_is_the_default() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let c = SimConfig::from_toml_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(c, SimConfig::default());
}
