//! The `hybridqkd` binary: exit codes, output schemas and command examples.

use std::path::Path;
use std::process::{Command, Output};

use hybridqkd::optimize::NO_LASER;
use hybridqkd::{optimize_laser_only, optimize_mu_laser};
use hybridqkd_cli::commands::{self, MONTECARLO_COLUMNS, OPTIMIZE_COLUMNS, SCAN_COLUMNS};
use hybridqkd_cli::load_config;

const TINY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tiny.profile");
const TINY_SCAN: &str = include_str!("data/scan_tiny.csv");

fn hybridqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridqkd"))
        .args(args)
        .env_remove("HYBRIDQKD_PROFILE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Rows of a CSV as `(header, rows)`.
fn parse(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let (header, rows) = parse(csv);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
}

#[test]
fn scan_matches_golden_file() {
    let csv = stdout(&hybridqkd(&["scan", "--config", TINY]));
    let (header, rows) = parse(&csv);
    let (golden_header, golden_rows) = parse(TINY_SCAN);
    assert_eq!(header, golden_header);
    assert_eq!(header, SCAN_COLUMNS);
    assert_eq!(rows.len(), golden_rows.len());
    for (row, golden) in rows.iter().zip(&golden_rows) {
        for ((cell, expected), name) in row.iter().zip(golden).zip(&header) {
            match (cell.parse::<f64>(), expected.parse::<f64>()) {
                (Ok(a), Ok(b)) => assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{name}: {a} vs {b}"),
                _ => assert_eq!(cell, expected, "{name}"),
            }
        }
    }
}

#[test]
fn schemas_are_fixed() {
    let header = |args: &[&str]| stdout(&hybridqkd(args)).lines().next().unwrap().to_string();
    assert_eq!(header(&["optimize", "--config", TINY]), OPTIMIZE_COLUMNS.join(","));
    assert_eq!(
        header(&["montecarlo", "--config", TINY, "--run.n_pulses=1000"]),
        MONTECARLO_COLUMNS.join(",")
    );
    assert_eq!(
        header(&["threshold", "--config", TINY, "--channel.db=0", "--source.brightness_grid=0"]),
        "brightness,db,km,mu_laser_opt,ratio_opt,skr_opt"
    );
}

#[test]
fn exit_codes_by_error_class() {
    assert_eq!(hybridqkd(&["scan", "--channel.db=0"]).status.code(), Some(0));

    let empty = hybridqkd(&["scan", "--laser.mu="]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(stderr(&empty).contains("`mu` list is empty"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.profile");
    std::fs::write(&bad, std::fs::read_to_string(TINY).unwrap().replace("g2 = 0.012", "g2 = 0.012\nspin = 1")).unwrap();
    let out = hybridqkd(&["scan", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.profile:4: unknown key `spin`"), "{}", stderr(&out));

    assert_eq!(hybridqkd(&["scan", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(hybridqkd(&["scan", "--profile", "missing"]).status.code(), Some(2));

    // nothing can ever click: no source, no laser, no dark counts
    let dead = hybridqkd(&["scan", "--source.brightness=0", "--detector.y0=0"]);
    assert_eq!(dead.status.code(), Some(3), "{}", stderr(&dead));
    assert!(stderr(&dead).contains("total gain is zero"));
}

#[test]
fn scan_examples() {
    let csv = stdout(&hybridqkd(&["scan", "--profile", "table1"]));
    let (db, km, skr) = (column(&csv, "db"), column(&csv, "km"), column(&csv, "skr_per_pulse"));
    let i21 = db.iter().position(|&d| d == 21.0).unwrap();
    assert!((km[i21] - 100.0).abs() < 1e-12);
    let last = db.iter().zip(&skr).filter(|(_, s)| **s > 0.0).map(|(d, _)| *d).fold(f64::NAN, f64::max);
    assert!((28.0..=32.0).contains(&last), "last positive at {last} dB");
}

#[test]
fn optimize_single_point_matches_engine() {
    let csv = stdout(&hybridqkd(&["optimize", "--channel.db=7.5"]));
    assert_eq!(csv.lines().count(), 2);
    let cfg = load_config(None, "table1", &[]).unwrap();
    let direct = optimize_mu_laser(&cfg.source, 7.5, &cfg.channel, &cfg.detector).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
    assert!(close(column(&csv, "mu_laser_opt")[0], direct.mu_laser_opt));
    assert!(close(column(&csv, "skr_opt")[0], direct.skr_opt));
    assert!(close(column(&csv, "ratio_opt")[0], direct.mix_ratio));
}

#[test]
fn optimize_crossover_flag_switches_near_12_db() {
    let csv = stdout(&hybridqkd(&["optimize", "--channel.db=0:30:0.5"]));
    let (header, rows) = parse(&csv);
    let flag = header.iter().position(|h| h == "crossover").unwrap();
    let db = column(&csv, "db");
    let first = rows.iter().position(|r| r[flag] == "true").unwrap();
    assert!((10.0..=14.0).contains(&db[first]), "switches at {} dB", db[first]);
    assert!(rows[first..].iter().all(|r| r[flag] == "true"));
}

#[test]
fn bright_source_never_needs_laser() {
    let csv = stdout(&hybridqkd(&["optimize", "--source.brightness=0.5"]));
    let mu = column(&csv, "mu_laser_opt");
    assert!(mu.iter().all(|&m| m < NO_LASER), "{mu:?}");
}

#[test]
fn zero_brightness_grid_rows_are_the_laser_optimum() {
    let cfg = load_config(None, "table1", &["channel.db=0:40:5".into(), "source.brightness_grid=0,0.2".into()]).unwrap();
    let out = commands::threshold(&cfg).unwrap();
    let (b, mu, db) = (out.grid.numbers("brightness"), out.grid.numbers("mu_laser_opt"), out.grid.numbers("db"));
    let mut checked = 0;
    for i in (0..b.len()).filter(|&i| b[i] == 0.0) {
        let laser = optimize_laser_only(db[i], &cfg.channel, &cfg.detector).unwrap();
        assert!((mu[i] - laser.mu_laser_opt).abs() < 1e-12);
        checked += 1;
    }
    assert_eq!(checked, 9);
    let text = out.to_text();
    assert!(text.contains("unconditional advantage brightness: 0.46"), "{text}");
}

#[test]
fn threshold_report_goes_to_stdout_when_csv_goes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = hybridqkd(&[
        "threshold",
        "--profile",
        "ideal",
        "--channel.db=0:10:5",
        "--source.brightness_grid=0.5",
        "-o",
        path.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(text.contains("unconditional advantage brightness: 0.5000"), "{text}");
    assert!(text.contains("laser beat brightness: 0.3679"), "{text}");
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 4);
}

#[test]
fn montecarlo_is_reproducible() {
    let args = ["montecarlo", "--config", TINY, "--run.n_pulses=300000", "--run.seed=11"];
    let a = hybridqkd(&args);
    let b = hybridqkd(&args);
    assert_eq!(stdout(&a), stdout(&b));
    let c = hybridqkd(&["montecarlo", "--config", TINY, "--run.n_pulses=300000", "--run.seed=12"]);
    assert_ne!(stdout(&a), stdout(&c));

    let zero = hybridqkd(&["montecarlo", "--config", TINY, "--run.n_pulses=0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn montecarlo_passes_at_10_db() {
    let csv = stdout(&hybridqkd(&["montecarlo", "--channel.db=10", "--run.n_pulses=1e7"]));
    assert!(csv.lines().nth(1).unwrap().ends_with(",true"), "{csv}");
}

fn last_positive(csv: &str, group: &str, value: f64, y: &str) -> f64 {
    let (g, db, skr) = (column(csv, group), column(csv, "db"), column(csv, y));
    (0..db.len())
        .filter(|&i| g[i] == value && skr[i] > 0.0)
        .map(|i| db[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn figures_are_written_with_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("figs");
    let listing = stdout(&hybridqkd(&["figures", "--channel.db=0:40:0.25", "-o", out_dir.to_str().unwrap()]));
    assert_eq!(listing.lines().count(), 7);
    let read = |name: &str| std::fs::read_to_string(out_dir.join(name)).unwrap();
    for line in listing.lines() {
        let gp = Path::new(line).with_extension("gp");
        assert!(std::fs::read_to_string(gp).unwrap().contains("plot "));
    }

    // mixture figure at zero laser equals the plain scan
    let fig2 = read("fig2_mixtures.csv");
    let scan = stdout(&hybridqkd(&["scan", "--channel.db=0:40:0.25"]));
    let (_, fig_rows) = parse(&fig2);
    let zero: Vec<_> = fig_rows.into_iter().filter(|r| r[2] == "0").collect();
    assert_eq!(zero, parse(&scan).1);

    // a few dB of reach from 2 % down to 0.01 % misalignment
    let errors = read("error_rates.csv");
    let gain = last_positive(&errors, "e_d", 0.0001, "skr_opt") - last_positive(&errors, "e_d", 0.02, "skr_opt");
    assert!(gain > 0.0 && gain <= 5.0, "gain {gain} dB");

    // the brightest source does not reach furthest
    let sweep = read("brightness_sweep.csv");
    let full = last_positive(&sweep, "brightness", 1.0, "skr_per_pulse");
    assert!(commands::BRIGHTNESS_SWEEP[..8]
        .iter()
        .any(|&b| last_positive(&sweep, "brightness", b, "skr_per_pulse") > full));
}

#[test]
fn profile_directory_takes_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(TINY).unwrap().replace("db = 0, 10, 30", "db = 21");
    std::fs::write(dir.path().join("table1.profile"), text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hybridqkd"))
        .args(["scan"])
        .env("HYBRIDQKD_PROFILE_DIR", dir.path())
        .output()
        .unwrap();
    let csv = stdout(&out);
    assert_eq!(column(&csv, "km"), vec![100.0, 100.0]);
}

#[test]
fn run_uses_the_configured_command() {
    let out = hybridqkd(&["run", "--config", TINY, "--run.command=optimize"]);
    assert!(stdout(&out).starts_with("db,km,mu_laser_opt"));
    assert_eq!(hybridqkd(&["run", "--config", TINY]).status.code(), Some(2));
}

#[test]
fn gnuplot_helper_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    std::fs::write(&csv, TINY_SCAN).unwrap();
    let script = stdout(&hybridqkd(&[
        "gnuplot",
        csv.to_str().unwrap(),
        "--x",
        "db",
        "--y",
        "skr_per_pulse",
        "--group",
        "mu_laser",
        "--logy",
    ]));
    assert!(script.contains("for [v in \"0 0.1\"]"));
    assert_eq!(
        hybridqkd(&["gnuplot", csv.to_str().unwrap(), "--x", "db", "--y", "q", "--group", "nope"]).status.code(),
        Some(2)
    );

    assert_eq!(stdout(&hybridqkd(&["profiles"])), "table1\nideal\n");
    assert!(stdout(&hybridqkd(&["profiles", "ideal"])).contains("g2 = 0"));
}
