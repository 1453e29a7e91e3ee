//! End-to-end tests of the `btvc` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use btvc::config::RunConfig;
use btvc::factors::{fit_ols_ar1, pca, YieldPanel};

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn btvc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btvc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

/// Writes a config using the demo panel with a small sampler budget.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let panel = demo_dir().join("panel.csv").canonicalize().unwrap();
    let text = format!(
        "seed = 5\n\n[data]\npanel = {:?}\n\n[sampler]\niterations = 600\nburn_in = 100\nthinning = 5\nhorizon = 24\n\n[forecast]\nhorizons = [1, 6, 24]\n\n{extra}",
        panel.display().to_string()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn show_config_prints_defaults_that_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    let out = btvc(tmp.path(), &["show-config"]);
    ok(&out);
    let cfg = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn fit_writes_one_row_per_retained_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    ok(&btvc(tmp.path(), &["--config", cfg.to_str().unwrap(), "--out", "o", "fit"]));
    let rows = data_rows(&tmp.path().join("o/draws.csv"));
    assert_eq!(rows.len(), (600 - 100) / 5);
    assert!(rows.iter().all(|r| r.len() == 4 + 24));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/manifest_fit.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["outputs"]["draws.csv"].is_string());
    assert!(manifest["data_hash"].is_string());
}

#[test]
fn ragged_panel_row_exits_2_and_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = fs::read_to_string(demo_dir().join("panel.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let short: Vec<&str> = lines[3].split(',').take(5).collect();
    lines[3] = short.join(",");
    text = lines.join("\n") + "\n";
    fs::write(tmp.path().join("bad.csv"), text).unwrap();
    fs::write(tmp.path().join("run.toml"), "[data]\npanel = \"bad.csv\"\n").unwrap();
    let out = btvc(tmp.path(), &["--config", "run.toml", "--out", "o", "pca"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "data");
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("line 4"), "{err}");
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.toml"), "[sampler]\niterations = 10\nwarmup = 3\n").unwrap();
    let out = btvc(tmp.path(), &["--config", "run.toml", "show-config"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");
}

#[test]
fn unknown_model_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = btvc(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "backtest", "--model", "gauss2"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn forecast_beyond_draws_tail_asks_for_refit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    ok(&btvc(tmp.path(), &["--config", cfg, "--out", "o", "fit"]));
    let long = tmp.path().join("long.toml");
    let text = fs::read_to_string(cfg).unwrap().replace("horizons = [1, 6, 24]", "horizons = [1, 48]");
    fs::write(&long, text).unwrap();
    let out = btvc(tmp.path(), &["--config", long.to_str().unwrap(), "--out", "o", "forecast"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "parameter");
    assert!(err["message"].as_str().unwrap().contains("refit"), "{err}");
}

#[test]
fn degenerate_draws_give_the_deterministic_one_step_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let draws = tmp.path().join("draws.csv");
    let (beta, alpha) = (0.9, 0.25);
    fs::write(
        &draws,
        format!("beta,sigma_sq,rho,tau_sq,alpha_t+1\n{beta},0,0.5,0,{alpha}\n{beta},0,0.5,0,{alpha}\n"),
    )
    .unwrap();
    let out = btvc(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "o",
            "forecast",
            "--draws",
            draws.to_str().unwrap(),
        ],
    );
    // Horizons up to 24 exceed the one-step tail.
    assert_eq!(out.status.code(), Some(2));

    let one = tmp.path().join("one.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("horizons = [1, 6, 24]", "horizons = [1]");
    fs::write(&one, text).unwrap();
    ok(&btvc(
        tmp.path(),
        &["--config", one.to_str().unwrap(), "--out", "o", "forecast", "--draws", draws.to_str().unwrap()],
    ));

    let panel = YieldPanel::from_path(&demo_dir().join("panel.csv")).unwrap();
    let d = pca(&panel, 2).unwrap();
    let level = d.factor(0);
    let slope_series = d.factor(1);
    let slope = fit_ols_ar1(&slope_series, true).unwrap();
    let s_t = *slope_series.last().unwrap();
    let x_t = *level.last().unwrap();
    let curve = d.reconstruct_curve(alpha + beta * x_t, slope.forecast_mean(s_t, 1)).unwrap();

    let rows = data_rows(&tmp.path().join("o/curve_forecast.csv"));
    assert_eq!(rows.len(), 1);
    for (k, m) in [1.0, 3.0, 5.0, 10.0].iter().enumerate() {
        let got: f64 = rows[0][k + 1].parse().unwrap();
        let want = curve[panel.maturity_index(*m).unwrap()];
        assert!((got - want).abs() < 1e-6, "maturity {m}: {got} vs {want}");
    }
    let fan = data_rows(&tmp.path().join("o/fan_chart.csv"));
    let median: f64 = fan[0][5].parse().unwrap();
    assert!((median - (alpha + beta * x_t)).abs() < 1e-6);
}

#[test]
fn demo_forecast_quantiles_are_ordered_and_realistic_at_forty_years() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_dir().join("btvc.toml").canonicalize().unwrap();
    let cfg = cfg.to_str().unwrap();
    let out_dir = tmp.path().join("o");
    let out_dir = out_dir.to_str().unwrap();
    ok(&btvc(tmp.path(), &["--config", cfg, "--out", out_dir, "fit"]));
    ok(&btvc(tmp.path(), &["--config", cfg, "--out", out_dir, "forecast"]));

    let fan = data_rows(&tmp.path().join("o/fan_chart.csv"));
    assert_eq!(fan.len(), 480);
    for row in &fan {
        let q: Vec<f64> = row[3..].iter().map(|v| v.parse().unwrap()).collect();
        assert!(q.windows(2).all(|w| w[0] <= w[1]), "row {row:?}");
    }

    let dist = data_rows(&tmp.path().join("o/curve_distribution.csv"));
    let long: Vec<&Vec<String>> = dist.iter().filter(|r| r[0] == "480").collect();
    assert_eq!(long.len(), 4);
    for row in dist.iter() {
        let q: Vec<f64> = row[4..].iter().map(|v| v.parse().unwrap()).collect();
        assert!(q.windows(2).all(|w| w[0] <= w[1]), "row {row:?}");
    }
    for row in long {
        let q: Vec<f64> = row[4..].iter().map(|v| v.parse().unwrap()).collect();
        let (q01, q50, q99) = (q[0], q[3], q[6]);
        assert!(q01 > -5.0 && q99 < 15.0 && q50 > -5.0 && q50 < 15.0, "maturity {}: {q:?}", row[1]);
    }
}

#[test]
fn repeated_runs_produce_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(
        tmp.path(),
        "[backtest]\ninitial_window = 200\niterations = 300\nburn_in = 100\n",
    );
    let cfg = cfg.to_str().unwrap();
    for dir in ["a", "b"] {
        for cmd in ["fit", "forecast", "backtest"] {
            ok(&btvc(tmp.path(), &["--config", cfg, "--out", dir, cmd]));
        }
    }
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"backtest_report.txt".to_string()));
    for name in names {
        let a = fs::read(tmp.path().join("a").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn simulate_series_is_reproducible_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        ok(&btvc(tmp.path(), &["--seed", seed, "--out", dir, "simulate"]));
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("series.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(data_rows(&tmp.path().join("a/series.csv")).len(), 240);
}
