//! CLI-level checks, including acceptance criterion 8: two `forecast` runs
//! with identical configuration and seeds must produce byte-identical
//! reports.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn marketnet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_marketnet"))
}

/// Synthetic closing-price CSV: one market factor plus idiosyncratic noise.
fn write_prices(path: &Path, n_tickers: usize, n_days: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("timestamp");
    for i in 0..n_tickers {
        write!(csv, ",S{i:02}").unwrap();
    }
    csv.push('\n');
    let mut levels: Vec<f64> = (0..n_tickers).map(|_| rng.gen_range(40.0..160.0)).collect();
    for day in 0..n_days {
        // 12 months of 28 days keeps every generated date valid
        let (y, d) = (2015 + day / 336, day % 336);
        write!(csv, "{y}-{:02}-{:02}", d / 28 + 1, d % 28 + 1).unwrap();
        let market: f64 = rng.gen_range(-0.015..0.015);
        for level in levels.iter_mut() {
            *level *= (market + rng.gen_range(-0.01..0.01)).exp();
            write!(csv, ",{level:.6}").unwrap();
        }
        csv.push('\n');
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn criterion_8_forecast_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    write_prices(&prices, 14, 120, 99);

    let run = |out: &Path| {
        let status = marketnet()
            .args([
                "forecast",
                "--prices",
                prices.to_str().unwrap(),
                "--window-len",
                "10",
                "--rho",
                "0.7",
                "--nlag",
                "2",
                "--seed",
                "0",
                "--model-seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "forecast run failed");
    };

    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    run(&out_a);
    run(&out_b);

    let mut pass = true;
    for artifact in [
        "forecast_report.json",
        "selection.csv",
        "scores.csv",
        "histogram.csv",
        "features.csv",
    ] {
        let a = std::fs::read(out_a.join(artifact)).unwrap();
        let b = std::fs::read(out_b.join(artifact)).unwrap();
        if a != b {
            eprintln!("artifact {artifact} differs between runs");
            pass = false;
        }
    }
    println!(
        "acceptance 8 (byte-identical forecast reruns): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let output = marketnet().args(["forecast", "--rho", "0.7"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--prices"), "stderr was: {stderr}");
}

#[test]
fn network_emits_one_feature_row_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    write_prices(&prices, 8, 20, 5);
    let out = dir.path().join("out");

    let status = marketnet()
        .args([
            "network",
            "--prices",
            prices.to_str().unwrap(),
            "--window-len",
            "10",
            "--rho",
            "0.6",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let features = std::fs::read_to_string(out.join("features.csv")).unwrap();
    let data_rows: Vec<&str> = features
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("window"))
        .collect();
    assert_eq!(data_rows.len(), 2, "expected 2 windows:\n{features}");
    let header = features
        .lines()
        .find(|l| l.starts_with("window"))
        .unwrap();
    assert!(header.contains("mean_clustering") && header.contains("market_log_return"));
    assert!(out.join("run_config.json").exists());
    assert!(out.join("windows.csv").exists());
    assert!(out.join("dropped_tickers.txt").exists());
}

#[test]
fn export_graph_writes_node_link_json() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    write_prices(&prices, 8, 20, 6);
    let out = dir.path().join("out");

    let status = marketnet()
        .args([
            "export-graph",
            "--prices",
            prices.to_str().unwrap(),
            "--window-len",
            "10",
            "--rho",
            "0.3",
            "--window",
            "1",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let graph: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("graph_window_1.json")).unwrap())
            .unwrap();
    assert_eq!(graph["window"], 1);
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 8);
    let node = &graph["nodes"][0];
    for key in ["id", "sector", "degree", "eigenvector_centrality", "community_id"] {
        assert!(node.get(key).is_some(), "node missing {key}");
    }
    for edge in graph["edges"].as_array().unwrap() {
        assert!(edge.get("source").is_some() && edge.get("weight").is_some());
    }
}

#[test]
fn granger_consumes_network_features() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    write_prices(&prices, 8, 400, 7);
    let out = dir.path().join("out");

    let status = marketnet()
        .args([
            "network",
            "--prices",
            prices.to_str().unwrap(),
            "--window-len",
            "8",
            "--rho",
            "0.5",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let status = marketnet()
        .args([
            "granger",
            "--features",
            out.join("features.csv").to_str().unwrap(),
            "--max-lag",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("granger.json")).unwrap()).unwrap();
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 9);
    for entry in entries {
        assert!(entry.get("variable").is_some());
        assert!(entry.get("best_lag").is_some());
        assert!(entry.get("p").is_some());
    }
}
