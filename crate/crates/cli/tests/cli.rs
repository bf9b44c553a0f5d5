use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cognitrade")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn config(name: &str) -> String {
    repo().join("configs").join(name).display().to_string()
}

/// Writes a config reading the bundled warehouse; `body` supplies the other sections.
fn temp_config(dir: &Path, body: &str) -> String {
    let text = format!(
        "out = \"out\"\n{body}\n[data]\nwarehouse = \"{}\"\nsymbol = \"TREND\"\ninterval = 3600\n",
        repo().join("warehouse").display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn ingest_reproduces_the_bundled_warehouse() {
    let dir = tempfile::tempdir().unwrap();
    let wh = dir.path().join("wh");
    let input = repo().join("fixtures/trending.csv");
    let args = ["ingest", "--input", input.to_str().unwrap(), "--symbol", "TREND", "--interval", "3600"];
    for _ in 0..2 {
        ok(&[&args[..], &["--warehouse", wh.to_str().unwrap()]].concat());
        for file in ["TREND/3600.csv", "TREND/3600.meta.json"] {
            assert_eq!(
                fs::read(wh.join(file)).unwrap(),
                fs::read(repo().join("warehouse").join(file)).unwrap(),
                "{file}"
            );
        }
    }
}

#[test]
fn malformed_row_names_the_line_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "timestamp,open,high,low,close,volume\n0,1,1,1,1,1\n60000,1,1,1,1,1\n120000,1,oops,1,1,1\n")
        .unwrap();
    let wh = dir.path().join("wh");
    let out = cli(&[
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--symbol",
        "BAD",
        "--interval",
        "60",
        "--warehouse",
        wh.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    assert!(!wh.exists());
}

#[test]
fn hold_strategy_makes_no_trades() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let summary = ok(&["--config", &config("hold.toml"), "--out", out, "backtest"]);
    assert!(summary.contains("trades           0"), "{summary}");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["trades"].as_array().unwrap().len(), 0);
    assert_eq!(report["metrics"]["trade_count"], 0);
    ok(&["--config", &config("hold.toml"), "--out", out, "report"]);
    assert_eq!(fs::read_to_string(dir.path().join("markers.csv")).unwrap().lines().count(), 1);
}

#[test]
fn bundled_ema_config_matches_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for paper in [false, true] {
        let out = dir.path().join(if paper { "paper" } else { "engine" });
        let mut args =
            vec!["--config".to_string(), config("ema_cross.toml"), "--out".into(), out.display().to_string()];
        args.push("backtest".into());
        if paper {
            args.push("--paper".into());
        }
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        for file in ["report.json", "equity.csv", "signals.csv"] {
            let golden = fs::read(repo().join("golden/ema_cross").join(file)).unwrap();
            assert!(fs::read(out.join(file)).unwrap() == golden, "{file} differs from golden (paper = {paper})");
        }
    }
}

#[test]
fn markers_project_the_trades() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let golden = repo().join("golden/ema_cross/report.json");
    ok(&["--config", &config("ema_cross.toml"), "--out", out, "report", "--report", golden.to_str().unwrap()]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&golden).unwrap()).unwrap();
    let trades = report["trades"].as_array().unwrap();
    assert!(!trades.is_empty());
    let rows = csv_rows(&dir.path().join("markers.csv"));
    assert_eq!(rows.len(), 1 + 2 * trades.len());
    for (t, pair) in trades.iter().zip(rows[1..].chunks(2)) {
        for (fill, row, marker) in [(&t["entry"], &pair[0], "buy"), (&t["exit"], &pair[1], "sell")] {
            assert_eq!(row[0], fill["timestamp"].to_string());
            assert_eq!(row[1], fill["bar"].to_string());
            assert_eq!(row[4], marker);
            assert_eq!(row[6].parse::<f64>().unwrap(), fill["price"].as_f64().unwrap());
        }
    }
    let candles = csv_rows(&dir.path().join("candles.csv"));
    assert_eq!(candles.len(), 1501);
}

#[test]
fn overlay_columns_follow_the_configured_indicators() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(
        dir.path(),
        "[strategy]\nkind = \"ema_cross\"\np_short = 9\np_long = 21\n\n[indicators]\nspecs = [\"ema:period=9\", \"rsi:period=14\", \"atr:period=14\"]\n",
    );
    ok(&["--config", &cfg, "backtest"]);
    ok(&["--config", &cfg, "report"]);
    let rows = csv_rows(&dir.path().join("out/overlays.csv"));
    assert_eq!(rows[0], ["timestamp", "ema_9", "rsi_14", "atr_14"]);
    assert!(rows.iter().all(|r| r.len() == 4));
    assert_eq!(rows[1][1], "", "undefined cells are empty");
}

#[test]
fn indicator_command_aligns_with_candles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(dir.path(), "");
    ok(&["--config", &cfg, "indicator", "--spec", "sma:period=5", "--spec", "bollinger:period=10,k=2"]);
    let rows = csv_rows(&dir.path().join("out/indicators.csv"));
    assert_eq!(rows.len(), 1501);
    assert_eq!(rows[0].len(), 5);
    assert_eq!(rows[4][1], "");
    assert_ne!(rows[5][1], "");
    let bad = cli(&["--config", &cfg, "indicator", "--spec", "nope"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn singleton_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(
        dir.path(),
        "[strategy]\nkind = \"ema_cross\"\np_short = 5\np_long = 10\n\n[optimize]\nmode = \"tune\"\n[optimize.tune]\nmethod = \"grid\"\naxes = [{ name = \"p_short\", values = [7] }, { name = \"p_long\", values = [40] }]\n",
    );
    ok(&["--config", &cfg, "optimize"]);
    let rows = csv_rows(&dir.path().join("out/leaderboard.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1..3], ["7", "40"]);
    let best: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/best_params.json")).unwrap()).unwrap();
    assert_eq!(best["strategy"]["p_short"], 7);
}

#[test]
fn four_ema_pairs_pick_twenty_fifty() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--config", &config("tune_ema.toml"), "--out", dir.path().to_str().unwrap(), "optimize"]);
    let rows = csv_rows(&dir.path().join("leaderboard.csv"));
    assert_eq!(rows[0][1..3], ["p_long", "p_short"]);
    assert_eq!(rows[1][1..3], ["50", "20"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn zero_generations_record_the_initial_population() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(
        dir.path(),
        "[optimize]\nmode = \"evolve\"\n[optimize.evolve]\ninputs = [\"rsi:period=14\"]\n[optimize.evolve.neat]\npopulation_size = 10\nmax_generations = 0\n",
    );
    ok(&["--config", &cfg, "optimize"]);
    let rows = csv_rows(&dir.path().join("out/fitness_history.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0");
    let genome = fs::read_to_string(dir.path().join("out/best.genome")).unwrap();
    assert!(genome.starts_with("cognitrade-genome"));
    // the evolved genome drives a backtest through the network strategy
    let net = temp_config(
        &dir.path().join("out"),
        &format!(
            "[strategy]\nkind = \"network\"\ngenome_file = \"{}\"\n",
            dir.path().join("out/best.genome").display()
        ),
    );
    ok(&["--config", &net, "backtest"]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(
        dir.path(),
        "[optimize]\nmode = \"evolve\"\n[optimize.evolve]\ninputs = [\"momentum:period=4\"]\n[optimize.evolve.neat]\npopulation_size = 12\nmax_generations = 2\n",
    );
    let run = |seed: &str, out: &str| {
        ok(&["--config", &cfg, "--seed", seed, "--out", out, "optimize"]);
        fs::read(Path::new(out).join("best.genome")).unwrap()
    };
    let base = dir.path().display().to_string();
    let a = run("1", &format!("{base}/a"));
    let b = run("1", &format!("{base}/b"));
    let c = run("2", &format!("{base}/c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn exit_codes_separate_validation_from_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cli(&["--config", &config("ema_cross.toml"), "--out", dir.path().to_str().unwrap(), "report"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no backtest report"));

    let bad = temp_config(dir.path(), "[strategy]\nkind = \"ema_cross\"\np_short = 30\np_long = 10\n");
    assert_eq!(cli(&["--config", &bad, "backtest"]).status.code(), Some(1));
    let unknown = temp_config(dir.path(), "[strategy]\nkind = \"hold\"\ncolour = 3\n");
    assert_eq!(cli(&["--config", &unknown, "backtest"]).status.code(), Some(1));
    assert_eq!(cli(&["backtest"]).status.code(), Some(1));
    assert_eq!(cli(&["--config", &config("hold.toml"), "optimize"]).status.code(), Some(1));

    // output directory blocked by a regular file
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let runtime = cli(&["--config", &config("hold.toml"), "--out", out.to_str().unwrap(), "backtest"]);
    assert_eq!(runtime.status.code(), Some(2));
}
