use std::process::{Command, Output};

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_repeaterlab"));
    cmd.args(args).env_remove("REPEATERLAB_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn rates_table_has_total_time() {
    let o = run(&["rates"], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stderr.is_empty());
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("t_total"));
    assert!(text.contains("4.3795"));
}

#[test]
fn config_file_then_flags() {
    let dir = std::env::temp_dir().join(format!("repeaterlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"n": 6, "eta_d": 0.8}"#).unwrap();
    let path = path.to_str().unwrap();

    let from_file = run(&["rates", "--config", path, "--format", "csv"], &[]);
    let overridden = run(&["rates", "--config", path, "--eta-d", "0.9", "--format", "csv"], &[]);
    let defaults_n6 = run(&["rates", "--n", "6", "--format", "csv"], &[]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_ne!(stdout(&from_file), stdout(&overridden));
    assert_eq!(stdout(&overridden), stdout(&defaults_n6));

    std::fs::write(path, r#"{"n": 6, "eta_x": 0.8}"#).unwrap();
    let bad = run(&["rates", "--config", path], &[]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("eta_x"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn simulate_seed_from_environment() {
    let args = ["simulate", "--n", "3", "--trials", "500", "--format", "jsonl"];
    let a = run(&args, &[("REPEATERLAB_SEED", "7")]);
    let b = run(&[&args[..], &["--seed", "7"]].concat(), &[]);
    let c = run(&[&args[..], &["--seed", "8"]].concat(), &[("REPEATERLAB_SEED", "7")]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v: serde_json::Value = serde_json::from_str(stdout(&c).trim()).unwrap();
    assert_eq!(v["seed"], 8);
    assert_eq!(v["parallel_restart"], true);
    assert!(v["ratio"].as_f64().unwrap() > 0.99);
}

#[test]
fn simulate_guard_and_usage_codes() {
    assert_eq!(run(&["simulate", "--eta-d", "0"], &[]).status.code(), Some(3));
    assert_eq!(run(&["simulate", "--trials", "0"], &[]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--n", "40"], &[]).status.code(), Some(3));
    assert_eq!(run(&["simulate"], &[("REPEATERLAB_SEED", "x")]).status.code(), Some(2));
}

#[test]
fn sweep_csv_round_trips() {
    let o = run(&["sweep", "--param", "eta_d", "--from", "0.5", "--to", "0.9", "--steps", "5", "--format", "csv"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "t_total").unwrap();
    let totals: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(totals.len(), 5);
    assert!(totals.windows(2).all(|w| w[1] < w[0]));

    let p = repeaterlab::params::ProtocolParams { eta_d: 0.5, ..Default::default() };
    assert_eq!(totals[0], repeaterlab::rates::t_total(&p).unwrap().t_total);
}

#[test]
fn n_sweep_marks_argmin() {
    let o = run(&["sweep", "--param", "n", "--from", "1", "--to", "10", "--format", "jsonl"], &[]);
    let marked: Vec<f64> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["argmin"] == true)
        .map(|v| v["value"].as_f64().unwrap())
        .collect();
    assert_eq!(marked, vec![6.0]);
    assert_eq!(run(&["sweep", "--param", "bogus", "--from", "1", "--to", "2", "--steps", "2"], &[]).status.code(), Some(2));
}

#[test]
fn bsm_verify_codes() {
    let ok = run(&["bsm-verify"], &[]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(!stdout(&ok).contains("false"));
    assert_eq!(run(&["bsm-verify", "--phases", "1"], &[]).status.code(), Some(0));
    let strict = run(&["bsm-verify", "--tolerance", "1e-30"], &[]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn reproduce_paper_jsonl() {
    let o = run(&["reproduce-paper", "--format", "jsonl"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let pr = rows.iter().find(|r| r["not_computed"] == true).unwrap();
    assert_eq!(pr["paper"], 107.6);
    assert!(pr["computed"].is_null());
    assert_eq!(pr["note"], "reference value, not computed");
    assert!(rows.iter().filter(|r| r["not_computed"] == false).all(|r| r["pass"] == true));
}

#[test]
fn verbose_writes_stderr_only_when_asked() {
    let quiet = run(&["reproduce-paper"], &[]);
    assert!(quiet.stderr.is_empty());
    let loud = run(&["reproduce-paper", "--verbose"], &[]);
    assert!(!loud.stderr.is_empty());
    assert_eq!(quiet.stdout, loud.stdout);
}
