use std::path::Path;
use std::process::{Command, Output};

use multiobs::erm::BASIS_IDS;
use multiobs::evaluation::METHOD_IDS;
use multiobs::losses::LOSS_IDS;
use multiobs::synthetic::SCENARIO_IDS;
use multiobs_cli::CSV_HEADER;

fn multiobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiobs"))
        .args(args)
        .env_remove("MULTIOBS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_args<'a>(out: &'a str, seed: &'a str) -> Vec<&'a str> {
    vec![
        "run",
        "--scenario",
        "variance-line",
        "--method",
        "sliding",
        "--n",
        "1000",
        "--trials",
        "10",
        "--seed",
        seed,
        "--out",
        out,
    ]
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn run_appends_one_row_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = multiobs(&run_args(csv.to_str().unwrap(), "7"));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = lines(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], CSV_HEADER);
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(fields.len(), 9);
    assert_eq!(&fields[..5], &["variance-line", "sliding", "1000", "10", "0"]);
    assert_eq!(fields[8], "7");
    let median: f64 = fields[5].parse().unwrap();
    let q25: f64 = fields[6].parse().unwrap();
    let q75: f64 = fields[7].parse().unwrap();
    assert!(q25 <= median && median <= q75 && median > 0.0);
}

#[test]
fn rerun_gives_byte_identical_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    for _ in 0..2 {
        assert_eq!(multiobs(&run_args(csv.to_str().unwrap(), "7")).status.code(), Some(0));
    }
    let rows = lines(&csv);
    assert_eq!(rows.len(), 3, "header written once");
    assert_eq!(rows[1], rows[2]);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let path = csv.to_str().unwrap();
    for workers in ["1", "3"] {
        let mut args = vec!["--workers", workers];
        args.extend(run_args(path, "11"));
        assert_eq!(multiobs(&args).status.code(), Some(0));
    }
    let rows = lines(&csv);
    assert_eq!(rows[1], rows[2]);
}

#[test]
fn seed_precedence_flag_env_default() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let base = [
        "run",
        "--scenario",
        "variance-line",
        "--method",
        "sliding",
        "--n",
        "200",
        "--trials",
        "3",
        "--out",
    ];
    let mut args: Vec<&str> = base.to_vec();
    args.push(csv.to_str().unwrap());

    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_multiobs"));
        cmd.args(&args).args(extra).env_remove("MULTIOBS_SEED");
        if let Some(v) = env {
            cmd.env("MULTIOBS_SEED", v);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
    };
    run(&[], None);
    run(&[], Some("42"));
    run(&["--seed", "5"], Some("42"));
    let seeds: Vec<String> = lines(&csv)[1..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().to_string())
        .collect();
    assert_eq!(seeds, ["0", "42", "5"]);
}

#[test]
fn unknown_scenario_exits_2_naming_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = multiobs(&[
        "run",
        "--scenario",
        "bogus",
        "--method",
        "sliding",
        "--n",
        "100",
        "--trials",
        "2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    for id in SCENARIO_IDS {
        assert!(msg.contains(id), "{msg}");
    }
    assert!(!csv.exists());
}

#[test]
fn unknown_method_and_missing_flag_exit_2() {
    let out = multiobs(&[
        "run",
        "--scenario",
        "ucb",
        "--method",
        "magic",
        "--n",
        "100",
        "--trials",
        "2",
        "--out",
        "x.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("2mom-quad"));
    let out = multiobs(&["run", "--scenario", "ucb"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn all_trials_failed_exits_1_with_empty_mse_fields() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    // Two draws give a single metasample, too few for an affine fit.
    let out = multiobs(&[
        "run",
        "--scenario",
        "variance-line",
        "--method",
        "sliding",
        "--n",
        "2",
        "--trials",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert_eq!(lines(&csv)[1], "variance-line,sliding,2,4,4,,,,0");
}

#[test]
fn help_lists_every_identifier() {
    for args in [&["--help"][..], &["run", "--help"][..]] {
        let text = stdout(&multiobs(args));
        for id in SCENARIO_IDS.iter().chain(METHOD_IDS).chain(LOSS_IDS).chain(BASIS_IDS) {
            assert!(text.contains(id), "{id} missing from {args:?} help");
        }
    }
}

#[test]
fn budget_naive_prints_integer() {
    let out = multiobs(&["budget", "naive", "--n", "4", "--m", "2", "--d", "1", "--delta", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "111\n");
}

#[test]
fn budget_theorem5_prints_epsilon() {
    let out = multiobs(&["budget", "theorem5", "--m", "2", "--K", "1", "--n", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut it = text.lines();
    assert!(it.next().unwrap().parse::<u64>().is_ok());
    assert_eq!(it.next(), Some("epsilon=0.005"));
}

#[test]
fn budget_every_kind_succeeds() {
    for kind in [
        "naive",
        "improved-uniform",
        "improved-nonuniform",
        "theorem4",
        "theorem5",
    ] {
        let out = multiobs(&["budget", kind, "--n", "10", "--m", "2"]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", stderr(&out));
        assert!(stdout(&out).lines().next().unwrap().parse::<u64>().is_ok());
    }
}

#[test]
fn budget_invalid_params_exit_2() {
    for delta in ["0", "-0.5", "1.5"] {
        let out = multiobs(&["budget", "naive", "--n", "4", "--delta", delta]);
        assert_eq!(out.status.code(), Some(2), "delta {delta}");
    }
    assert_eq!(
        multiobs(&["budget", "improved-uniform", "--epsilon", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(multiobs(&["budget", "theorem5", "--K", "0"]).status.code(), Some(2));
    assert_eq!(multiobs(&["budget", "nonsense"]).status.code(), Some(2));
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("sweep.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn sweep_writes_sorted_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("sweep.csv");
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{
                "scenario": "variance-line",
                "methods": ["sliding", "2mom-linear", "nearby", "improved"],
                "n_grid": [200, 400, 800],
                "trials": 5,
                "seed": 3,
                "out_path": {:?},
                "method_params": {{"nearby": {{"epsilon": 0.05}}}}
            }}"#,
            out_csv.to_str().unwrap()
        ),
    );
    let out = multiobs(&["sweep", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = lines(&out_csv);
    assert_eq!(rows[0], CSV_HEADER);
    assert_eq!(rows.len(), 13);
    let keys: Vec<(String, usize)> = rows[1..]
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys[0], ("2mom-linear".to_string(), 200));
}

#[test]
fn sweep_failed_cells_have_empty_mse() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("sweep.csv");
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{"scenario": "variance-line", "methods": ["sliding"], "n_grid": [2, 300],
                "trials": 2, "out_path": {:?}}}"#,
            out_csv.to_str().unwrap()
        ),
    );
    let out = multiobs(&["sweep", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = lines(&out_csv);
    assert_eq!(rows[1], "variance-line,sliding,2,2,2,,,,0");
    assert!(rows[2].starts_with("variance-line,sliding,300,2,0,"));
}

#[test]
fn sweep_parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "not json",
        r#"{"scenario": "ucb", "methods": [], "n_grid": [10], "trials": 1, "out_path": "x.csv"}"#,
        r#"{"scenario": "ucb", "methods": ["sliding"], "n_grid": [20, 10], "trials": 1, "out_path": "x.csv"}"#,
        r#"{"scenario": "ucb", "methods": ["sliding"], "n_grid": [10], "trials": 1, "out_path": "x.csv", "extra": 1}"#,
        r#"{"scenario": "ucb", "methods": ["sliding"], "n_grid": [10], "trials": 1, "out_path": "x.csv",
            "method_params": {"sliding": {"bogus": 1}}}"#,
        r#"{"scenario": "minvar", "methods": ["2mom-quad"], "n_grid": [10], "trials": 1, "out_path": "x.csv"}"#,
    ];
    for body in cases {
        let config = write_config(dir.path(), body);
        let out = multiobs(&["sweep", config.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    assert_eq!(multiobs(&["sweep", "/nonexistent/sweep.json"]).status.code(), Some(2));
}
