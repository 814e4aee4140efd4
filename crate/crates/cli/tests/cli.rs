use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const LEVELS: [f64; 8] = [0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60];

fn acam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acam"))
        .args(args)
        .env_remove("ACAM_SEED")
        .env_remove("ACAM_CONFIG")
        .env_remove("ACAM_OUT_DIR")
        .env_remove("ACAM_SIGMA_CMP")
        .output()
        .expect("run acam")
}

fn ok(args: &[&str]) -> Output {
    let out = acam(args);
    assert!(
        out.status.success(),
        "acam {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_matrix(path: &Path, rows: &[Vec<f64>]) {
    let text: String = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| format!("{v:.2}"))
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    fs::write(path, text).unwrap();
}

/// Key matrix whose row `i`, column `j` holds level `(i + j) % 8`.
fn keys(n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..m).map(|j| LEVELS[(i + j) % 8]).collect())
        .collect()
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap()
}

fn result_f64(dir: &Path, key: &str) -> f64 {
    manifest(dir)["results"][key]
        .as_float()
        .unwrap_or_else(|| panic!("results.{key}"))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn identical_queries_match_every_column() {
    let tmp = TempDir::new().unwrap();
    let k = keys(8, 6);
    write_matrix(&tmp.path().join("keys.csv"), &k);
    write_matrix(&tmp.path().join("queries.csv"), &k);
    let out = tmp.path().join("out");
    ok(&[
        "search",
        "--keys",
        s(&tmp.path().join("keys.csv")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--ideal",
        "--out-dir",
        s(&out),
    ]);
    let rows = csv_rows(&out.join("search.csv"));
    assert_eq!(rows.len(), 64);
    for r in &rows {
        let (q, row, count): (usize, usize, u32) = (
            r[0].parse().unwrap(),
            r[1].parse().unwrap(),
            r[2].parse().unwrap(),
        );
        if q == row {
            assert_eq!(count, 6);
            assert_eq!(r[4], "6");
        } else {
            // Rows i and q differ by a level shift in every column.
            assert_eq!(count, 0);
        }
    }
}

#[test]
fn empty_query_file_charges_nothing() {
    let tmp = TempDir::new().unwrap();
    write_matrix(&tmp.path().join("keys.csv"), &keys(4, 4));
    fs::write(tmp.path().join("queries.csv"), "").unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "search",
        "--keys",
        s(&tmp.path().join("keys.csv")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(csv_rows(&out.join("search.csv")).len(), 0);
    assert_eq!(result_f64(&out, "search_energy_j"), 0.0);
    assert_eq!(result_f64(&out, "search_latency_s"), 0.0);
    let ledger: toml::Table = fs::read_to_string(out.join("ledger.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(ledger["search"]["searches"].as_integer(), Some(0));
    assert_eq!(ledger["total"]["row_writes"].as_integer(), Some(4));
}

#[test]
fn one_search_on_full_macro_takes_six_ns() {
    let tmp = TempDir::new().unwrap();
    let k = keys(128, 128);
    write_matrix(&tmp.path().join("keys.csv"), &k);
    write_matrix(&tmp.path().join("queries.csv"), &k[..1]);
    let out = tmp.path().join("out");
    ok(&[
        "search",
        "--keys",
        s(&tmp.path().join("keys.csv")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--rows",
        "128",
        "--cols",
        "128",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(result_f64(&out, "search_latency_s"), 6e-9);
    assert_eq!(result_f64(&out, "total_latency_s"), 128.0 * 20e-9 + 6e-9);
}

#[test]
fn saved_state_round_trips() {
    let tmp = TempDir::new().unwrap();
    let k = keys(5, 7);
    write_matrix(&tmp.path().join("keys.csv"), &k);
    write_matrix(&tmp.path().join("queries.csv"), &k);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&[
        "search",
        "--keys",
        s(&tmp.path().join("keys.csv")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--save-state",
        "--out-dir",
        s(&a),
    ]);
    ok(&[
        "search",
        "--state",
        s(&a.join("state.json")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--out-dir",
        s(&b),
    ]);
    let counts = |d: &Path| {
        csv_rows(&d.join("search.csv"))
            .into_iter()
            .map(|r| r[2].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(counts(&a), counts(&b));
}

#[test]
fn retention_hold_flips_match() {
    let tmp = TempDir::new().unwrap();
    write_matrix(&tmp.path().join("keys.csv"), &[vec![0.45]]);
    write_matrix(&tmp.path().join("queries.csv"), &[vec![0.45]]);
    let count_after = |hold: &str| {
        let out = tmp.path().join(format!("hold{hold}"));
        ok(&[
            "search",
            "--keys",
            s(&tmp.path().join("keys.csv")),
            "--queries",
            s(&tmp.path().join("queries.csv")),
            "--ideal",
            "--hold",
            hold,
            "--out-dir",
            s(&out),
        ]);
        csv_rows(&out.join("search.csv"))[0][2].clone()
    };
    assert_eq!(count_after("999.99"), "1");
    // The row write itself takes 20 ns, so a hold of exactly 1000 s leaves
    // the cell 1000 s old at search time.
    assert_eq!(count_after("1000"), "0");
}

#[test]
fn malformed_inputs_exit_with_data_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("keys.csv"),
        "0.25,0.30\n0.35,0.40\n0.45,oops\n",
    )
    .unwrap();
    write_matrix(&tmp.path().join("queries.csv"), &[vec![0.25, 0.30]]);
    let out = acam(&[
        "search",
        "--keys",
        s(&tmp.path().join("keys.csv")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--out-dir",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    fs::write(tmp.path().join("ragged.csv"), "0.25,0.30\n0.35\n").unwrap();
    let out = acam(&[
        "search",
        "--keys",
        s(&tmp.path().join("ragged.csv")),
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--out-dir",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = acam(&[
        "search",
        "--keys",
        "/definitely/missing.csv",
        "--queries",
        s(&tmp.path().join("queries.csv")),
        "--out-dir",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(tmp.path().join("bad.toml"), "version = 1\nrowz = 3\n").unwrap();
    let out = acam(&[
        "energy",
        "--config",
        s(&tmp.path().join("bad.toml")),
        "--out-dir",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(acam(&["search", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(acam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        acam(&["montecarlo", "--trials", "many"]).status.code(),
        Some(2)
    );
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        acam(&["energy", "--levels", "1", "--out-dir", s(tmp.path())])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        acam(&["montecarlo", "--threads", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn training_failure_exits_with_four() {
    let tmp = TempDir::new().unwrap();
    let out = acam(&[
        "train",
        "--mode",
        "acam",
        "--epochs",
        "3",
        "--learning-rate",
        "1e6",
        "--n-train",
        "8",
        "--n-val",
        "2",
        "--seq-len",
        "6",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn energy_table_values() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("e");
    ok(&["energy", "--per-bit-input", "3.0e-15", "--out-dir", s(&out)]);
    let rows = csv_rows(&out.join("energy.csv"));
    let eight = rows.iter().find(|r| r[0] == "8").unwrap();
    assert_eq!(eight[1], "3");
    assert!((eight[3].parse::<f64>().unwrap() - 3.2875e-15).abs() < 1e-27);
    let summary: toml::Table = fs::read_to_string(out.join("energy.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let per_bit = summary["per_bit"]["energy_per_bit_j"].as_float().unwrap();
    assert!((per_bit - 1.0e-15).abs() < 1e-27);
    for key in [
        "total_energy_j",
        "total_latency_s",
        "write_energy_j",
        "search_energy_j",
    ] {
        assert_eq!(summary["workload"][key].as_float(), Some(0.0), "{key}");
    }
}

#[test]
fn montecarlo_without_variation_is_identity() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    ok(&[
        "montecarlo",
        "--sigma-cmp",
        "0",
        "--sigma-write",
        "0",
        "--trials",
        "20",
        "--current-trials",
        "10",
        "--out-dir",
        s(&out),
    ]);
    for r in csv_rows(&out.join("confusion.csv")) {
        let expected = if r[0] == r[2] { "20" } else { "0" };
        assert_eq!(r[4], expected, "{r:?}");
    }
    let currents = csv_rows(&out.join("currents.csv"));
    assert!(currents
        .iter()
        .all(|r| r[1] == "1.826e-6" && r[2] == "5e-13"));
}

#[test]
fn environment_and_config_overrides() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("cfg.toml"),
        "version = 1\nlevel_count = 4\nseed = 9\n",
    )
    .unwrap();
    let out = tmp.path().join("m");
    let status = Command::new(env!("CARGO_BIN_EXE_acam"))
        .args(["montecarlo", "--trials", "5", "--current-trials", "5"])
        .env("ACAM_CONFIG", tmp.path().join("cfg.toml"))
        .env("ACAM_OUT_DIR", &out)
        .env("ACAM_SIGMA_CMP", "0.002")
        .status()
        .unwrap();
    assert!(status.success());
    let m = manifest(&out);
    assert_eq!(m["config"]["level_count"].as_integer(), Some(4));
    assert_eq!(m["config"]["sigma_cmp"].as_float(), Some(0.002));
    assert_eq!(m["seeds"]["variation"].as_integer(), Some(9));
    assert_eq!(csv_rows(&out.join("confusion.csv")).len(), 16);

    // A flag beats the environment.
    let out2 = tmp.path().join("m2");
    let status = Command::new(env!("CARGO_BIN_EXE_acam"))
        .args([
            "montecarlo",
            "--trials",
            "5",
            "--current-trials",
            "5",
            "--sigma-cmp",
            "0.001",
            "--out-dir",
            s(&out2),
        ])
        .env("ACAM_SIGMA_CMP", "0.002")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        manifest(&out2)["config"]["sigma_cmp"].as_float(),
        Some(0.001)
    );
}

#[test]
fn manifest_records_provenance_and_seeds() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    ok(&[
        "montecarlo",
        "--seed",
        "42",
        "--trials",
        "3",
        "--current-trials",
        "3",
        "--threads",
        "1",
        "--out-dir",
        s(&out),
    ]);
    let m = manifest(&out);
    assert_eq!(m["command"].as_str(), Some("montecarlo"));
    assert_eq!(m["threads"].as_integer(), Some(1));
    assert_eq!(m["seeds"]["variation"].as_integer(), Some(42));
    let constants = m["constants"].as_array().unwrap();
    let i_match = constants
        .iter()
        .find(|c| c["name"].as_str() == Some("i_match"))
        .unwrap();
    assert_eq!(i_match["value"].as_float(), Some(1.826e-6));
    assert!(i_match["source"].as_str().is_some());
    let outputs: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        outputs,
        [
            "confusion.csv",
            "currents.csv",
            "summary.toml",
            "manifest.toml"
        ]
    );
}

#[test]
fn zero_learning_rate_gives_flat_curve_and_eval_reproduces_train() {
    let tmp = TempDir::new().unwrap();
    let flat = tmp.path().join("flat");
    let small = ["--n-train", "8", "--n-val", "4", "--seq-len", "8"];
    let mut args = vec![
        "train",
        "--mode",
        "acam",
        "--epochs",
        "3",
        "--learning-rate",
        "0",
        "--out-dir",
        s(&flat),
    ];
    args.extend(small);
    ok(&args);
    let curve = csv_rows(&flat.join("curve_acam.csv"));
    assert_eq!(curve.len(), 4);
    assert!(curve
        .iter()
        .all(|r| r[1] == curve[0][1] && r[2] == curve[0][2]));

    let trained = tmp.path().join("trained");
    let mut args = vec!["train", "--epochs", "2", "--out-dir", s(&trained)];
    args.extend(small);
    ok(&args);
    let mae = csv_rows(&trained.join("mae.csv"));
    let arms: Vec<(&str, &str)> = mae.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(
        arms,
        [
            ("constant_mean", "none"),
            ("acam", "soft"),
            ("acam", "hard"),
            ("acam", "hard_quantized"),
            ("sdp", "soft")
        ]
    );
    let hw: toml::Table = fs::read_to_string(trained.join("hardware.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(hw["acam_hard"]["total_energy_j"].as_float().unwrap() > 0.0);
    assert!(!hw.contains_key("acam_soft"));

    let eval = tmp.path().join("eval");
    ok(&[
        "eval",
        "--checkpoint",
        s(&trained.join("checkpoint_acam.json")),
        "--out-dir",
        s(&eval),
    ]);
    let rows = csv_rows(&eval.join("eval.csv"));
    for (e, t) in rows.iter().zip(&mae[1..4]) {
        assert_eq!(e[1], t[1]);
        assert_eq!(e[2], t[3], "eval must reproduce the training-time report");
    }
    let out = acam(&[
        "eval",
        "--checkpoint",
        s(&trained.join("checkpoint_sdp.json")),
        "--mode",
        "hard",
        "--out-dir",
        s(&eval),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let k = keys(16, 16);
    write_matrix(&tmp.path().join("keys.csv"), &k);
    write_matrix(&tmp.path().join("queries.csv"), &k[..4]);
    let keys_path = tmp.path().join("keys.csv");
    let queries_path = tmp.path().join("queries.csv");
    let runs: Vec<Vec<String>> = vec![
        vec![
            "search".into(),
            "--keys".into(),
            s(&keys_path).into(),
            "--queries".into(),
            s(&queries_path).into(),
            "--save-state".into(),
        ],
        vec![
            "montecarlo".into(),
            "--trials".into(),
            "20".into(),
            "--sigma-cmp".into(),
            "0.01".into(),
        ],
        vec![
            "energy".into(),
            "--searches".into(),
            "10".into(),
            "--row-writes".into(),
            "3".into(),
        ],
        vec![
            "train".into(),
            "--epochs".into(),
            "2".into(),
            "--n-train".into(),
            "8".into(),
            "--n-val".into(),
            "2".into(),
            "--seq-len".into(),
            "6".into(),
        ],
    ];
    for (i, run) in runs.iter().enumerate() {
        let snapshot = |tag: &str| {
            let out = tmp.path().join(format!("run{i}{tag}"));
            let mut args: Vec<&str> = run.iter().map(String::as_str).collect();
            args.extend(["--threads", "1", "--seed", "5", "--out-dir", s(&out)]);
            ok(&args);
            dir_snapshot(&out)
        };
        let (a, b) = (snapshot("a"), snapshot("b"));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{} output differs between runs", run[0]);
    }
}
