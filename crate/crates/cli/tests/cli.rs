use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn blochgate(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blochgate"))
        .args(args)
        .env("BLOCHGATE_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&blochgate(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&blochgate(tmp.path(), &["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&blochgate(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&blochgate(tmp.path(), &["preset", "nope"])), 1);
    assert_eq!(
        code(&blochgate(
            tmp.path(),
            &["synthesize", "--config", "/no/such/file.json"]
        )),
        1
    );
}

#[test]
fn preset_and_its_printed_config_give_identical_costs() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    let out = blochgate(&cache, &["preset", "s", "--print-config"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = tmp.path().join("s.json");
    fs::write(&cfg, &out.stdout).unwrap();

    let runs = tmp.path().join("runs");
    let a = blochgate(&cache, &["preset", "s", "--out", runs.to_str().unwrap()]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let b_dir = tmp.path().join("from-config");
    let b = blochgate(
        &cache,
        &[
            "synthesize",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b_dir.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&b), 0, "{}", stderr(&b));

    let sa = summary(&runs.join("s"));
    let sb = summary(&b_dir);
    assert_eq!(sa["terminal_costs"], sb["terminal_costs"]);
    assert_eq!(sa["terminal_costs"].as_object().unwrap().len(), 4);
    assert!(String::from_utf8_lossy(&a.stdout).contains("final mesh"));
}

#[test]
fn zero_epsilon_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = blochgate(
        tmp.path(),
        &[
            "preset",
            "not",
            "--epsilon",
            "1,0",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(!tmp.path().join("not").join("summary.json").exists());
}

#[test]
fn dependent_channels_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("dup.json");
    fs::write(
        &cfg,
        r#"{
  "n_qubits": 1,
  "free_terms": [{"pauli": "Z", "coeff": 1.0}],
  "channels": [
    {"label": "a", "terms": [{"pauli": "X", "coeff": 1.0}]},
    {"label": "b", "terms": [{"pauli": "X", "coeff": 2.0}]}
  ],
  "gate": {"preset": "not"},
  "cost": {"epsilon_schedule": [1.0], "T": 1.0}
}"#,
    )
    .unwrap();
    let out = blochgate(
        tmp.path(),
        &["synthesize", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("error"), "{}", stderr(&out));
}

#[test]
fn verify_flags_tampered_controls() {
    let tmp = TempDir::new().unwrap();
    let runs = tmp.path().join("runs");
    let out = blochgate(
        tmp.path(),
        &[
            "preset",
            "not",
            "--epsilon",
            "5,0.5",
            "--out",
            runs.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = runs.join("not");
    assert_eq!(
        code(&blochgate(tmp.path(), &["verify", run.to_str().unwrap()])),
        0
    );

    let path = run.join("stage-5e-1").join("controls.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let mut tampered = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let mut fields: Vec<String> = line.split(',').map(str::to_string).collect();
        let nu: f64 = fields[1].parse().unwrap();
        fields[1] = format!("{}", nu + 0.5);
        tampered.push_str(&fields.join(","));
        tampered.push('\n');
    }
    fs::write(&path, tampered).unwrap();

    let out = blochgate(tmp.path(), &["verify", run.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("stage 5e-1"), "{err}");
    assert!(!err.contains("stage 5e0"), "{err}");
}

#[test]
fn verify_empty_directory_exits_one() {
    let tmp = TempDir::new().unwrap();
    let out = blochgate(tmp.path(), &["verify", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn basis_tables() {
    let tmp = TempDir::new().unwrap();
    let out = blochgate(
        tmp.path(),
        &["basis", "--dim", "2", "--out", tmp.path().to_str().unwrap()],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let structure =
        fs::read_to_string(tmp.path().join("su2-interleaved-v1-structure.csv")).unwrap();
    let f: Vec<(Vec<usize>, f64)> = structure
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("f,"))
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            let idx = v[1..4].iter().map(|x| x.parse().unwrap()).collect();
            (idx, v[4].parse().unwrap())
        })
        .collect();
    // Levi-Civita: six nonzero entries of magnitude one.
    assert_eq!(f.len(), 6);
    for (idx, value) in &f {
        let (a, b, c) = (idx[0] as i64, idx[1] as i64, idx[2] as i64);
        let sign = ((b - a) * (c - a) * (c - b)).signum() as f64;
        assert_eq!(*value, sign, "{idx:?}");
    }

    let out = blochgate(
        tmp.path(),
        &["basis", "--dim", "4", "--out", tmp.path().to_str().unwrap()],
    );
    assert_eq!(code(&out), 0);
    let ops = fs::read_to_string(tmp.path().join("su4-interleaved-v1-operators.csv")).unwrap();
    let mut ks: Vec<&str> = ops
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    ks.dedup();
    assert_eq!(ks.len(), 15);
}

#[test]
fn plot_data_to_file() {
    let tmp = TempDir::new().unwrap();
    let runs = tmp.path().join("runs");
    let out = blochgate(
        tmp.path(),
        &[
            "preset",
            "t",
            "--epsilon",
            "5",
            "--out",
            runs.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = tmp.path().join("plot.csv");
    let out = blochgate(
        tmp.path(),
        &[
            "plot-data",
            runs.join("t").to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("epsilon,series,t,value\n"));
    assert!(text.contains("5e0,nu_x,"));
}

#[test]
fn exhausted_node_budget_exits_two() {
    let tmp = TempDir::new().unwrap();
    let runs = tmp.path().join("runs");
    let out = blochgate(
        tmp.path(),
        &[
            "preset",
            "not",
            "--mesh",
            "10",
            "--max-nodes",
            "12",
            "--tol",
            "1e-12",
            "--out",
            runs.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("solver failed"));
    assert_eq!(summary(&runs.join("not"))["succeeded"], Value::Bool(false));
}
