use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semibandit_bic::harness::artifacts::sha256_hex;
use semibandit_bic::model::{ArmFamily, ProductPrior};
use semibandit_bic::sequence::{constants_fixed_size, n_p_general};
use semibandit_bic::Problem;
use serde_json::{json, Value};

const TWO_ATOMS: &str = r#"{"product": [{"beta": {"alpha": 1, "beta": 1}}, {"beta": {"alpha": 1, "beta": 3}}]}"#;

struct Case {
    dir: tempfile::TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("config.json"), config).unwrap();
        Self { dir }
    }

    fn json(config: Value) -> Self {
        Self::new(&serde_json::to_string_pretty(&config).unwrap())
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_semibandit-bic"))
            .arg(cmd)
            .arg("--config")
            .arg(self.dir.path().join("config.json"))
            .arg("--out")
            .arg(self.out(out))
            .args(extra)
            .env_remove("SEMIBANDIT_SEED")
            .output()
            .unwrap()
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn base() -> Value {
    json!({
        "prior": serde_json::from_str::<Value>(TWO_ATOMS).unwrap(),
        "family": {"kind": "singletons", "d": 2},
        "horizon": 30,
        "replicates": 40,
        "seed": 11
    })
}

#[test]
fn csv_headers_are_stable() {
    let mut cfg = base();
    cfg["verify"] = json!([{"check": "bic_mc", "rounds": [1], "replicates": 500}]);
    let case = Case::json(cfg);
    assert!(case.run("run", "r", &[]).status.success());
    assert_eq!(
        first_line(&case.out("r/rounds.csv")),
        "replicate,round,arm,reward,phase_label,is_exploration"
    );
    assert_eq!(first_line(&case.out("r/regret.csv")), "round,mean_regret,stderr");
    case.run("verify", "v", &[]);
    assert_eq!(
        first_line(&case.out("v/margins_0.csv")),
        "round,arm,competitor,margin,ci_radius,mode,support_count"
    );
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let mut cfg = base();
    cfg["algorithm"] = json!({"name": "hidden-exploration"});
    cfg["horizon"] = json!(200);
    let case = Case::json(cfg);
    assert!(case.run("run", "a", &["--threads", "1"]).status.success());
    assert!(case.run("run", "b", &["--threads", "4"]).status.success());
    let ma = read_json(&case.out("a/manifest.json"));
    let mb = read_json(&case.out("b/manifest.json"));
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    for f in ["rounds.csv", "regret.csv", "atoms.json", "summary.json"] {
        let a = std::fs::read(case.out("a").join(f)).unwrap();
        let b = std::fs::read(case.out("b").join(f)).unwrap();
        assert_eq!(sha256_hex(&a), sha256_hex(&b), "{f}");
    }
    let listed: Vec<&str> = ma["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    for f in &listed {
        let bytes = std::fs::read(case.out("a").join(f)).unwrap();
        let entry = ma["files"].as_array().unwrap().iter().find(|e| e["name"] == *f).unwrap();
        assert_eq!(entry["sha256"], json!(sha256_hex(&bytes)));
    }
}

#[test]
fn unknown_field_exits_two_and_names_it() {
    let mut cfg = base();
    cfg["alpha_typo"] = json!(1);
    let case = Case::json(cfg);
    let out = case.run("constants", "o", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_typo"));
}

#[test]
fn empty_round_set_exits_two() {
    let mut cfg = base();
    cfg["verify"] = json!([{"check": "bic_mc", "rounds": [], "replicates": 10}]);
    assert_eq!(Case::json(cfg).run("verify", "o", &[]).status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let mut cfg = base();
    cfg["verify"] = json!([{"check": "harris", "n": 4}]);
    assert_eq!(Case::json(cfg.clone()).run("verify", "o", &[]).status.code(), Some(0));
    // plain TS at round 1 recommends the worse-prior atom with positive
    // probability, and conditionally on that it is worse
    cfg["verify"] = json!([{"check": "bic_mc", "rounds": [1], "replicates": 20000}]);
    let case = Case::json(cfg);
    let out = case.run("verify", "o", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read_json(&case.out("o/summary.json"))["passed"], json!(false));
}

#[test]
fn budget_overrun_exits_three() {
    let mut cfg = base();
    cfg["family"] = json!({"kind": "m_subsets", "d": 20, "m": 10});
    cfg["prior"] = json!({"product": vec![json!({"beta": {"alpha": 1, "beta": 1}}); 20]});
    cfg["budgets"] = json!({"enumeration": 1000});
    let out = Case::json(cfg).run("constants", "o", &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn single_arm_single_round_logs_one_row() {
    let cfg = json!({
        "prior": {"product": [{"beta": {"alpha": 2, "beta": 2}}]},
        "family": {"kind": "explicit", "d": 1, "arms": [[0]]},
        "horizon": 1,
        "replicates": 1
    });
    let case = Case::json(cfg);
    assert!(case.run("run", "o", &[]).status.success());
    let text = std::fs::read_to_string(case.out("o/rounds.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,1,1,"), "{}", lines[1]);
}

#[test]
fn seed_precedence() {
    let case = Case::json(base());
    let run = |env: Option<&str>, flag: Option<&str>, out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_semibandit-bic"));
        c.args(["run", "--config"])
            .arg(case.dir.path().join("config.json"))
            .arg("--out")
            .arg(case.out(out));
        match env {
            Some(v) => c.env("SEMIBANDIT_SEED", v),
            None => c.env_remove("SEMIBANDIT_SEED"),
        };
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        assert!(c.output().unwrap().status.success());
        read_json(&case.out(out).join("resolved_config.json"))["seed"].clone()
    };
    assert_eq!(run(None, None, "a"), json!(11));
    assert_eq!(run(Some("5"), None, "b"), json!(5));
    assert_eq!(run(Some("5"), Some("7"), "c"), json!(7));
}

#[test]
fn fixed_size_constants_pass_through() {
    let prior = json!({"product": [
        {"beta": {"alpha": 1, "beta": 8}},
        {"beta": {"alpha": 1, "beta": 9}},
        {"beta": {"alpha": 1, "beta": 10}}
    ]});
    let case = Case::json(json!({
        "prior": prior,
        "family": {"kind": "singletons", "d": 3},
        "constants": {"kind": "fixed_size"}
    }));
    assert!(case.run("constants", "o", &[]).status.success());
    let got = read_json(&case.out("o/constants.json"));
    let direct = constants_fixed_size(
        &ProductPrior::beta(&[(1.0, 8.0), (1.0, 9.0), (1.0, 10.0)]).unwrap(),
        &ArmFamily::singletons(3).unwrap(),
    )
    .unwrap();
    assert_eq!(got["report"], serde_json::to_value(&direct).unwrap());
    assert_eq!(got["degenerate"], json!(false));
    assert_eq!(got["report"]["l"], json!(292));
}

#[test]
fn identical_priors_flag_degenerate() {
    let case = Case::json(json!({
        "prior": {"product": [{"beta": {"alpha": 1, "beta": 2}}, {"beta": {"alpha": 1, "beta": 2}}]},
        "family": {"kind": "singletons", "d": 2},
        "constants": {"kind": "fixed_size"}
    }));
    let out = case.run("constants", "o", &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&case.out("o/constants.json"))["degenerate"], json!(true));
}

fn sweep_values(path: &Path, metric: &str) -> Vec<(String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let h = r.headers().unwrap().clone();
    let mi = h.iter().position(|c| c == "metric").unwrap();
    let vi = h.iter().position(|c| c == "value").unwrap();
    r.records()
        .map(|x| x.unwrap())
        .filter(|x| &x[mi] == metric)
        .map(|x| (x[1].to_string(), x[vi].parse().unwrap()))
        .collect()
}

#[test]
fn c_ts_sweep_is_monotone() {
    let mut cfg = base();
    cfg["constants"] = json!({"kind": "ts", "mc_samples": 20000});
    cfg["sweep"] = json!({"command": "constants", "grid": {"/constants/c_ts": [0.25, 0.5, 1.0, 2.0]}});
    let case = Case::json(cfg);
    assert!(case.run("sweep", "o", &[]).status.success());
    let n: Vec<f64> = sweep_values(&case.out("o/sweep.csv"), "n_ts")
        .into_iter()
        .map(|x| x.1)
        .collect();
    assert_eq!(n.len(), 4);
    assert!(n.windows(2).all(|w| w[0] <= w[1]), "{n:?}");
}

#[test]
fn general_n_p_sweep_matches_formula() {
    let atoms = |d: usize| -> Value {
        json!({"product": (0..d).map(|i| json!({"beta": {"alpha": 1.5, "beta": 2.0 + i as f64}})).collect::<Vec<_>>()})
    };
    let cfg = json!({
        "prior": atoms(2),
        "family": {"kind": "singletons", "d": 2},
        "constants": {"kind": "general"},
        "sweep": {"command": "constants", "zip": {
            "/family/d": [2, 3, 4],
            "/prior": [atoms(2), atoms(3), atoms(4)]
        }}
    });
    let case = Case::json(cfg);
    let out = case.run("sweep", "o", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(case.out("o/sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    let mut checked = 0;
    for row in rows.iter().filter(|x| &x[4] == "n_p") {
        let d: usize = row[1].parse().unwrap();
        let prior: Value = serde_json::from_str(&row[2]).unwrap();
        assert_eq!(prior["product"].as_array().unwrap().len(), d);
        let betas: Vec<(f64, f64)> = (0..d).map(|i| (1.5, 2.0 + i as f64)).collect();
        let problem = Problem::product(
            ProductPrior::beta(&betas).unwrap(),
            ArmFamily::singletons(d).unwrap(),
        )
        .unwrap();
        let expect = n_p_general(&problem.prior().product().unwrap().betas().unwrap());
        assert_eq!(row[5].parse::<u64>().unwrap(), expect);
        checked += 1;
    }
    assert_eq!(checked, 3);
}

#[test]
fn short_hidden_exploration_fails_verification() {
    // with one round per block every phase-two round recommends the second
    // arm, which the prior ranks lower
    let mut cfg = base();
    cfg["horizon"] = json!(2);
    cfg["algorithm"] = json!({"name": "hidden-exploration", "sequence": [[0], [1]], "n": 1, "l": 1});
    cfg["verify"] = json!([{"check": "bic_exact", "rounds": [2], "quadrature_points": 4}]);
    let case = Case::json(cfg);
    let out = case.run("verify", "o", &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(case.out("o/margins_0.csv")).unwrap();
    let negative = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .any(|c| c[1] == "2" && c[3].parse::<f64>().unwrap() < -0.2);
    assert!(negative, "{text}");
}
