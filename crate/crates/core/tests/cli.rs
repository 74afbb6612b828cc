//! Runs the `potgame` binary: documented examples, config files, exit codes.

use std::path::Path;
use std::process::{Command, Output};

use potential_games::analysis::StudyReport;

fn potgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_potgame")).args(args).output().expect("spawn potgame")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn integer_game_example_has_constant_score() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = potgame(&[
        "integer-game", "--T", "2", "--final", "expfinal", "--adversary", "random-walk", "--learner", "potential",
        "--seed", "7", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["iter", "t", "s", "ell", "dt", "score", "eps_regret_0.1", "eps_regret_0.01"]);
    for rec in rdr.records() {
        let score: f64 = rec.unwrap()[5].parse().unwrap();
        assert!((score - 1f64.cosh().powi(2)).abs() < 1e-12);
    }
    assert!(stdout(&o).contains("final_score=2.3810978455e0"));
}

#[test]
fn bounds_example() {
    let o = potgame(&["bounds", "--kind", "normalhedge", "--t", "100", "--eps", "0.01"]);
    assert!(o.status.success());
    let line = stdout(&o);
    let value: f64 = line.rsplit("bound=").next().unwrap().trim().parse().unwrap();
    assert!((value - (101.0 * (2.0 * 50f64.ln() + 101f64.ln())).sqrt()).abs() < 1e-12);
    assert!((value - 35.45).abs() < 0.005);
}

#[test]
fn convergence_example_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.json");
    let o = potgame(&[
        "convergence", "--final", "expfinal", "--horizon", "1", "--kmax", "4", "--probe", "0,0", "--out", path(&out),
    ]);
    assert!(o.status.success());
    let report: StudyReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let lower: Vec<f64> = report.values["lower"][0]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (k, v) in lower.iter().enumerate() {
        let oracle = 2f64.powi(-(k as i32)).cosh().powi(4i32.pow(k as u32));
        assert!((v - oracle).abs() < 1e-12 * oracle);
    }
    assert!(report.passed());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"integer-game\"\nT = 3\nadversary = \"mixed\"\nseed = 5\n").unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(potgame(&["integer-game", "--config", path(&cfg), "--out", path(&a)]).status.success());
    assert!(potgame(&["integer-game", "--config", path(&cfg), "--T", "4", "--out", path(&b)]).status.success());
    let rows = |p: &Path| std::fs::read_to_string(p).unwrap().lines().count();
    assert_eq!(rows(&a), 1 + 4);
    assert_eq!(rows(&b), 1 + 5);

    let json = dir.path().join("run.json");
    std::fs::write(&json, r#"{"command": "bounds", "kind": "exp", "t": 100, "eps": [0.01]}"#).unwrap();
    let o = potgame(&["bounds", "--config", path(&json)]);
    assert!(stdout(&o).contains("bound=3.0348"), "{}", stdout(&o));
}

#[test]
fn unknown_config_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "T = 3\nrounds_total = 9\n").unwrap();
    let o = potgame(&["integer-game", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rounds_total"));
}

#[test]
fn exit_codes() {
    assert_eq!(potgame(&["discrete-game", "--horizon", "1", "--k", "2", "--adversary", "biased:p=0.9"]).status.code(), Some(3));
    assert_eq!(potgame(&["integer-game", "--T", "2", "--final", "polyfinal:coeffs=1,1"]).status.code(), Some(4));
    assert_eq!(potgame(&["bounds", "--t", "1", "--eps", "0"]).status.code(), Some(2));
    assert_eq!(potgame(&["discrete-game", "--horizon", "1", "--k", "13"]).status.code(), Some(2));
    let o = potgame(&["discrete-game", "--horizon", "1", "--k", "1", "--adversary", "random-walk:s=0.3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn every_subcommand_has_a_dry_run() {
    let runs: [&[&str]; 7] = [
        &["integer-game", "--T", "4"],
        &["discrete-game", "--horizon", "1", "--k", "2"],
        &["continuous-game", "--max-step", "0.1", "--horizon", "1"],
        &["convergence", "--kmax", "3"],
        &["monotonicity", "--final", "expfinal:rate=0.5"],
        &["bounds", "--t", "10"],
        &["verify-bounds", "--seeds", "2"],
    ];
    for args in runs {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("never-written");
        let mut full = args.to_vec();
        full.extend(["--dry-run", "--out", path(&out)]);
        let o = potgame(&full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("dry run"));
        assert!(!out.exists());
    }
}

#[test]
fn file_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("moves.csv");
    std::fs::write(&script, "iter,kind,param1,param2\n1,random-walk,1\n2,biased,1,0.75\n3,constant,0.5,1\n").unwrap();
    let o = potgame(&["integer-game", "--T", "3", "--adversary", &format!("script:{}", path(&script))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let state = dir.path().join("state.csv");
    std::fs::write(&state, "regret,mass\n-1,0.5\n1,0.5\n").unwrap();
    let o = potgame(&["integer-game", "--T", "1", "--state", path(&state)]);
    assert!(stdout(&o).contains(&format!("initial_score={:.10e}", 1f64.cosh().powi(2))), "{}", stdout(&o));

    let losses = dir.path().join("losses.csv");
    std::fs::write(&losses, "1,0,-1\n0,1,-1\n").unwrap();
    let o = potgame(&[
        "continuous-game", "--experts", "3", "--T", "2", "--learner", "uniform", "--eps", "0.3",
        "--adversary", &format!("expert-losses:{}", path(&losses)),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("max_eps_regret=2.000000e0"), "{}", stdout(&o));

    let table = dir.path().join("final.csv");
    let mut text = String::from("R,value\n");
    for i in -80..=80 {
        let r = i as f64 / 10.0;
        text.push_str(&format!("{r},{}\n", (r / 2.0).exp()));
    }
    std::fs::write(&table, text).unwrap();
    let o = potgame(&["convergence", "--final", &format!("table:{}", path(&table)), "--kmax", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
