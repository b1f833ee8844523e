use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gossipgd"))
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const PAIR_QUADRATIC: &str = r#"
[run]
iterations = 40
seed = 2
sigma = SIGMA

[problem]
kind = "quadratic"

[quadratic]
agents = 5
dim = 3
mu = 1.0
l = 3.0
seed = 9

[schedule]
kind = "random"
seed = 1
builtin = "BUILTIN"
"#;

fn pair_config(sigma: &str, builtin: &str) -> String {
    PAIR_QUADRATIC.replace("SIGMA", sigma).replace("BUILTIN", builtin)
}

#[test]
fn run_is_deterministic_and_mode_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_dir().join("localization.toml");
    let outs: Vec<PathBuf> = ["a.csv", "b.csv", "c.csv"].iter().map(|n| dir.path().join(n)).collect();
    for (out, mode) in outs.iter().zip(["vectorized", "vectorized", "netsim"]) {
        let o = bin().arg("run").arg(&cfg).arg("--mode").arg(mode).arg("-o").arg(out).output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(&outs[0]).unwrap();
    assert_eq!(a, std::fs::read(&outs[1]).unwrap());
    assert_eq!(a, std::fs::read(&outs[2]).unwrap());

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,step,agent,error,lyapunov"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 201 * 5 + 201);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert_eq!(rows.iter().filter(|r| r[2] == "centralized").count(), 201);
    // iteration boundaries sit at step k·m
    assert_eq!(rows[5 * 7], vec!["7", "42", "0", rows[35][3], rows[35][4]]);
    let mut last = 0;
    for r in rows.iter().filter(|r| r[2] != "centralized") {
        let k: usize = r[0].parse().unwrap();
        assert!(k >= last);
        last = k;
        assert_eq!(r[1].parse::<usize>().unwrap(), 6 * k);
    }
}

#[test]
fn run_prints_summary_with_counters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "q.toml", &pair_config("0.79", "five-agent-pair"));
    let out = dir.path().join("q.csv");
    let o = bin().arg("run").arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0);
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("gradient evaluations 200"), "{summary}");
    assert!(summary.contains("row communications   1200"), "{summary}");
    assert!(summary.contains("m                    6\n"), "{summary}");

    let o = bin().arg("run").arg(&cfg).arg("--mode").arg("netsim").arg("-o").arg("-").output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("iter,step,agent,error,lyapunov\n"));
    let summary = String::from_utf8(o.stderr).unwrap();
    assert!(summary.contains("messages"), "{summary}");
    assert!(!summary.contains("messages             0\n"));
}

#[test]
fn perfectly_conditioned_problem_converges_in_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "flat.toml", &pair_config("0.79", "five-agent-pair").replace("l = 3.0", "l = 1.0").replace("iterations = 40", "iterations = 3"));
    let out = dir.path().join("flat.csv");
    assert_eq!(code(&bin().arg("run").arg(&cfg).arg("-o").arg(&out).output().unwrap()), 0);
    let text = std::fs::read_to_string(out).unwrap();
    let central: Vec<f64> = text
        .lines()
        .filter(|l| l.contains("centralized"))
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(central[0] > 0.1);
    assert!(central[1..].iter().all(|e| *e < 1e-12), "{central:?}");
}

#[test]
fn validate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(&dir, "ok.toml", &pair_config("0.79", "five-agent-pair"));
    let o = bin().arg("validate").arg(&ok).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let tight = write(&dir, "tight.toml", &pair_config("0.5", "five-agent-pair"));
    let o = bin().arg("validate").arg(&tight).output().unwrap();
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL spectral gap")), "{text}");

    let ident = write(&dir, "ident.toml", &pair_config("0.9", "identity"));
    let o = bin().arg("validate").arg(&ident).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL spectral gap [0]             1.0000000000"));

    let o = bin().arg("validate").arg(config_dir().join("quadratic.toml")).output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        pair_config("0.79", "five-agent-pair").replace("kind = \"random\"", "kind = \"sometimes\""),
        pair_config("0.79", "hypercube"),
        pair_config("1.5", "five-agent-pair"),
        pair_config("0.79", "five-agent-pair").replace("[quadratic]", "[quadratics]"),
        "not toml at all [".to_string(),
    ];
    for (i, text) in cases.iter().enumerate() {
        let p = write(&dir, &format!("bad{i}.toml"), text);
        for cmd in ["run", "validate"] {
            let o = bin().arg(cmd).arg(&p).output().unwrap();
            assert_eq!(code(&o), 2, "case {i} {cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    assert_eq!(code(&bin().args(["run", "/definitely/missing.toml"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["grid", "--rho", "0:1"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["rates", "--sigma", "0.5,1.2"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["grid", "--resolution", "1"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["explore-m", "--rho", "0.75", "--sigma", "1.0"]).output().unwrap()), 2);
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = pair_config("0.79", "five-agent-pair").replace("seed = 2", "seed = 2\nalpha = 1e150");
    let p = write(&dir, "boom.toml", &text);
    let o = bin().arg("run").arg(&p).arg("-o").arg(dir.path().join("boom.csv")).output().unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn grid_and_rates_are_deterministic() {
    let run = |args: &[&str]| {
        let o = bin().args(args).output().unwrap();
        assert_eq!(code(&o), 0);
        o.stdout
    };
    let g1 = run(&["grid", "--resolution", "30"]);
    assert_eq!(g1, run(&["grid", "--resolution", "30"]));
    let text = String::from_utf8(g1).unwrap();
    assert_eq!(text.lines().count(), 901);
    let r = run(&["rates", "--rho", "0.5", "--sigma", "0.7853"]);
    assert_eq!(String::from_utf8(r).unwrap(), "rho,sigma,m,per_step_rate\n0.5,0.7853,6,0.8908987181403393\n");
    let e = bin().args(["explore-m", "--rho", "0.75", "--sigma", "0.7853", "--resolution", "4"]).output().unwrap();
    assert_eq!(code(&e), 0);
    assert!(String::from_utf8(e.stderr).unwrap().contains("(0.75, 0.7853): 4"));
}
