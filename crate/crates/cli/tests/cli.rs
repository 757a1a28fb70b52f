use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cwsoc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwsoc")).current_dir(dir).args(args).output().expect("spawn cwsoc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Every file under `root`, keyed by relative path.
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn cancellation_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = cwsoc(dir.path(), &["verify", "cancellation", "--degree", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all zero"));
}

#[test]
fn action_of_linear_path() {
    let dir = tempfile::tempdir().unwrap();
    // two nodes describe the whole straight line
    fs::write(dir.path().join("line.csv"), "t,x\n0,0\n1,1\n").unwrap();
    let o = cwsoc(dir.path(), &["action", "--path", "line.csv", "--sigma", "1", "--label", "a"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/action/a/report.json")).unwrap()).unwrap();
    let total = report["total"].as_f64().unwrap();
    assert!((total - 9.0 / 14.0).abs() < 1e-6, "{total}");
}

#[test]
fn noiseless_critical_flow() {
    let dir = tempfile::tempdir().unwrap();
    let o = cwsoc(
        dir.path(),
        &["simulate", "critical", "--sigma", "1", "--t", "3", "--dt", "1e-3", "--no-noise", "--x0", "1"],
    );
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let v: f64 = s.trim().rsplit(' ').next().unwrap().parse().unwrap();
    // x(t) = (1 + t/sigma^4)^(-1/2) -> 1/2 at t = 3
    assert!((v - 0.5).abs() < 1e-3, "{s}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[model]\nsigma = 1.0\nbogus = 3\n").unwrap();
    let o = cwsoc(dir.path(), &["--config", "c.toml", "simulate", "reduced"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[run]\nseed = 7\nreplicas = 6\n[model]\nn = 2000\n[sim]\nhorizon = 0.05\n",
    )
    .unwrap();
    let run = |label: &str, threads: &str| {
        let root = format!("o{label}");
        let o = cwsoc(
            dir.path(),
            &["--config", "run.toml", "--threads", threads, "--out", &root, "--label", "x", "simulate", "reduced"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        tree(&dir.path().join(root))
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a.len(), 8);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cwsoc(dir.path(), &["simulate", "nonsense"]).status.code(), Some(1));
    assert_eq!(cwsoc(dir.path(), &["--sigma", "-1", "simulate", "reduced"]).status.code(), Some(1));
    assert_eq!(cwsoc(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn audit_subset_and_unestimable_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = cwsoc(dir.path(), &["limits-audit", "--only", "1,7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("PASS")).count(), 2);
    let o = cwsoc(dir.path(), &["estimate-rate", "--replicas", "50", "--set", "rate.ns=[1024]"]);
    assert_eq!(o.status.code(), Some(3));
}
