use std::path::Path;
use std::process::{Command, Output};

fn bob(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bob-lab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap()
}

const SMALL: &[&str] = &["--points", "64", "--half-length", "16", "--dt", "0.0078125", "--horizon", "0.25", "--snapshots", "8"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = bob(dir.path(), &["print-config", "--epsilon", "0.5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("epsilon = 0.5"));
    std::fs::write(dir.path().join("c.cfg"), &text).unwrap();
    let again = bob(dir.path(), &["print-config", "--config", "c.cfg"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn solve_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = bob(p, &with(&["solve", "--epsilon", "0", "--output", "a"], SMALL));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = bob(p, &["solve", "--config", "a/summary.cfg", "--output", "b"]);
    assert_eq!(code(&o), 0);
    for f in ["trajectory.csv", "norms.csv", "energy.csv"] {
        assert_eq!(read(p, &format!("a/{f}")), read(p, &format!("b/{f}")), "{f}");
    }
    // outputs are write-once
    assert_ne!(code(&bob(p, &with(&["solve", "--output", "a"], SMALL))), 0);
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = bob(dir.path(), &with(&["solve", "--data", "zero", "--output", "z"], SMALL));
    assert_eq!(code(&o), 0);
    let traj = read(dir.path(), "z/trajectory.csv");
    for line in traj.lines().skip(3) {
        assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn invalid_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&bob(p, &["solve", "--points"])), 2);
    assert_eq!(code(&bob(p, &["solve", "--points", "100"])), 2);
    assert_eq!(code(&bob(p, &["solve", "--epsilon", "3"])), 2);
    assert_eq!(code(&bob(p, &with(&["solve", "--dt", "0.3"], &["--output", "x"]))), 2);
    std::fs::write(p.join("bad.cfg"), "points = 64\nfrobnicate = 1\n").unwrap();
    assert_eq!(code(&bob(p, &["solve", "--config", "bad.cfg"])), 2);
    assert_eq!(code(&bob(p, &["solve", "--config", "missing.cfg"])), 2);
    assert!(!p.join("out").exists());
}

#[test]
fn picard_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = bob(
        dir.path(),
        &with(&["picard", "--data", "gaussian", "--amplitude", "30", "--epsilon", "0", "--output", "p"], SMALL),
    );
    assert_eq!(code(&o), 3);
    assert!(read(dir.path(), "p/summary.cfg").contains("# diverged"));
    let o = bob(dir.path(), &with(&["picard", "--iterations", "4", "--output", "q", "--assert", "true"], SMALL));
    assert_eq!(code(&o), 0);
}

#[test]
fn norms_recompute_stored_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&bob(p, &with(&["solve", "--sigma", "1", "--output", "s"], SMALL))), 0);
    let o = bob(p, &["norms", "--input", "s/trajectory.csv", "--sigma", "1", "--output", "n"]);
    assert_eq!(code(&o), 0);
    let parse = |t: String| -> Vec<Vec<f64>> {
        t.lines().skip(3).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
    };
    let (a, b) = (parse(read(p, "s/norms.csv")), parse(read(p, "n/norms.csv")));
    assert_eq!(a.len(), 9);
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    }
    let o = bob(p, &with(&["norms", "--output", "d"], SMALL));
    assert_eq!(code(&o), 0);
    assert!(read(p, "d/breakdown.csv").starts_with("# schema=v1\n"));
}

#[test]
fn single_epsilon_sweep_has_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = bob(dir.path(), &with(&["sweep-epsilon", "--epsilons", "0.1", "--assert", "true", "--output", "w"], SMALL));
    assert_eq!(code(&o), 0);
    let csv = read(dir.path(), "w/sweep.csv");
    assert_eq!(csv.lines().filter(|l| l.starts_with("inviscid_sweep,")).count(), 1);
    assert!(csv.ends_with("# summary: no fit\n"));
}

const LINEAR_SMALL: &[&str] = &[
    "verify-linear",
    "--st-points",
    "64",
    "--st-times",
    "512",
    "--samples",
    "2",
    "--epsilons",
    "1,0.01",
    "--sigmas",
    "0",
];

#[test]
fn verify_linear_assert_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = bob(p, &with(LINEAR_SMALL, &["--output", "ok"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(p, "ok/free_summary.json").contains("\"spread\""));
    // a spread bound no study can meet
    let o = bob(p, &with(LINEAR_SMALL, &["--max-spread", "1", "--assert", "true", "--output", "strict"]));
    assert_eq!(code(&o), 4);
    let o = bob(p, &with(LINEAR_SMALL, &["--max-spread", "1", "--output", "lenient"]));
    assert_eq!(code(&o), 0);
    let o = bob(p, &with(LINEAR_SMALL, &["--epsilons", "0.01,1", "--output", "bad"]));
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_bilinear_replays() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = [
        "verify-bilinear",
        "--bl-points",
        "64",
        "--bl-times",
        "256",
        "--regimes",
        "1/1/1,0/1/1",
        "--bilinear-samples",
        "6",
        "--max-j",
        "2",
        "--pairs",
        "2",
    ];
    assert_eq!(code(&bob(p, &with(&args, &["--output", "a"]))), 0);
    assert_eq!(code(&bob(p, &["verify-bilinear", "--config", "a/summary.cfg", "--output", "b"])), 0);
    for f in ["bilinear_dyadic.csv", "bilinear_full.csv"] {
        assert_eq!(read(p, &format!("a/{f}")), read(p, &format!("b/{f}")));
    }
    let csv = read(p, "a/bilinear_dyadic.csv");
    assert_eq!(csv.matches("# schema=v1").count(), 1);
    assert_eq!(csv.lines().filter(|l| l.starts_with("bilinear;")).count(), 12);
}
