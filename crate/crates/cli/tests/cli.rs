use std::process::{Command, Output};

fn bicond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicond")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn llt_example() {
    let o = bicond(&["llt", "--family", "geometric", "--ratio", "0.5", "--n", "50,100,200", "--xn", "0.5n"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let sups: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(sups.len(), 3);
    assert!(sups[0] > sups[1] && sups[1] > sups[2], "{sups:?}");
}

#[test]
fn verify_example() {
    let o = bicond(&["verify", "--family", "uniform-map", "--max-n", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!stdout(&o).contains(",false,"));
    let o = bicond(&["verify", "--family", "tabulated", "--weights", "1,0,1", "--lattice", "--max-n", "6", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn validation_errors_exit_one() {
    let o = bicond(&["llt", "--n", "50", "--xn", "0.5n"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--family"));
    assert_eq!(bicond(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bicond(&["llt", "--family", "geometric", "--ratio", "0.5", "--n", "50", "--xn", "0.5m"]).status.code(), Some(1));
    assert_eq!(bicond(&["llt", "--family", "nope", "--n", "50", "--xn", "n"]).status.code(), Some(1));
    assert_eq!(bicond(&["bridge", "--family", "geometric", "--ratio", "0.5", "--n", "50", "--xn", "n", "--stats", "mean-distance"]).status.code(), Some(1));
    assert_eq!(bicond(&["bridge", "--family", "geometric", "--ratio", "0.5", "--n", "50", "--xn", "n", "--sampler", "magic"]).status.code(), Some(1));
    assert_eq!(bicond(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let o = bicond(&["bridge", "--family", "tabulated", "--weights", "1,1", "--n", "5", "--xn", "n^2"]);
    assert_eq!(o.status.code(), Some(2));
    // The failing point is still reported.
    assert!(stdout(&o).contains("NaN"));
}

#[test]
fn seeded_runs_are_deterministic_across_thread_counts() {
    let args = ["map", "--family", "map-induced", "--n", "30,60", "--kn", "floor(n/3)", "--replicas", "40", "--seed", "9"];
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_bicond"))
            .args(args)
            .env("BICOND_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
}

#[test]
fn config_files_and_outputs() {
    let dir = std::env::temp_dir().join(format!("bicond-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
name = "trees"
target = "tree"
rule = "n/2"
n_grid = [40, 80]
replicas = 50
seed = 3
statistics = ["sum-sq-scaled", "leaves-mid"]

[family]
family = "geometric"
ratio = 1.0
scale = 1.0
"#,
    )
    .unwrap();
    let out = dir.join("res.json");
    let o = bicond(&["tree", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    // A tree config is refused by the bridge subcommand.
    assert_eq!(bicond(&["bridge", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dumps_and_scaling() {
    let o = bicond(&["tree", "--family", "tabulated", "--weights", "1,0,1", "--lattice", "--n", "5", "--kn", "3", "--replicas", "20", "--dump"]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines() {
        assert!(line == "[2,0,2,0,0]" || line == "[2,2,0,0,0]", "{line}");
    }
    let o = bicond(&["bridge", "--family", "geometric", "--ratio", "0.5", "--n", "8", "--xn", "4", "--replicas", "2", "--dump"]);
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    let inc: Vec<u64> = serde_json::from_value(first["increments"].clone()).unwrap();
    assert_eq!(inc.iter().sum::<u64>(), 4);

    let o = bicond(&["scaling", "--x", "0.6666666666666666"]);
    let val: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((val - 2.0 / 9.0).abs() < 1e-12);
    assert_eq!(bicond(&["scaling", "--x", "1.5"]).status.code(), Some(1));

    let o = bicond(&["scaling", "--n", "100,200,400", "--kn", "floor(n/2)", "--replicas", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);
}
