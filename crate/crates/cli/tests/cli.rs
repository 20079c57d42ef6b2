use std::process::{Command, Output};

fn irsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsa")).args(args).env("IRSA_WORKERS", "2").output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV with a commented header, as (column -> value) pairs.
fn csv_rows(text: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn field(row: &[(String, String)], name: &str) -> f64 {
    row.iter().find(|(k, _)| k == name).unwrap().1.parse().unwrap()
}

#[test]
fn simulate_framed_aloha_short_frame() {
    let text = stdout(&irsa(&[
        "simulate", "--slots", "5", "--users", "4", "--dist", "1.0", "--decode-prob", "1", "--frames", "100000",
        "--seed", "7",
    ]));
    let t = field(&csv_rows(&text)[0], "throughput");
    // 4 (4/5)^3 / 5
    assert!((t - 0.4096).abs() < 0.005, "{t}");
    assert!((t - 0.41).abs() <= 0.01);
}

#[test]
fn simulate_population_split() {
    let text = stdout(&irsa(&["simulate", "--slots", "100", "--users", "90", "--dist", "0,0.5,0.5", "--frames", "20000"]));
    let t = field(&csv_rows(&text)[0], "throughput");
    assert!((t - 0.405).abs() < 0.01, "{t}");
}

#[test]
fn zero_users_is_a_usage_error() {
    let out = irsa(&["simulate", "--slots", "5", "--users", "0", "--dist", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = irsa(&["simulate", "--slots", "5", "--users", "3", "--dist", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = irsa(&["simulate", "--slots", "5", "--users", "3", "--dist", "1", "--decode-prob", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn density_commands() {
    let text = stdout(&irsa(&["density", "fixed-point", "--dist", "1", "--load", "1.0"]));
    let t = field(&csv_rows(&text)[0], "throughput");
    assert!((t - (-1.0f64).exp()).abs() < 1e-6);

    let text = stdout(&irsa(&["density", "peak", "--dist", "0,1"]));
    let row = &csv_rows(&text)[0];
    assert!((field(row, "peak_throughput") - 0.543).abs() <= 0.003);
    assert_eq!(field(row, "avg_repetitions"), 2.0);
}

#[test]
fn density_optimize_dmax3() {
    let text = stdout(&irsa(&["density", "optimize", "--dmax", "3", "--seed", "1"]));
    let row = &csv_rows(&text)[0];
    assert!(field(row, "peak_throughput") >= 0.82, "{text}");
}

#[test]
fn two_user_equilibrium_row() {
    let text = stdout(&irsa(&["equilibria", "two-user", "--slots", "4"]));
    let row = &csv_rows(&text)[0];
    let probs: Vec<f64> = (1..=4).map(|d| field(row, &format!("lambda_{d}"))).collect();
    assert_eq!(probs, vec![0.266667, 0.4, 0.266667, 0.0666667]);
    assert_eq!(field(row, "throughput"), 0.466667);
}

#[test]
fn short_frame_json() {
    let text = stdout(&irsa(&[
        "equilibria", "short-frame", "--slots", "5", "--users", "4", "--support", "1,2,3", "--reward", "500",
        "--frames", "50000", "--seed", "2",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let probs = v["result"]["solution"]["distribution"].as_array().unwrap();
    for (p, target) in probs.iter().zip([0.25, 0.38, 0.37]) {
        assert!((p.as_f64().unwrap() - target).abs() < 0.03, "{probs:?}");
    }
    let t = v["result"]["throughput"].as_f64().unwrap();
    assert!((t - 0.55).abs() < 0.02, "{t}");
    assert_eq!(v["config"]["frame"]["slots"], 5);
}

#[test]
fn sweep_csv_is_reproducible_from_its_header() {
    let dir = std::env::temp_dir().join(format!("irsa-sweep-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    let args = [
        "equilibria", "sweep", "--slots", "10", "--users", "8", "--rewards", "2:6:2", "--dmax", "3",
        "--frames-per-eval", "500", "--eval-frames", "2000", "--seed", "3",
    ];
    let out = irsa(&[&args[..], &["--output", a.to_str().unwrap()]].concat());
    assert!(out.status.success());
    let single = Command::new(env!("CARGO_BIN_EXE_irsa"))
        .args(args)
        .args(["--output", b.to_str().unwrap(), "--workers", "1"])
        .env_remove("IRSA_WORKERS")
        .output()
        .unwrap();
    assert!(single.status.success());
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# irsa equilibria sweep\n# config {"));
    assert!(text.contains("\"seed\":3"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| field(r, "r")).collect::<Vec<_>>(), vec![2.0, 4.0, 6.0]);
    for r in &rows {
        let share: f64 = (1..=3).map(|d| field(r, &format!("lambda_{d}"))).sum();
        assert!((share - 1.0).abs() < 1e-5);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_reward_grid_is_a_usage_error() {
    let out = irsa(&["equilibria", "sweep", "--slots", "10", "--users", "8", "--rewards", "4:2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repro_runs_selected_criteria() {
    let text = stdout(&irsa(&["repro", "--criteria", "3,4"]));
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("PASS  3 "), "{text}");
    assert!(lines[1].starts_with("PASS  4 "), "{text}");
    assert_eq!(lines[2], "2/2 criteria passed");
}
