use std::path::Path;
use std::process::{Command, Output};

fn fracdens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracdens"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn simulate_estimate_density_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = fracdens(d, &["simulate", "--n-subjects", "15", "--steps", "200", "--seed", "9", "-o", "b.csv"]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(d.join("b.json").exists());
    assert_eq!(code(&fracdens(d, &["estimate", "--bundle", "b.csv", "-o", "e.csv"])), 0);
    let est = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert_eq!(est.lines().count(), 16);
    let out = fracdens(
        d,
        &["density", "--effects", "e.csv", "--density", "beta_3_5", "--m-policy", "fixed:6", "-o", "f.csv", "--svg", "f.svg"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(csv.starts_with("x,f_true,f_bernstein,f_kde"));
    assert_eq!(csv.lines().count(), 102);
    assert!(std::fs::read_to_string(d.join("f.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "[experiment]\nreplicates = 50\neffects_mode = \"known\"\nn_subjects = 40\n\n[output]\nout = \"rep\"\nformats = [\"json\"]\n",
    )
    .unwrap();
    let out = fracdens(d, &["--config", "run.toml", "experiment", "--replicates", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep/report.json")).unwrap()).unwrap();
    let cell = &json["cells"][0];
    assert_eq!(cell["n_subjects"], 40);
    assert_eq!(cell["records"].as_array().unwrap().len(), 3);

    let tables = fracdens(d, &["tables", "--report", "rep/report.json", "--out", "tab", "--formats", "markdown,csv"]);
    assert_eq!(code(&tables), 0);
    assert!(d.join("tab/tables.md").exists() && d.join("tab/metrics.csv").exists());
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        let args = ["experiment", "--effects-mode", "known", "--replicates", "4", "--sizes", "30,60", "--seed", "5", "--formats", "csv", "--out", out];
        assert_eq!(code(&fracdens(d, &args)), 0);
    }
    let a = std::fs::read(d.join("a/metrics.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/metrics.csv")).unwrap());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fracdens(d, &["experiment", "--m-policy", "bogus"])), 1);
    assert_eq!(code(&fracdens(d, &["experiment", "--hurst", "0.3"])), 1);
    assert_eq!(code(&fracdens(d, &["check", "--criteria", "13"])), 1);
    assert_eq!(code(&fracdens(d, &["--no-such-flag"])), 1);
    std::fs::write(d.join("bad.toml"), "[experiment]\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&fracdens(d, &["--config", "bad.toml", "experiment"])), 1);
}

#[test]
fn check_prints_one_line_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracdens(dir.path(), &["check", "--criteria", "1,2"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(" PASS ")).count(), 2);
}

#[test]
fn check_exit_code_follows_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracdens(dir.path(), &["check", "--criteria", "8"]);
    let failed = String::from_utf8_lossy(&out.stdout).contains(" FAIL ");
    assert_eq!(code(&out), if failed { 3 } else { 0 });
}
