use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fintime_sctl::config;
use fintime_sctl::output::CSV_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fintime-sctl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const LINEAR: &str = r#"
[model]
name = "linear1d"
params = { L = 2 }
[controller]
k = 5
alpha = 0.5
[sim]
dt = 1e-4
seed = 5
realizations = 20
[energy]
q = 0.5
[initial]
x0 = [10]
[output]
prefix = "lin"
"#;

fn bundled() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
}

#[test]
fn bundled_configs_are_valid() {
    let paths = bundled();
    assert_eq!(paths.len(), 7);
    for path in paths {
        let text = fs::read_to_string(&path).unwrap();
        let cfg = config::parse(&text).and_then(|raw| raw.resolve());
        assert!(cfg.is_ok(), "{}: {}", path.display(), cfg.unwrap_err());
    }
}

#[test]
fn bounds_prints_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", LINEAR);
    let out = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("T_f^Sup    0.6728"), "{text}");
    assert!(text.contains("E_q^Sup    5.432"), "{text}");
    assert!(text.contains("p*         0.42"), "{text}");

    let written: toml::Value = toml::from_str(&fs::read_to_string(dir.path().join("lin_bounds.toml")).unwrap()).unwrap();
    let report = &written["bounds"][0];
    let t = report["t_f_sup"].as_float().unwrap();
    assert!((t - (2.0 * 10f64.ln() / 21.0 + 200.0 / 441.0)).abs() < 1e-12);
    assert_eq!(report["feasible"].as_bool(), Some(true));
}

#[test]
fn bounds_at_critical_gain_reports_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "crit.toml", &LINEAR.replace("k = 5", "k = 2"));
    let out = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("feasible   false"));
    assert!(stdout(&out).contains("T_f^Sup    undefined"));
    let written = fs::read_to_string(dir.path().join("lin_bounds.toml")).unwrap();
    assert!(written.contains("feasible = false"));
    assert!(!written.contains("t_f_sup"));
}

#[test]
fn bounds_without_lipschitz_constant_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
mode = "synchronize"
[model]
name = "hindmarsh_rose"
[controller]
k = 6
alpha = 0.5
[energy]
q = 0.1
[initial]
x0 = [0, 0, 1]
y0 = [0, 0, 2]
"#;
    let cfg = write_config(dir.path(), "hr.toml", text);
    let out = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("L unavailable"), "{}", stderr(&out));
}

#[test]
fn simulate_writes_single_row_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", LINEAR);
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).is_empty());

    let csv = fs::read_to_string(dir.path().join("lin_rows.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells.len(), 18);
    assert_eq!(&cells[..10], ["none", "", "stochastic_norm", "5", "0.5", "0.5", "20", "20", "0", "0"]);
    assert_eq!(cells[17], "true");

    let manifest = fs::read_to_string(dir.path().join("lin_manifest")).unwrap();
    assert!(manifest.contains("command = \"simulate\""));
    assert!(manifest.contains("seed = 5"));
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", LINEAR);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out_dir, seed) in [(&a, "5"), (&b, "6")] {
        let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", seed]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert!(fs::read_to_string(b.join("lin_manifest")).unwrap().contains("seed = 6"));
    assert_ne!(fs::read(a.join("lin_rows.csv")).unwrap(), fs::read(b.join("lin_rows.csv")).unwrap());
}

#[test]
fn job_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", LINEAR);
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", one.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(code(&out), 0);
    let out = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", four.to_str().unwrap()])
        .env("FINTIME_SCTL_JOBS", "4")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(one.join("lin_rows.csv")).unwrap(), fs::read(four.join("lin_rows.csv")).unwrap());
}

#[test]
fn compare_emits_paired_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{LINEAR}\n[sweep]\nparam = \"k\"\nvalues = [7, 5]\n");
    let cfg = write_config(dir.path(), "cmp.toml", &text);
    let out = run(&["compare", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("lin_rows.csv")).unwrap();
    let keys: Vec<String> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            format!("{}:{}", c[1], c[2])
        })
        .collect();
    assert_eq!(keys, ["5:stochastic_norm", "5:deterministic_norm", "7:stochastic_norm", "7:deterministic_norm"]);
    let det: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!((det[15], det[16]), ("", ""), "deterministic rows carry no bounds");
}

#[test]
fn sweep_without_sweep_table_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", LINEAR);
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("[sweep]"));
    let out = run(&["sync", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn all_violations_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let text = LINEAR.replace("alpha = 0.5", "alpha = 2").replace("dt = 1e-4", "dt = -1").replace("x0 = [10]", "x0 = [10, 3]");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("initial.x0"), "{err}");
    assert!(err.contains("alpha") || err.contains("dt"), "{err}");
    assert!(!dir.path().join("o").join("lin_rows.csv").exists());
}

#[test]
fn unreadable_or_malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let cfg = write_config(dir.path(), "junk.toml", "[model\nname=");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}
