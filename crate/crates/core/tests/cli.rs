//! End-to-end runs of the `bethe` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use u1bethe::weights::{ModelSpec, WeightTable};
use u1bethe::C64;

fn bethe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bethe")).args(args).env_remove("BETHE_THREADS").output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_with_config(dir: &TempDir, config: &str, args: &[&str]) -> (i32, Value, String) {
    let cfg = write(dir, "run.cfg", config);
    let out = dir.path().join("report.json");
    let mut full = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    full.extend_from_slice(args);
    let output = bethe(&full);
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    let report = std::fs::read_to_string(&out).ok().map_or(Value::Null, |t| serde_json::from_str(&t).unwrap());
    (output.status.code().unwrap(), report, stderr)
}

fn rapidities() -> [C64; 3] {
    [C64::new(0.1, 0.0), C64::new(-0.2, 0.1), C64::new(0.35, -0.05)]
}

fn six_vertex_table(skip: Option<(usize, usize)>) -> WeightTable {
    let model = ModelSpec::six_vertex(C64::new(0.6, 0.0)).unwrap();
    let xs = rapidities();
    let mut table = WeightTable::default();
    for (i, &l) in xs.iter().enumerate() {
        for (j, &m) in xs.iter().enumerate() {
            if skip != Some((i, j)) {
                table.insert(l, m, model.eval_r(l, m).unwrap().to_dense());
            }
        }
    }
    table
}

fn table_config(dir: &TempDir, table: &WeightTable) -> String {
    write(dir, "weights.txt", &table.to_text(2));
    "model = table\nN = 2\ntable_file = weights.txt\n".to_string()
}

fn records<'a>(report: &'a Value, key: &str, value: &str) -> Vec<&'a Value> {
    report["results"].as_array().unwrap().iter().filter(|r| r[key] == value).collect()
}

#[test]
fn check_r_passes_for_built_in_models() {
    let dir = TempDir::new().unwrap();
    for config in ["model = six_vertex\n", "model = higher_spin_xxz\nN = 3\n"] {
        let (code, report, _) = run_with_config(&dir, config, &["check-r"]);
        assert_eq!(code, 0, "{config}");
        assert_eq!(report["command"], "check-r");
        assert_eq!(report["pass"], true);
        assert_eq!(report["results"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn table_model_passes_on_exact_weights() {
    let dir = TempDir::new().unwrap();
    let config = table_config(&dir, &six_vertex_table(None));
    let (code, report, stderr) = run_with_config(&dir, &config, &["check-r"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(records(&report, "check", "yang_baxter")[0]["samples"], 6);
    assert_eq!(records(&report, "check", "unitarity")[0]["samples"], 6);
    assert_eq!(records(&report, "check", "regularity")[0]["samples"], 3);
}

#[test]
fn perturbed_table_fails_with_worst_entry() {
    let dir = TempDir::new().unwrap();
    let mut table = six_vertex_table(None);
    let [l, m, _] = rapidities();
    let mut dense = table.get(l, m).unwrap().clone();
    dense[(0, 0)] += C64::new(1e-6, 0.0);
    table.insert(l, m, dense);
    let config = table_config(&dir, &table);
    let (code, report, _) = run_with_config(&dir, &config, &["check-r"]);
    assert_eq!(code, 1);
    assert_eq!(report["pass"], false);
    let unitarity = records(&report, "check", "unitarity")[0];
    assert_eq!(unitarity["pass"], false);
    assert_eq!(unitarity["worst_entry"].as_array().unwrap().len(), 4);
    assert_eq!(unitarity["worst_sample"].as_array().unwrap().len(), 2);
}

#[test]
fn table_with_missing_pair_is_an_error() {
    let dir = TempDir::new().unwrap();
    let config = table_config(&dir, &six_vertex_table(Some((1, 0))));
    let (code, _, stderr) = run_with_config(&dir, &config, &["check-r"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("error: check-r"), "{stderr}");
}

#[test]
fn table_models_cannot_be_solved() {
    let dir = TempDir::new().unwrap();
    let config = table_config(&dir, &six_vertex_table(None));
    let (code, _, _) = run_with_config(&dir, &config, &["solve"]);
    assert_eq!(code, 2);
}

#[test]
fn reports_are_deterministic_apart_from_the_timestamp() {
    let dir = TempDir::new().unwrap();
    let config = "model = higher_spin_xxz\nN = 3\nL = 3\nn = 2\ninhomogeneities = [0, 0.05+0.02i, -0.03]\n";
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timestamp");
        v
    };
    let (c1, r1, _) = run_with_config(&dir, config, &["solve"]);
    let (c2, r2, _) = run_with_config(&dir, config, &["solve"]);
    assert_eq!(c1, 0);
    assert_eq!(c2, 0);
    assert_eq!(strip(r1), strip(r2));
}

#[test]
fn spectrum_is_written_as_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("spectrum.csv");
    let (code, report, _) =
        run_with_config(&dir, "model = six_vertex\nL = 4\nn = 2\n", &["solve", "--spectrum", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], true);
    let text = std::fs::read_to_string(Path::new(&csv)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sector,index,re,im"));
    assert!(lines.count() >= 6);
}

#[test]
fn zero_particles_report_the_vacuum_value() {
    let dir = TempDir::new().unwrap();
    let (code, report, _) = run_with_config(&dir, "model = six_vertex\nL = 3\nn = 0\n", &["solve"]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], true);
}

#[test]
fn invalid_options_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let (code, _, _) = run_with_config(&dir, "model = six_vertex\n", &["check-r", "--samples", "0"]);
    assert_eq!(code, 2);
    let (code, _, stderr) = run_with_config(&dir, "model = higher_spin_xxz\nN = 3\nL = 8\nn = 1\n", &["solve", "--spectrum"]);
    assert_eq!(code, 2, "{stderr}");
    let (code, _, stderr) = run_with_config(&dir, "model = six_vertex\nL = 2\ncolour = red\n", &["check-r"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");
    let cfg = write(&dir, "plain.cfg", "model = six_vertex\n");
    let output = Command::new(env!("CARGO_BIN_EXE_bethe"))
        .args(["--config", cfg.to_str().unwrap(), "--quiet", "check-r"])
        .env("BETHE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn identities_restrict_to_the_model_size() {
    let dir = TempDir::new().unwrap();
    let (code, report, _) = run_with_config(&dir, "model = six_vertex\n", &["identities"]);
    assert_eq!(code, 0);
    assert!(!report["results"].as_array().unwrap().is_empty());
    let (code, _, _) = run_with_config(&dir, "model = higher_spin_xxz\nN = 3\n", &["identities"]);
    assert_eq!(code, 0);
}

#[test]
fn offshell_rejects_coincident_roots() {
    let dir = TempDir::new().unwrap();
    let base = "model = higher_spin_xxz\nN = 3\nL = 3\ninhomogeneities = [0, 0.05+0.02i, -0.03]\n";
    let (code, report, _) = run_with_config(&dir, &format!("{base}roots = [0.1+0.2i, -0.3]\n"), &["offshell"]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], true);
    let (code, _, _) = run_with_config(&dir, &format!("{base}roots = [0.1+0.2i, 0.1+0.2i]\n"), &["offshell"]);
    assert_eq!(code, 2);
}

#[test]
fn rules_pass_for_both_built_in_models() {
    let dir = TempDir::new().unwrap();
    for config in ["model = six_vertex\n", "model = higher_spin_xxz\nN = 3\n"] {
        let (code, report, _) = run_with_config(&dir, config, &["rules", "--samples", "3"]);
        assert_eq!(code, 0, "{config}");
        assert_eq!(report["pass"], true);
    }
}
