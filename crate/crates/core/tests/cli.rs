//! End-to-end runs of the `tropot` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tropical_ot::io::{field_csv_string, read_field_csv};

fn tropot(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tropot"));
    cmd.args(args).env_remove("TROPOT_OUTPUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("tropot runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn w1_config(out: &str, extra_solver: &str) -> String {
    format!(
        r#"
[problem]
kind = "w1"

[grid]
nx = 16
ny = 16

[source]
squares = [{{ center = [0.3, 0.3], width = 0.25 }}]

[target]
squares = [{{ center = [0.7, 0.6], width = 0.25 }}]

[solver]
tolerance = 1e-6
max_iter = 50000
{extra_solver}

[output]
dir = "{out}"
"#
    )
}

fn w2_config(out: &str, target: &str) -> String {
    format!(
        r#"
[problem]
kind = "w2"

[grid]
nx = 12
ny = 12

[source]
squares = [{{ center = [0.5, 0.5], width = 0.4 }}]

[target]
squares = [{target}]

[solver]
time_slices = 7

[output]
dir = "{out}"
"#
    )
}

#[test]
fn version_prints_name() {
    let o = tropot(&["version"], &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), format!("tropot {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn validate_accepts_bundled_configs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for e in 1..=3 {
        for k in ["w1", "w2"] {
            let p = dir.join(format!("experiment{e}_{k}.toml"));
            let o = tropot(&["validate", p.to_str().unwrap()], &[]);
            assert_eq!(code(&o), 0, "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
        }
    }
}

#[test]
fn bad_configs_exit_four_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = w1_config("out", "").replace("max_iter", "max_iters");
    let p = write_config(tmp.path(), "typo.toml", &typo);
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("max_iters"), "{err}");

    let p = write_config(tmp.path(), "syntax.toml", "[problem]\nkind = \"w3\"\n");
    let o = tropot(&["validate", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let outside = w1_config("out", "").replace("[0.3, 0.3]", "[1.3, 0.3]");
    let p = write_config(tmp.path(), "outside.toml", &outside);
    assert_eq!(code(&tropot(&["validate", p.to_str().unwrap()], &[])), 4);

    let o = tropot(&["run", tmp.path().join("missing.toml").to_str().unwrap()], &[]);
    assert_eq!(code(&o), 4);
}

#[test]
fn w1_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "w1.toml", &w1_config("res", ""));
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("res");
    for f in ["flux_x", "flux_y", "flux_norm", "potential"] {
        assert!(out.join(format!("{f}.csv")).is_file(), "{f}.csv");
        let pgm = std::fs::read(out.join(format!("{f}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(pgm.len(), "P5\n16 16\n255\n".len() + 256);
    }
    let d: f64 = std::fs::read_to_string(out.join("distance.txt")).unwrap().trim().parse().unwrap();
    // shift (0.4, 0.3) has tropical length 0.4
    assert!((d - 0.4).abs() < 0.1, "{d}");
    let summary = std::fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("converged = true"));
    let hist = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(hist.starts_with("iter,objective,rel_err,residual\n"));

    let (g, v) = read_field_csv(&out.join("flux_x.csv")).unwrap();
    assert_eq!(g.shape(), &[16, 16]);
    let text = std::fs::read_to_string(out.join("flux_x.csv")).unwrap();
    assert_eq!(field_csv_string(&g, &v).unwrap(), text);
}

#[test]
fn runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "w1.toml", &w1_config("a", "seed = 7"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&tropot(&["run", p.to_str().unwrap()], &[])), 0);
    assert_eq!(code(&tropot(&["run", p.to_str().unwrap(), "--output-dir", b.to_str().unwrap()], &[])), 0);
    for f in ["history.csv", "distance.txt", "flux_x.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_dir_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "w1.toml", &w1_config("configured", ""));
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");
    assert_eq!(code(&tropot(&["run", p.to_str().unwrap()], &[("TROPOT_OUTPUT_DIR", &env_dir)])), 0);
    assert!(env_dir.join("distance.txt").is_file());
    assert!(!tmp.path().join("configured").exists());
    let o = tropot(
        &["run", p.to_str().unwrap(), "--output-dir", flag_dir.to_str().unwrap()],
        &[("TROPOT_OUTPUT_DIR", &env_dir)],
    );
    assert_eq!(code(&o), 0);
    assert!(flag_dir.join("distance.txt").is_file());
}

#[test]
fn unequal_masses_are_infeasible_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = w1_config("res", "").replace(
        "squares = [{ center = [0.7, 0.6], width = 0.25 }]",
        "squares = [{ center = [0.7, 0.6], width = 0.25 }]\ntotal_mass = 2.0",
    );
    let p = write_config(tmp.path(), "w1.toml", &cfg);
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn iteration_limit_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = w1_config("res", "").replace("max_iter = 50000", "max_iter = 5");
    let p = write_config(tmp.path(), "w1.toml", &cfg);
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 3);
    assert!(tmp.path().join("res/history.csv").is_file());
}

#[test]
fn w2_unreachable_target_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "w2.toml", &w2_config("res", "{ center = [0.15, 0.15], width = 0.2 }"));
    let v = tropot(&["validate", p.to_str().unwrap()], &[]);
    assert_eq!(code(&v), 0);
    assert!(String::from_utf8_lossy(&v.stdout).contains("not reachable"));
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn w2_stationary_run_writes_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "w2.toml", &w2_config("res", "{ center = [0.5, 0.5], width = 0.4 }"));
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("res");
    for t in ["0.00", "0.21", "0.42", "0.64", "0.86", "1.00"] {
        assert!(out.join(format!("rho_t{t}.pgm")).is_file(), "{t}");
        let (_, v) = read_field_csv(&out.join(format!("rho_t{t}.csv"))).unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let d: f64 = std::fs::read_to_string(out.join("distance.txt")).unwrap().trim().parse().unwrap();
    assert_eq!(d, 0.0);
}

#[test]
fn density_file_input() {
    let tmp = tempfile::tempdir().unwrap();
    let first = write_config(tmp.path(), "w1.toml", &w1_config("first", ""));
    assert_eq!(code(&tropot(&["run", first.to_str().unwrap()], &[])), 0);
    // reuse the emitted flux norm as a (nonnegative) source density
    let cfg = w1_config("second", "")
        .replace("squares = [{ center = [0.3, 0.3], width = 0.25 }]", "file = \"first/flux_norm.csv\"");
    let p = write_config(tmp.path(), "file.toml", &cfg);
    let o = tropot(&["run", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let wrong = cfg.replace("nx = 16", "nx = 8");
    let p = write_config(tmp.path(), "wrong.toml", &wrong);
    let o = tropot(&["validate", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not match"));
}
