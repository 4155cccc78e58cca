use std::path::Path;
use std::process::{Command, Output};

fn horolab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_horolab"));
    c.args(args).env_remove("HOROLAB_OUT");
    if let Some(p) = env_out {
        c.env("HOROLAB_OUT", p);
    }
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const ODE_ALL_CASES: &str = r#"{
  "schema_version": 1,
  "experiment": "ode-residual",
  "observables": ["power:s=0.5+1.5i:real", "power:s=0.5+0i:real", "power:s=0.75+0i:real",
                  "power:s=1+0i:real", "discrete:n=3:real"],
  "base_points": {"kind": "haar", "count": 5, "seed": 11}
}"#;

#[test]
fn list_prints_nine_experiments() {
    let o = horolab(&["--list"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    for id in ["ode-residual", "holder", "tail-lemmas", "lattice-sanity"] {
        assert!(text.contains(id));
    }
    let o = horolab(&["--list", "--json"], None);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 9);
}

#[test]
fn empty_observables_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", r#"{"schema_version":1,"experiment":"ode-residual","observables":[]}"#);
    let o = horolab(&["--config", &cfg, "--out", d.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no observables selected"));
}

#[test]
fn malformed_configs_exit_two() {
    let d = tempfile::tempdir().unwrap();
    for body in [
        "not json",
        r#"{"schema_version":1,"experiment":"ode-residual","observables":["power:s=banana:real"]}"#,
        r#"{"schema_version":1,"experiment":"ode-residual","observables":["power:s=1+0i:real"],"bogus":true}"#,
    ] {
        let cfg = write_config(d.path(), "c.json", body);
        let o = horolab(&["--config", &cfg, "--out", d.path().to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    let o = horolab(&["--config", "/nonexistent/config.json"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ode_residual_all_cases_passes_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", ODE_ALL_CASES);
    let out1 = d.path().join("one");
    let out2 = d.path().join("two");
    let o = horolab(&["--config", &cfg, "--out", out1.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("ode-residual.json")).unwrap()).unwrap();
    assert!(report["passed"].as_bool().unwrap());
    assert!(report["summary"]["max_residual"].as_f64().unwrap() < 1e-6);

    let o = horolab(&["--config", &cfg, "--out", out2.to_str().unwrap(), "--jobs", "2"], None);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(out1.join("ode-residual.csv")).unwrap();
    let b = std::fs::read(out2.join("ode-residual.csv")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8(a).unwrap();
    assert!(header.starts_with("observable,case,mu,a,b,c,d,T,t,residual"));
    assert_eq!(header.lines().count(), 1 + 5 * 5 * 5);
}

#[test]
fn violated_bound_exit_one_and_named() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", r#"{"schema_version":1,"experiment":"tail-lemmas"}"#);
    let o = horolab(&["--config", &cfg, "--out", d.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("violated bound: tail lemmas"), "{err}");
}

#[test]
fn output_directory_precedence() {
    let d = tempfile::tempdir().unwrap();
    let env_dir = d.path().join("env");
    let cfg_dir = d.path().join("cfg");
    let flag_dir = d.path().join("flag");
    let plain = write_config(d.path(), "plain.json", r#"{"schema_version":1,"experiment":"lattice-sanity","samples":10}"#);
    let o = horolab(&["--config", &plain], Some(&env_dir));
    assert!(o.status.success());
    assert!(env_dir.join("lattice-sanity.csv").exists());

    let body = format!(
        r#"{{"schema_version":1,"experiment":"lattice-sanity","samples":10,"output":{{"dir":"{}","csv":"t.csv"}}}}"#,
        cfg_dir.display()
    );
    let with_dir = write_config(d.path(), "dir.json", &body);
    let o = horolab(&["--config", &with_dir], Some(&env_dir));
    assert!(o.status.success());
    assert!(cfg_dir.join("t.csv").exists());

    let o = horolab(&["--config", &with_dir, "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert!(o.status.success());
    assert!(flag_dir.join("t.csv").exists());
}

#[test]
fn seed_override_changes_haar_points() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "c.json",
        r#"{"schema_version":1,"experiment":"ode-residual","observables":["power:s=1+0i:real"],
            "base_points":{"kind":"haar","count":2,"seed":1},"t_grid":[2.0]}"#,
    );
    let a = d.path().join("a");
    let b = d.path().join("b");
    assert!(horolab(&["--config", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    assert!(horolab(&["--config", &cfg, "--out", b.to_str().unwrap(), "--seed-override", "99"], None).status.success());
    let ca = std::fs::read_to_string(a.join("ode-residual.csv")).unwrap();
    let cb = std::fs::read_to_string(b.join("ode-residual.csv")).unwrap();
    assert_ne!(ca, cb);
}
