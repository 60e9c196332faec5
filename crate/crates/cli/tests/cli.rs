use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(cmd: &str, config: &Value, dir: &TempDir, out: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg_path = dir.path().join(format!("{out}.json"));
    fs::write(&cfg_path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out_dir = dir.path().join(out);
    let output = Command::new(env!("CARGO_BIN_EXE_hriesz"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .args(extra)
        .output()
        .unwrap();
    (output, out_dir)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_kernel_check(n: usize) -> Value {
    json!({
        "n": n,
        "seed": 4,
        "measure": { "kind": "axis", "t0": 0.0, "t1": 1.0, "count": 8 },
        "kernel_check": { "gradient_points": 200, "samples": 2000, "triples": 2000 }
    })
}

fn axis_witness() -> Value {
    json!({
        "n": 1,
        "seed": 1,
        "measure": { "kind": "axis", "t0": 0.0, "t1": 1.0, "count": 65536, "total": 256.0 },
        "growth": { "A": 2.0, "M": 128.0, "s": 0.1, "j_max": 3 }
    })
}

#[test]
fn kernel_check_passes_and_embeds_metadata() {
    let dir = TempDir::new().unwrap();
    for n in [1, 2] {
        let (o, out) = run(
            "kernel-check",
            &small_kernel_check(n),
            &dir,
            &format!("kc{n}"),
            &[],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let report = read_json(&out.join("kernel_check.json"));
        assert_eq!(report["schema_version"], 1);
        assert!(report["version"].as_str().unwrap().starts_with("hriesz "));
        assert_eq!(report["command"], "kernel-check");
        assert_eq!(report["config"]["n"], n);
        assert_eq!(report["result"]["all_passed"], true);
        let checks = report["result"]["checks"].as_array().unwrap();
        let anti = checks
            .iter()
            .find(|c| c["name"] == "inversion_antisymmetry")
            .unwrap();
        assert_eq!(anti["informational"], true);
        assert_eq!(anti["passed"], false);
    }
}

#[test]
fn kernel_check_is_reproducible_and_seed_overridable() {
    let dir = TempDir::new().unwrap();
    let cfg = small_kernel_check(1);
    let (_, a) = run("kernel-check", &cfg, &dir, "a", &[]);
    let (_, b) = run("kernel-check", &cfg, &dir, "b", &[]);
    let (_, c) = run("kernel-check", &cfg, &dir, "c", &["--seed", "99"]);
    let read = |p: &Path| fs::read(p.join("kernel_check.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(
        read_json(&c.join("kernel_check.json"))["config"]["seed"],
        99
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run("kernel-check", &small_kernel_check(0), &dir, "zero", &[]);
    assert_eq!(code(&o), 2);

    let mut cfg = small_kernel_check(1);
    cfg["bogus"] = json!(1);
    let (o, _) = run("kernel-check", &cfg, &dir, "unknown", &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let mut cfg = small_kernel_check(1);
    cfg["measure"]["count"] = json!("many");
    let (o, _) = run("kernel-check", &cfg, &dir, "typed", &[]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("field `measure`") && err.contains("\"many\"") && err.contains("line"),
        "{err}"
    );

    let (o, _) = run(
        "norm-profile",
        &small_kernel_check(1),
        &dir,
        "nodeltas",
        &[],
    );
    assert_eq!(code(&o), 2);

    let cfg = json!({ "n": 1, "measure": { "kind": "atoms_file", "path": "missing.csv" }, "deltas": [0.1] });
    let (o, _) = run("norm-profile", &cfg, &dir, "missing", &[]);
    assert_eq!(code(&o), 2);

    let mut cfg = axis_witness();
    cfg["growth"]["M"] = json!(50.0);
    let (o, _) = run("growth-witness", &cfg, &dir, "smallm", &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn norm_profile_on_axis_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "n": 2,
        "measure": { "kind": "axis", "t0": -1.0, "t1": 1.0, "count": 100 },
        "deltas": [0.001, 0.1, 1.0]
    });
    let (o, out) = run("norm-profile", &cfg, &dir, "axis", &[]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("norm_profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,value,iterations,residual"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row.split(',').nth(1), Some("0"));
    }
    let summary = read_json(&out.join("norm_profile.json"));
    assert_eq!(summary["result"]["sup"], 0.0);
}

#[test]
fn atom_files_load_and_bad_data_exits_with_three() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("atoms.csv"),
        "n=1\n0.5,0,0,0.5\n-0.5,0,0.25,0.5\n",
    )
    .unwrap();
    let cfg = json!({ "n": 1, "measure": { "kind": "atoms_file", "path": "atoms.csv" }, "deltas": [0.01] });
    let (o, out) = run("norm-profile", &cfg, &dir, "good", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("norm_profile.json"));
    assert_eq!(summary["result"]["measure"]["atoms"], 2);
    assert!(summary["result"]["sup"].as_f64().unwrap() > 0.0);

    fs::write(dir.path().join("empty.csv"), "n=1\n").unwrap();
    let cfg = json!({ "n": 1, "measure": { "kind": "atoms_file", "path": "empty.csv" }, "deltas": [0.1] });
    let (o, _) = run("norm-profile", &cfg, &dir, "empty", &[]);
    assert_eq!(code(&o), 3);

    fs::write(dir.path().join("bad.csv"), "n=1\n0,0,zero,1\n").unwrap();
    let cfg =
        json!({ "n": 1, "measure": { "kind": "atoms_file", "path": "bad.csv" }, "deltas": [0.1] });
    let (o, _) = run("norm-profile", &cfg, &dir, "bad", &[]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn growth_witness_on_axis_writes_tables() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run("growth-witness", &axis_witness(), &dir, "axis", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("witness.json"));
    let outcome = &report["result"]["outcome"];
    assert_eq!(outcome["kind"], "witness");
    assert!(outcome["retained_mass_fraction"].as_f64().unwrap() >= 0.5);
    assert!(outcome["dimension_estimate"].as_f64().unwrap() <= 2.2);
    assert_eq!(outcome["experimental_constants"], true);

    let levels = fs::read_to_string(out.join("levels.csv")).unwrap();
    assert!(levels.starts_with("j,mass,packing_sum,min_sidelength\n"));
    assert_eq!(levels.lines().count(), 5);
    let dimension = fs::read_to_string(out.join("dimension.csv")).unwrap();
    assert!(dimension.starts_with("exponent,S_0,S_1,S_2,S_3,verdict\n"));
    let row = dimension.lines().find(|l| l.starts_with("2.5,")).unwrap();
    assert!(row.ends_with(",decaying"));

    let (_, again) = run("growth-witness", &axis_witness(), &dir, "axis_again", &[]);
    for f in ["witness.json", "levels.csv", "dimension.csv"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn growth_witness_certificates() {
    let dir = TempDir::new().unwrap();
    let mut cfg = json!({
        "n": 1,
        "seed": 2,
        "measure": { "kind": "uniform_cube", "k": 0, "a": [0, 0], "b": 0, "count": 4096, "total": 1.0 },
        "witness": { "c2_threshold": 10.0 }
    });
    let (o, out) = run("growth-witness", &cfg, &dir, "holds", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("witness.json"));
    assert_eq!(report["result"]["outcome"]["kind"], "certificate");
    assert!(!out.join("levels.csv").exists());

    cfg["witness"]["c2_threshold"] = json!(1e-3);
    let (o, out) = run("growth-witness", &cfg, &dir, "violated", &[]);
    assert_eq!(code(&o), 1);
    let report = read_json(&out.join("witness.json"));
    assert_eq!(
        report["result"]["outcome"]["verdict"],
        "growth bound violated at experimental threshold"
    );
}

#[test]
fn cantor_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = |depth: usize| json!({ "n": 1, "measure": { "kind": "cantor", "eps_rule": "4^-2k", "depth": depth } });

    let (o, out) = run("cantor", &cfg(1), &dir, "d1", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let atoms = fs::read_to_string(out.join("atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 2);
    let summary = read_json(&out.join("cantor_summary.json"));
    assert_eq!(summary["result"]["sup_norm"], 0.0);

    let (o, out) = run("cantor", &cfg(5), &dir, "d5", &[]);
    assert_eq!(code(&o), 0);
    let summary = read_json(&out.join("cantor_summary.json"))["result"].clone();
    assert_eq!(summary["measure"]["atoms"], 16);
    assert_eq!(summary["measure"]["total_mass"], 1.0);
    assert_eq!(summary["all_in_vertical_plane"], true);
    assert_eq!(summary["eps"].as_array().unwrap().len(), 5);
    let sup = summary["sup_norm"].as_f64().unwrap();
    assert!(sup.is_finite() && sup < 1.0, "{sup}");

    let explicit =
        json!({ "n": 1, "measure": { "kind": "cantor", "eps_rule": [0.0625, 0.004], "depth": 2 } });
    let (o, _) = run("cantor", &explicit, &dir, "explicit", &[]);
    assert_eq!(code(&o), 0);

    let violating =
        json!({ "n": 1, "measure": { "kind": "cantor", "eps_rule": [0.1, 0.05], "depth": 2 } });
    let (o, _) = run("cantor", &violating, &dir, "violating", &[]);
    assert_eq!(code(&o), 2);

    let mut wrong_n = cfg(3);
    wrong_n["n"] = json!(2);
    let (o, _) = run("cantor", &wrong_n, &dir, "wrong_n", &[]);
    assert_eq!(code(&o), 2);

    let (o, _) = run("cantor", &axis_witness(), &dir, "not_cantor", &[]);
    assert_eq!(code(&o), 2);
}
