use std::f64::consts::FRAC_2_PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cvact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

/// Data rows of a CSV with `#` metadata lines, header dropped.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn loss_sweep_threshold() {
    let out = cvact(&["loss-sweep"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# config_hash="));
    assert!(text.contains("# cutoff=25"));
    assert!(text.contains("# max_leakage="));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 11);
    for r in &rows {
        let eta = num(&r[0]);
        let expect = (2.0 * eta - 1.0).max(0.0);
        assert!((num(&r[2]) - expect).abs() < 1e-6, "eta {eta}");
        assert!((num(&r[3]) - expect / 2.0).abs() < 1e-6);
        assert!((num(&r[4]) - expect).abs() < 1e-6);
    }
    assert_eq!(rows[10][5], "BellNonlocal");
    assert_eq!(rows[5][5], "Separable");
}

#[test]
fn loss_sweep_even_photon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "n = 2\netas = [1.0]\n");
    let out = cvact(&["loss-sweep", "--config", &cfg]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!((num(&rows[0][1]) - 1.0).abs() < 1e-12);
    assert!(num(&rows[0][2]) > 0.0);
}

#[test]
fn outputs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = cvact(&["pure-bounds", "--seed-list", "3,9", "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let doc: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["config"]["seeds"], serde_json::json!([3, 9]));
    assert_eq!(doc["metadata"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_hash_tracks_config() {
    let h = |args: &[&str]| {
        let v = stdout_json(&cvact(args));
        v["metadata"]["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(h(&["negativity-depth"]), h(&["negativity-depth", "--cutoff", "31"]));
    assert_eq!(h(&["negativity-depth"]), h(&["negativity-depth"]));
}

#[test]
fn wigner_examples() {
    let dir = tempfile::tempdir().unwrap();
    let one = cvact(&["wigner", "--cutoff", "20"]);
    let rows = csv_rows(&String::from_utf8(one.stdout).unwrap());
    let min = rows.iter().map(|r| num(&r[2])).fold(f64::INFINITY, f64::min);
    assert!((min + FRAC_2_PI).abs() < 1e-9);

    let vac = write_config(dir.path(), "v.toml", "state = { kind = \"fock\", n = 0 }\nresolution = 20\n");
    let rows = csv_rows(&String::from_utf8(cvact(&["wigner", "--config", &vac]).stdout).unwrap());
    assert!(rows.iter().all(|r| num(&r[2]) >= -1e-14));

    // Odd cat along the imaginary axis: W(iy) ≈ −(2/π)e^{−2y²}cos(4αy).
    let cat = write_config(
        dir.path(),
        "c.toml",
        "cutoff = 40\nradius = 1.0\nresolution = 40\nstate = { kind = \"cat\", re = 2.0, sign = -1 }\n",
    );
    let rows = csv_rows(&String::from_utf8(cvact(&["wigner", "--config", &cat]).stdout).unwrap());
    let mut checked = 0;
    for r in rows.iter().filter(|r| num(&r[0]).abs() < 1e-12) {
        let y = num(&r[1]);
        let pattern = -(8.0 * y).cos();
        if pattern.abs() > 0.3 {
            assert_eq!(num(&r[2]).signum(), pattern.signum(), "y = {y}");
            checked += 1;
        }
    }
    assert!(checked > 40);
}

#[test]
fn negativity_depth_of_photon() {
    let v = stdout_json(&cvact(&["negativity-depth"]));
    assert!((v["result"]["depth"].as_f64().unwrap() - FRAC_2_PI).abs() < 1e-9);
    assert!((v["result"]["parity_depth"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn activate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&cvact(&["activate"]));
    assert_eq!(v["result"]["steering_channel"]["classification"], "BellNonlocal");
    assert_eq!(v["result"]["steering_channel"]["q"], 1.0);

    let lossy = write_config(dir.path(), "l.toml", "state = { kind = \"lossy_fock\", n = 1, eta = 0.6 }\n");
    let v = stdout_json(&cvact(&["activate", "--config", &lossy]));
    let q = v["result"]["steering_channel"]["q"].as_f64().unwrap();
    assert!((q - 0.6).abs() < 1e-12);
    assert_eq!(v["result"]["steering_channel"]["classification"], "SteerableCHSHLocal");

    let vac = write_config(dir.path(), "v.toml", "state = { kind = \"fock\", n = 0 }\nwitness = { kind = \"best_parity\" }\n");
    let v = stdout_json(&cvact(&["activate", "--config", &vac]));
    assert_eq!(v["result"]["entanglement_channel"]["classification"], "Separable");
    assert_eq!(v["result"]["entanglement_channel"]["E"], 0.0);
}

#[test]
fn pure_bounds_examples() {
    let dir = tempfile::tempdir().unwrap();
    let coh = write_config(dir.path(), "c.toml", "state = { kind = \"coherent\", re = 0.8 }\n");
    let v = stdout_json(&cvact(&["pure-bounds", "--config", &coh]));
    for k in ["gng_lower", "sng_lower", "entanglement_floor_gng", "steering_floor_sng"] {
        assert!(v["result"][k].as_f64().unwrap() < 1e-6, "{k}");
    }
    let cat = write_config(dir.path(), "k.toml", "state = { kind = \"cat\", re = 1.5, sign = -1 }\n");
    let v = stdout_json(&cvact(&["pure-bounds", "--config", &cat]));
    let g = v["result"]["gng_lower"].as_f64().unwrap();
    let s = v["result"]["sng_lower"].as_f64().unwrap();
    assert!(s >= g && (s - (1.0 - (1.0 - g).powi(2))).abs() < 1e-9);

    let mixed = write_config(dir.path(), "m.toml", "state = { kind = \"lossy_fock\", n = 1, eta = 0.5 }\n");
    assert_eq!(cvact(&["pure-bounds", "--config", &mixed]).status.code(), Some(2));
}

#[test]
fn gkp_identity_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        "squeezing_db = [6.0]\neta = 1.0\ncutoff = 60\nec = \"none\"\n",
    );
    let out = cvact(&["gkp-sweep", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("squeezing_dB,E_in,E_out,infidelity"));
    let rows = csv_rows(&text);
    assert!(num(&rows[0][3]) < 1e-12);
    assert!((num(&rows[0][1]) - num(&rows[0][2])).abs() < 1e-12);
}

#[test]
fn boundary_mix_recovers_t() {
    let rows = csv_rows(&String::from_utf8(cvact(&["boundary-mix"]).stdout).unwrap());
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((num(&r[0]) - num(&r[3])).abs() < 1e-6);
        assert!((num(&r[0]) - num(&r[1])).abs() == 0.0);
    }
}

#[test]
fn property_suite_passes() {
    let v = stdout_json(&cvact(&["property-suite"]));
    let checks = v["result"]["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "b.toml", "cutoff = \"many\"\n");
    assert_eq!(cvact(&["wigner", "--config", &bad]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "u.toml", "cutof = 3\n");
    assert_eq!(cvact(&["wigner", "--config", &unknown]).status.code(), Some(2));
    assert_eq!(cvact(&["wigner", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    let gkp = write_config(dir.path(), "g.toml", "state = { kind = \"gkp\", squeezing_db = 14.0 }\ncutoff = 30\n");
    assert_eq!(cvact(&["wigner", "--config", &gkp]).status.code(), Some(3));
    let sweep = write_config(dir.path(), "s.toml", "squeezing_db = [6.0]\ncutoff = 60\n");
    assert_eq!(
        cvact(&["gkp-sweep", "--config", &sweep, "--budget", "100"]).status.code(),
        Some(3)
    );
    let eta = write_config(dir.path(), "e.toml", "etas = [1.5]\n");
    assert_eq!(cvact(&["loss-sweep", "--config", &eta]).status.code(), Some(2));
}
