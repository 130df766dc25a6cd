use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("hoslab-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn run(cmd: &str, out: &Path, vars: &[(&str, &str)]) -> i32 {
    hoslab::run_args(["hoslab", cmd, "--output", out.to_str().unwrap()], env(vars))
}

fn manifest(out: &Path) -> Vec<(String, String, String)> {
    fs::read_to_string(out.join("manifest.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.splitn(3, ',');
            (
                it.next().unwrap().into(),
                it.next().unwrap().into(),
                it.next().unwrap().into(),
            )
        })
        .collect()
}

fn metric(out: &Path, key: &str) -> f64 {
    manifest(out)
        .into_iter()
        .find(|(s, k, _)| s == "metric" && k == key)
        .unwrap_or_else(|| panic!("metric {key} missing"))
        .2
        .parse()
        .unwrap()
}

const SMALL: [(&str, &str); 2] = [("HOSLAB_GRID__N", "32"), ("HOSLAB_SCAN__THETAS", "0.05,0.5,1.5")];

#[test]
fn check_potential_exit_codes() {
    let d = scratch("growth");
    assert_eq!(run("check-potential", &d.join("ok"), &[]), 0);
    assert_eq!(run("check-potential", &d.join("slow"), &[("HOSLAB_POTENTIAL__ALPHA", "0.3")]), 1);
    assert_eq!(run("check-potential", &d.join("bad"), &[("HOSLAB_POTENTIAL__ALPHA", "0.9")]), 2);
    assert!(!d.join("bad").exists());
    assert_eq!(run("check-potential", &d.join("const"), &[("HOSLAB_POTENTIAL__FAMILY", "constant")]), 0);
    let report = fs::read_to_string(d.join("ok/potential_report.csv")).unwrap();
    assert!(report.starts_with("section,key,value\n"));
    assert!(report.contains("growth,family,power_law"));
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn usage_errors_exit_two() {
    let d = scratch("usage");
    assert_eq!(hoslab::run_args(["hoslab", "nope"], env(&[])), 2);
    assert_eq!(hoslab::run_args(["hoslab", "bip", "--jobs", "x"], env(&[])), 2);
    assert_eq!(run("bip", &d, &[("HOSLAB_GRID__N", "100")]), 2);
    assert_eq!(run("bip", &d, &[("HOSLAB_UNKNOWN", "1")]), 2);
    assert_eq!(run("scan-sector", &d, &[("HOSLAB_SCAN__MODULI", "1:1e2:5")]), 2);
    let cfg = d.with_extension("cfg");
    fs::write(&cfg, "grid.n = 32\nthis line is broken\n").unwrap();
    assert_eq!(hoslab::run_args(["hoslab", "bip", "--config", cfg.to_str().unwrap()], env(&[])), 2);
    // Splitting needs a Fourier-diagonal A.
    let vars = [
        ("HOSLAB_GRID__N", "16"),
        ("HOSLAB_OPERATOR__KIND", "varcoef"),
        ("HOSLAB_OPERATOR__COEFFICIENT_PRESET", "sine"),
    ];
    assert_eq!(run("evolve", &d, &vars), 2);
    let _ = fs::remove_file(&cfg);
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn config_file_seed_and_output_flags() {
    let d = scratch("flags");
    let cfg = d.with_extension("cfg");
    fs::write(&cfg, "# small run\ngrid.n = 32\nscan.thetas = 0.05, 1.0\nseed = 9\noutput_dir = ignored\n").unwrap();
    let code = hoslab::run_args(
        [
            "hoslab",
            "scan-sector",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            d.to_str().unwrap(),
            "--seed",
            "4",
            "--jobs",
            "1",
        ],
        env(&[("HOSLAB_SEED", "7")]),
    );
    assert_eq!(code, 0);
    let m = manifest(&d);
    let get = |key: &str| m.iter().find(|(s, k, _)| s == "config" && k == key).unwrap().2.clone();
    assert_eq!(get("seed"), "4");
    assert_eq!(get("grid.n"), "32");
    assert_eq!(get("output_dir"), d.to_str().unwrap());
    let _ = fs::remove_file(&cfg);
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn manifest_lists_every_file() {
    let d = scratch("manifest");
    assert_eq!(run("evolve", &d, &SMALL), 0);
    let listed: BTreeSet<String> = manifest(&d)
        .into_iter()
        .filter(|(s, _, _)| s == "artifact")
        .map(|(_, k, _)| k)
        .collect();
    let on_disk: BTreeSet<String> = fs::read_dir(&d)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(listed, on_disk);
    for f in ["evolve_snapshots.csv", "evolve_order.csv", "analyticity.csv"] {
        assert!(listed.contains(f), "{f}");
    }
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn outputs_are_deterministic() {
    let d = scratch("determinism");
    for (i, jobs) in ["1", "4"].iter().enumerate() {
        let out = d.join(i.to_string());
        let code = hoslab::run_args(
            ["hoslab", "full", "--output", out.to_str().unwrap(), "--jobs", jobs],
            env(&[("HOSLAB_GRID__N", "64")]),
        );
        assert_eq!(code, 0);
    }
    let files: Vec<_> = fs::read_dir(d.join("0")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(files.len() >= 8);
    for f in files {
        if f == "manifest.csv" {
            continue;
        }
        let a = fs::read(d.join("0").join(&f)).unwrap();
        let b = fs::read(d.join("1").join(&f)).unwrap();
        assert!(a == b, "{f:?} differs");
        let text = String::from_utf8(a).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn floats_carry_seventeen_digits() {
    let d = scratch("digits");
    assert_eq!(run("bip", &d, &SMALL), 0);
    let text = fs::read_to_string(d.join("bip.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    let s = row.split(',').nth(2).unwrap();
    assert_eq!(s, "-2.0000000000000000e1");
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn scan_sector_bilaplacian_angle_at_smallest_theta() {
    let d = scratch("scan");
    assert_eq!(run("scan-sector", &d, &[("HOSLAB_GRID__N", "64")]), 0);
    assert!(metric(&d, "angle.A.p2") <= 0.05);
    assert_eq!(metric(&d, "flat_theta.A.p2"), 0.05);
    let scan = fs::read_to_string(d.join("scan.csv")).unwrap();
    assert!(scan.starts_with("kind,p,arg,modulus,estimate,estimator,grid_n,grid_L\n"));
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn scan_sector_synthetic_ray_preset() {
    let d = scratch("synthetic");
    let vars = [("HOSLAB_OPERATOR__KIND", "synthetic_ray"), ("HOSLAB_GRID__N", "32")];
    assert_eq!(run("scan-sector", &d, &vars), 0);
    let angle = metric(&d, "angle.A.p2");
    assert!((angle - PI / 4.0).abs() <= 0.1, "{angle}");
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn evolve_records_error_ratios_near_four() {
    let d = scratch("evolve");
    let vars = [("HOSLAB_GRID__N", "64"), ("HOSLAB_EVOLVE__STEPS", "1024")];
    assert_eq!(run("evolve", &d, &vars), 0);
    for key in ["evolve.ratio.t0.1.256to512", "evolve.ratio.t0.1.512to1024"] {
        let r = metric(&d, key);
        assert!((r - 4.0).abs() < 0.2, "{key} = {r}");
    }
    assert!(metric(&d, "evolve.error.t0.1") <= 1e-6);
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn full_with_constant_potential_is_degenerate_pass() {
    let d = scratch("constant");
    let vars = [
        ("HOSLAB_GRID__N", "32"),
        ("HOSLAB_POTENTIAL__FAMILY", "constant"),
        ("HOSLAB_SCAN__THETAS", "0.05,0.5,1.5"),
    ];
    assert_eq!(run("full", &d, &vars), 0);
    assert!(metric(&d, "commutator.max_ratio") <= 1e-10);
    assert!(manifest(&d).contains(&("check".into(), "monniaux_pruss".into(), "pass".into())));
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn binary_honours_the_exit_code_contract() {
    let bin = env!("CARGO_BIN_EXE_hoslab");
    let d = scratch("binary");
    let status = |args: &[&str], vars: &[(&str, &str)]| {
        Command::new(bin)
            .args(args)
            .envs(vars.iter().copied())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(status(&["--help"], &[]), Some(0));
    assert_eq!(status(&[], &[]), Some(2));
    let out = d.to_str().unwrap();
    assert_eq!(status(&["check-potential", "--output", out], &[]), Some(0));
    assert_eq!(
        status(&["check-potential", "--output", out], &[("HOSLAB_POTENTIAL__ALPHA", "0.3")]),
        Some(1)
    );
    assert_eq!(
        status(&["check-potential", "--output", out], &[("HOSLAB_POTENTIAL__ALPHA", "0.9")]),
        Some(2)
    );
    let _ = fs::remove_dir_all(&d);
}
