use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn shg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shg"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("run shg")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Data rows of a CSV written by the tool (header comment and column line dropped).
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# shg "));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn scaled(dir: &Path, fig: &str) -> Vec<f64> {
    rows(&dir.join(format!("{fig}.csv"))).iter().map(|r| r[1].parse().unwrap()).collect()
}

fn sign_changes(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

#[test]
fn figure_curves() {
    let d = workdir("figures");
    let o = shg(&d, &["figures"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(sign_changes(&scaled(&d, "fig2b")), 1);
    assert!(sign_changes(&scaled(&d, "fig2a")) >= 2);
    let gp = fs::read_to_string(d.join("fig2b.gp")).unwrap();
    assert!(gp.starts_with("# shg ") && gp.contains("'fig2b.csv'"));

    let o = shg(&d, &["figures", "--which", "fig1", "--f-zero"]);
    assert_eq!(code(&o), 0);
    assert!(scaled(&d, "fig1").iter().all(|&v| v == 0.0));
}

#[test]
fn header_line() {
    let d = workdir("header");
    assert_eq!(code(&shg(&d, &["--n", "401", "scan", "--kind", "u2", "--window", "1,3"])), 0);
    let text = fs::read_to_string(d.join("roots_u2.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with(&format!("# shg {} config_sha256=", env!("CARGO_PKG_VERSION"))), "{first}");
    assert!(first.contains(" n=401 ") && first.ends_with("scan --kind u2 --window 1,3"), "{first}");
    let hash = first.split("config_sha256=").nth(1).unwrap().split(' ').next().unwrap();
    assert_eq!(hash.len(), 64);
}

#[test]
fn scans() {
    let d = workdir("scan");
    assert_eq!(code(&shg(&d, &["scan", "--kind", "u2", "--window", "0,20"])), 0);
    let r = rows(&d.join("roots_u2.csv"));
    assert_eq!(r.len(), 1);
    let w: f64 = r[0][1].parse().unwrap();
    assert!((w - 2.13918217).abs() < 1e-6, "{w}");

    let o = shg(&d, &["--config", "builtin:fig1", "scan", "--kind", "u1", "--window", "0,40"]);
    assert_eq!(code(&o), 0);
    assert!(rows(&d.join("roots_u1.csv")).is_empty());

    assert_eq!(code(&shg(&d, &["scan", "--kind", "u2", "--window", "5,5"])), 0);
    assert!(rows(&d.join("roots_u2.csv")).is_empty());
}

#[test]
fn solve_exit_codes() {
    let d = workdir("solve");
    let o = shg(&d, &["solve-forced", "--omega", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("forced_report.json")).unwrap()).unwrap();
    assert_eq!(rep["iterations"], 1);
    assert!(rep["final_residual"].as_f64().unwrap() <= 1e-8);
    assert!(rep["header"].as_str().unwrap().starts_with("shg "));
    assert!(d.join("forced_solution.csv").exists());

    // a zeta zero from a prior scan
    assert_eq!(code(&shg(&d, &["scan", "--kind", "zeta", "--window", "1,2.5"])), 0);
    let r = rows(&d.join("roots_zeta.csv"));
    let w = format!("{},{}", r[0][1], r[0][2]);
    assert_eq!(code(&shg(&d, &["solve-forced", "--omega", &w])), 2);

    let cfg = d.join("strong.json");
    fs::write(
        &cfg,
        r#"{"geometry":"radial","q":{"type":"constant","value":1.0},
            "chi2":{"type":"constant","value":1.0},"chi1":{"type":"constant","value":10000.0},
            "f":{"type":"poly","coeffs":[0.0,1.0]}}"#,
    )
    .unwrap();
    let o = shg(&d, &["--config", cfg.to_str().unwrap(), "solve-forced", "--omega", "1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_and_config_errors() {
    let d = workdir("verify");
    let o = shg(&d, &["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["seed"], 0);
    assert_eq!(rep["tbound_violations"], 0);

    assert_eq!(code(&shg(&d, &["--n", "2000", "verify"])), 64);
    assert_eq!(code(&shg(&d, &["--n", "101", "verify"])), 64);
    assert_eq!(code(&shg(&d, &["--config", "/nonexistent/profile.json", "verify"])), 64);
    assert_eq!(code(&shg(&d, &["--config", "builtin:nope", "verify"])), 64);
    assert_eq!(code(&shg(&d, &["scan", "--kind", "nope"])), 64);
    assert_eq!(code(&shg(&d, &["frobnicate"])), 64);
    let bad = d.join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&shg(&d, &["--config", bad.to_str().unwrap(), "verify"])), 64);
}

#[test]
fn full_verify_adds_checks() {
    let d = workdir("verify_full");
    let o = shg(&d, &["verify", "--level", "full"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("verify_report.json")).unwrap()).unwrap();
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"gamma_continuity") && names.contains(&"projection_rate"));
    let slope = rep["projection_rate_slope"].as_f64().unwrap();
    assert!((1.7..=2.3).contains(&slope));
}

#[test]
fn outputs_are_deterministic() {
    let d = workdir("determinism");
    let runs = [
        vec!["figures", "--which", "fig2a", "--window", "0,5"],
        vec!["--seed", "3", "probe-blowup", "--omegas", "0.2", "--seeds", "3", "--basis", "12"],
        vec!["--seed", "5", "verify"],
    ];
    let files = ["fig2a.csv", "blowup.csv", "verify_report.json"];
    for (args, file) in runs.iter().zip(files) {
        assert_eq!(code(&shg(&d, args)), 0);
        let a = fs::read(d.join(file)).unwrap();
        assert_eq!(code(&shg(&d, args)), 0);
        assert_eq!(a, fs::read(d.join(file)).unwrap(), "{file}");
    }
}
