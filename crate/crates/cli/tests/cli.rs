use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dtoda(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtoda"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_config(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let path = configs().join(config);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    dtoda(&args, out)
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Header and numeric columns of a CSV written by the tool.
struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Self {
        let mut r = csv::Reader::from_path(path).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect();
        Self { header, rows }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    fn text(&self, name: &str) -> Vec<String> {
        let i = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[i].clone()).collect()
    }
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn circle_casimir_tracks_x() {
    let tmp = TempDir::new().unwrap();
    let o = run_config("simulate", "circle.toml", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Csv::read(&tmp.path().join("moments.csv"));
    for (x, q) in m.col("x").iter().zip(m.col("re_q")) {
        assert!((q - x - 1.0).abs() < 1e-8);
    }
    assert_eq!(m.col("x").last(), Some(&3.0));
    let man = manifest(tmp.path());
    assert_eq!(man["status"], "ok");
    assert_eq!(man["files"].as_array().unwrap().len(), 3);
}

#[test]
fn ellipse_area_grows_at_rate_pi_and_methods_agree() {
    let tmp = TempDir::new().unwrap();
    let o = run_config("simulate", "ellipse.toml", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = Csv::read(&tmp.path().join("residuals.csv"));
    let x = r.col("x");
    let a = r.col("area");
    for i in 1..x.len() {
        assert!(((a[i] - a[i - 1]) / (x[i] - x[i - 1]) - PI).abs() < 1e-6);
    }
    assert!(r.col("method_distance").iter().all(|d| *d < 1e-8));
    assert!(r.col("gp_residual").iter().all(|d| *d < 1e-9));
    let b = Csv::read(&tmp.path().join("boundary.csv"));
    assert_eq!(b.header, ["x", "phi", "re_z", "im_z"]);
    assert_eq!(b.rows.len(), 101 * 64);
}

#[test]
fn logarithmic_flow_moves_one_action() {
    let tmp = TempDir::new().unwrap();
    let o = run_config("flows", "log_flows.toml", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let a = Csv::read(&tmp.path().join("actions.csv"));
    let flows = a.text("flow");
    let tau = a.col("tau");
    let names: Vec<String> = a
        .header
        .iter()
        .filter(|h| h.starts_with("re_") || h.starts_with("im_"))
        .cloned()
        .collect();
    // flow 0 is L1, flow 1 is Lbar0
    for (flow, moving, sign) in [("0", "re_i1", 1.0), ("1", "re_ibar0", -1.0)] {
        let rows: Vec<usize> = (0..flows.len()).filter(|&i| flows[i] == flow).collect();
        let (first, last) = (rows[0], *rows.last().unwrap());
        let dt = tau[last] - tau[first];
        for n in &names {
            let c = a.col(n);
            let slope = (c[last] - c[first]) / dt;
            let expect = if n == moving { sign } else { 0.0 };
            assert!((slope - expect).abs() < 1e-5, "flow {flow} column {n}: {slope}");
        }
    }
    let leak = Csv::read(&tmp.path().join("leakage.csv"));
    assert!(leak.col("leak_norm").iter().all(|l| *l < 1e-9));
    assert!(tmp.path().join("trajectory_0_L1.csv").exists());
}

#[test]
fn standard_flow_on_a_rational_map_is_refused() {
    let tmp = TempDir::new().unwrap();
    let o = run_config("flows", "rational_forbidden.toml", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(5));
    let leak = Csv::read(&tmp.path().join("leakage.csv"));
    let labels = leak.text("label");
    let norms = leak.col("leak_norm");
    let h2: Vec<f64> = (0..labels.len())
        .filter(|&i| labels[i] == "H2")
        .map(|i| norms[i])
        .collect();
    assert_eq!(h2.len(), 1);
    assert!(h2[0] > 1e-3);
    let man = manifest(tmp.path());
    assert_eq!(man["exit_code"], 5);
    assert_eq!(man["status"], "error");
}

#[test]
fn polynomial_flow_boundary() {
    let tmp = TempDir::new().unwrap();
    let o = run_config("flows", "blob.toml", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(5));
    assert!(tmp.path().join("trajectory_0_H3.csv").exists());
    assert!(!tmp.path().join("trajectory_1_H4.csv").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    for dir in [&a, &b] {
        assert_eq!(
            run_config("simulate", "random.toml", dir.path(), &[]).status.code(),
            Some(0)
        );
    }
    assert_eq!(
        run_config("simulate", "random.toml", c.path(), &["--seed", "4"])
            .status
            .code(),
        Some(0)
    );
    for f in ["boundary.csv", "moments.csv", "residuals.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        assert_ne!(x, fs::read(c.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest(c.path())["seed"], 4);
}

#[test]
fn unbalanced_charges_are_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[map]\nkind = \"logarithmic\"\nr = 1\nu = 0.1\nbranches = [{ a = \"1\", w = [0.2, 0.1] }, { a = \"-1/2\", w = [0.4, -0.2] }]\n",
    );
    let out = tmp.path().join("out");
    for cmd in ["verify", "simulate"] {
        let o = dtoda(&[cmd, "--config", &cfg], &out);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("line 5") && err.contains("map.branches"), "{err}");
        let man = manifest(&out);
        assert_eq!(man["exit_code"], 2);
        assert!(man["config"].is_string());
    }
}

#[test]
fn config_problems_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = dtoda(&["simulate"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("manifest.json").exists());
    let cfg = write_config(
        tmp.path(),
        "[map]\nfixture = \"blob\"\n[evolution]\nx_end = 1\nsteps = \"many\"\n",
    );
    let o = dtoda(&["simulate", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
    let o = dtoda(&["flows", "--config", &cfg, "--tol", "-1"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cusp_exits_with_code_3_and_keeps_the_partial_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[map]\nfixture = \"log_one\"\n[evolution]\nx_end = 0.3\nsteps = 60\n",
    );
    let out = tmp.path().join("out");
    let o = dtoda(&["simulate", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let r = Csv::read(&out.join("residuals.csv"));
    assert!(!r.rows.is_empty() && r.rows.len() < 61);
    assert_eq!(manifest(&out)["exit_code"], 3);
}

#[test]
fn newton_failure_exits_with_code_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[map]\nfixture = \"blob\"\n[evolution]\nx_end = 0.1\nsteps = 2\nmethod = \"newton\"\n[tolerances]\nnewton_iterations = 1\n",
    );
    let out = tmp.path().join("out");
    let o = dtoda(&["simulate", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn moments_closed_forms_match_contours() {
    for config in ["blob.toml", "log_flows.toml"] {
        let tmp = TempDir::new().unwrap();
        assert_eq!(run_config("moments", config, tmp.path(), &[]).status.code(), Some(0));
        let c = Csv::read(&tmp.path().join("moments_check.csv"));
        assert!(c.col("abs_diff").iter().all(|d| *d < 1e-9));
    }
}

#[test]
fn bihamiltonian_flows_agree_and_converge() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        run_config("bihamiltonian", "bihamiltonian.toml", tmp.path(), &[])
            .status
            .code(),
        Some(0)
    );
    let t = Csv::read(&tmp.path().join("bihamiltonian.csv"));
    let points = t.col("points");
    let worst: Vec<f64> = t
        .col("linear")
        .iter()
        .zip(t.col("quadratic"))
        .map(|(a, b)| a.max(b))
        .collect();
    assert!(worst.iter().all(|w| *w < 1e-6));
    let coarse = worst
        .iter()
        .zip(&points)
        .filter(|p| *p.1 == 256.0)
        .map(|p| *p.0)
        .fold(0.0, f64::max);
    let fine = worst
        .iter()
        .zip(&points)
        .filter(|p| *p.1 == 512.0)
        .map(|p| *p.0)
        .fold(0.0, f64::max);
    assert!(coarse >= 4.0 * fine);
}

#[test]
fn verify_battery_passes_and_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let o = dtoda(&["verify", "--seed", "2"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    }
    let x = fs::read(a.path().join("verify.csv")).unwrap();
    assert_eq!(x, fs::read(b.path().join("verify.csv")).unwrap());
    let v = Csv::read(&a.path().join("verify.csv"));
    assert_eq!(v.rows.len(), 11);
    assert!(v.text("status").iter().all(|s| s == "pass"));
}
