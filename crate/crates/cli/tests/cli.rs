use std::path::Path;
use std::process::{Command, Output};

use frictionbem::run::{read_records, record_rate};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frictionbem")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const ZERO_FORCE: &str = r#"
name = "unloaded"

[geometry]
corners = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]

[[geometry.sides]]
labels = ["contact"]

[[geometry.sides]]
labels = ["neumann"]

[[geometry.sides]]
labels = ["dirichlet"]

[[geometry.sides]]
labels = ["neumann"]

[material]
e = 10.0
nu = 0.3

[contact]
gap = 0.0

[contact.friction]
law = "tresca"
threshold = 0.5

[discretization]
elements_per_side = 2
"#;

#[test]
fn solve_writes_csv_and_rates_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&["solve", "coulomb2d", "--max-steps", "4", "--out", out, "--approx-error"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("coulomb2d-uniform.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# frictionbem run v1"));
    assert_eq!(
        lines.next(),
        Some(
            "step,dof_u,dof_phi,dof_lambda,eta_total,eta_n,eta_c,eta_v,eta_w,eta_k,eta_lambda_n,eta_slip,\
             eta_compl,eta_pen,eta_stick,eta_align,newton_iters,merit,seconds,approx_error"
        )
    );
    let records = read_records(&csv).unwrap();
    assert_eq!(records.len(), 4);
    let o = bin(&["rates", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    let line = s.lines().find(|l| l.starts_with("eta_total ")).unwrap();
    let printed: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    let expected = record_rate(&records, |r| Some(r.eta_total), None).unwrap();
    assert!((printed - expected).abs() < 1e-12);
    assert!(s.lines().any(|l| l.starts_with("approx_error ")));
}

#[test]
fn zero_force_config_gives_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("unloaded.toml");
    std::fs::write(&cfg, ZERO_FORCE).unwrap();
    let o = bin(&["solve", cfg.to_str().unwrap(), "--max-steps", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_records(&dir.path().join("unloaded-uniform.csv")).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].eta_total, 0.0);
    assert_eq!(r[0].newton_iters, 1);
    assert_eq!(r[0].merit, 0.0);
}

fn csv_without_timing(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() > 18 {
                f.remove(18);
            }
            f.join(",")
        })
        .collect()
}

#[test]
fn identical_configs_give_identical_records() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = bin(&["solve", "tresca2d", "--mode", "h-adaptive", "--max-steps", "4", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    let name = "tresca2d-h-adaptive.csv";
    assert_eq!(csv_without_timing(&a.path().join(name)), csv_without_timing(&b.path().join(name)));
}

#[test]
fn sweep_gamma_reports_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "sweep-gamma",
        "tresca2d",
        "--values",
        "1e-6,1e-3",
        "--elements-per-side",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("tresca2d-gamma-sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn bad_input_fails_cleanly() {
    let o = bin(&["solve", "no-such-benchmark.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let o = bin(&["solve", "tresca2d", "--mode", "p-adaptive"]);
    assert!(!o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("x.csv");
    std::fs::write(&bad, "step,dof\n1,2\n").unwrap();
    assert_eq!(bin(&["rates", bad.to_str().unwrap()]).status.code(), Some(1));
}
