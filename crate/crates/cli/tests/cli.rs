use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relnash_cli::commands::{EquilibriumOutput, MeanFieldOutput, SimulateOutput, VerifyOutput};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn relnash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relnash")).args(args).output().expect("binary runs")
}

fn run_to(cmd: &str, cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let c = config(cfg);
    let mut args = vec![cmd, "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    relnash(&args)
}

/// Parses with the declared output type and checks re-encoding reproduces the file.
fn revalidate<T: DeserializeOwned + Serialize>(path: &Path) -> T {
    let text = std::fs::read_to_string(path).unwrap();
    let value: T = serde_json::from_str(&text).expect("output matches its schema");
    assert_eq!(serde_json::to_string_pretty(&value).unwrap() + "\n", text);
    value
}

#[test]
fn closed_form_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq.json");
    assert!(run_to("equilibrium", "bs_exp_n2.json", &out, &[]).status.success());
    let eq: EquilibriumOutput = revalidate(&out);
    for phi in &eq.result.phi_star {
        assert!((phi[0] - 2.5).abs() <= 1e-12);
    }
}

#[test]
fn zero_weights_leave_single_agent_optima() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq.json");
    assert!(run_to("equilibrium", "bs_theta_zero.json", &out, &[]).status.success());
    let eq: EquilibriumOutput = revalidate(&out);
    assert_eq!(eq.result.phi_star, eq.result.psi_star);
}

#[test]
fn crr_classical_amount() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq.json");
    assert!(run_to("equilibrium", "crr_classical.json", &out, &[]).status.success());
    let eq: EquilibriumOutput = revalidate(&out);
    assert!((eq.result.phi_star[0][0] - 3f64.ln() / 1.5).abs() <= 1e-12);
}

#[test]
fn simulate_is_deterministic_and_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.csv"));
    let extra = ["--paths", "20000", "--seed", "5"];
    assert!(run_to("simulate", "bs_exp_n2.json", &a, &extra).status.success());
    assert!(run_to("simulate", "bs_exp_n2.json", &b, &extra).status.success());
    let mut csv_args = extra.to_vec();
    csv_args.extend(["--format", "csv"]);
    assert!(run_to("simulate", "bs_exp_n2.json", &c, &csv_args).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let sim: SimulateOutput = revalidate(&a);
    let mut rows = csv::Reader::from_path(&c).unwrap();
    let mut seen = 0;
    for rec in rows.records() {
        let rec = rec.unwrap();
        let agent: usize = rec[0].parse().unwrap();
        let value: f64 = rec[2].parse().unwrap();
        let report = &sim.report.agents[agent];
        let expected = match &rec[1] {
            "expected_utility" => report.expected_utility.as_ref().unwrap().mean,
            "terminal_wealth" => report.terminal_wealth.mean,
            "loss_probability" => report.loss_probability.as_ref().unwrap().mean,
            "closed_form_terminal_wealth" => report.closed_form.as_ref().unwrap().expected_terminal_wealth,
            _ => continue,
        };
        assert_eq!(value, expected, "{}", &rec[1]);
        seen += 1;
    }
    assert_eq!(seen, 8);
}

#[test]
fn equilibrium_csv_matches_json() {
    let dir = tempfile::tempdir().unwrap();
    let (j, c) = (dir.path().join("e.json"), dir.path().join("e.csv"));
    assert!(run_to("equilibrium", "levy_exp.json", &j, &[]).status.success());
    assert!(run_to("equilibrium", "levy_exp.json", &c, &["--format", "csv"]).status.success());
    let eq: EquilibriumOutput = revalidate(&j);
    for rec in csv::Reader::from_path(&c).unwrap().records() {
        let rec = rec.unwrap();
        let (i, k): (usize, usize) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        assert_eq!(rec[2].parse::<f64>().unwrap(), eq.result.psi_star[i][k]);
        assert_eq!(rec[3].parse::<f64>().unwrap(), eq.result.phi_star[i][k]);
    }
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let ok = run_to("verify", "crr_n4.json", &out, &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: VerifyOutput = revalidate(&out);
    assert!(v.pass && v.exhaustive && v.welfare.unwrap().pass);

    let bad = run_to("verify", "crr_n4_perturbed.json", &out, &[]);
    assert_eq!(bad.status.code(), Some(3));
    let v: VerifyOutput = revalidate(&out);
    assert!(!v.agents[0].pass);

    assert_eq!(run_to("verify", "crr_classical.json", &out, &[]).status.code(), Some(0));
}

#[test]
fn invalid_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text =
        std::fs::read_to_string(config("bs_exp_n2.json")).unwrap().replacen("\"theta\": 1.0", "\"theta\": 2.0", 1);
    std::fs::write(&cfg, text).unwrap();
    let out = relnash(&["equilibrium", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bad.json:4: agents[0]"), "{msg}");

    std::fs::write(&cfg, "{\n  \"market\": \n}").unwrap();
    let out = relnash(&["equilibrium", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json:3:"));
}

#[test]
fn exhaustive_capacity_guard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.json");
    let text =
        std::fs::read_to_string(config("crr_classical.json")).unwrap().replace("\"steps\": 4}", "\"steps\": 30}");
    std::fs::write(&cfg, text).unwrap();
    let out = relnash(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

#[test]
fn meanfield_two_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mf.json");
    assert!(run_to("meanfield", "meanfield_two_atoms.json", &out, &[]).status.success());
    let m: MeanFieldOutput = revalidate(&out);
    assert!((m.equilibrium.phi_time0[0][0] - 3.125).abs() <= 1e-10);
    assert!((m.equilibrium.phi_time0[1][0] - 4.375).abs() <= 1e-10);
    assert!(m.fixed_point.unwrap().residual <= 1e-10);
}

#[test]
fn meanfield_csv_writes_convergence_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mf.csv");
    assert!(run_to("meanfield", "meanfield_sampled.json", &out, &["--format", "csv"]).status.success());
    let curve = std::fs::read_to_string(dir.path().join("mf.convergence.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(curve.starts_with("n,mean_error,std_error"));
}

#[test]
fn path_export_has_one_row_per_path_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let (out, paths) = (dir.path().join("s.json"), dir.path().join("paths.csv"));
    let status = run_to("simulate", "crr_classical.json", &out, &["--export-paths", paths.to_str().unwrap()]).status;
    assert!(status.success());
    let text = std::fs::read_to_string(paths).unwrap();
    assert_eq!(text.lines().count(), 1 + 16 * 5);
    assert!(text.starts_with("path,step,time,S1,weight"));
}
