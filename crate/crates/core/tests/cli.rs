use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_floquet-delta"));
    c.env_remove("FLOQUET_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// (echo header, column names, rows)
fn table(text: &str) -> (serde_json::Value, Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().strip_prefix("# ").expect("echo header");
    let echo: serde_json::Value = serde_json::from_str(header).unwrap();
    let cols = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (echo, cols, rows)
}

#[test]
fn psieval_grid_has_39_rows() {
    let out = run(&["psieval", "--omega", "2", "--r", "0.1", "--x", "0", "--t", "1:20:0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let (echo, cols, rows) = table(&stdout(&out));
    assert_eq!(echo["schema"], 1);
    assert_eq!(echo["command"], "psieval");
    assert_eq!(cols, ["x", "t", "re_psi", "im_psi", "re_gamow", "im_gamow", "abs_cut", "abs_f", "status"]);
    assert_eq!(rows.len(), 39);
    assert_eq!(rows[0][1], "1.0");
    assert_eq!(rows[38][1], "20.0");
    assert!(rows.iter().all(|r| r[8] == "ok"));
}

#[test]
fn resfind_small_r_reports_one_visible_zero() {
    let out = run(&["resfind", "--omega", "2", "--r", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["status"], "ok");
    let res = v["resonances"].as_array().unwrap();
    assert_eq!(res.len(), 1);
    assert_eq!(res[0]["visible"], true);
    assert_eq!(res[0]["sheet_id"], "usual");
    assert!(res[0]["recurrence_residual"].as_f64().unwrap() <= 1e-8);
    let g = res[0]["gamma"].as_f64().unwrap();
    assert!((g - 0.05f64.powi(2)).abs() < 0.1 * 0.05f64.powi(2));
}

#[test]
fn resfind_exit_codes() {
    assert_eq!(run(&["resfind", "--omega", "2", "--r", "-0.1"]).status.code(), Some(1));
    assert_eq!(run(&["resfind", "--omega", "0", "--r", "0.1"]).status.code(), Some(1));
    assert_eq!(run(&["resfind", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["resfind", "--omega", "2", "--r", "0.1", "--sheet", "theta=1.5707963267948966"]).status.code(), Some(1));
    // no zero on this sheet at r = 1
    let none = run(&["resfind", "--omega", "2", "--r", "1.0", "--sheet", "flip:0"]);
    assert_eq!(none.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&none)).unwrap();
    assert_eq!(v["status"], "none");
    // decoupled modes: no zero near this guess
    assert_eq!(run(&["resfind", "--omega", "2", "--r", "0", "--guess", "5,5"]).status.code(), Some(2));
}

#[test]
fn resfind_guess_refines_the_same_zero() {
    let full: serde_json::Value = serde_json::from_str(&stdout(&run(&["resfind", "--omega", "2", "--r", "0.3"]))).unwrap();
    let z = &full["resonances"][0]["z_star"];
    let guess = format!("{},{}", z[0].as_f64().unwrap() + 1e-3, z[1].as_f64().unwrap());
    let out = run(&["resfind", "--omega", "2", "--r", "0.3", "--guess", &guess]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let w = &v["resonances"][0]["z_star"];
    assert!((w[0].as_f64().unwrap() - z[0].as_f64().unwrap()).abs() < 1e-10);
    assert!((w[1].as_f64().unwrap() - z[1].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = ["sweep", "--omega", "2", "--r-start", "0.1", "--r-end", "0.6", "--r-steps", "10", "--track"];
    let a = bin().args(args).env("FLOQUET_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("FLOQUET_THREADS", "4").output().unwrap();
    let c = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = bin().args(["selftest"]).env("FLOQUET_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_echo_reproduces_the_run() {
    let first = run(&["sweep", "--omega", "1.5", "--r-start", "0.2", "--r-end", "0.4", "--r-steps", "4", "--sheets", "usual|flip:0"]);
    assert_eq!(first.status.code(), Some(0));
    let text = stdout(&first);
    let echo = scratch("echo.cfg");
    std::fs::write(&echo, text.lines().next().unwrap()).unwrap();
    let again = run(&["--config", echo.to_str().unwrap(), "sweep"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout(&again), text);
}

#[test]
fn ini_config_is_merged_under_flags() {
    let ini = scratch("run.ini");
    std::fs::write(&ini, "# comment\n[common]\nomega = 2\n\n[sweep]\nr_start = 0.1\nr_end = 0.2\nr_steps = 1\nsheets = usual\n").unwrap();
    let out = run(&["--config", ini.to_str().unwrap(), "sweep", "--r-end", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let (echo, _, rows) = table(&stdout(&out));
    assert_eq!(echo["config"]["omega"], 2.0);
    assert_eq!(echo["config"]["r-end"], 0.3);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "0.3");
}

#[test]
fn out_flag_and_json_format() {
    let path = scratch("scan.json");
    let out = run(&[
        "omegascan", "--r", "0.1", "--omega-start", "1.2", "--omega-end", "2.0", "--points", "3", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "omegascan");
    assert_eq!(v["schema"], 1);
}

#[test]
fn omegascan_columns_and_photon_estimate() {
    let out = run(&["omegascan", "--r", "0.1", "--omega-start", "1.5", "--omega-end", "3.0", "--points", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, cols, rows) = table(&stdout(&out));
    assert_eq!(cols, ["omega", "re_z", "im_z", "gamma", "m_estimate", "status"]);
    let visible: Vec<&Vec<String>> = rows.iter().filter(|r| r[5] == "ok").collect();
    assert!(!visible.is_empty());
    // |Re z| ~ r^2 for omega > 1, so m_estimate ~ 0
    assert!(visible.iter().any(|r| r[4].parse::<f64>().unwrap().abs() < 0.2));
}

#[test]
fn barrier_sweep_routes_through_the_transform() {
    let out = run(&["sweep", "--omega", "2", "--potential", "barrier", "--r-start", "0.05", "--r-end", "0.15", "--r-steps", "2", "--sheets", "usual"]);
    assert_eq!(out.status.code(), Some(0));
    let (echo, _, rows) = table(&stdout(&out));
    assert_eq!(echo["config"]["potential"], "barrier");
    assert!(rows.iter().all(|r| r[9] == "none"));
}

#[test]
fn tdse_writes_trajectory_and_survival() {
    let surv = scratch("survival.csv");
    let out = run(&[
        "tdse", "--omega", "2", "--r", "0.2", "--t-end", "1", "--l", "10", "--dx", "0.05", "--dt", "0.0025", "--record-every",
        "0.25", "--x-stride", "20", "--survival", surv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (echo, cols, rows) = table(&stdout(&out));
    assert_eq!(cols, ["t", "x", "re_psi", "im_psi"]);
    assert!(echo["max_step_drift"].is_number());
    let times: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(times.len(), 5);
    let (_, scols, srows) = table(&std::fs::read_to_string(&surv).unwrap());
    assert_eq!(scols, ["t", "P_ab"]);
    assert_eq!(srows.len(), 5);
}

#[test]
fn psi0_profiles_from_flags() {
    let knots = scratch("knots.csv");
    std::fs::write(&knots, "x,re,im\n-1,0,0\n0,1,0\n1,0,0\n").unwrap();
    for extra in [
        vec!["--psi0", "poly_bump", "--psi0-support", "2"],
        vec!["--psi0", "truncated_exponential", "--psi0-rate", "1.5"],
        vec!["--psi0", "piecewise_cubic", "--psi0-knots", knots.to_str().unwrap()],
        vec!["--psi0", "exp:1:8"],
    ] {
        let mut args = vec!["psieval", "--omega", "2", "--r", "0.1", "--t", "2"];
        args.extend(extra.iter());
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(run(&["psieval", "--omega", "2", "--r", "0.1", "--t", "2", "--psi0", "piecewise_cubic"]).status.code(), Some(1));
    assert_eq!(run(&["psieval", "--omega", "2", "--r", "0.1", "--t", "2", "--psi0", "wobble"]).status.code(), Some(1));
}

#[test]
fn selftest_fast_passes() {
    let out = run(&["selftest", "--level", "fast"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL"));
}
