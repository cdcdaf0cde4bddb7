use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use microgrid_core::case::synthetic_year;
use microgrid_core::config::Experiment;
use microgrid_core::scenario::TypicalYear;

fn case_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases/island_synthetic")
}

/// The bundled case with a small budget, written next to an absolute data path.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = fs::read_to_string(case_dir().join("case.toml"))
        .unwrap()
        .replace(
            "data = \"tmy.csv\"",
            &format!("data = {:?}", case_dir().join("tmy.csv").to_str().unwrap()),
        )
        .replace("max_iterations = 500", "max_iterations = 20")
        .replace("scenarios = 100", "scenarios = 3")
        .replace("replicates = 10", "replicates = 2")
        .replace("scenarios = 20", "scenarios = 2")
        .replace("stride = 20", "stride = 10");
    let path = dir.join("case.toml");
    fs::write(&path, format!("{text}\n{extra}")).unwrap();
    path
}

fn microgrid(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microgrid"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("MICROGRID_SEED")
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_weather_matches_generator() {
    let file = TypicalYear::read_csv(&case_dir().join("tmy.csv")).unwrap();
    assert_eq!(file, synthetic_year());
}

#[test]
fn bundled_case_loads() {
    let exp = Experiment::load(&case_dir().join("case.toml")).unwrap();
    assert_eq!(exp.config.seed, 42);
    assert_eq!(exp.config.optimizer.budget_evaluations(), 1000);
    assert_eq!(exp.tmy.load.len(), 8760);
}

#[test]
fn simulate_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("sim");
    let o = microgrid(&cfg, &out, &["simulate", "--design", "2000,2000,3000,2000,0,0", "--scenarios", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..2 {
        let trace = out.join(format!("trace_{i:03}.csv"));
        assert!(header(&trace).starts_with("hour,load_kwh,pv_gen_kwh"));
        assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 8761);
    }
    assert!(!out.join("trace_002.csv").exists());
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["scenarios"], 2);
    let r = summary["mean_r_rp"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r));
}

#[test]
fn evaluate_prints_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("eval");
    let o = microgrid(&cfg, &out, &["evaluate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, json(&out.join("breakdown.json")));
    let b = &printed["breakdown"];
    assert_eq!(b["scenarios"], 3);
    assert!(b["loss"].as_f64().unwrap() >= b["npc"].as_f64().unwrap());
}

#[test]
fn seed_flag_and_environment_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let flag = microgrid(&cfg, &dir.path().join("a"), &["--seed", "7", "evaluate"]);
    let env = Command::new(env!("CARGO_BIN_EXE_microgrid"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("b"))
        .arg("evaluate")
        .env("MICROGRID_SEED", "7")
        .output()
        .unwrap();
    let default = microgrid(&cfg, &dir.path().join("c"), &["evaluate"]);
    assert!(flag.status.success() && env.status.success());
    assert_eq!(flag.stdout, env.stdout);
    assert_ne!(flag.stdout, default.stdout);
}

#[test]
fn optimize_mspsa_writes_trace_and_design() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("opt");
    let o = microgrid(&cfg, &out, &["optimize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,pv_kw,wt_kw,bss_kwh,mt_kw,t_rp,t_er,a_k,c_k"));
    assert_eq!(trace.lines().count(), 1 + 20);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["optimizer"], "mspsa");
    assert_eq!(summary["evaluations"], 40);
    assert_eq!(summary["incentives"], true);
    let design = json(&out.join("design.json"));
    assert_eq!(design, summary["final_design"]);
    assert_eq!(design["pv_kw"].as_f64().unwrap().fract(), 0.0);
}

#[test]
fn optimize_with_zero_budget_keeps_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("max_iterations = 20", "max_iterations = 0");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("opt");
    let o = microgrid(&cfg, &out, &["optimize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["evaluations"], 0);
    assert_eq!(summary["final_design"], summary["initial_design"]);
    assert_eq!(summary["initial_loss"], summary["final_loss"]);
}

#[test]
fn optimize_without_incentives_pins_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("opt");
    let o = microgrid(&cfg, &out, &["optimize", "--no-incentives"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["incentives"], false);
    assert_eq!(summary["final_design"]["t_rp"], 0.0);
    assert_eq!(summary["final_design"]["t_er"], 0.0);
    assert_eq!(summary["final_breakdown"]["subsidy_rp"], 0.0);
}

#[test]
fn optimize_pso_counts_whole_generations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("kind = \"mspsa\"", "kind = \"pso\"");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("opt");
    let o = microgrid(&cfg, &out, &["optimize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(header(&out.join("trace.csv")).starts_with("generation,evaluations,gbest_loss_usd"));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["optimizer"], "pso");
    assert_eq!(summary["evaluations"], 40);
}

#[test]
fn compare_writes_curves_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("cmp");
    let o = microgrid(&cfg, &out, &["compare", "--scenarios", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap(), "evals,loss_mean,loss_std,optimizer");
    assert_eq!(curves.lines().count() - 1, 2 * (40 / 10 + 1));
    assert_eq!(fs::read_to_string(out.join("replicates.csv")).unwrap().lines().count(), 1 + 4);
    let incentives = fs::read_to_string(out.join("incentives.csv")).unwrap();
    assert!(incentives.starts_with("case,pv_kw,wt_kw,bss_kwh,mt_kw,t_rp,t_er,npc_usd"));
    assert_eq!(incentives.lines().count(), 3);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        fs::read_to_string(out.join("summary.txt")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let cfg = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("discount_rate = 0.1", "discount_rate = -0.5");
    fs::write(&cfg, text).unwrap();
    let o = microgrid(&cfg, &out, &["evaluate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("discount_rate"));

    let o = microgrid(&dir.path().join("missing.toml"), &out, &["evaluate"]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = small_config(dir.path(), "");
    let o = microgrid(&cfg, &out, &["evaluate", "--design", "1,2,3"]);
    assert_eq!(o.status.code(), Some(1));
    let o = microgrid(&cfg, &out, &["evaluate", "--design", "99999,0,0,0,0,0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = microgrid(&cfg, &out, &["evaluate", "--scenarios", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn output_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = microgrid(&cfg, &blocker, &["evaluate"]);
    assert_eq!(o.status.code(), Some(2));
}
