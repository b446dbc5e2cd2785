//! Subcommands of the `charfred` binary.
//!
//! Each command returns its exit code and the text destined for stdout;
//! files go to the output directory. Exit codes: 0 ok, 1 configuration or
//! compute error, 2 validation failure, 3 Neumann non-convergence, 4 testbed
//! violation.

pub mod config;

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use charfred_core::characteristics::apply_c_inverse;
use charfred_core::diagnostics::{smoothing_profile, ProfileRequest};
use charfred_core::expr::check_periodicity;
use charfred_core::fredholm::{self, SolveOutcome, SolveReport, TestbedSummary};
use charfred_core::grid::sample;
use charfred_core::model::{validate_spec, Violation, PERIODICITY_SAMPLES, PERIODICITY_TOLERANCE};
use charfred_core::{Error, System, ValidationReport};

pub use config::{Method, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_TESTBED: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    fn fail(code: i32, stderr: impl Into<String>) -> Self {
        Run { code, stdout: String::new(), stderr: stderr.into() }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Spec validation plus periodicity of the right-hand side.
pub fn validation_report(cfg: &RunConfig) -> ValidationReport {
    let mut report = validate_spec(&cfg.spec);
    let (y, t) = (cfg.spec.period_y, cfg.spec.period_t);
    if y > 0.0 && t > 0.0 {
        for (i, e) in cfg.rhs.iter().enumerate() {
            let periodic = check_periodicity(e, y, t, PERIODICITY_SAMPLES, PERIODICITY_TOLERANCE);
            let detail = match periodic {
                Ok(true) => continue,
                Ok(false) => format!("f{} = {e} is not periodic", i + 1),
                Err(err) => format!("f{} = {e}: {err}", i + 1),
            };
            report.violations.push(Violation { rule: "periodicity".into(), detail });
        }
    }
    report.ok = report.violations.is_empty();
    report
}

pub fn cmd_validate(cfg: &RunConfig) -> Run {
    if let Err(e) = cfg.check() {
        return Run::fail(EXIT_CONFIG, e.to_string());
    }
    let report = validation_report(cfg);
    let code = if report.ok { EXIT_OK } else { EXIT_VALIDATION };
    Run { code, stdout: to_json(&report), stderr: String::new() }
}

/// Structural validation shared by `solve` and `diagnose`: violations that
/// leave the operators undefined stop the run, the rest become warnings.
fn build_system(cfg: &RunConfig) -> Result<(System, String), Run> {
    if let Err(e) = cfg.check() {
        return Err(Run::fail(EXIT_CONFIG, e.to_string()));
    }
    let report = validation_report(cfg);
    if report.structural_violations().next().is_some() {
        return Err(Run { code: EXIT_VALIDATION, stdout: to_json(&report), stderr: "invalid spec\n".into() });
    }
    let warnings: String = report.violations.iter().map(|v| format!("warning: {}: {}\n", v.rule, v.detail)).collect();
    match System::new(cfg.spec.clone()) {
        Ok(sys) => Ok((sys, warnings)),
        Err(e) => Err(Run::fail(EXIT_VALIDATION, e.to_string())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManufacturedCheck {
    pub error_sup: f64,
    pub gate: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeJson {
    #[serde(flatten)]
    pub report: SolveReport,
    pub grid: [usize; 3],
    pub unknowns: usize,
    pub update_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manufactured: Option<ManufacturedCheck>,
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    seconds: f64,
}

fn io_fail(e: impl std::fmt::Display) -> Run {
    Run::fail(EXIT_CONFIG, format!("cannot write output: {e}"))
}

/// Solves the configured problem, writing `solution.csv`, `outcome.json`
/// and `timing.json` into `out`.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Run {
    let (sys, warnings) = match build_system(cfg) {
        Ok(v) => v,
        Err(run) => return run,
    };
    let started = Instant::now();
    let outcome = match solve(cfg, &sys) {
        Ok(o) => o,
        Err(Error::NonConvergence { iterations, last_update }) => {
            return Run::fail(
                EXIT_NONCONVERGENCE,
                format!("{warnings}Neumann iteration did not converge: {iterations} iterations, last update {last_update:e}"),
            )
        }
        Err(e) => return Run::fail(EXIT_CONFIG, format!("{warnings}{e}")),
    };
    let seconds = started.elapsed().as_secs_f64();

    let manufactured = match &cfg.manufactured {
        Some(m) => match sample(&m.solution, outcome.u.grid()).and_then(|exact| outcome.u.sub(&exact)) {
            Ok(diff) => {
                let error_sup = diff.sup_norm();
                Some(ManufacturedCheck { error_sup, gate: m.gate, passed: error_sup <= m.gate })
            }
            Err(e) => return Run::fail(EXIT_CONFIG, e.to_string()),
        },
        None => None,
    };
    let json = to_json(&OutcomeJson {
        report: outcome.report(),
        grid: [cfg.grid.nx, cfg.grid.ny, cfg.grid.nt],
        unknowns: cfg.unknowns(),
        update_history: outcome.update_history.clone(),
        manufactured,
    });

    let write = || -> Result<(), Box<dyn std::error::Error>> {
        fs::create_dir_all(out)?;
        outcome.u.write_csv(fs::File::create(out.join("solution.csv"))?)?;
        fs::write(out.join("outcome.json"), &json)?;
        fs::write(out.join("timing.json"), to_json(&Timing { seconds }))?;
        Ok(())
    };
    if let Err(e) = write() {
        return io_fail(e);
    }
    Run { code: EXIT_OK, stdout: json, stderr: warnings }
}

fn solve(cfg: &RunConfig, sys: &System) -> charfred_core::Result<SolveOutcome> {
    let grid = cfg.grid().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let f = sample(&cfg.rhs, &grid)?;
    let s = &cfg.solver;
    match s.method {
        Method::Auto => fredholm::solve_auto(sys, &f, s.tol, s.max_iter),
        Method::Neumann => fredholm::solve_neumann(sys, &f, s.tol, s.max_iter),
        Method::Discrete => fredholm::solve_discrete(sys, &f),
    }
}

/// `C⁻¹ f` for the configured right-hand side, bypassing the solvers.
pub fn inverse_only(cfg: &RunConfig) -> charfred_core::Result<charfred_core::GridFunction> {
    let sys = System::new(cfg.spec.clone())?;
    let grid = cfg.grid().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    apply_c_inverse(&sys, &sample(&cfg.rhs, &grid)?)
}

pub fn default_profile() -> ProfileRequest {
    ProfileRequest { powers: vec![1, 2, 3], frequencies: vec![1.0, 2.0], shifts: Vec::new(), input_component: None }
}

/// Writes `diagnostics.csv` and `diagnostics.json` into `out`.
pub fn cmd_diagnose(cfg: &RunConfig, out: &Path) -> Run {
    let (sys, warnings) = match build_system(cfg) {
        Ok(v) => v,
        Err(run) => return run,
    };
    let req = cfg.diagnostics.clone().unwrap_or_else(default_profile);
    let report = match cfg.grid() {
        Ok(grid) => smoothing_profile(&sys, &grid, &req).map_err(|e| e.to_string()),
        Err(e) => Err(e.to_string()),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return Run::fail(EXIT_CONFIG, format!("{warnings}{e}")),
    };
    let json = to_json(&report);
    let write = || -> Result<(), Box<dyn std::error::Error>> {
        fs::create_dir_all(out)?;
        report.write_csv(fs::File::create(out.join("diagnostics.csv"))?)?;
        fs::write(out.join("diagnostics.json"), &json)?;
        Ok(())
    };
    if let Err(e) = write() {
        return io_fail(e);
    }
    Run { code: EXIT_OK, stdout: json, stderr: warnings }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestbedArgs {
    pub count: usize,
    pub max_dim: usize,
    pub powers: Vec<usize>,
    pub crafted: usize,
    pub seed: u64,
}

impl Default for TestbedArgs {
    fn default() -> Self {
        TestbedArgs { count: 500, max_dim: 8, powers: vec![2, 3, 4], crafted: 20, seed: 0 }
    }
}

pub fn cmd_testbed(args: &TestbedArgs) -> Run {
    if args.max_dim < 2 || args.powers.is_empty() || args.powers.contains(&0) {
        return Run::fail(EXIT_CONFIG, "testbed needs max_dim ≥ 2 and positive powers");
    }
    let summary: TestbedSummary =
        fredholm::testbed(args.count, args.max_dim, &args.powers, args.crafted, args.seed);
    let code = if summary.violations.is_empty() { EXIT_OK } else { EXIT_TESTBED };
    Run { code, stdout: to_json(&summary), stderr: String::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "spec": {
            "n": 3, "k": 2, "l": 1,
            "a1": [[1.0]], "a2": [[1.0]], "a3": [[1.0]],
            "alpha": [0.0, 0.0, 0.0], "beta": [0.0, 0.0, 0.0],
            "period_y": 1.0, "period_t": 1.0,
            "gamma": ["0", "0", "0"],
            "b": [["0", "0", "0"], ["0", "0", "0"], ["0", "0", "0"]]
        },
        "rhs": ["1", "1", "1"],
        "grid": {"nx": 4, "ny": 4, "nt": 4}
    }"#;

    #[test]
    fn minimal_config_validates() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.solver.method, Method::Auto);
        let run = cmd_validate(&cfg);
        assert_eq!(run.code, EXIT_OK, "{}", run.stdout);
    }

    #[test]
    fn schema_is_required() {
        let text = MINIMAL.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(RunConfig::from_json(&text), Err(config::ConfigError::Schema(2))));
        let text = MINIMAL.replace("\"schema\": 1,", "");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn parse_errors_are_config_errors() {
        let text = MINIMAL.replace("\"rhs\": [\"1\", \"1\", \"1\"]", "\"rhs\": [\"1 +\", \"1\", \"1\"]");
        assert!(matches!(RunConfig::from_json(&text), Err(config::ConfigError::Json(_))));
    }

    #[test]
    fn aperiodic_rhs_is_a_violation() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.rhs[1] = charfred_core::parse("y").unwrap();
        let run = cmd_validate(&cfg);
        assert_eq!(run.code, EXIT_VALIDATION);
        assert!(run.stdout.contains("periodicity"));
    }

    #[test]
    fn caps_are_enforced() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.grid = config::GridConfig { nx: 200, ny: 64, nt: 64 };
        assert_eq!(cmd_validate(&cfg).code, EXIT_CONFIG);
    }

    #[test]
    fn testbed_exit_codes() {
        let empty = TestbedArgs { count: 0, crafted: 0, ..Default::default() };
        let run = cmd_testbed(&empty);
        assert_eq!(run.code, EXIT_OK);
        let summary: serde_json::Value = serde_json::from_str(&run.stdout).unwrap();
        assert_eq!(summary["rows"].as_array().unwrap().len(), 0);
        assert_eq!(cmd_testbed(&TestbedArgs { powers: vec![], ..Default::default() }).code, EXIT_CONFIG);
    }
}
