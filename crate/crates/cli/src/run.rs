//! Command dispatch and result files.

use std::fs;
use std::path::{Path, PathBuf};

use branch_exponent_core::exponents::{brw_speed, speed_equation_residual, BrwSpeed};
use branch_exponent_core::mc::{
    enumerate_mean, estimate_ez, lattice_dp_ez, ld_grid, simulate_brw, sub_seed, BrwOptions,
    BrwSnapshot, CountResult, EnumerateOptions, LdOptions, ReplicaRunner, DEFAULT_BUDGET,
};
use branch_exponent_core::spectral::PERRON_TOL;
use branch_exponent_core::{
    analyze, check_conditions, AdmissibilityReport, Assumption, Error as CoreError, ExponentReport,
    Regime, SpectralCurve,
};
use serde::Serialize;

use crate::config::{Command, RunConfig, SimulateMethod};
use crate::error::{CliError, Result};
use crate::runner::Parallel;
use crate::verify::verify;

pub const BUDGET_ENV: &str = "BRANCH_EXPONENT_BUDGET";
const LD_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    /// Particle-step / node budget for tree and BRW simulations.
    pub budget: u64,
    /// Overrides the config's output directory.
    pub output: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            budget: DEFAULT_BUDGET,
            output: None,
        }
    }
}

/// Budget from `BRANCH_EXPONENT_BUDGET`, or the default when unset.
pub fn budget_from_env() -> Result<u64> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse::<u64>().map_err(|_| {
            CliError::Validation(vec![format!(
                "{BUDGET_ENV} must be a non-negative integer (got {v:?})"
            )])
        }),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    write_file(path, &bytes)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    report: &'a ExponentReport,
    admissibility: AdmissibilityReport,
}

fn run_analyze(
    curve: &SpectralCurve,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<ExponentReport> {
    let report = analyze(curve)?;
    let path = dir.join("exponents.json");
    write_json(
        &path,
        &AnalyzeOutput {
            report: &report,
            admissibility: check_conditions(curve.model()),
        },
    )?;
    files.push(path);
    Ok(report)
}

const COUNT_HEADER: [&str; 9] = [
    "t",
    "method",
    "z_value",
    "ez_estimate",
    "std_error",
    "reps",
    "truncation_depth",
    "tail_bound",
    "exact",
];

fn count_row(r: &CountResult, method: &str, exact: Option<f64>) -> Vec<String> {
    vec![
        num(r.t),
        method.into(),
        opt(r.z_value),
        opt(r.ez_estimate),
        opt(r.std_error),
        r.reps.to_string(),
        r.truncation_depth.to_string(),
        num(r.tail_bound),
        opt(exact),
    ]
}

fn run_simulate<R: ReplicaRunner>(
    config: &RunConfig,
    curve: &SpectralCurve,
    budget: u64,
    runner: &R,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let seed = config.seed();
    let (method, results) = match config.simulate.method {
        SimulateMethod::LevelSum => (
            "level-sum",
            estimate_ez(
                curve,
                &config.t_grid,
                config.reps,
                config.root_colour,
                seed,
                runner,
            )?,
        ),
        SimulateMethod::Enumerate => {
            let opts = EnumerateOptions {
                depth_cap: config.depth_cap,
                root: config.root_colour,
                node_cap: budget,
            };
            let rows = config
                .t_grid
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    enumerate_mean(
                        curve,
                        t,
                        &opts,
                        config.reps,
                        sub_seed(seed, k as u64),
                        runner,
                    )
                })
                .collect::<branch_exponent_core::Result<Vec<_>>>()?;
            ("enumerate", rows)
        }
    };
    let mut rows = Vec::with_capacity(results.len());
    for r in &results {
        let exact = match lattice_dp_ez(curve, r.t, None, config.root_colour) {
            Ok(sum) => Some(sum.value),
            Err(CoreError::NotLattice) => None,
            Err(e) => return Err(e.into()),
        };
        rows.push(count_row(r, method, exact));
    }
    let header: Vec<String> = COUNT_HEADER.iter().map(|s| s.to_string()).collect();
    let path = dir.join("counts.csv");
    write_csv(&path, &header, &rows)?;
    files.push(path);
    Ok(())
}

fn run_ld_check<R: ReplicaRunner>(
    config: &RunConfig,
    curve: &SpectralCurve,
    runner: &R,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let rf = curve.rate_function()?;
    let slack = config.tolerances.ld_slack.unwrap_or(LD_SLACK);
    let opts = LdOptions {
        tilt: config.ld.tilt,
        root: config.root_colour,
    };
    let estimates = ld_grid(
        curve,
        &config.ld.a_grid,
        config.ld.n,
        config.reps,
        config.ld.max_reps,
        &opts,
        config.seed(),
        runner,
    );
    let header: Vec<String> = [
        "a",
        "n",
        "reps",
        "hits",
        "log_probability",
        "empirical_rate",
        "std_error",
        "tilt",
        "rate_function",
        "difference",
        "within_tolerance",
        "status",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    let mut shortfall = None;
    for (&a, est) in config.ld.a_grid.iter().zip(estimates) {
        let exact = rf.value(a)?;
        match est {
            Ok(e) => {
                let diff = e.rate - exact;
                rows.push(vec![
                    num(a),
                    e.n.to_string(),
                    e.reps.to_string(),
                    e.hits.to_string(),
                    num(e.log_probability),
                    num(e.rate),
                    num(e.std_error),
                    opt(e.tilt),
                    num(exact),
                    num(diff),
                    (diff.abs() <= 3.0 * e.std_error + slack).to_string(),
                    "ok".into(),
                ]);
            }
            Err(err @ CoreError::InsufficientHits { hits, .. }) => {
                rows.push(vec![
                    num(a),
                    config.ld.n.to_string(),
                    config.ld.max_reps.to_string(),
                    hits.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(exact),
                    String::new(),
                    "false".into(),
                    "insufficient-hits".into(),
                ]);
                shortfall.get_or_insert(err);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let path = dir.join("ld_rates.csv");
    write_csv(&path, &header, &rows)?;
    files.push(path);
    match shortfall {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct GenerationSpeed {
    n: usize,
    min_over_n: f64,
    equation_residual: f64,
}

#[derive(Serialize)]
struct BrwSummary {
    speed: Option<BrwSpeed>,
    speed_error: Option<String>,
    generations: Vec<GenerationSpeed>,
}

fn brw_rows(snaps: &[BrwSnapshot], t_grid: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = [
        "generation",
        "reps",
        "particles",
        "min_mean",
        "min_over_n",
        "min_std_error",
        "min_overall",
        "q10",
        "q50",
        "q90",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(t_grid.iter().map(|t| format!("count_le_{t}")));
    header.extend(t_grid.iter().map(|t| format!("occupation_le_{t}")));
    let rows = snaps
        .iter()
        .map(|s| {
            let mut row = vec![
                s.generation.to_string(),
                s.reps.to_string(),
                s.particles.to_string(),
                num(s.min_mean),
                if s.generation == 0 {
                    String::new()
                } else {
                    num(s.min_mean / s.generation as f64)
                },
                num(s.min_std_error),
                num(s.min_overall),
            ];
            row.extend(s.quantiles.iter().map(|q| num(*q)));
            row.extend(s.counts_le.iter().map(|c| num(*c)));
            row.extend(s.occupation.iter().map(|c| num(*c)));
            row
        })
        .collect();
    (header, rows)
}

fn run_brw<R: ReplicaRunner>(
    config: &RunConfig,
    curve: &SpectralCurve,
    budget: u64,
    runner: &R,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let opts = BrwOptions {
        n_max: config.brw.n_max,
        reps: config.reps,
        t_grid: config.t_grid.clone(),
        root: config.root_colour,
        budget,
    };
    let snaps = simulate_brw(curve.model(), &opts, config.seed(), runner)?;
    let (header, rows) = brw_rows(&snaps, &config.t_grid);
    let path = dir.join("brw.csv");
    write_csv(&path, &header, &rows)?;
    files.push(path);

    let (speed, speed_error) = match brw_speed(curve) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let generations = snaps
        .iter()
        .filter(|s| s.generation > 0)
        .map(|s| {
            let x = s.min_mean / s.generation as f64;
            Ok(GenerationSpeed {
                n: s.generation,
                min_over_n: x,
                equation_residual: speed_equation_residual(curve, x)?,
            })
        })
        .collect::<branch_exponent_core::Result<Vec<_>>>()?;
    let path = dir.join("brw_summary.json");
    write_json(
        &path,
        &BrwSummary {
            speed,
            speed_error,
            generations,
        },
    )?;
    files.push(path);
    Ok(())
}

fn run_verify(
    config: &RunConfig,
    curve: &SpectralCurve,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let report = verify(curve, &config.tolerances)?;
    let path = dir.join("verify.json");
    write_json(&path, &report)?;
    files.push(path);
    match report.regime {
        Regime::Infinite => Err(CoreError::AssumptionViolation(Assumption::FiniteRegime).into()),
        Regime::Critical => Err(CoreError::AssumptionViolation(Assumption::CriticalRegime).into()),
        Regime::Finite if report.mu <= 0.0 => {
            Err(CoreError::AssumptionViolation(Assumption::PositiveDrift).into())
        }
        Regime::Finite if report.failed > 0 => Err(CliError::VerificationFailed {
            failed: report.failed,
        }),
        Regime::Finite => Ok(()),
    }
}

/// Runs the configured command and returns the files written.
///
/// Result files are written before a failing check is turned into an
/// error, so a failed run still leaves its evidence behind.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let dir = opts
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let tol = config.tolerances.spectral.unwrap_or(PERRON_TOL);
    let curve = SpectralCurve::with_tolerance(config.model.clone(), tol);
    let runner = Parallel::new(opts.workers);
    let mut files = Vec::new();
    match config.command {
        Command::Analyze => {
            run_analyze(&curve, &dir, &mut files)?;
        }
        Command::Simulate => run_simulate(config, &curve, opts.budget, &runner, &dir, &mut files)?,
        Command::LdCheck => run_ld_check(config, &curve, &runner, &dir, &mut files)?,
        Command::Brw => run_brw(config, &curve, opts.budget, &runner, &dir, &mut files)?,
        Command::Fpp => {
            run_analyze(&curve, &dir, &mut files)?;
            run_simulate(config, &curve, opts.budget, &runner, &dir, &mut files)?;
        }
        Command::Verify => run_verify(config, &curve, &dir, &mut files)?,
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn brw_header_names_every_column() {
        let snap = BrwSnapshot {
            generation: 2,
            reps: 3,
            particles: 4,
            min_mean: 1.0,
            min_std_error: 0.1,
            min_overall: 0.5,
            quantiles: [1.0, 2.0, 3.0],
            counts_le: vec![0.0, 1.0],
            occupation: vec![0.5, 2.0],
        };
        let (header, rows) = brw_rows(&[snap], &[0.5, 1.5]);
        assert_eq!(header.len(), rows[0].len());
        assert_eq!(header[10], "count_le_0.5");
        assert_eq!(rows[0][4], "0.5");
    }

    #[test]
    fn analyze_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let config = parse_config(
            r#"{"d": 2, "laws": {"family": "lognormal", "params": {"location": -1.5, "scale": 1.0}},
                "command": "analyze"}"#,
        )
        .unwrap();
        let opts = RunOptions {
            workers: 1,
            output: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let files = run(&config, &opts).unwrap();
        assert_eq!(files, vec![dir.path().join("exponents.json")]);
        let text = fs::read_to_string(&files[0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let m = v["report"]["m_variational"].as_f64().unwrap();
        let exact = 1.5 - (2.25 - 2.0 * std::f64::consts::LN_2).sqrt();
        assert!((m - exact).abs() < 1e-8, "{m} vs {exact}");
    }
}
