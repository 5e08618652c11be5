//! Batch execution of configured checks and report writing.
//!
//! A run directory is `<output_root>/<content hash>/` and holds one `<check>.json` per
//! check, `summary.csv`, the canonical configuration and the solution archive. Wall-clock
//! timestamps go only to `run.log`, so the remaining files are byte-identical across
//! reruns of the same configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{set_numeric, CheckKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimates::{
    build_cutoff, cylinder_stats, fit_harnack_constant, harnack_check, theorem11_check,
    CylinderStats,
};
use crate::report::{EstimateReport, WorstPoint};
use crate::solver::{solve, write_archive, PdeProblem, SpaceTimeSolution};
use crate::verification::{
    bochner_check, check_decay_hypotheses, decay_table, lemma21_gap, ode_ancient_check,
};

pub const OUTPUT_ENV: &str = "BAKRYLAB_OUT";
pub const SWEEP_HEADER: &str = "parameter_value,check,scalar,pass";
const CUTOFF_SAMPLES: usize = 512;

/// Result of one check: a headline scalar, a verdict and the JSON report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: CheckKind,
    pub scalar: f64,
    pub pass: bool,
    pub json: String,
}

#[derive(Debug, Serialize)]
struct FailedCheck<'a> {
    check: &'a str,
    pass: bool,
    error: String,
}

impl CheckOutcome {
    fn from_report<T: Serialize>(
        check: CheckKind,
        scalar: f64,
        pass: bool,
        report: &T,
    ) -> Result<Self> {
        Ok(Self {
            check,
            scalar,
            pass,
            json: serde_json::to_string_pretty(report)?,
        })
    }

    fn failed(check: CheckKind, error: &Error) -> Result<Self> {
        let report = FailedCheck {
            check: check.name(),
            pass: false,
            error: format!("{}: {error}", check.name()),
        };
        Self::from_report(check, f64::NAN, false, &report)
    }
}

/// Output root: `BAKRYLAB_OUT` if set, else the configured directory, else `runs`.
pub fn output_root(config: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    problem: PdeProblem,
    solution: Option<std::result::Result<SpaceTimeSolution, String>>,
}

impl Context<'_> {
    fn solution(&self) -> Result<&SpaceTimeSolution> {
        match &self.solution {
            Some(Ok(s)) => Ok(s),
            Some(Err(message)) => Err(Error::Numerical(format!("solve failed: {message}"))),
            None => Err(Error::Numerical("no solution was computed".into())),
        }
    }

    fn stats(&self) -> Result<(&SpaceTimeSolution, CylinderStats)> {
        let solution = self.solution()?;
        let stats = cylinder_stats(
            solution,
            self.config.estimate.radius,
            self.config.estimate.d_override,
        )?;
        Ok((solution, stats))
    }
}

fn run_check(ctx: &Context, check: CheckKind) -> Result<CheckOutcome> {
    let config = ctx.config;
    match check {
        CheckKind::Comparison => {
            let report = ctx
                .problem
                .space
                .comparison_check(config.estimate.radius, 2048)?;
            CheckOutcome::from_report(check, report.worst_margin, report.pass, &report)
        }
        CheckKind::Bochner => {
            let report =
                bochner_check(&ctx.problem.space, &ctx.problem.grid, &ctx.problem.initial)?;
            CheckOutcome::from_report(check, report.details["residual"], report.pass, &report)
        }
        CheckKind::Ode => {
            let ode = config
                .ode
                .ok_or_else(|| Error::config("ode", "missing [ode] section"))?;
            let report =
                ode_ancient_check(ode.q_tilde, ode.alpha, ode.u0, (ode.t_start, ode.t_end))?;
            CheckOutcome::from_report(check, report.max_deviation, report.pass, &report)
        }
        CheckKind::Theorem11 => {
            let (solution, stats) = ctx.stats()?;
            let mut report = theorem11_check(solution, &stats, config.estimate.constant)?;
            if stats.radius >= 2.0 {
                let cutoff = build_cutoff(
                    stats.radius,
                    stats.horizon,
                    stats.t0,
                    stats.t0,
                    config.estimate.cutoff_a,
                )?;
                let audit = cutoff.audit(CUTOFF_SAMPLES)?;
                report = report
                    .with_detail("cutoff_C_a", audit.c_a)
                    .with_detail("cutoff_C_time", audit.c_time);
            }
            let scalar = report.c_fit.unwrap_or(f64::NAN);
            CheckOutcome::from_report(check, scalar, report.pass, &report)
        }
        CheckKind::Harnack => {
            let (solution, stats) = ctx.stats()?;
            let (c, fitted) = match config.estimate.constant {
                Some(c) => (c, None),
                None => {
                    let fit = fit_harnack_constant(solution, &stats)?;
                    (fit.value, Some(fit.value))
                }
            };
            let mut worst: Option<EstimateReport> = None;
            let times = config.harnack_times();
            let mut margins = Vec::with_capacity(times.len());
            for t in times {
                let report = harnack_check(solution, &stats, c, t)?;
                margins.push(report.worst_margin);
                if worst
                    .as_ref()
                    .is_none_or(|w| report.worst_margin < w.worst_margin)
                {
                    worst = Some(report);
                }
            }
            let mut report =
                worst.ok_or_else(|| Error::config("estimate.harnack_times", "no times"))?;
            report.c_fit = fitted;
            for (i, m) in margins.iter().enumerate() {
                report = report.with_detail(&format!("margin_{i}"), *m);
            }
            report.pass = margins
                .iter()
                .all(|&m| m >= -crate::estimates::HARNACK_TOLERANCE);
            CheckOutcome::from_report(check, report.worst_margin, report.pass, &report)
        }
        CheckKind::Lemma21 => {
            let (solution, stats) = ctx.stats()?;
            let report = lemma21_gap(solution, &stats)?;
            CheckOutcome::from_report(check, report.min_gap, report.pass, &report)
        }
        CheckKind::LiouvilleSweep => {
            let radii = config.liouville_radii();
            check_decay_hypotheses(&ctx.problem, &radii)?;
            let table = decay_table(ctx.solution()?, &radii)?;
            CheckOutcome::from_report(check, table.fitted_exponent, table.pass, &table)
        }
    }
}

/// Runs every configured check in configuration order, solving at most once.
/// Check-level failures become failing outcomes; only configuration problems error.
pub fn execute(
    config: &ExperimentConfig,
) -> Result<(Vec<CheckOutcome>, Option<SpaceTimeSolution>)> {
    let problem = config.build_problem()?;
    let checks = config.unique_checks();
    let solution = checks
        .iter()
        .any(|c| c.needs_solution())
        .then(|| solve(&problem).map_err(|e| e.to_string()));
    let ctx = Context {
        config,
        problem,
        solution,
    };
    let mut outcomes = Vec::with_capacity(checks.len());
    for check in checks {
        let outcome = match run_check(&ctx, check) {
            Ok(outcome) => outcome,
            Err(e @ Error::Config { .. }) => return Err(e),
            Err(e) => CheckOutcome::failed(check, &e)?,
        };
        outcomes.push(outcome);
    }
    Ok((outcomes, ctx.solution.and_then(|s| s.ok())))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub outcomes: Vec<CheckOutcome>,
}

impl RunSummary {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

fn format_scalar(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.17e}")
    }
}

fn log_line(dir: &Path, message: &str) -> Result<()> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let mut log = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("run.log"))?;
    writeln!(log, "{stamp:.3} {message}")?;
    Ok(())
}

/// Executes the configuration and writes its run directory under `root`.
pub fn run(config: &ExperimentConfig, root: &Path) -> Result<RunSummary> {
    let hash = config.content_hash()?;
    let dir = root.join(&hash);
    fs::create_dir_all(&dir)?;
    log_line(&dir, &format!("start {hash}"))?;
    let (outcomes, solution) = execute(config)?;
    fs::write(dir.join("config.toml"), config.canonical_text()?)?;
    let mut summary = String::from("check,scalar,pass\n");
    for outcome in &outcomes {
        fs::write(
            dir.join(format!("{}.json", outcome.check.name())),
            &outcome.json,
        )?;
        summary.push_str(&format!(
            "{},{},{}\n",
            outcome.check.name(),
            format_scalar(outcome.scalar),
            outcome.pass
        ));
    }
    fs::write(dir.join("summary.csv"), summary)?;
    if let Some(solution) = &solution {
        write_archive(solution, &dir.join("solution"))?;
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    log_line(
        &dir,
        &format!("finish {passed}/{} checks passed", outcomes.len()),
    )?;
    Ok(RunSummary { dir, outcomes })
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub check: CheckKind,
    pub scalar: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub csv_path: PathBuf,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Parses a comma-separated value list; surrounding brackets are optional.
pub fn parse_values(raw: &str) -> Result<Vec<String>> {
    let trimmed = raw
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .map(|_| v.to_string())
                .map_err(|_| Error::config("--values", format!("`{v}` is not a number")))
        })
        .collect()
}

/// Runs the configuration once per value of the numeric field at `param` and writes
/// `sweep_<param>.csv` under `root`, sorted by (value, check).
pub fn sweep(
    table: &toml::Table,
    base_dir: &Path,
    param: &str,
    values: &[String],
    root: &Path,
) -> Result<SweepSummary> {
    let configs = values
        .iter()
        .map(|raw| {
            let mut variant = table.clone();
            set_numeric(&mut variant, param, raw)?;
            let config = ExperimentConfig::from_table(variant, base_dir)?;
            Ok((
                raw.trim()
                    .parse::<f64>()
                    .expect("validated by parse_values"),
                config,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = configs
        .par_iter()
        .map(|(value, config)| run(config, root).map(|summary| (*value, summary)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = runs
        .into_iter()
        .flat_map(|(value, summary)| {
            summary.outcomes.into_iter().map(move |o| SweepRow {
                value,
                check: o.check,
                scalar: o.scalar,
                pass: o.pass,
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.check.name().cmp(b.check.name()))
    });
    let mut csv = format!("{SWEEP_HEADER}\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.value,
            row.check.name(),
            format_scalar(row.scalar),
            row.pass
        ));
    }
    fs::create_dir_all(root)?;
    let csv_path = root.join(format!("sweep_{}.csv", param.replace('.', "_")));
    fs::write(&csv_path, csv)?;
    Ok(SweepSummary { csv_path, rows })
}

/// Worst point of a report, formatted for terminal output.
pub fn describe_point(point: &WorstPoint) -> String {
    match *point {
        WorstPoint::Pair { rx, ry, t } => format!("(rx={rx}, ry={ry}, t={t})"),
        WorstPoint::Point { r, t: Some(t) } => format!("(r={r}, t={t})"),
        WorstPoint::Point { r, t: None } => format!("(r={r})"),
    }
}
