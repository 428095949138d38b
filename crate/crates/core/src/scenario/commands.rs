//! The `certify`, `run` and `sweep` commands, independent of argument
//! parsing so they can be driven from tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certification::{certify, CertificationReport, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::sim::{run_scenario, summarize, SimRun};

use super::config::{parse_config, ScenarioConfig};
use super::output::{trajectory_csv, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

pub const SEED_ENV: &str = "S2TRACK_SEED";

/// Bound-sampling seed: `S2TRACK_SEED` if set, else the default.
pub fn seed_from_env() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::validation(SEED_ENV, "must be an unsigned 64-bit integer")),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(e) => Err(Error::validation(SEED_ENV, e.to_string())),
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn certify_config(cfg: &ScenarioConfig, seed: u64) -> Result<CertificationReport> {
    certify(
        &cfg.model,
        &cfg.gains,
        &cfg.envelope,
        &cfg.geometry,
        cfg.cert_samples,
        seed,
    )
}

pub struct CertifyOutcome {
    pub report: CertificationReport,
    pub exit_code: i32,
}

/// Certifies and, with `out`, writes the report JSON there.
pub fn cmd_certify(cfg: &ScenarioConfig, seed: u64, out: Option<&Path>) -> Result<CertifyOutcome> {
    let report = certify_config(cfg, seed)?;
    if let Some(dir) = out {
        write_atomic(&dir.join(&cfg.output.report), report_json(&report).as_bytes())?;
    }
    let exit_code = if report.certified { EXIT_OK } else { EXIT_NOT_CERTIFIED };
    Ok(CertifyOutcome { report, exit_code })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub t: f64,
    pub error: String,
    /// Last good attitude, row-major.
    pub attitude: [f64; 9],
    pub omega: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub certified: bool,
    pub radius: Option<f64>,
    pub decay_rate: f64,
    /// Present only for perfect parameter knowledge.
    pub fitted_rate: Option<f64>,
    pub max_zq_settled: f64,
    pub envelope_violations: usize,
    pub sandwich_violations: usize,
    pub max_orthogonality_error: f64,
    pub final_v: f64,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub abort: Option<AbortInfo>,
    pub exit_status: i32,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub report: CertificationReport,
    pub run: SimRun,
}

/// Certifies, simulates, and writes the trajectory CSV and summary JSON
/// into `out`. Uncertified gains are refused unless `allow_uncertified`.
pub fn cmd_run(cfg: &ScenarioConfig, seed: u64, out: &Path, allow_uncertified: bool) -> Result<RunOutcome> {
    let report = certify_config(cfg, seed)?;
    if !report.certified && !allow_uncertified {
        return Err(Error::NotCertifiable(report.failures.join("; ")));
    }
    let run = run_scenario(&cfg.scenario(), report.lambda_j)?;
    let sim = summarize(
        &run.records,
        report.perfect_knowledge,
        Some(report.decay_rate),
        report.radius,
    );
    let abort = run.abort.as_ref().map(|a| {
        let m = a.last_state.attitude.matrix();
        AbortInfo {
            t: a.t,
            error: a.error.to_string(),
            attitude: std::array::from_fn(|k| m[(k / 3, k % 3)]),
            omega: a.last_state.omega.into(),
        }
    });
    let summary = RunSummary {
        certified: report.certified,
        radius: report.radius,
        decay_rate: report.decay_rate,
        fitted_rate: sim.fitted_rate,
        max_zq_settled: sim.max_zq_settled,
        envelope_violations: sim.envelope_violations,
        sandwich_violations: sim.sandwich_violations,
        max_orthogonality_error: sim.max_orthogonality_error,
        final_v: sim.final_v,
        steps: sim.steps,
        dt: cfg.dt,
        seed,
        exit_status: if abort.is_some() { EXIT_ABORTED } else { EXIT_OK },
        abort,
    };
    write_atomic(
        &out.join(&cfg.output.trajectory),
        trajectory_csv(&run.records).as_bytes(),
    )?;
    write_atomic(&out.join(&cfg.output.summary), to_json(&summary).as_bytes())?;
    Ok(RunOutcome { summary, report, run })
}

/// Exit code for a failed command.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NotCertifiable(_) => EXIT_NOT_CERTIFIED,
        _ => EXIT_ERROR,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: String,
    pub exit_status: i32,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub exit_status: i32,
}

pub struct SweepOptions<'a> {
    pub parallelism: usize,
    pub seed: u64,
    /// Each scenario writes into `out/<file stem>/`; nothing is written
    /// without it.
    pub out: Option<&'a Path>,
    pub allow_uncertified: bool,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
}

/// Runs every config matching `pattern` on a pool of `parallelism`
/// workers. Rows are ordered by path.
pub fn cmd_sweep(pattern: &str, opts: &SweepOptions) -> Result<SweepReport> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::validation("--config", e.to_string()))?
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Io(e.to_string()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(Error::validation("--config", format!("no files match `{pattern}`")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| paths.par_iter().map(|p| sweep_row(p, opts)).collect());
    let exit_status = rows.iter().map(|r| r.exit_status).max().unwrap_or(EXIT_OK);
    Ok(SweepReport { rows, exit_status })
}

fn sweep_row(path: &Path, opts: &SweepOptions) -> SweepRow {
    let result = (|| {
        let cfg = load_config(path)?.with_overrides(opts.dt, opts.duration)?;
        let scratch;
        let out = match opts.out {
            Some(dir) => dir.join(path.file_stem().unwrap_or_default()),
            None => {
                scratch = tempfile::tempdir()?;
                scratch.path().to_path_buf()
            }
        };
        cmd_run(&cfg, opts.seed, &out, opts.allow_uncertified)
    })();
    let config = path.display().to_string();
    match result {
        Ok(o) => SweepRow {
            config,
            exit_status: o.summary.exit_status,
            summary: Some(o.summary),
            error: None,
        },
        Err(e) => SweepRow {
            config,
            exit_status: error_exit_code(&e),
            summary: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn report_json(report: &CertificationReport) -> String {
    to_json(report)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

pub fn render_report_text(r: &CertificationReport) -> String {
    let mut s = String::new();
    let verdict = if r.certified { "CERTIFIED" } else { "NOT CERTIFIED" };
    let _ = writeln!(s, "{verdict}");
    let _ = writeln!(
        s,
        "lambda_J = {:.6}  kappa = {:.6e}  gamma = {}  seed = {}",
        r.lambda_j,
        r.kappa,
        r.gains.gamma(),
        r.seed
    );
    let _ = writeln!(s, "conditions:");
    for c in r.gain_checks.iter().chain(&r.set_conditions) {
        let mark = if c.pass { "pass" } else { "FAIL" };
        let _ = writeln!(
            s,
            "  ({:>2}) {mark}  lhs = {:.6e}  rhs = {}  {}",
            c.id,
            c.lhs,
            opt(c.rhs),
            c.description
        );
    }
    let _ = writeln!(s, "eigenvalues over psi in [0, {}]:", r.envelope.psi_max);
    for e in &r.w_eigs {
        let _ = writeln!(s, "  {:<3} min {:.6e}  max {:.6e}", e.name, e.lambda_min, e.lambda_max);
    }
    let b = &r.bounds;
    let _ = writeln!(
        s,
        "bounds: |B| {:.4e}  Upsilon {:.4e}  A_breve {:.4e}  ({} samples, x{})",
        b.b_max, b.upsilon_max, b.a_breve_max, b.samples, b.safety_factor
    );
    let _ = writeln!(
        s,
        "decay rate {:.6e}  radius {}  e_w threshold {}  z_q threshold {}",
        r.decay_rate,
        opt(r.radius),
        opt(r.e_w_threshold),
        opt(r.z_q_threshold)
    );
    for f in &r.failures {
        let _ = writeln!(s, "failure: {f}");
    }
    s
}

pub fn render_summary_text(r: &RunSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "steps {}  dt {}  certified {}  exit {}",
        r.steps, r.dt, r.certified, r.exit_status
    );
    let _ = writeln!(
        s,
        "decay rate {:.6e}  fitted rate {}  radius {}",
        r.decay_rate,
        opt(r.fitted_rate),
        opt(r.radius)
    );
    let _ = writeln!(
        s,
        "max |z_q| settled {:.6e}  envelope violations {}  sandwich violations {}  final V {:.6e}",
        r.max_zq_settled, r.envelope_violations, r.sandwich_violations, r.final_v
    );
    if let Some(a) = &r.abort {
        let _ = writeln!(s, "aborted at t = {}: {}", a.t, a.error);
    }
    s
}

pub fn render_sweep_text(r: &SweepReport) -> String {
    let mut s = String::from("config\texit\tcertified\tfitted_rate\tmax_zq_settled\tviolations\terror\n");
    for row in &r.rows {
        let (cert, fitted, zq, viol) = match &row.summary {
            Some(x) => (
                x.certified.to_string(),
                opt(x.fitted_rate),
                format!("{:.6e}", x.max_zq_settled),
                x.envelope_violations.to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into(), "-".into()),
        };
        let err = row
            .error
            .clone()
            .or_else(|| {
                row.summary
                    .as_ref()
                    .and_then(|x| x.abort.as_ref().map(|a| a.error.clone()))
            })
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{}\t{}\t{cert}\t{fitted}\t{zq}\t{viol}\t{err}",
            row.config, row.exit_status
        );
    }
    s
}
