//! `rikit`: command-line front end for rikit-core.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 invalid input or a
//! violated hypothesis.

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rikit_core::operators::{sample_to_step, HImage, OpKind, RImage, SupImage};
use rikit_core::spaces::{norm, profile_grid};
use rikit_core::verify::{self, CaseId, Report, RunOptions, Verdict};
use rikit_core::weights::{check_averaging, check_delta, check_nondegenerate, check_quasiconcave, Endpoint, Mode};
use rikit_core::{par, report, Bijection, OperatorSpec, SpaceSpec, StepFunction, Weight};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "rikit", version, about = "Rearrangement-invariant norms and weighted Hardy-type operators")]
struct Cli {
    /// Output directory for reports and plots.
    #[arg(long, global = true, env = "RIKIT_OUT", default_value = "rikit-out")]
    out: PathBuf,
    /// Sampling resolution for composed operators and profile images.
    #[arg(long, global = true, default_value_t = rikit_core::tolerances::DEFAULT_GRID)]
    grid: usize,
    #[arg(long, global = true, default_value_t = rikit_core::tolerances::DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the relative slack of identity and inequality checks.
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print the nonincreasing rearrangement of a step function.
    Rearrange { f: PathBuf },
    /// Print the norm of a step function in a space.
    Norm { space: PathBuf, f: PathBuf },
    /// Apply an operator (R, H or T) to a step function; the image is
    /// returned as cell averages on a geometric grid of `--grid` points.
    Apply { op: PathBuf, f: PathBuf },
    /// Probe a hypothesis on a weight or bijection.
    Check { what: CheckKind, spec: PathBuf },
    /// Run a verification case, or `all`.
    Verify {
        case: String,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run a list of cases with parameter and seed overrides.
    Sweep { plan: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckKind {
    Delta,
    Averaging,
    Quasiconcave,
    Nondegenerate,
}

fn inf() -> f64 {
    f64::INFINITY
}

fn two() -> f64 {
    2.0
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct DeltaSpec {
    nu: Bijection,
    endpoint: Endpoint,
    mode: Mode,
    #[serde(default = "two")]
    theta: f64,
    #[serde(with = "rikit_core::serde_len", default = "inf")]
    domain_length: f64,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct WeightSpec {
    weight: Weight,
    #[serde(with = "rikit_core::serde_len", default = "inf")]
    domain_length: f64,
}

#[derive(Deserialize, Serialize, Debug)]
#[serde(deny_unknown_fields)]
struct SweepRun {
    case: CaseId,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    grid: Option<usize>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct SweepPlan {
    runs: Vec<SweepRun>,
}

/// Error that maps to exit code 2 (bad input or failed hypothesis).
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Invalid(msg.into()))
}

/// Parse a JSON file strictly, reporting the field path and position.
fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let inner = e.into_inner();
        let field = if at == "." { String::new() } else { format!(" at field `{at}`") };
        invalid(format!("{}{field}: {inner}", path.display()))
    })
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn core_err(e: rikit_core::Error) -> anyhow::Error {
    if e.severity() >= 2 {
        invalid(e.to_string())
    } else {
        anyhow!(e)
    }
}

fn options(cli: &Cli) -> RunOptions {
    RunOptions { seed: cli.seed, grid: cli.grid, tol_rel: cli.tol_rel }
}

fn summary_line(r: &Report) -> String {
    let v = match r.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::NotApplicable => "not_applicable",
    };
    let worst = r.worst_ratio.map_or("-".to_string(), |w| format!("{w:.6e}"));
    format!(
        "{:<24} {:<14} samples={:<6} skipped={:<4} violations={:<4} worst_ratio={}",
        r.case_id.as_str(),
        v,
        r.n_samples,
        r.n_skipped,
        r.n_violations(),
        worst
    )
}

fn severity(reports: &[Report]) -> u8 {
    reports.iter().map(|r| r.verdict.severity()).max().unwrap_or(0) as u8
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Rearrange { f } => {
            let f: StepFunction = load(f)?;
            print_json(&f.rearrange())?;
            Ok(0)
        }
        Cmd::Norm { space, f } => {
            let x: SpaceSpec = load(space)?;
            x.validate().map_err(core_err)?;
            let f: StepFunction = load(f)?;
            let n = norm(&x, &f).map_err(core_err)?;
            print_json(&json!({"space": x, "value": verify::num(n.value()), "finite": n.is_finite()}))?;
            Ok(0)
        }
        Cmd::Apply { op, f } => {
            let spec: OperatorSpec = load(op)?;
            let f: StepFunction = load(f)?;
            if f.domain_length() != spec.len {
                return Err(invalid(format!(
                    "domain lengths differ: operator {} vs function {}",
                    spec.len,
                    f.domain_length()
                )));
            }
            let image = match spec.kind {
                OpKind::R => {
                    let p = RImage::new(&spec, &f).map_err(core_err)?;
                    sample_to_step(&p, &profile_grid(&p, cli.grid))
                }
                OpKind::H => {
                    let p = HImage::new(&spec, &f);
                    sample_to_step(&p, &profile_grid(&p, cli.grid))
                }
                OpKind::T => {
                    let p = SupImage::new(spec.phi(), &f);
                    sample_to_step(&p, &profile_grid(&p, cli.grid))
                }
            }
            .map_err(core_err)?;
            print_json(&json!({"operator": spec, "grid_points": cli.grid, "image": image}))?;
            Ok(0)
        }
        Cmd::Check { what, spec } => check(*what, spec),
        Cmd::Verify { case, params } => {
            let o = options(cli);
            let params: Option<Value> = params.as_deref().map(load).transpose()?;
            let mut reports = if case == "all" {
                if params.is_some() {
                    return Err(invalid("--params applies to a single case, not `all`"));
                }
                par::with_jobs(cli.jobs, || verify::run_all(&o)).map_err(core_err)?
            } else {
                let id: CaseId = case.parse().map_err(core_err)?;
                vec![par::with_jobs(cli.jobs, || verify::run_case(id, params.as_ref(), &o)).map_err(core_err)?]
            };
            let written = if reports.len() > 1 {
                report::write_all(&cli.out, &mut reports)
            } else {
                report::write_report(&cli.out, &mut reports[0])
            }
            .with_context(|| format!("writing reports to {}", cli.out.display()))?;
            for r in &reports {
                println!("{}", summary_line(r));
            }
            eprintln!("wrote {} files to {}", written.len(), cli.out.display());
            Ok(severity(&reports))
        }
        Cmd::Sweep { plan } => {
            let plan: SweepPlan = load(plan)?;
            let base = options(cli);
            let results: Vec<rikit_core::Result<Report>> = par::with_jobs(cli.jobs, || {
                par::map(&plan.runs, |run| {
                    let o = RunOptions { seed: run.seed.unwrap_or(base.seed), grid: run.grid.unwrap_or(base.grid), ..base.clone() };
                    verify::run_case(run.case, run.params.as_ref(), &o)
                })
            });
            let mut reports = Vec::new();
            for (k, r) in results.into_iter().enumerate() {
                let mut r = r.map_err(|e| invalid(format!("run {k}: {e}")))?;
                report::write_report(&cli.out.join(format!("run-{k:03}")), &mut r)?;
                println!("run-{k:03} {}", summary_line(&r));
                reports.push(r);
            }
            std::fs::write(cli.out.join("sweep.csv"), report::summary_csv(&reports))?;
            Ok(severity(&reports))
        }
    }
}

fn check(what: CheckKind, spec: &Path) -> Result<u8> {
    let (out, ok) = match what {
        CheckKind::Delta => {
            let s: DeltaSpec = load(spec)?;
            let r = check_delta(&s.nu, s.endpoint, s.mode, s.theta, s.domain_length).map_err(core_err)?;
            let ok = r.verdict;
            (serde_json::to_value(r)?, ok)
        }
        CheckKind::Averaging => {
            let s: WeightSpec = load(spec)?;
            let r = check_averaging(&s.weight, s.domain_length);
            let ok = r.verdict;
            (serde_json::to_value(r)?, ok)
        }
        CheckKind::Quasiconcave => {
            let s: WeightSpec = load(spec)?;
            let ok = check_quasiconcave(&s.weight, s.domain_length);
            (json!({"quasiconcave": ok}), ok)
        }
        CheckKind::Nondegenerate => {
            let s: WeightSpec = load(spec)?;
            let ok = check_nondegenerate(&s.weight, s.domain_length);
            (json!({"nondegenerate": ok}), ok)
        }
    };
    print_json(&out)?;
    Ok(if ok { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Invalid>().is_some() { 2 } else { 1 })
        }
    }
}
