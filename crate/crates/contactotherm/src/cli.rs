//! Argument grammar and dispatch.

use std::ffi::OsString;
use std::io::Write;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, ContactOptions, InvarianceOptions, LegendreOptions};
use crate::model::{parse_model, Model};
use crate::parallel::resolve_threads;
use crate::reparam_spec::load_reparam;
use crate::report::{Format, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERIFICATION_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "contactotherm", version, about = "Contact-geometric thermodynamics of exponential families")]
pub struct Cli {
    /// Report format
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads for point sweeps (falls back to CONTACTOTHERM_THREADS, then 1)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct ModelArg {
    /// `two_level:eps=2`, `ising_ring:N=4,J=1,h=0`, `quadratic:C=[[2,1],[1,2]],b=[0,0]` or `file:model.json`
    #[arg(long)]
    pub model: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the builtin models
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Equilibrium metric at points: Hessian, covariance and pullbacks
    Metric {
        #[command(flatten)]
        model: ModelArg,
        /// Intensive point, comma separated; repeat for several points
        #[arg(long, required = true, allow_hyphen_values = true)]
        at: Vec<String>,
        /// Reparametrization file or inline JSON
        #[arg(long)]
        reparam: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Verification sweeps
    Verify {
        #[command(subcommand)]
        check: Verify,
    },
    /// Maximum-entropy multipliers for target averages
    Maxent {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        targets: String,
        #[arg(long, allow_hyphen_values = true)]
        initial: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Monte-Carlo covariance against the exact metric
    Sample {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Scalar curvature of the equilibrium metric
    Curvature {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, required = true, allow_hyphen_values = true)]
        at: Vec<String>,
    },
    /// Ruppeiner metric from the total Legendre transformation vs -Hess S(E)
    Ruppeiner {
        #[command(flatten)]
        model: ModelArg,
        /// `lo:hi:steps` over E (models with one observable)
        #[arg(long, allow_hyphen_values = true, conflicts_with = "at")]
        grid: Option<String>,
        /// Extensive point, comma separated; repeatable
        #[arg(long, allow_hyphen_values = true)]
        at: Vec<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelsAction {
    List,
}

#[derive(Args, Debug)]
pub struct Sweep {
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Verify {
    /// Six computations of the equilibrium metric, with and without a reparametrization
    Invariance {
        #[command(flatten)]
        model: ModelArg,
        /// Fixed reparametrization; random draws from the map library otherwise
        #[arg(long)]
        reparam: Option<String>,
        #[command(flatten)]
        sweep: Sweep,
        /// Box for the intensive draws
        #[arg(long = "box", default_value = "-1:1", allow_hyphen_values = true)]
        intensive_box: String,
        /// Draw only affine intensive maps
        #[arg(long)]
        affine_intensive: bool,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        first_law_tol: Option<f64>,
    },
    /// Non-integrability of the contact forms
    Contact {
        #[arg(long, required_unless_present = "n")]
        model: Option<String>,
        /// Number of observables when no model is given
        #[arg(long, conflicts_with = "model")]
        n: Option<usize>,
        #[arg(long)]
        reparam: Option<String>,
        #[command(flatten)]
        sweep: Sweep,
        #[arg(long, default_value_t = commands::MIN_LAMBDA_DET)]
        min_lambda_det: f64,
    },
    /// Contact invariance of the Legendre transformations
    Legendre {
        #[arg(long, required_unless_present = "n")]
        model: Option<String>,
        #[arg(long, conflicts_with = "model")]
        n: Option<usize>,
        #[command(flatten)]
        sweep: Sweep,
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn points(model: &Model, at: &[String]) -> Result<Vec<Vec<f64>>> {
    at.iter().map(|s| model.point(s)).collect()
}

fn model_or_n(model: &Option<String>, n: Option<usize>) -> Result<(Option<Model>, usize)> {
    match (model, n) {
        (Some(spec), _) => {
            let m = parse_model(spec)?;
            let n = m.n();
            Ok((Some(m), n))
        }
        (None, Some(n)) if (1..=8).contains(&n) => Ok((None, n)),
        (None, Some(n)) => bail!("--n must be between 1 and 8, got {n}"),
        (None, None) => bail!("give --model or --n"),
    }
}

/// Runs one command and returns its report.
pub fn execute(cli: &Cli) -> Result<Report> {
    let threads = resolve_threads(cli.threads)?;
    match &cli.command {
        Command::Models { action: ModelsAction::List } => Ok(commands::models_list()),
        Command::Metric { model, at, reparam, tol } => {
            let m = parse_model(&model.model)?;
            let rep = reparam.as_deref().map(|r| load_reparam(r, m.n())).transpose()?;
            commands::metric(&m, &points(&m, at)?, rep.as_ref(), *tol, threads)
        }
        Command::Verify { check } => match check {
            Verify::Invariance { model, reparam, sweep, intensive_box, affine_intensive, tol, first_law_tol } => {
                let m = parse_model(&model.model)?;
                let rep = reparam.as_deref().map(|r| load_reparam(r, m.n())).transpose()?;
                let d = InvarianceOptions::default();
                let o = InvarianceOptions {
                    points: sweep.points,
                    seed: sweep.seed,
                    intensive_box: commands::parse_range(intensive_box)?,
                    affine_intensive_only: *affine_intensive,
                    tol: tol.unwrap_or(d.tol),
                    first_law_tol: first_law_tol.unwrap_or(d.first_law_tol),
                };
                commands::verify_invariance(&m, rep.as_ref(), &o, threads)
            }
            Verify::Contact { model, n, reparam, sweep, min_lambda_det } => {
                let (m, n) = model_or_n(model, *n)?;
                let rep = reparam.as_deref().map(|r| load_reparam(r, n)).transpose()?;
                let o = ContactOptions { points: sweep.points, seed: sweep.seed, min_lambda_det: *min_lambda_det, ..Default::default() };
                let desc = m.as_ref().map_or_else(|| serde_json::json!({ "spec": null, "n": n }), Model::describe);
                commands::verify_contact(desc, n, rep.as_ref(), &o, threads)
            }
            Verify::Legendre { model, n, sweep, tol } => {
                let (m, n) = model_or_n(model, *n)?;
                let d = LegendreOptions::default();
                let o = LegendreOptions { points: sweep.points, seed: sweep.seed, tol: tol.unwrap_or(d.tol), ..d };
                commands::verify_legendre(m.as_ref(), n, &o, threads)
            }
        },
        Command::Maxent { model, targets, initial, tol, max_iter } => {
            let m = parse_model(&model.model)?;
            let t = m.point(targets)?;
            let x0 = initial.as_deref().map(|s| m.point(s)).transpose()?;
            commands::maxent(&m, &t, x0.as_deref(), *tol, *max_iter)
        }
        Command::Sample { model, at, samples, seed } => {
            let m = parse_model(&model.model)?;
            commands::sample(&m, &m.point(at)?, *samples, *seed)
        }
        Command::Curvature { model, at } => {
            let m = parse_model(&model.model)?;
            commands::curvature(&m, &points(&m, at)?, threads)
        }
        Command::Ruppeiner { model, grid, at, tol } => {
            let m = parse_model(&model.model)?;
            let es = match grid {
                Some(g) => {
                    if m.n() != 1 {
                        bail!("--grid needs a model with one observable; use --at E1,E2 for n = {}", m.n());
                    }
                    commands::parse_grid(g)?.into_iter().map(|e| vec![e]).collect()
                }
                None if at.is_empty() => bail!("ruppeiner needs --grid lo:hi:steps or --at E[,..]"),
                None => at.iter().map(|s| m.point(s)).collect::<Result<Vec<_>>>()?,
            };
            commands::ruppeiner(&m, &es, *tol, threads)
        }
    }
}

/// Parses `argv`, runs the command and writes the report to `out` and any
/// error to `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            if out.write_all(report.render(cli.format).as_bytes()).is_err() {
                return EXIT_ERROR;
            }
            match report.pass {
                Some(false) => EXIT_VERIFICATION_FAILED,
                _ => EXIT_OK,
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", format!("{e:#}").replace('\n', " "));
            EXIT_ERROR
        }
    }
}
