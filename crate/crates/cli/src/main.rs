use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use samurai_core::audit_schedule::AuditSchedule;
use samurai_core::certify::{
    certify_efficient_with, certify_tight_necessary_with, compare_efficiency, compare_tightness,
    Order, Verdict, CERTIFY_TOL,
};
use samurai_core::constructor::build_efficient;
use samurai_core::lambda_space::{classify_debt, lambda_plus, validate_lambda, virtual_loss};
use samurai_core::mechanism::{check_feasible, check_ic, Mechanism};
use samurai_core::oracle::{self, DiscreteInstance, OracleVerdict};
use samurai_core::random::random_lambda;
use samurai_core::tighten::{tighten_with, Menu, TightenOptions};
use samurai_core::{Environment, LossFunction, PwlFunction};

mod table;

use table::Table;

#[derive(Parser)]
#[command(
    name = "samurai",
    version,
    about = "Construct, tighten and certify audit mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Environment JSON: {"x_lo", "x_hi", "tau", "cost": {"kind", "k", "p"}}
    #[arg(long, global = true)]
    env: Option<PathBuf>,

    /// Loss function JSON: {"breakpoints": [[x, v], ...]}
    #[arg(long, global = true)]
    lambda: Option<PathBuf>,

    /// Mechanism JSON: {"grid", "a", "r_p", "r_empty"}; repeat for compare
    #[arg(long, global = true)]
    mechanism: Vec<PathBuf>,

    /// Number of uniform grid points
    #[arg(long, global = true, default_value_t = samurai_core::DEFAULT_GRID)]
    grid: usize,

    /// Certificate tolerance
    #[arg(long, global = true, default_value_t = CERTIFY_TOL)]
    tol: f64,

    /// Draw a random loss function when --lambda is absent
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the output here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a loss function for admissibility
    Validate,
    /// Build the efficient mechanism of a loss function
    Construct,
    /// Improve a mechanism
    Tighten {
        #[arg(long, value_enum, default_value_t = MenuArg::Interval)]
        menu: MenuArg,
    },
    /// Certify a mechanism
    Check,
    /// Compare two mechanisms in both orders
    Compare,
    /// Enumerate a small discrete instance, optionally testing a mechanism for dominance
    Bruteforce {
        /// Comma-separated increasing types
        #[arg(long, value_delimiter = ',', required = true)]
        types: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 3)]
        refund_levels: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Efficiency)]
        mode: ModeArg,
    },
    /// Export tables for plotting
    Export {
        #[arg(long, value_enum, default_value_t = TableArg::Plot)]
        table: TableArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MenuArg {
    Interval,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Efficiency,
    Tightness,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    /// Mechanism columns, revenue, utility, profit, deviation loss, alpha, beta
    Plot,
    /// alpha, beta and the audit probability of a loss function
    Schedule,
    /// Deviation loss, its running maximum and the virtual loss of a mechanism
    Virtual,
}

/// A command's result: what to print and whether it is a semantic negative.
struct Output {
    body: Body,
    negative: bool,
}

enum Body {
    Json(Value),
    Table(Table),
}

impl Output {
    fn ok(body: Body) -> Self {
        Self {
            body,
            negative: false,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(out) => match emit(&cli, &out.body) {
            Ok(()) => ExitCode::from(if out.negative { 2 } else { 0 }),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Err(e) => match semantic(&e) {
            Some(report) => {
                eprintln!("error: {e:#}");
                println!("{}", pretty(&report));
                ExitCode::from(2)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SAMURAI_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("SAMURAI_THREADS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

/// Library errors that are verdicts about the input rather than usage or I/O
/// failures, rendered as JSON.
fn semantic(e: &anyhow::Error) -> Option<Value> {
    use samurai_core::Error as E;
    let err = e.downcast_ref::<E>()?;
    let value = match err {
        E::InvalidLambda(violations) => {
            json!({"error": "invalid-lambda", "violations": violations})
        }
        E::Precondition(report) => json!({"error": "precondition", "report": report}),
        E::InstanceTooLarge { estimate, limit } => {
            json!({"error": "instance-too-large", "estimate": estimate, "limit": limit})
        }
        E::Refused(msg) => json!({"error": "refused", "message": msg}),
        _ => return None,
    };
    Some(value)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

fn emit(cli: &Cli, body: &Body) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    match body {
        Body::Json(v) => {
            buf.extend_from_slice(pretty(v).as_bytes());
            buf.push(b'\n');
        }
        Body::Table(t) => match cli.format {
            Format::Csv => t.write_csv(&mut buf)?,
            Format::Json => {
                buf.extend_from_slice(pretty(&t.to_json()).as_bytes());
                buf.push(b'\n');
            }
        },
    }
    match &cli.out {
        Some(path) => fs::write(path, &buf).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(&buf)?;
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_env(cli: &Cli) -> anyhow::Result<Environment> {
    let path = cli.env.as_deref().context("--env is required")?;
    let env: Environment = read_json(path)?;
    env.validate()?;
    Ok(env)
}

/// The loss function from --lambda, or a random one from --seed.
fn load_shape(cli: &Cli, env: &Environment) -> anyhow::Result<PwlFunction> {
    match (&cli.lambda, cli.seed) {
        (Some(path), _) => read_json(path),
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(random_lambda(&mut rng, env)?.into_shape())
        }
        (None, None) => bail!("one of --lambda or --seed is required"),
    }
}

fn load_lambda(cli: &Cli, env: &Environment) -> anyhow::Result<LossFunction> {
    Ok(validate_lambda(&load_shape(cli, env)?, env)?)
}

fn load_mechanisms(cli: &Cli, count: usize) -> anyhow::Result<Vec<Mechanism>> {
    if cli.mechanism.len() != count {
        bail!(
            "expected {count} --mechanism argument(s), got {}",
            cli.mechanism.len()
        );
    }
    cli.mechanism.iter().map(|p| read_json(p)).collect()
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    if cli.grid < 2 {
        bail!("--grid must be at least 2");
    }
    let env = load_env(cli)?;
    match &cli.command {
        Command::Validate => validate(cli, &env),
        Command::Construct => {
            let lam = load_lambda(cli, &env)?;
            let m = build_efficient(&lam, &env, cli.grid)?;
            Ok(Output::ok(match cli.format {
                Format::Json => Body::Json(serde_json::to_value(&m)?),
                Format::Csv => Body::Table(plot_table(&m, &env)?),
            }))
        }
        Command::Tighten { menu } => {
            let m = load_mechanisms(cli, 1)?.remove(0);
            let menu = match menu {
                MenuArg::Interval => Menu::Interval,
                MenuArg::Grid => Menu::Grid,
            };
            let report = tighten_with(&m, &env, TightenOptions { menu })?;
            Ok(Output::ok(match cli.format {
                Format::Json => Body::Json(json!({
                    "lambda_star": report.lambda_star,
                    "audit_decreased": report.audit_decreased,
                    "revenue_increased": report.revenue_increased,
                    "mechanism": report.mechanism_out,
                })),
                Format::Csv => Body::Table(plot_table(&report.mechanism_out, &env)?),
            }))
        }
        Command::Check => {
            let m = load_mechanisms(cli, 1)?.remove(0);
            let efficiency = certify_efficient_with(&m, &env, cli.tol)?;
            let tightness = certify_tight_necessary_with(&m, &env, cli.tol)?;
            Ok(Output {
                negative: efficiency.verdict != Verdict::CertifiedEfficient,
                body: Body::Json(json!({
                    "efficiency": efficiency,
                    "tightness": tightness,
                })),
            })
        }
        Command::Compare => {
            let ms = load_mechanisms(cli, 2)?;
            let e = compare_efficiency(&ms[0], &ms[1], &env)?;
            let t = compare_tightness(&ms[0], &ms[1], &env)?;
            Ok(Output::ok(Body::Json(json!({
                "efficiency": e.label(Order::Efficiency),
                "tightness": t.label(Order::Tightness),
            }))))
        }
        Command::Bruteforce {
            types,
            q,
            refund_levels,
            mode,
        } => {
            let inst = DiscreteInstance::new(types.clone(), *q, *refund_levels, env)?;
            if cli.mechanism.is_empty() {
                let count = oracle::count_feasible_ic(&inst)?;
                return Ok(Output::ok(Body::Json(json!({
                    "types": inst.types,
                    "q": inst.q,
                    "refund_levels": inst.refund_levels,
                    "candidates": inst.candidate_estimate(),
                    "feasible_ic": count,
                }))));
            }
            let m = load_mechanisms(cli, 1)?.remove(0);
            let mode = match mode {
                ModeArg::Efficiency => oracle::Mode::Efficiency,
                ModeArg::Tightness => oracle::Mode::Tightness,
            };
            let report = oracle::is_undominated(&m, &inst, mode)?;
            Ok(Output {
                negative: report.verdict == OracleVerdict::Dominated,
                body: Body::Json(serde_json::to_value(&report)?),
            })
        }
        Command::Export { table } => {
            let t = match table {
                TableArg::Plot => {
                    let m = load_mechanisms(cli, 1)?.remove(0);
                    plot_table(&m, &env)?
                }
                TableArg::Schedule => schedule_table(&load_lambda(cli, &env)?, &env, cli.grid)?,
                TableArg::Virtual => {
                    let m = load_mechanisms(cli, 1)?.remove(0);
                    virtual_table(&m, &env)?
                }
            };
            Ok(Output::ok(Body::Table(t)))
        }
    }
}

#[derive(Serialize)]
struct Validation {
    valid: bool,
    lambda: LossFunction,
    debt_threshold: Option<f64>,
    crossover: f64,
    single_crossing: bool,
}

fn validate(cli: &Cli, env: &Environment) -> anyhow::Result<Output> {
    let shape = load_shape(cli, env)?;
    match validate_lambda(&shape, env) {
        Ok(lam) => {
            let schedule = AuditSchedule::new(&lam, env);
            let crossing = schedule.check_single_crossing(cli.grid)?;
            let v = Validation {
                valid: true,
                debt_threshold: classify_debt(&lam),
                crossover: schedule.crossover(),
                single_crossing: crossing.passed,
                lambda: lam,
            };
            Ok(Output::ok(Body::Json(serde_json::to_value(v)?)))
        }
        Err(samurai_core::Error::InvalidLambda(violations)) => Ok(Output {
            negative: true,
            body: Body::Json(json!({"valid": false, "violations": violations})),
        }),
        Err(e) => Err(e.into()),
    }
}

/// Columns x, a, r_p, r_empty, R, U, Pi, lambda_m, alpha, beta on the
/// mechanism's grid; alpha and beta are those of the deviation loss.
fn plot_table(m: &Mechanism, env: &Environment) -> anyhow::Result<Table> {
    check_feasible(m, env).into_result()?;
    let loss = m.deviation_loss_table();
    let schedule =
        AuditSchedule::from_shape_unchecked(&PwlFunction::from_table(m.grid(), &loss)?, env);
    let alpha = m
        .grid()
        .iter()
        .map(|&y| schedule.alpha(y))
        .collect::<Result<_, _>>()?;
    let beta = m
        .grid()
        .iter()
        .map(|&y| schedule.beta(y))
        .collect::<Result<_, _>>()?;
    Ok(Table::new(
        vec![
            "x", "a", "r_p", "r_empty", "R", "U", "Pi", "lambda_m", "alpha", "beta",
        ],
        vec![
            m.grid().to_vec(),
            m.a().to_vec(),
            m.r_p().to_vec(),
            m.r_empty().to_vec(),
            m.revenue_table(),
            m.utility_table(),
            m.profit_table(env)?,
            loss,
            alpha,
            beta,
        ],
    ))
}

fn schedule_table(lam: &LossFunction, env: &Environment, n: usize) -> anyhow::Result<Table> {
    let grid = env.uniform_grid(n)?;
    let s = AuditSchedule::new(lam, env);
    let values = grid
        .iter()
        .map(|&y| lam.eval(y))
        .collect::<Result<_, _>>()?;
    let alpha = grid.iter().map(|&y| s.alpha(y)).collect::<Result<_, _>>()?;
    let beta = grid.iter().map(|&y| s.beta(y)).collect::<Result<_, _>>()?;
    let a = s.audit_table(&grid)?;
    Ok(Table::new(
        vec!["x", "lambda", "alpha", "beta", "a"],
        vec![grid, values, alpha, beta, a],
    ))
}

fn virtual_table(m: &Mechanism, env: &Environment) -> anyhow::Result<Table> {
    check_feasible(m, env).into_result()?;
    check_ic(m, env).into_result()?;
    let loss = m.deviation_loss_table();
    let plus = lambda_plus(m.grid(), &loss, env)?;
    let star = virtual_loss(m.grid(), &loss, m.a(), env)?;
    let plus_col = m
        .grid()
        .iter()
        .map(|&x| plus.eval(x))
        .collect::<Result<_, _>>()?;
    let star_col = m
        .grid()
        .iter()
        .map(|&x| star.eval(x))
        .collect::<Result<_, _>>()?;
    Ok(Table::new(
        vec!["x", "lambda_m", "lambda_plus", "lambda_star"],
        vec![m.grid().to_vec(), loss, plus_col, star_col],
    ))
}
