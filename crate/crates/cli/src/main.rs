//! `holfol`: run checks, plots and flows on scenario files.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use holfol::checks::{run_checks, CheckOptions, CHECKS};
use holfol::flows::flow;
use holfol::foliation::FoliationModule;
use holfol::plot::{plot_data, write_plot, PlotKind, PlotOptions};
use holfol::quotient::{project_foliation, pullback_foliation};
use holfol::scenario::{Scenario, BUILTINS};
use holfol::symcore::parse_expr;
use serde_json::json;

#[derive(Parser)]
#[command(name = "holfol", version, about = "Singular foliations, holonomy words and their quotients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// RNG seed (default: the scenario's `seed`, else 1)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flow-evaluation budget for leaf searches (default: the scenario's `budget`, else 10000)
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Tolerance for sampled equalities (default: the scenario's `tol`, else 1e-5)
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run named checks (the scenario's own list if none; `all` for every check)
    Check {
        scenario: String,
        names: Vec<String>,
        /// Samples per sampled property
        #[arg(long, default_value_t = holfol::checks::DEFAULT_SAMPLES)]
        samples: usize,
        /// Also write the JSON report here
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Plot leaves, a flow line or a Ξ-fiber orbit as SVG, with a CSV alongside
    Plot {
        scenario: String,
        /// leaves | flow | fibers
        what: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Flow time for `flow`
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        time: f64,
        /// Start point, e.g. `1,1` or `(pi, 0.5)`
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
    },
    /// Flow a generator from a point for time t
    Flow {
        scenario: String,
        field: String,
        #[arg(allow_hyphen_values = true)]
        point: String,
        #[arg(allow_negative_numbers = true)]
        t: f64,
    },
    /// Print the pushforward foliation π_* F
    Push { scenario: String },
    /// Print the pullback foliation π⁻¹(π_* F)
    Pull { scenario: String },
    /// List built-in scenarios and checks
    List,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(name: &str) -> Result<Scenario> {
    Scenario::load(name).with_context(|| format!("loading scenario `{name}`"))
}

fn parse_point(s: &Scenario, src: &str) -> Result<Vec<f64>> {
    let inner = src.trim().trim_start_matches('(').trim_end_matches(')');
    let names: Vec<String> = s.params.keys().cloned().collect();
    inner
        .split(',')
        .map(|c| {
            let e = parse_expr(c.trim(), &[], &names)?.bind(&s.params);
            Ok(e.eval_at(&[])?)
        })
        .collect()
}

fn describe(f: &FoliationModule) -> serde_json::Value {
    let gens: Vec<_> = f
        .generators()
        .iter()
        .map(|(n, x)| json!({ "name": n, "field": x.display().to_string() }))
        .collect();
    json!({ "manifold": f.manifold().name(), "coords": f.manifold().coord_names(), "generators": gens })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let o = &cli.overrides;
    match cli.command {
        Command::Check {
            scenario,
            names,
            samples,
            output,
        } => {
            let s = load(&scenario)?;
            let mut opts = CheckOptions::from_scenario(&s);
            opts.seed = o.seed.unwrap_or(opts.seed);
            opts.budget = o.budget.unwrap_or(opts.budget);
            opts.tol = o.tol.unwrap_or(opts.tol);
            opts.samples = samples;
            if names.is_empty() && s.checks.is_empty() {
                bail!("scenario `{}` lists no checks; name one", s.name);
            }
            let report = run_checks(&s, &names, &opts)?;
            let text = report.to_json();
            println!("{text}");
            if let Some(path) = output {
                std::fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::from(report.exit_status() as u8))
        }
        Command::Plot {
            scenario,
            what,
            output,
            time,
            from,
        } => {
            let s = load(&scenario)?;
            let kind: PlotKind = what.parse()?;
            let mut opts = PlotOptions::from_scenario(&s);
            opts.seed = o.seed.unwrap_or(opts.seed);
            opts.budget = o.budget.unwrap_or(opts.budget);
            opts.time = time;
            opts.from = from.map(|p| parse_point(&s, &p)).transpose()?;
            let data = plot_data(&s, kind, &opts)?;
            let (svg, csv) = write_plot(&data, &output)?;
            println!("{}\n{}", svg.display(), csv.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Flow {
            scenario,
            field,
            point,
            t,
        } => {
            let s = load(&scenario)?;
            let x = s.foliation()?.generator(&field)?;
            let p = parse_point(&s, &point)?;
            let r = flow(x, &p, t)?;
            println!("{}", serde_json::to_string_pretty(&json!({ "field": field, "start": p, "time": t, "result": r }))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Push { scenario } => {
            let s = load(&scenario)?;
            let proj = project_foliation(s.foliation()?, s.quotient()?)?;
            println!("{}", serde_json::to_string_pretty(&describe(&proj.module))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Pull { scenario } => {
            let s = load(&scenario)?;
            let q = s.quotient()?;
            let fm = project_foliation(s.foliation()?, q)?.module;
            println!("{}", serde_json::to_string_pretty(&describe(&pullback_foliation(&fm, q)?))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            println!("scenarios:");
            for (n, _) in BUILTINS {
                println!("  {n}");
            }
            println!("checks:");
            for (n, d) in CHECKS {
                println!("  {n:<18} {d}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
