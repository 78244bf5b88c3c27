//! `hara`: portfolios, γ-sweeps, verification and simulation from a TOML
//! run configuration.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical divergence,
//! 3 verification failure.

mod format;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hara_core::config::{RunConfig, QUAD_NODES_ENV};
use hara_core::simulator::{simulate, simulate_paths};
use hara_core::verify::run_suite;
use hara_core::{EvalPoint, HaraError};

use format::{render, sig, Format};

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGENT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hara",
    version,
    about = "Optimal HARA portfolios under a Bayesian prior on the market price of risk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal and myopic portfolios, hedging demand and value at each eval point.
    Portfolio(Common),
    /// Power portfolios over the γ grid in `eval.gammas`.
    Sweep(Common),
    /// Run the property and oracle suites for the configured prior.
    Verify(Common),
    /// Monte Carlo comparison of strategies.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to csv when writing to a file and table otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Table,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<HaraError> for Failure {
    fn from(e: HaraError) -> Self {
        let code = if e.is_numerical() {
            EXIT_DIVERGENT
        } else {
            EXIT_CONFIG
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

struct Output {
    text: String,
    code: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let (Command::Portfolio(common)
    | Command::Sweep(common)
    | Command::Verify(common)
    | Command::Simulate(common)) = &cli.command;
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply_quad_override(std::env::var(QUAD_NODES_ENV).ok().as_deref())?;

    let target = common
        .out
        .clone()
        .or_else(|| cfg.output.csv.clone().map(PathBuf::from));
    let format = match (common.format, &target) {
        (Some(FormatArg::Csv), _) | (None, Some(_)) => Format::Csv,
        (Some(FormatArg::Table), _) | (None, None) => Format::Table,
    };
    let out = match &cli.command {
        Command::Portfolio(_) => portfolio(&cfg, &format)?,
        Command::Sweep(_) => sweep(&cfg, &format)?,
        Command::Verify(_) => verify(&cfg)?,
        Command::Simulate(c) => simulation(&cfg, c.seed, &format)?,
    };
    match target {
        Some(path) => fs::write(&path, &out.text).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: format!("{}: {e}", path.display()),
        })?,
        None => {
            let _ = std::io::stdout().write_all(out.text.as_bytes());
        }
    }
    Ok(out.code)
}

/// Cells for a row that failed, and the exit code it implies.
fn error_cells(e: &HaraError, n: usize) -> (Vec<String>, u8) {
    if e.is_numerical() {
        (vec!["DIVERGENT".into(); n], EXIT_DIVERGENT)
    } else {
        eprintln!("row error: {e}");
        (vec!["ERROR".into(); n], EXIT_CONFIG)
    }
}

fn worse(a: u8, b: u8) -> u8 {
    // divergence outranks a bad row
    match (a, b) {
        (EXIT_DIVERGENT, _) | (_, EXIT_DIVERGENT) => EXIT_DIVERGENT,
        _ => a.max(b),
    }
}

fn portfolio(cfg: &RunConfig, format: &Format) -> Result<Output, Failure> {
    let model = cfg.model()?;
    let util = cfg.utility()?;
    let p = cfg.output.precision;
    let points = cfg.eval_points();
    if points.is_empty() {
        return Err(HaraError::Config("no evaluation points in [eval]".into()).into());
    }
    let mut code = 0;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![sig(pt.t, p), sig(pt.y, p), sig(pt.x, p)];
            let result = model
                .policy_report(&util, pt)
                .and_then(|r| Ok((r, model.value_function(&util, pt)?)));
            match result {
                Ok((r, value)) => row.extend([
                    sig(r.pi_hat, p),
                    sig(r.pi_myopic, p),
                    sig(r.hedging_demand, p),
                    r.ratio.map_or("NA".into(), |x| sig(x, p)),
                    sig(value, p),
                ]),
                Err(e) => {
                    let (cells, c) = error_cells(&e, 5);
                    code = worse(code, c);
                    row.extend(cells);
                }
            }
            row
        })
        .collect();
    let header = [
        "t",
        "y",
        "x",
        "pi_hat",
        "pi_myopic",
        "hedging",
        "ratio",
        "value",
    ];
    Ok(Output {
        text: render(format, &header, &rows),
        code,
    })
}

fn sweep(cfg: &RunConfig, format: &Format) -> Result<Output, Failure> {
    let model = cfg.model()?;
    if cfg.eval.gammas.is_empty() {
        return Err(HaraError::Config("sweep needs eval.gammas".into()).into());
    }
    // only explicit points; grids are for `portfolio`
    let points = if cfg.eval.points.is_empty() {
        vec![EvalPoint::new(0.0, 1.0, 0.0)]
    } else {
        cfg.eval.points.clone()
    };
    let p = cfg.output.precision;
    let mut code = 0;
    let mut rows = Vec::new();
    for pt in &points {
        for row in model.gamma_sweep(pt, cfg.utility.beta(), cfg.utility.eta(), &cfg.eval.gammas) {
            let mut cells = vec![sig(pt.t, p), sig(pt.y, p), sig(pt.x, p), sig(row.gamma, p)];
            match row.result {
                Ok(v) => cells.extend([
                    sig(v.pi_hat, p),
                    sig(v.pi_myopic, p),
                    sig(v.hedging, p),
                    v.ratio.map_or("NA".into(), |x| sig(x, p)),
                ]),
                Err(e) => {
                    let (c, k) = error_cells(&e, 4);
                    code = worse(code, k);
                    cells.extend(c);
                }
            }
            rows.push(cells);
        }
    }
    let header = [
        "t",
        "y",
        "x",
        "gamma",
        "pi_hat",
        "pi_myopic",
        "hedging",
        "ratio",
    ];
    Ok(Output {
        text: render(format, &header, &rows),
        code,
    })
}

fn verify(cfg: &RunConfig) -> Result<Output, Failure> {
    let model = cfg.model()?;
    let report = run_suite(&model, &cfg.suite_options())?;
    let mut text = String::new();
    for c in &report.checks {
        text.push_str(&c.to_string());
        text.push('\n');
    }
    if !report.detections.is_empty() {
        text.push_str(&format!(
            "detected {} monotonicity violations (mixed-sign prior):\n",
            report.detections.len()
        ));
        for d in &report.detections {
            text.push_str("  ");
            text.push_str(d);
            text.push('\n');
        }
    }
    let ok = report.all_passed();
    text.push_str(if ok {
        "verification passed\n"
    } else {
        "verification FAILED\n"
    });
    Ok(Output {
        text,
        code: if ok { 0 } else { EXIT_VERIFY },
    })
}

fn simulation(cfg: &RunConfig, seed: Option<u64>, format: &Format) -> Result<Output, Failure> {
    let sim = cfg.sim_config(seed)?;
    let report = simulate(&sim)?;
    let p = cfg.output.precision;
    let opt = |v: Option<f64>| v.map_or("NA".into(), |x| sig(x, p));
    let mut rows = Vec::new();
    for s in &report.strategies {
        rows.push(vec![
            "utility".into(),
            s.strategy.to_string(),
            s.retained.to_string(),
            s.violations.to_string(),
            sig(s.mean_utility, p),
            sig(s.std_error, p),
            "NA".into(),
            "NA".into(),
            opt(s.certainty_equivalent),
        ]);
        rows.push(vec![
            "wealth".into(),
            s.strategy.to_string(),
            s.retained.to_string(),
            s.violations.to_string(),
            sig(s.mean_wealth, p),
            sig(s.wealth_std_error, p),
            "NA".into(),
            "NA".into(),
            "NA".into(),
        ]);
    }
    for d in &report.paired {
        let (lo, hi) = d.ci95();
        rows.push(vec![
            "paired".into(),
            format!("{}-{}", d.first, d.second),
            d.n.to_string(),
            (sim.n_paths - d.n).to_string(),
            sig(d.mean, p),
            sig(d.std_error, p),
            sig(lo, p),
            sig(hi, p),
            "NA".into(),
        ]);
    }
    let header = [
        "kind",
        "strategy",
        "n",
        "violations",
        "mean",
        "std_error",
        "ci95_low",
        "ci95_high",
        "certainty_equivalent",
    ];

    if let (Some(path), true) = (&cfg.output.paths_csv, cfg.sim.record_paths > 0) {
        let count = cfg.sim.record_paths.min(sim.n_paths);
        let paths = simulate_paths(&sim, 0..count)?;
        let mut head = vec!["path", "step", "t", "y", "theta_hat", "theta_var"];
        let names: Vec<String> = sim
            .strategies
            .iter()
            .map(|s| format!("wealth_{s}"))
            .collect();
        head.extend(names.iter().map(String::as_str));
        let dt = sim.market.horizon / sim.n_steps as f64;
        let mut prow = Vec::new();
        for path in &paths {
            for k in 0..path.y.len() {
                let mut r = vec![
                    path.index.to_string(),
                    k.to_string(),
                    sig(k as f64 * dt, p),
                    sig(path.y[k], p),
                    sig(path.theta_hat[k], p),
                    sig(path.theta_var[k], p),
                ];
                r.extend(path.wealth.iter().map(|w| sig(w[k], p)));
                prow.push(r);
            }
        }
        fs::write(path, render(&Format::Csv, &head, &prow)).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: format!("{path}: {e}"),
        })?;
    }
    Ok(Output {
        text: render(format, &header, &rows),
        code: 0,
    })
}
