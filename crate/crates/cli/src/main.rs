use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvrisk::checks::{run_suite, Suite};
use mvrisk::harness::compare_with_theory;
use mvrisk::report::{self, ReportFormat};
use mvrisk::{ExperimentConfig, PortfolioError, StatKind, Thresholds};

mod exit {
    pub const OK: u8 = 0;
    pub const COMPARE_FAILED: u8 = 1;
    pub const DOMAIN: u8 = 2;
    pub const EXPERIMENT: u8 = 3;
    pub const USAGE: u8 = 64;
    pub const DATA: u8 = 65;
    pub const IO: u8 = 74;
}

#[derive(Parser, Debug)]
#[command(name = "mvrisk", version, about = "Mean-variance portfolios: closed-form theory and Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write large-market theory curves over an R sweep.
    Analytic {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo experiment and write a report against theory.
    Simulate {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum, default_value_t = Stat::Stderr)]
        stat: Stat,
    },
    /// Score a simulation report against an analytic curve file.
    Compare {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in invariant suite: identities, duality, tobin or oracle.
    Check { suite: String },
}

#[derive(Args, Debug)]
struct MarketArgs {
    /// JSON experiment config; the desk config when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Return grid as `lo:hi:step`, overriding the config.
    #[arg(long)]
    sweep: Option<String>,
    /// Use N=1000, p=2000.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Stat {
    Stderr,
    Stddev,
}

impl From<Stat> for StatKind {
    fn from(s: Stat) -> Self {
        match s {
            Stat::Stderr => StatKind::Stderr,
            Stat::Stddev => StatKind::Stddev,
        }
    }
}

/// A failed command: exit code plus the message for stderr.
struct Failure(u8, String);

impl From<PortfolioError> for Failure {
    fn from(e: PortfolioError) -> Self {
        let code = match &e {
            PortfolioError::InvalidParameter(_)
            | PortfolioError::Singular { .. }
            | PortfolioError::Degenerate(_)
            | PortfolioError::Domain(_)
            | PortfolioError::UndefinedSharpe { .. }
            | PortfolioError::InfeasibleRiskBudget { .. }
            | PortfolioError::NoTangency { .. } => exit::DOMAIN,
            PortfolioError::Config(_) => exit::USAGE,
            PortfolioError::ExperimentFailed { .. } => exit::EXPERIMENT,
            PortfolioError::Io { .. } => exit::IO,
            PortfolioError::Data { .. } => exit::DATA,
        };
        Failure(code, e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

fn parse_sweep(spec: &str) -> Result<Vec<f64>, Failure> {
    let usage = |why: &str| Failure(exit::USAGE, format!("bad --sweep {spec:?}: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(usage("expected lo:hi:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage("not a number"));
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(usage("values must be finite"));
    }
    if !(step > 0.0) || hi < lo {
        return Err(usage("empty sweep"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // Round away the drift of lo + i*step so grid values print cleanly.
    Ok((0..count)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn load_config(market: &MarketArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &market.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::desk(),
    };
    if market.paper_scale {
        config.n = 1000;
        config.p = 2000;
    }
    if let Some(spec) = &market.sweep {
        config.r_grid = parse_sweep(spec)?;
    }
    if config.r_grid.is_empty() {
        return Err(Failure(exit::USAGE, "empty R sweep".into()));
    }
    Ok(config)
}

fn cmd_analytic(market: &MarketArgs, out: &Path) -> CmdResult {
    let config = load_config(market)?;
    let m = config.true_moments()?;
    let rows = report::theory_rows(&m, config.alpha(), config.rho, config.r0, &config.r_grid)?;
    report::write_theory_csv(&rows, out)?;
    log::info!("wrote {} theory points to {}", rows.len(), out.display());
    Ok(exit::OK)
}

fn cmd_simulate(
    market: &MarketArgs,
    out: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    stat: Stat,
) -> CmdResult {
    let mut config = load_config(market)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(trials) = trials {
        config.trials = trials;
    }
    config.validate()?;
    let m = config.true_moments()?;
    let summary = mvrisk::run_experiment(&config)?;
    let report = compare_with_theory(&summary, &m, config.alpha(), stat.into(), Thresholds::default())?;
    report::emit_report(&report, out, ReportFormat::from_path(out))?;
    log::info!(
        "wrote {} to {}: max |z| = {:.3}, max rel err = {:.4}, pass = {}",
        if matches!(ReportFormat::from_path(out), ReportFormat::Json) { "JSON report" } else { "CSV report" },
        out.display(),
        report.max_abs_z,
        report.max_rel_err,
        report.pass
    );
    Ok(exit::OK)
}

fn cmd_compare(theory: &Path, sim: &Path, out: &Path) -> CmdResult {
    let theory_rows = report::read_theory_csv(theory)?;
    let sim_rows = report::read_report_rows(sim)?;
    let rep = report::compare_files(&theory_rows, &sim_rows, Thresholds::default())
        .map_err(|e| Failure(exit::DATA, e.to_string()))?;
    report::emit_report(&rep, out, ReportFormat::from_path(out))?;
    log::info!(
        "max |z| = {:.3}, max rel err = {:.4}",
        rep.max_abs_z,
        rep.max_rel_err
    );
    Ok(if rep.pass { exit::OK } else { exit::COMPARE_FAILED })
}

fn cmd_check(suite: &str) -> CmdResult {
    let suite: Suite = suite.parse()?;
    let results = run_suite(suite);
    for r in &results {
        println!("{suite} {r}");
    }
    Ok(if results.iter().all(|r| r.pass) {
        exit::OK
    } else {
        exit::COMPARE_FAILED
    })
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Analytic { market, out } => cmd_analytic(&market, &out),
        Command::Simulate {
            market,
            out,
            seed,
            trials,
            stat,
        } => cmd_simulate(&market, &out, seed, trials, stat),
        Command::Compare { theory, sim, out } => cmd_compare(&theory, &sim, &out),
        Command::Check { suite } => cmd_check(&suite),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("mvrisk: {msg}");
            ExitCode::from(code)
        }
    }
}
