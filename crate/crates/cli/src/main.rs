use clap::{Args, Parser, Subcommand};
use kpzlab::harness::{self, ExperimentConfig, ExperimentKind, RunReport};
use kpzlab::Result;
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs kpzlab verification suites from `key = value` configuration files.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
/// 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "kpzlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Configuration file; every key falls back to the suite default when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides `experiment.seed`).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "INT")]
    workers: Option<usize>,
    /// Directory for CSV tables and the JSON/text summaries.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quadrature cumulants against polygamma closed forms.
    PsiCheck(RunArgs),
    /// Exponential-moment identity for the discrete polymers.
    EjsDiscrete(RunArgs),
    /// Boundary increment marginals with a non-stationary control.
    Burke(RunArgs),
    /// Signs of coupled derivatives of ln Z and exit monotonicity.
    DerivativeSigns(RunArgs),
    /// Exit-point tail bounds against simulation.
    ExitTail(RunArgs),
    /// Centered MGF scaling, Chernoff consistency and tail exponent.
    MgfTails(RunArgs),
    /// Chernoff and lower-tail bounds on analytic profiles.
    TailMachinery(RunArgs),
    /// Stationary marginals and mean height of the diffusion.
    DiffusionStationarity(RunArgs),
    /// Exponential-moment identity for the diffusion.
    EjsDiffusion(RunArgs),
    /// Pseudo-Gibbs mass and derivative formula.
    PseudoGibbs(RunArgs),
    /// Signs of coupled derivatives of the diffusion height.
    DiffusionDerivs(RunArgs),
    /// Wedge Chernoff bound and optional simulation.
    WedgeBound(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        use ExperimentKind as K;
        match self {
            Command::PsiCheck(a) => (K::PsiCheck, a),
            Command::EjsDiscrete(a) => (K::EjsDiscrete, a),
            Command::Burke(a) => (K::Burke, a),
            Command::DerivativeSigns(a) => (K::DerivativeSigns, a),
            Command::ExitTail(a) => (K::ExitTail, a),
            Command::MgfTails(a) => (K::MgfTails, a),
            Command::TailMachinery(a) => (K::TailMachinery, a),
            Command::DiffusionStationarity(a) => (K::DiffusionStationarity, a),
            Command::EjsDiffusion(a) => (K::EjsDiffusion, a),
            Command::PseudoGibbs(a) => (K::PseudoGibbs, a),
            Command::DiffusionDerivs(a) => (K::DiffusionDerivs, a),
            Command::WedgeBound(a) => (K::WedgeBound, a),
        }
    }
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| kpzlab::Error::ConfigError {
                field: "config".into(),
                message: format!("{}: {e}", p.display()),
            })?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse_for(&text, kind)?;
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(w) = args.workers {
        cfg = cfg.with_workers(w);
    }
    if let Some(o) = &args.out {
        cfg = cfg.with_out(o.clone());
    }
    Ok(cfg)
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<RunReport> {
    let cfg = load(kind, args)?;
    let report = harness::run(&cfg)?;
    if let Some(dir) = &cfg.out {
        report.render(dir)?;
    }
    Ok(report)
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    let result = execute(kind, &args);
    match &result {
        Ok(r) => print!("{}", r.summary()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}
