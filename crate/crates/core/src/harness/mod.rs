//! Reproducible experiment runner: `key = value` configs, seeded replica scheduling,
//! and CSV/JSON reports.
//!
//! Results are a pure function of the configuration and master seed; the worker count
//! only changes wall-clock time.

mod config;
mod report;
mod suites;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{Check, RunReport, Table};

use crate::error::{Error, Result};
use std::time::Instant;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Executes the configured suite on a pool of `cfg.workers` threads (0 = all cores).
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("experiment.workers", e.to_string()))?;
    let start = Instant::now();
    let (checks, tables) = pool.install(|| suites::run_suite(cfg))?;
    Ok(RunReport {
        kind: cfg.kind.name().to_string(),
        config_hash: cfg.hash(),
        config: cfg.verbatim().to_string(),
        seed: cfg.seed,
        checks,
        tables,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

pub fn exit_code(result: &Result<RunReport>) -> i32 {
    match result {
        Ok(r) if r.passed() => EXIT_PASS,
        Ok(_) => EXIT_CHECK_FAILED,
        Err(Error::ConfigError { .. }) => EXIT_CONFIG,
        Err(_) => EXIT_NUMERIC,
    }
}

/// Minimal configuration that runs `kind` with every default.
pub fn default_config(kind: ExperimentKind, seed: u64) -> String {
    format!("[experiment]\nkind = {kind}\nseed = {seed}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_check_defaults_pass() {
        let cfg = ExperimentConfig::parse(&default_config(ExperimentKind::PsiCheck, 1)).unwrap();
        let r = run(&cfg).unwrap();
        assert!(r.passed(), "{}", r.summary());
        assert_eq!(r.table("psi").unwrap().rows.len(), 3 * 5 * 4);
        assert_eq!(exit_code(&Ok(r)), EXIT_PASS);
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        let text = "[experiment]\nkind = ejs-discrete\n[suite]\nreplicas = 1\n";
        let r = run(&ExperimentConfig::parse(text).unwrap());
        assert_eq!(exit_code(&r), EXIT_CONFIG);
        let text = "[experiment]\nkind = burke\n[model]\nname = invgamma\na = 0.5\n";
        assert_eq!(exit_code(&run(&ExperimentConfig::parse(text).unwrap())), EXIT_CONFIG);
        assert_eq!(exit_code(&Err(Error::QuadratureFailure("x".into()))), EXIT_NUMERIC);
    }

    #[test]
    fn empty_suite_exits_nonzero() {
        let text = "[experiment]\nkind = ejs-discrete\n[suite]\nmodels = invgamma\nlambdas = 0.1\nsides = auto\nsizes = 1x1\nreplicas = 2\n";
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        assert!(run(&cfg).unwrap().checks.len() == 2);
        cfg = ExperimentConfig::parse(&text.replace("lambdas = 0.1", "lambdas = 5")).unwrap();
        let r = run(&cfg).unwrap();
        assert!(r.checks.is_empty());
        assert_eq!(exit_code(&Ok(r)), EXIT_CHECK_FAILED);
    }
}
