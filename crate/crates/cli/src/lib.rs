//! Configuration-driven experiment runner behind the `kylelab` binary.
//!
//! Exit status: 0 on success, 1 on usage, config or input errors, 2 when a
//! requested check fails (`--assert`, and always for `diagnose`).

pub mod args;
pub mod config;
pub mod error;
pub mod output;
mod scenarios;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

pub use args::{Cli, Scenario};
pub use config::{ExperimentConfig, Format};
pub use error::{CliError, Result};
pub use output::{config_hash, Check, Summary};

/// Merges defaults, the config file and the flags of `cli`.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.global.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cli.global.apply(&mut cfg);
    cli.command.apply(&mut cfg);
    Ok(cfg)
}

/// The hashed part of a run: everything that determines its numbers.
/// Output location, format and timing are deliberately excluded.
pub fn config_record(scenario: Scenario, cfg: &ExperimentConfig, params: Value) -> Value {
    json!({
        "scenario": scenario.name(),
        "seed": cfg.seed,
        "paths": cfg.paths,
        "steps": cfg.steps,
        "params": params,
    })
}

#[derive(Debug)]
pub enum Outcome {
    Passed,
    ChecksFailed(Vec<Check>),
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve(cli)?;
    let scenario = cli.command.scenario();
    let tabular = !matches!(
        scenario,
        Scenario::StaticKyle | Scenario::Riskaverse | Scenario::Diagnose
    );
    if cfg.format == Format::Csv && !tabular {
        return Err(CliError::Usage(format!(
            "{} has no time series; use --format summary",
            scenario.name()
        )));
    }
    let start = Instant::now();
    let (params, result) = match scenario {
        Scenario::StaticKyle => scenarios::static_kyle(&cfg),
        Scenario::Kyle => scenarios::kyle(&cfg),
        Scenario::Dynamic => scenarios::dynamic(&cfg),
        Scenario::Bridge => scenarios::bridge(&cfg),
        Scenario::Filter => scenarios::filter(&cfg),
        Scenario::Riskaverse => scenarios::riskaverse(&cfg),
        Scenario::Diagnose => scenarios::diagnose(&cfg),
    }?;
    let wall = cli.global.timing.then(|| start.elapsed().as_secs_f64());
    let record = config_record(scenario, &cfg, params);
    let hash = config_hash(&record);
    let text = match cfg.format {
        Format::Summary => output::render_summary(&Summary {
            scenario: scenario.name().to_owned(),
            config_hash: hash,
            config: record,
            stats: result.stats,
            checks: result.checks.clone(),
            wall_time_s: wall,
        }),
        Format::Csv => {
            let table = result.table.as_ref().expect("tabular scenarios fill a table");
            output::render_csv(table, &record, &hash, wall)
        }
    };
    match &cfg.out {
        Some(path) => output::write_atomic(path, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    let failed: Vec<Check> = result.checks.into_iter().filter(|c| !c.pass).collect();
    let enforced = cfg.assert || scenario == Scenario::Diagnose;
    Ok(if enforced && !failed.is_empty() {
        Outcome::ChecksFailed(failed)
    } else {
        Outcome::Passed
    })
}

/// Parses `args` and runs, mapping every outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed(failed)) => {
            for c in failed {
                eprintln!("check failed: {}: {}", c.name, c.detail);
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
