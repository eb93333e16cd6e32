//! `heatctl`: configuration, output files and the experiment drivers.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;

use serde_json::{json, Value};

use config::{ConfigError, ExperimentConfig};
use experiments::RunError;
use output::{unix_now, OutDir, RunRecord};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Run one experiment into `out_dir`. The manifest is written in every case.
pub fn run(cfg: Result<ExperimentConfig, ConfigError>, out_dir: &Path) -> std::io::Result<RunRecord> {
    let started = unix_now();
    let mut out = OutDir::create(out_dir)?;
    let (config, experiment) = match &cfg {
        Ok(c) => (serde_json::to_value(c).unwrap_or(Value::Null), Some(c.experiment().name().to_string())),
        Err(_) => (Value::Null, None),
    };
    let result = match cfg {
        Ok(c) => match c.validate() {
            Ok(()) => experiments::dispatch(&c, &mut out),
            Err(e) => Err(RunError::Usage(e.0)),
        },
        Err(e) => Err(RunError::Usage(e.0)),
    };
    let (status, exit_code, invariants, error, summary) = match result {
        Ok(o) => {
            let ok = o.invariants.iter().all(|i| i.passed);
            let (s, c) = if ok { ("pass", EXIT_PASS) } else { ("fail", EXIT_INVARIANT) };
            (s, c, o.invariants, None, o.summary)
        }
        Err(RunError::Property(m)) => ("fail", EXIT_INVARIANT, vec![], Some(m), json!({})),
        Err(RunError::Usage(m)) => ("error", EXIT_USAGE, vec![], Some(m), json!({})),
        Err(RunError::Numerical(m)) => ("error", EXIT_NUMERICAL, vec![], Some(m), json!({})),
    };
    let mut artifacts = out.artifacts.clone();
    artifacts.push("manifest.json".into());
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment,
        status,
        exit_code,
        config,
        started_unix: started,
        finished_unix: unix_now(),
        artifacts,
        invariants,
        error,
        summary,
    };
    out.json("manifest.json", &record)?;
    Ok(record)
}
