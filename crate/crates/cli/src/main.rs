use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{Map, Value};

use heatctl::config::{from_map, load_config, parse_override, ConfigError, Experiment};
use heatctl::{run, EXIT_NUMERICAL};

/// Numerical experiments for the singular heat equation.
#[derive(Parser, Debug)]
#[command(name = "heatctl", version)]
struct Args {
    /// One of: hardy, spectrum, blowup, stabilize, weights, carleman, control, observability.
    experiment: String,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, `key=value` (value parsed as JSON).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default `out/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(t) = std::env::var("HEATCTL_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let cfg = (|| {
        let exp: Experiment = args.experiment.parse()?;
        let mut overrides = args.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
        overrides.insert(0, ("experiment".into(), Value::String(exp.name().into())));
        match &args.config {
            Some(p) => load_config(p, &overrides),
            None => from_map(Map::new(), &overrides),
        }
    })();
    let out = args
        .out
        .clone()
        .or_else(|| cfg.as_ref().ok().and_then(|c| c.out_dir.clone().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out").join(&args.experiment));
    let cfg: Result<_, ConfigError> = cfg;
    match run(cfg, &out) {
        Ok(rec) => {
            for i in &rec.invariants {
                println!("{} {}: {}", if i.passed { "ok  " } else { "FAIL" }, i.name, i.detail);
            }
            if let Some(e) = &rec.error {
                eprintln!("error: {e}");
            }
            println!("{} -> {} (exit {})", rec.status, out.join("manifest.json").display(), rec.exit_code);
            ExitCode::from(rec.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            ExitCode::from(EXIT_NUMERICAL as u8)
        }
    }
}
