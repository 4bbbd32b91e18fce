//! `polmod <preset|run> [--config path] [--out dir] [--print-defaults] [--seedless]`
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use polmod::config::{defaults_json, load_config, RunConfig};
use polmod::output::write_artifacts;
use polmod::presets::{provenance, run_preset, threads_from_env, Preset};

#[derive(Debug, Parser)]
#[command(
    name = "polmod",
    version,
    about = "Sagnac polarization encoder and decoy-state key rate simulator",
    after_help = "Presets: fig4-vpi, fig10-duty, fig11-delay, fig12-skr, golden-iqber.\n\
                  `run` executes the preset named in the config file.\n\
                  POLMOD_THREADS caps the number of worker threads.\n\
                  Exit codes: 0 success, 1 runtime/I-O error, 2 usage/validation error."
)]
struct Cli {
    /// Preset name, or `run` to use the preset named in the config.
    target: Option<String>,
    /// JSON configuration layered over the defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the default configuration as JSON and exit.
    #[arg(long)]
    print_defaults: bool,
    /// Accepted for compatibility; every model in this tool is deterministic.
    #[arg(long)]
    seedless: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("polmod: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("polmod: {m}");
            ExitCode::from(1)
        }
    }
}

fn resolve_preset(target: &str, cfg: &RunConfig) -> Result<Preset, Failure> {
    let name = if target == "run" {
        cfg.preset
            .as_deref()
            .ok_or_else(|| Failure::Usage("`run` needs a config with a `preset` key".into()))?
    } else {
        if let Some(p) = cfg.preset.as_deref().filter(|p| *p != target) {
            return Err(Failure::Usage(format!(
                "config names preset `{p}` but `{target}` was requested"
            )));
        }
        target
    };
    name.parse()
        .map_err(|e: polmod::presets::UnknownPreset| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.print_defaults {
        let preset = match cli.target.as_deref() {
            None | Some("run") => None,
            Some(t) => Some(
                t.parse::<Preset>()
                    .map_err(|e| Failure::Usage(e.to_string()))?,
            ),
        };
        println!("{}", defaults_json(preset.map(Preset::name)));
        return Ok(());
    }
    let target = cli
        .target
        .ok_or_else(|| Failure::Usage("missing <preset|run>; see --help".into()))?;
    let cfg = match &cli.config {
        Some(path) => load_config(path).map_err(|e| {
            if e.is_validation() {
                Failure::Usage(e.to_string())
            } else {
                Failure::Runtime(e.to_string())
            }
        })?,
        None => RunConfig::default(),
    };
    let preset = resolve_preset(&target, &cfg)?;

    if let Some(n) = threads_from_env().map_err(Failure::Usage)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }

    let artifacts = run_preset(preset, &cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let dir = cli.out.unwrap_or_else(|| cfg.output.dir.clone());
    let written = write_artifacts(&dir, &artifacts, &provenance(&cfg, preset))
        .map_err(|e| Failure::Runtime(format!("writing to {}: {e}", dir.display())))?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
