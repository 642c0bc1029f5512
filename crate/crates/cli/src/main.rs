mod args;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Command};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    command: Command,
    outputs: Vec<PathBuf>,
    summary: serde_json::Value,
}

fn default_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn execute(command: Command, manifest_path: Option<PathBuf>) -> Result<()> {
    let command = match command {
        Command::Replay(r) => {
            let text = std::fs::read_to_string(&r.manifest_file)
                .with_context(|| format!("reading manifest {}", r.manifest_file.display()))?;
            let manifest: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
            log::info!("replaying {} from {}", manifest.tool, r.manifest_file.display());
            manifest.command
        }
        c => c,
    };
    let report = commands::run(&command)?;
    let path = manifest_path
        .or_else(|| command.out().map(default_manifest_path))
        .expect("every runnable command has an output");
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        outputs: report.outputs,
        summary: report.summary,
    };
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing manifest {}", path.display()))?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|e| e.downcast_ref::<fairpost::Error>().is_some_and(fairpost::Error::is_numerical));
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match execute(cli.command, cli.manifest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
