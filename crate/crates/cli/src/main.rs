use std::path::PathBuf;
use std::process::ExitCode;

use branch_exponent::{
    budget_from_env, emit, exit, parse_config, run, CliError, Command, RunOptions,
};
use clap::Parser;

/// Growth exponents and Monte Carlo checks for coloured random trees.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// JSON configuration file.
    config: PathBuf,
    /// Run this command instead of the one in the config.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Worker threads for replica simulation (0: one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Validate the config, print its canonical form and exit.
    #[arg(long)]
    emit: bool,
}

fn load(args: &Args) -> Result<branch_exponent::RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    match args.command {
        None => parse_config(&text),
        Some(cmd) => {
            let mut doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
            let obj = doc
                .as_object_mut()
                .ok_or_else(|| CliError::Parse("config must be a JSON object".into()))?;
            obj.insert("command".into(), serde_json::to_value(cmd)?);
            parse_config(&doc.to_string())
        }
    }
}

fn main_inner(args: &Args) -> Result<(), CliError> {
    let config = load(args)?;
    if args.emit {
        println!("{}", emit(&config));
        return Ok(());
    }
    let opts = RunOptions {
        workers: args.workers,
        budget: budget_from_env()?,
        output: args.output.clone(),
    };
    for file in run(&config, &opts)? {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
