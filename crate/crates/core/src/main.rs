use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use viral_timeline::cli::{run, Command, Format, Options};
use viral_timeline::shares::ShareConvention;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Convention {
    Recipient,
    Event,
}

/// Timeline branching-process experiments. Exit codes: 0 ok, 2 config error,
/// 3 regime or solver error.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV tables and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// What goes to stdout: the JSON summary or the primary CSV table.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, value_enum)]
    convention: Option<Convention>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = Options {
        out: args.out,
        seed: args.seed,
        format: args.format,
        convention: args.convention.map(|c| match c {
            Convention::Recipient => ShareConvention::Recipient,
            Convention::Event => ShareConvention::Event,
        }),
    };
    match run(args.command, &args.config, &opts) {
        Ok(s) => {
            let _ = std::io::stdout().write_all(s.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
