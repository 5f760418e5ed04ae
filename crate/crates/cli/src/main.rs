//! `tcvf`: build, apply and evaluate type-complexity variable-to-fixed codes.

mod commands;
mod config;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use config::CommonArgs;

#[derive(Parser, Debug)]
#[command(name = "tcvf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a TC dictionary with at most M segments.
    BuildDict(commands::BuildArgs),
    /// Build a Tunstall dictionary for a known parameter.
    Tunstall(commands::TunstallArgs),
    /// Parse a letter stream into codewords.
    Encode(commands::EncodeArgs),
    /// Map a codeword bit string back to letters.
    Decode(commands::DecodeArgs),
    /// Epsilon-coding rates and the asymptotic prediction.
    Evaluate(commands::EvaluateArgs),
    /// Rate-versus-prediction grid written to <out>/sweep.csv; resumable.
    Sweep(CommonArgs),
    /// Check the short-segment / long-codeword event equivalence.
    ConverseCheck(commands::ConverseArgs),
    /// Distance of the normalized information from a Gaussian.
    Normality(commands::NormalityArgs),
}

fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::BuildDict(args) => commands::build_dict(&args),
        Command::Tunstall(args) => commands::tunstall(&args),
        Command::Encode(args) => commands::encode(&args),
        Command::Decode(args) => commands::decode(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Sweep(args) => {
            let summary = sweep::run(&args.resolve()?)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::ConverseCheck(args) => commands::converse_check(&args),
        Command::Normality(args) => commands::normality(&args),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| {
            e.downcast_ref::<tcvf::Error>()
                .map(tcvf::Error::kind)
                .or_else(|| e.downcast_ref::<std::io::Error>().map(|_| "io"))
        })
        .unwrap_or("invalid_argument")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TCVF_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            let report = serde_json::json!({ "error": error_kind(&err), "message": format!("{err:#}") });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
