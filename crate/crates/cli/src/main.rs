use std::process::ExitCode;

use ambrose_cli::config::Args;
use ambrose_cli::{output, run, EXIT_CONFIG};
use clap::Parser;

fn write(text: &str, out: Option<&std::path::Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(text.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_fixtures {
        let text = output::render(&ambrose_core::fixtures::catalog()).expect("catalog serializes");
        return match write(&text, args.out.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("ambrose: {e}");
                ExitCode::from(EXIT_CONFIG as u8)
            }
        };
    }
    let outcome = args.to_config().and_then(|c| c.validate()).and_then(|c| Ok((run(&c)?, c.out)));
    let (outcome, out) = match outcome {
        Ok(v) => v,
        Err(e) => {
            eprintln!("ambrose: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let text = output::render(&outcome.report).expect("reports serialize");
    if let Err(e) = write(&text, out.as_deref()) {
        eprintln!("ambrose: cannot write report: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    ExitCode::from(outcome.code as u8)
}
