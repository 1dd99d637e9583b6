//! Library side of the `rgm` binary: argument definitions, command
//! implementations and the exit-code contract.

pub mod args;
pub mod commands;
pub mod error;
pub mod meta;

pub use args::Cli;
pub use error::{exit, CliError, CliResult};

use args::Command;
use commands::Reporter;

/// Run one parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let report = Reporter::new(cli.verbose);
    match &cli.command {
        Command::Schedule(a) => commands::cmd_schedule(a).map(|_| ()),
        Command::Train(a) => commands::cmd_train(a, &report),
        Command::Sample(a) => commands::cmd_sample(a, &report),
        Command::Invert(a) => {
            let scores = commands::cmd_invert(a, &report)?;
            for s in scores {
                println!("{:<12} psnr {:.3} dB  ssim {:.4}", s.method, s.psnr, s.ssim);
            }
            Ok(())
        }
        Command::Eval(a) => commands::cmd_eval(a).map(|_| ()),
    }
}
