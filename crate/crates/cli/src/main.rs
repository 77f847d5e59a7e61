use std::io::BufReader;
use std::sync::{Arc, Mutex};

use clap::Parser;
use dialsim_cli::command_agent::SharedOut;
use dialsim_cli::{Cli, Command};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(cfg) => {
            let out: SharedOut = Arc::new(Mutex::new(Box::new(std::io::stdout())));
            let input = Box::new(BufReader::new(std::io::stdin()));
            dialsim_cli::run(&cfg, input, out)?;
        }
        Command::Synth(args) => {
            dialsim_cli::synth(&args)?;
            println!("wrote {}", args.out.display());
        }
        Command::Goals(args) => {
            let report = dialsim_cli::goals(&args)?;
            println!("{report}");
        }
    }
    Ok(())
}
