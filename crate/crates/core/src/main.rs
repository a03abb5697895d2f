use clap::Parser;
use gridattack::cli::{run, Cli, MANIFEST_FILE};

fn main() {
    let cli = Cli::parse();
    let out = match &cli.command {
        gridattack::cli::Command::Train(a) => Some(a.output.out.clone()),
        gridattack::cli::Command::Eval(a) => Some(a.output.out.clone()),
        gridattack::cli::Command::Analyze(a) => Some(a.output.out.clone()),
        gridattack::cli::Command::ListScenarios => None,
    };
    match run(cli) {
        Ok(_) => {
            if let Some(dir) = out {
                println!("wrote {}", dir.join(MANIFEST_FILE).display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
