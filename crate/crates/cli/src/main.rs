//! Command-line driver: bake importance-map corpora, train the compression
//! networks, render scenes, and run the validation battery.

mod commands;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "otmap",
    about = "Optimal-transport importance maps for parametric BSDF sampling",
    version
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate slices and bake importance maps over a parameter lattice.
    Bake(commands::bake::BakeArgs),
    /// Train the sample/eval/pdf networks from a bake directory.
    Train(commands::train::TrainArgs),
    /// Render a scene description.
    Render(commands::render::RenderArgs),
    /// Run the validation battery and emit a machine-readable report.
    Validate(commands::validate::ValidateArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let result = match cli.command {
        Command::Bake(args) => commands::bake::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Render(args) => commands::render::run(args),
        Command::Validate(args) => commands::validate::run(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
