use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use symdrift::experiment::{
    cmd_eval, cmd_gen_data, cmd_sample, cmd_train, cmd_verify, render_metrics, run_experiment,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "symdrift",
    about = "Symmetry-aware one-shot drifting models for typed 3D point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the key = value experiment config.
    #[arg(long, global = true, default_value = "experiment.cfg")]
    config: PathBuf,

    /// Override the config's root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for datasets, checkpoints, and reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write it to the out directory.
    GenData,
    /// Train the generator on the configured dataset.
    Train,
    /// Draw one-shot samples from a trained checkpoint.
    Sample,
    /// Compute coverage / AMR metrics of samples against the dataset.
    Eval,
    /// Run the analytic verification suite.
    Verify,
    /// Full pipeline: train, sample, eval, optional verify, thresholds.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> symdrift::Result<ExitCode> {
    match cli.command {
        Command::GenData => {
            let config = ExperimentConfig::load(&cli.config, cli.seed)?;
            let path = cmd_gen_data(&config, &cli.out_dir)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train => {
            let config = ExperimentConfig::load(&cli.config, cli.seed)?;
            let (path, final_loss) = cmd_train(&config, &cli.out_dir)?;
            println!("final_loss {final_loss:.6e}");
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample => {
            let config = ExperimentConfig::load(&cli.config, cli.seed)?;
            let path = cmd_sample(&config, &cli.out_dir)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval => {
            let config = ExperimentConfig::load(&cli.config, cli.seed)?;
            let metrics = cmd_eval(&config, &cli.out_dir)?;
            print!("{}", render_metrics(&metrics));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let config = ExperimentConfig::load(&cli.config, cli.seed)?;
            let report = cmd_verify(&config, &cli.out_dir)?;
            print!("{}", report.render_text());
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Run => {
            let outcome = run_experiment(&cli.config, &cli.out_dir, cli.seed)?;
            println!("final_loss {:.6e}", outcome.final_loss);
            print!("{}", render_metrics(&outcome.metrics));
            if let Some(report) = &outcome.verification {
                print!("{}", report.render_text());
            }
            for failure in &outcome.accept_failures {
                eprintln!("acceptance failure: {failure}");
            }
            if outcome.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
