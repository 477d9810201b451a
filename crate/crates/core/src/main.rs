use std::path::PathBuf;
use std::process::ExitCode;

use autosmart::cli::{cmd_gen_data, cmd_score, cmd_train_predict, CliError, TrainArgs};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "autosmart",
    version,
    about = "Budget-aware AutoML for temporal relational tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a labelled directory and write test-row probabilities.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        budget_s: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// AUC of a prediction file, plus the rescaled score given both references.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        auc_base: Option<f64>,
        #[arg(long)]
        auc_max: Option<f64>,
    },
    /// Write a synthetic dataset directory from a JSON spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            config,
            train,
            test,
            out,
            budget_s,
            seed,
            workers,
        } => {
            let m = cmd_train_predict(&TrainArgs {
                config,
                train,
                test,
                out,
                budget_s,
                seed,
                workers,
            })?;
            eprintln!(
                "wrote {} predictions to {} in {:.1}s ({} features, {} models)",
                m.test_rows,
                m.output.display(),
                m.wall_s,
                m.n_features,
                m.n_models
            );
        }
        Command::Score {
            pred,
            labels,
            auc_base,
            auc_max,
        } => {
            let r = cmd_score(&pred, &labels, auc_base, auc_max)?;
            println!("auc\t{:.6}", r.auc);
            if let Some(s) = r.score {
                println!("score\t{s:.6}");
            }
        }
        Command::GenData { spec, seed, out } => {
            let info = cmd_gen_data(&spec, seed, &out)?;
            eprintln!("wrote {} tables to {}", info.tables.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
