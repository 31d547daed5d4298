//! `litmeta`: run the mapping and meta-analysis pipeline, or one stage of
//! it, from a JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use litmeta::pipeline::{run_pipeline, run_single_stage, Loaded, Overrides, Stage};
use litmeta::WeightKind;

#[derive(Parser, Debug)]
#[command(name = "litmeta", version, about = "Bibliographic coupling, clustering and meta-analysis pipeline")]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output directory, overriding `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run only this stage (same as the stage subcommand).
    #[arg(long, global = true)]
    stage: Option<Stage>,
    /// Coupling weight used for clustering.
    #[arg(long, global = true)]
    weight: Option<WeightKind>,
    #[arg(long = "enter-p", global = true)]
    enter_p: Option<f64>,
    #[arg(long = "remove-p", global = true)]
    remove_p: Option<f64>,
    #[arg(long = "min-gain", global = true)]
    min_gain: Option<f64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run every stage (default).
    Run,
    /// Parse record files and deduplicate.
    Ingest,
    /// Apply the configured screening stages.
    Screen,
    /// Build the coupling network.
    Couple,
    /// Louvain communities and cluster profiles.
    Cluster,
    /// Bibliometric indicators.
    Biblio,
    /// Load and validate the effects table.
    Effects,
    /// Fixed/random-effects pooling.
    Pool,
    /// FAT-PET and PEESE per group.
    Bias,
    /// Stepwise moderated meta-regression battery.
    Mra,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Run => return None,
            Command::Ingest => Stage::Ingest,
            Command::Screen => Stage::Screen,
            Command::Couple => Stage::Couple,
            Command::Cluster => Stage::Cluster,
            Command::Biblio => Stage::Biblio,
            Command::Effects => Stage::Effects,
            Command::Pool => Stage::Pool,
            Command::Bias => Stage::Bias,
            Command::Mra => Stage::Mra,
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LITMETA_LOG", "warn")).init();
    let cli = Cli::parse();
    let sub_stage = cli.command.and_then(Command::stage);
    if let (Some(a), Some(b)) = (sub_stage, cli.stage) {
        if a != b {
            eprintln!("error: subcommand `{a}` conflicts with --stage {b}");
            return ExitCode::from(2);
        }
    }
    let mut loaded = match Loaded::from_file(&cli.config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    loaded.apply(&Overrides {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        weight_kind: cli.weight,
        enter_p: cli.enter_p,
        remove_p: cli.remove_p,
        min_gain: cli.min_gain,
    });
    let result = match sub_stage.or(cli.stage) {
        Some(stage) => run_single_stage(&loaded, stage).map(|s| {
            for o in &s.outputs {
                println!("{}", loaded.out_dir().join(o).display());
            }
        }),
        None => run_pipeline(&loaded).map(|s| println!("wrote {}", s.out_dir.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
