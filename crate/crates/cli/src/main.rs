use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emaml_core::harness::{self, AdaptOptions, ExperimentConfig, Method};
use emaml_core::{EnvKind, Error, MetaVariant, PolicyStore};

#[derive(Parser)]
#[command(name = "emaml", version, about = "Fault-adaptive policy training with a curated library of prior policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML). Defaults to the built-in cart-pole setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Store directory for policies, manifests and run logs.
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the step budget of this stage.
    #[arg(long)]
    steps: Option<usize>,
    /// Replace existing records instead of refusing.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Emaml,
    Maml,
    Ppo,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Maml,
    Fomaml,
    Reptile,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Cartpole,
    Fueltank,
}

#[derive(Subcommand)]
enum Command {
    /// Train the controller on the nominal process.
    TrainNominal(Common),
    /// Train one policy per configured fault and curate the library.
    BuildComplement(Common),
    /// Adapt to the configured fault with the chosen method.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Number of library policies used by the meta-update.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Step-aligned CSV comparison of stored runs.
    Report {
        #[arg(long, default_value = "store")]
        store: PathBuf,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(required = true)]
        run_ids: Vec<String>,
    },
    /// Delete stored fault policies that are not in the curated library.
    Prune {
        #[arg(long, default_value = "store")]
        store: PathBuf,
    },
    /// Print the fully resolved configuration.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults for this process when no file is given.
        #[arg(long, value_enum, default_value = "cartpole")]
        env: KindArg,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(path: Option<&PathBuf>, kind: EnvKind) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Validation(e.to_string())),
        None => Ok(ExperimentConfig::default_for(kind)),
    }
}

fn setup(common: &Common) -> Result<(ExperimentConfig, PolicyStore), Failure> {
    let config = load_config(common.config.as_ref(), EnvKind::CartPole)?;
    let store = PolicyStore::open(&common.store)?;
    Ok((config, store))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::TrainNominal(common) => {
            let (mut config, mut store) = setup(&common)?;
            if let Some(steps) = common.steps {
                config.runs.nominal_steps = steps;
            }
            let record = harness::train_nominal(&config, &mut store, common.seed, common.overwrite)?;
            println!(
                "{}: total reward {} -> {}",
                record.run_id,
                record.total_reward,
                store.root().join(&record.rewards).display()
            );
        }
        Command::BuildComplement(common) => {
            let (mut config, mut store) = setup(&common)?;
            if let Some(steps) = common.steps {
                config.runs.complement_steps = steps;
            }
            let out = harness::build_complement(&config, &mut store, common.seed, common.overwrite)?;
            print!("{}", out.divergence_csv());
        }
        Command::Adapt {
            common,
            method,
            rank,
            variant,
        } => {
            let (mut config, mut store) = setup(&common)?;
            if let Some(steps) = common.steps {
                config.runs.adapt_steps = steps;
            }
            let method = match method {
                MethodArg::Emaml => Method::Emaml,
                MethodArg::Maml => Method::Maml,
                MethodArg::Ppo => Method::Ppo,
            };
            let variant = variant.map(|v| match v {
                VariantArg::Maml => MetaVariant::Maml,
                VariantArg::Fomaml => MetaVariant::Fomaml,
                VariantArg::Reptile => MetaVariant::Reptile,
            });
            let options = AdaptOptions {
                method,
                rank,
                variant,
                seed: common.seed,
                overwrite: common.overwrite,
            };
            let out = harness::adapt(&config, &mut store, options)?;
            if let Some(ranking) = &out.ranking {
                let labels = store.curated_complement()?;
                print!("{}", harness::commands::scores_csv(ranking, &labels.labels()));
            }
            println!("{}: total reward {}", out.record.run_id, out.record.total_reward);
        }
        Command::Report { store, output, run_ids } => {
            let store = PolicyStore::open(&store)?;
            let csv = harness::report_csv(&store, &run_ids)?;
            match output {
                Some(path) => std::fs::write(&path, csv)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
                None => print!("{csv}"),
            }
        }
        Command::Prune { store } => {
            let mut store = PolicyStore::open(&store)?;
            for id in harness::prune(&mut store)? {
                println!("removed {id}");
            }
        }
        Command::PrintConfig { config, env } => {
            let kind = match env {
                KindArg::Cartpole => EnvKind::CartPole,
                KindArg::Fueltank => EnvKind::FuelTank,
            };
            let config = load_config(config.as_ref(), kind)?;
            print!("{}", config.to_toml_string()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
