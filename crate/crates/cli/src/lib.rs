//! The `npc` command line as a library, so the pipeline can also be driven
//! in-process.

pub mod commands;
pub mod config;
pub mod data;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(name = "npc", version, about = "Self-supervised speaker embeddings from unlabeled audio")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write a labeled synthetic corpus (WAV, turn files, manifest).
    Synth {
        #[command(flatten)]
        flags: Flags,
    },
    /// Compute MFCC feature files for every stream of a manifest.
    Features {
        #[command(flatten)]
        flags: Flags,
    },
    /// Sample genuine and impostor window pairs.
    Pairs {
        #[command(flatten)]
        flags: Flags,
    },
    /// Splice labeled streams into two-speaker dialogs.
    Mix {
        #[command(flatten)]
        flags: Flags,
    },
    /// Train the siamese network on a pair list.
    Train {
        #[command(flatten)]
        flags: Flags,
    },
    /// Write frame-rate embeddings for every stream.
    Extract {
        #[command(flatten)]
        flags: Flags,
    },
    /// 1-NN speaker identification, MFCC baseline against embeddings.
    EvalId {
        #[command(flatten)]
        flags: Flags,
    },
    /// Cosine-scored verification trials: EER and minDCF.
    EvalVerify {
        #[command(flatten)]
        flags: Flags,
    },
    /// Print the architecture, parameter count and head statistics.
    Inspect {
        #[command(flatten)]
        flags: Flags,
    },
}

type Handler = fn(&RunConfig) -> npc_core::Result<()>;

/// Runs one parsed command line.
pub fn execute(cli: Cli) -> npc_core::Result<()> {
    let (name, flags, f): (&str, Flags, Handler) = match cli.command {
        Command::Synth { flags } => ("synth", flags, commands::synth),
        Command::Features { flags } => ("features", flags, commands::features),
        Command::Pairs { flags } => ("pairs", flags, commands::pairs),
        Command::Mix { flags } => ("mix", flags, commands::mix),
        Command::Train { flags } => ("train", flags, commands::train_cmd),
        Command::Extract { flags } => ("extract", flags, commands::extract),
        Command::EvalId { flags } => ("eval-id", flags, commands::eval_id),
        Command::EvalVerify { flags } => ("eval-verify", flags, commands::eval_verify),
        Command::Inspect { flags } => ("inspect", flags, commands::inspect),
    };
    let cfg = RunConfig::resolve(name, &flags)?;
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| npc_core::NpcError::InvalidConfig(e.to_string()))?
            .install(|| f(&cfg)),
        None => f(&cfg),
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run<I, T>(args: I) -> npc_core::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("npc")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| npc_core::NpcError::InvalidConfig(e.to_string()))?;
    execute(cli)
}
