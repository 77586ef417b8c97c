//! Run settings: defaults, then an optional TOML file, then flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use npc_core::model::LossKind;
use npc_core::{NpcError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Xent,
    Cosine,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Xent => LossKind::CrossEntropy,
            LossArg::Cosine => LossKind::Cosine,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Frame,
    Utterance,
}

/// Everything a command reads. Written back as `resolved_config.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub val_pairs: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub trials: Option<PathBuf>,
    pub d: usize,
    pub delta: usize,
    pub seed: u64,
    pub loss: LossArg,
    pub clamp: bool,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Worker threads; all cores when absent. Never changes results.
    pub workers: Option<usize>,
    /// Frames between extracted embeddings.
    pub hop: usize,
    pub level: Level,
    pub enroll: Vec<usize>,
    pub repeats: Option<usize>,
    pub heldout: usize,
    pub speakers: usize,
    pub streams_per_speaker: usize,
    pub seconds: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            manifest: None,
            out: None,
            pairs: None,
            val_pairs: None,
            val_manifest: None,
            checkpoint: None,
            trials: None,
            d: 100,
            delta: 200,
            seed: 0,
            loss: LossArg::Xent,
            clamp: false,
            batch: 128,
            epochs: 30,
            lr: 1e-4,
            weight_decay: 1e-6,
            workers: None,
            hop: 1,
            level: Level::Frame,
            enroll: vec![1, 2, 5],
            repeats: None,
            heldout: 5,
            speakers: 2,
            streams_per_speaker: 1,
            seconds: 60.0,
        }
    }
}

/// Flags shared by every subcommand. Unset flags leave the config alone.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// TOML file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub val_pairs: Option<PathBuf>,
    /// Streams the validation pairs refer to (defaults to --manifest).
    #[arg(long)]
    pub val_manifest: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Window length in frames.
    #[arg(long)]
    pub d: Option<usize>,
    /// Shift between genuine pairs in frames.
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Clamp the impostor branch of the cosine loss at zero.
    #[arg(long)]
    pub clamp: Option<bool>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long, value_enum)]
    pub level: Option<Level>,
    /// Enrollment utterances per speaker, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub enroll: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Held-out utterances per speaker.
    #[arg(long)]
    pub heldout: Option<usize>,
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub streams_per_speaker: Option<usize>,
    #[arg(long)]
    pub seconds: Option<f64>,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident; $($field:ident),*) => {
        $(if let Some(v) = $flags.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = npc_core::io::read_text(path)?;
                toml::from_str(&text).map_err(|e| {
                    NpcError::InvalidConfig(format!("{}: {}", path.display(), e.message()))
                })?
            }
            None => RunConfig::default(),
        };
        cfg.command = command.to_string();
        overlay!(cfg, flags; d, delta, seed, loss, clamp, batch, epochs, lr, weight_decay,
            hop, level, enroll, heldout, speakers, streams_per_speaker, seconds);
        for (slot, flag) in [
            (&mut cfg.manifest, &flags.manifest),
            (&mut cfg.out, &flags.out),
            (&mut cfg.pairs, &flags.pairs),
            (&mut cfg.val_pairs, &flags.val_pairs),
            (&mut cfg.val_manifest, &flags.val_manifest),
            (&mut cfg.checkpoint, &flags.checkpoint),
            (&mut cfg.trials, &flags.trials),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if flags.workers.is_some() {
            cfg.workers = flags.workers;
        }
        if flags.repeats.is_some() {
            cfg.repeats = flags.repeats;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("delta", self.delta),
            ("batch", self.batch),
            ("epochs", self.epochs),
            ("hop", self.hop),
            ("heldout", self.heldout),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(NpcError::InvalidConfig(format!("`{name}` must be positive")));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(NpcError::InvalidConfig("lr must be positive and weight_decay non-negative".into()));
        }
        if self.workers == Some(0) {
            return Err(NpcError::InvalidConfig("`workers` must be positive".into()));
        }
        Ok(())
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| NpcError::InvalidConfig(format!("`{}` needs --{flag}", self.command)))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.require(&self.out, "out")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Creates the output directory and records the resolved settings in it.
    pub fn prepare_out(&self) -> Result<PathBuf> {
        let out = self.out_dir()?.to_path_buf();
        std::fs::create_dir_all(&out)?;
        npc_core::io::atomic_write(&out.join("resolved_config.toml"), self.to_toml().as_bytes())?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "d = 50\nseed = 9\nloss = \"cosine\"\n").unwrap();
        let flags = Flags { config: Some(path), seed: Some(3), ..Flags::default() };
        let cfg = RunConfig::resolve("pairs", &flags).unwrap();
        assert_eq!((cfg.d, cfg.seed, cfg.loss, cfg.delta), (50, 3, LossArg::Cosine, 200));
    }

    #[test]
    fn resolved_config_round_trips() {
        let flags = Flags { out: Some("o".into()), enroll: Some(vec![1, 3]), workers: Some(2), ..Flags::default() };
        let cfg = RunConfig::resolve("eval-id", &flags).unwrap();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "window = 3\n").unwrap();
        let flags = Flags { config: Some(path), ..Flags::default() };
        assert!(RunConfig::resolve("pairs", &flags).is_err());
        let flags = Flags { d: Some(0), ..Flags::default() };
        assert!(RunConfig::resolve("pairs", &flags).is_err());
    }
}
