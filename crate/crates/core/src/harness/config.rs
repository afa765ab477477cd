use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::HarnessError;
use crate::embed::TrainConfig;
use crate::phy::ChannelModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    SingleUserBsc,
    SingleUserAwgn,
    SingleUserRayleigh,
    AblationInference,
    MultiUser,
    Compression,
}

impl Pipeline {
    pub const ALL: [Pipeline; 6] = [
        Pipeline::SingleUserBsc,
        Pipeline::SingleUserAwgn,
        Pipeline::SingleUserRayleigh,
        Pipeline::AblationInference,
        Pipeline::MultiUser,
        Pipeline::Compression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::SingleUserBsc => "single_user_bsc",
            Pipeline::SingleUserAwgn => "single_user_awgn",
            Pipeline::SingleUserRayleigh => "single_user_rayleigh",
            Pipeline::AblationInference => "ablation_inference",
            Pipeline::MultiUser => "multi_user",
            Pipeline::Compression => "compression",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown pipeline `{s}`")))
    }
}

/// Channel family swept by the ablation and multi-user pipelines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[default]
    Bsc,
    Awgn,
    Rayleigh,
}

impl ChannelKind {
    /// The channel at sweep value `x` (flip probability or Eb/N0 in dB).
    pub fn at(self, x: f64) -> Result<ChannelModel, HarnessError> {
        let ch = match self {
            ChannelKind::Bsc => ChannelModel::bsc(x),
            ChannelKind::Awgn => ChannelModel::awgn(x),
            ChannelKind::Rayleigh => ChannelModel::rayleigh(x),
        };
        ch.map_err(|e| HarnessError::Config(e.to_string()))
    }
}

fn default_trials() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

fn default_timeout() -> u64 {
    5000
}

/// Flat TOML experiment description. Relative paths are taken from the
/// directory of the config file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub correction: bool,
    #[serde(default)]
    pub channel: Option<ChannelKind>,

    pub kg: PathBuf,
    pub corpus: PathBuf,
    #[serde(default)]
    pub synonyms: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub private_kgs: Vec<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,

    #[serde(default)]
    pub entity_width: Option<usize>,
    #[serde(default)]
    pub relation_width: Option<usize>,
    #[serde(default)]
    pub parallel: Option<usize>,

    #[serde(default)]
    pub train_steps: Option<usize>,
    #[serde(default)]
    pub train_dim: Option<usize>,
    #[serde(default)]
    pub train_lr: Option<f64>,
    #[serde(default)]
    pub train_batch: Option<usize>,
    #[serde(default)]
    pub train_negatives: Option<usize>,
    #[serde(default)]
    pub train_reg: Option<f64>,
    #[serde(default)]
    pub train_seed: Option<u64>,
    #[serde(default)]
    pub holdout: usize,

    #[serde(default)]
    pub verbalizer_url: Option<String>,
    #[serde(default)]
    pub embedder_url: Option<String>,
    #[serde(default = "default_timeout")]
    pub service_timeout_ms: u64,
}

impl ExperimentConfig {
    /// Parses and validates; relative paths are joined onto `base`.
    pub fn from_toml(src: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut cfg: Self = toml::from_str(src).map_err(|e| HarnessError::Config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.kg);
        fix(&mut cfg.corpus);
        for p in [
            &mut cfg.synonyms,
            &mut cfg.templates,
            &mut cfg.model,
            &mut cfg.output,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        cfg.private_kgs.iter_mut().for_each(fix);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&src, base)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_owned()));
        if self.pipeline != Pipeline::Compression && self.sweep.is_empty() {
            return bad("sweep grid is empty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.parallel == Some(0) {
            return bad("parallel must be at least 1");
        }
        if self.pipeline == Pipeline::MultiUser && self.private_kgs.len() < 2 {
            return bad("multi_user needs at least two private_kgs");
        }
        for &x in &self.sweep {
            self.channel_kind().at(x)?;
        }
        let required = [Some(&self.kg), Some(&self.corpus)];
        let optional = [&self.synonyms, &self.templates, &self.model];
        for p in required
            .into_iter()
            .chain(optional.into_iter().map(Option::as_ref))
            .flatten()
            .chain(&self.private_kgs)
        {
            if !p.is_file() {
                return Err(HarnessError::MissingFile(p.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn channel_kind(&self) -> ChannelKind {
        match self.pipeline {
            Pipeline::SingleUserAwgn => ChannelKind::Awgn,
            Pipeline::SingleUserRayleigh => ChannelKind::Rayleigh,
            Pipeline::SingleUserBsc | Pipeline::Compression => ChannelKind::Bsc,
            Pipeline::AblationInference | Pipeline::MultiUser => self.channel.unwrap_or_default(),
        }
    }

    /// Training settings: the small-graph defaults overridden by `train_*` keys.
    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::toy();
        TrainConfig {
            steps: self.train_steps.unwrap_or(d.steps),
            learning_rate: self.train_lr.unwrap_or(d.learning_rate),
            dimension: self.train_dim.unwrap_or(d.dimension),
            negatives_per_positive: self.train_negatives.unwrap_or(d.negatives_per_positive),
            batch_size: self.train_batch.unwrap_or(d.batch_size),
            regularization_weight: self.train_reg.unwrap_or(d.regularization_weight),
            seed: self.train_seed.unwrap_or(self.seed),
        }
    }
}
