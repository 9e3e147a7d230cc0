use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use awe_core::corpus::{parse_scitail, parse_snli, SentencePair};
use awe_core::neural::ModelConfig;
use awe_core::pairs::{DEFAULT_T_MINUS, DEFAULT_T_PLUS};
use awe_core::TrainConfig;
use serde::{Deserialize, Serialize};

/// Stage seeds are the pipeline seed plus a fixed per-stage offset, so each
/// stage can be re-run on its own and still reproduce the pipeline.
pub const AWE_SEED_OFFSET: u64 = 1;
pub const MODEL_SEED_OFFSET: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Snli,
    Scitail,
}

impl CorpusFormat {
    pub fn class_count(self) -> usize {
        match self {
            CorpusFormat::Snli => 3,
            CorpusFormat::Scitail => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub format: CorpusFormat,
    /// Pretrained vectors used for pair mining and as classifier inputs.
    pub vectors: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub t_plus: f64,
    pub t_minus: f64,
    /// `seed` inside is replaced by the derived stage seed.
    pub awe: TrainConfig,
    /// `seed` inside is replaced by the derived stage seed and `class_count`
    /// by the corpus format's label count.
    pub model: ModelConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: None,
            dev: None,
            test: None,
            format: CorpusFormat::Snli,
            vectors: None,
            output_dir: PathBuf::from("out"),
            t_plus: DEFAULT_T_PLUS,
            t_minus: DEFAULT_T_MINUS,
            awe: TrainConfig::default(),
            model: ModelConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file =
            File::open(path).with_context(|| format!("cannot open config {}", path.display()))?;
        let mut config: PipelineConfig = serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.train,
            &mut config.dev,
            &mut config.test,
            &mut config.vectors,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    pub fn awe_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(AWE_SEED_OFFSET),
            ..self.awe.clone()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed.wrapping_add(MODEL_SEED_OFFSET),
            class_count: self.format.class_count(),
            ..self.model.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t_plus", self.t_plus), ("t_minus", self.t_minus)] {
            if !(t > 0.0 && t <= 1.0) {
                bail!("{name} must lie in (0, 1], got {t}");
            }
        }
        self.awe_config().validate()?;
        self.model_config().validate()?;
        Ok(())
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        let path = path
            .as_deref()
            .with_context(|| format!("no {what} given (set it in the config or pass a flag)"))?;
        if !path.exists() {
            bail!("{what} {} does not exist", path.display());
        }
        Ok(path)
    }

    pub fn read_corpus(&self, path: &Path) -> Result<Vec<SentencePair>> {
        let file =
            File::open(path).with_context(|| format!("cannot open corpus {}", path.display()))?;
        let parsed = match self.format {
            CorpusFormat::Snli => parse_snli(file),
            CorpusFormat::Scitail => parse_scitail(file),
        }
        .with_context(|| format!("cannot parse {}", path.display()))?;
        if parsed.skipped > 0 {
            log::info!("{}: skipped {} lines", path.display(), parsed.skipped);
        }
        Ok(parsed.pairs)
    }
}
