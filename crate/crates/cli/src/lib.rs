//! Command-line pipeline: pair mining, embedding training, classifier
//! training and evaluation, threshold sweeps and inspection tools.

pub mod commands;
pub mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use awe_core::neural::Variant;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{AweOptions, AweOutcome, AwePaths, EvaluateOptions, SyntheticOptions};
use crate::config::{CorpusFormat, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "awe", version, about = "Asymmetric entailment word embeddings")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every stage; each one overrides the config file.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON pipeline config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Pipeline seed; stage seeds are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for all artifacts.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Training corpus.
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,
    /// Development corpus.
    #[arg(long, global = true)]
    pub dev: Option<PathBuf>,
    /// Test corpus.
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    /// Corpus format: SNLI JSONL (3 classes) or SciTail TSV (2 classes).
    #[arg(long, global = true, value_enum)]
    pub format: Option<CorpusFormat>,
    /// Pretrained vectors (GloVe text format).
    #[arg(long, global = true)]
    pub vectors: Option<PathBuf>,
    /// Cosine threshold for pairs mined from entailment examples.
    #[arg(long, global = true)]
    pub t_plus: Option<f64>,
    /// Cosine threshold for pairs mined from neutral examples.
    #[arg(long, global = true)]
    pub t_minus: Option<f64>,
    /// Premise-side embedding table (defaults to the output dir's).
    #[arg(long, global = true)]
    pub awe_premise: Option<PathBuf>,
    /// Hypothesis-side embedding table (defaults to the output dir's).
    #[arg(long, global = true)]
    pub awe_hypothesis: Option<PathBuf>,
}

impl GlobalArgs {
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let paths = [
            (&self.train, &mut config.train),
            (&self.dev, &mut config.dev),
            (&self.test, &mut config.test),
            (&self.vectors, &mut config.vectors),
        ];
        for (flag, slot) in paths {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(format) = self.format {
            config.format = format;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(t) = self.t_plus {
            config.t_plus = t;
        }
        if let Some(t) = self.t_minus {
            config.t_minus = t;
        }
        Ok(config)
    }

    pub fn awe_paths(&self) -> AwePaths {
        AwePaths {
            premise: self.awe_premise.clone(),
            hypothesis: self.awe_hypothesis.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Plain,
    Awe,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Plain => Variant::Plain,
            VariantArg::Awe => Variant::Awe,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine entailment word pairs from the training corpus.
    ExtractPairs,
    /// Train premise/hypothesis embeddings on mined pairs.
    TrainAwe {
        /// Pair file (defaults to the output dir's).
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Warm-start from the tables given by --awe-premise/--awe-hypothesis.
        #[arg(long)]
        resume: bool,
        /// Re-train and check the result against the recorded sidecar
        /// without writing anything.
        #[arg(long)]
        verify: bool,
    },
    /// Train the decomposable-attention classifier.
    TrainModel {
        #[arg(long, value_enum, default_value = "plain")]
        variant: VariantArg,
    },
    /// Score a checkpoint on a dataset.
    Evaluate {
        /// Checkpoint file (defaults to the output dir's model for --variant).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "plain")]
        variant: VariantArg,
        /// Dataset name: train, dev or test, or any tag when --data is given.
        #[arg(long, default_value = "test")]
        dataset: String,
        /// Corpus file to score instead of the configured split.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the embedding pipeline once per positive threshold.
    Sweep {
        #[arg(long = "t-plus-list", value_delimiter = ',', required = true, num_args = 1..)]
        thresholds: Vec<f64>,
    },
    /// Print both directional entailment scores of a word pair.
    Query { w: String, c: String },
    /// Emit interaction matrices and premise-word importance as TSV.
    DumpInteractions {
        #[arg(long)]
        premise: String,
        #[arg(long)]
        hypothesis: String,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic SciTail-format corpus, its vectors and a config.
    GenerateSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        train_size: usize,
        #[arg(long, default_value_t = 500)]
        dev_size: usize,
        #[arg(long, default_value_t = 1000)]
        test_size: usize,
        /// Replace the filler vocabulary with words under this prefix.
        #[arg(long)]
        fillers_prefix: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        swapped_share: f64,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let global = &cli.global;
    let config = global.pipeline_config()?;
    match cli.command {
        Command::ExtractPairs => {
            let stats = commands::extract_pairs(&config)?;
            println!(
                "{} pair occurrences ({} entailment raw, {} neutral, {} oov tokens skipped)",
                stats.n_final, stats.n_ent_pairs_raw, stats.n_neu_pairs, stats.n_oov_tokens_skipped
            );
        }
        Command::TrainAwe {
            pairs,
            resume,
            verify,
        } => {
            let options = AweOptions {
                pairs,
                resume: resume.then(|| global.awe_paths()),
                verify,
            };
            match commands::train_awe(&config, &options)? {
                AweOutcome::Verified => println!("match"),
                AweOutcome::Written(sidecar) => println!(
                    "trained {}-dim embeddings, objective {:.6}",
                    sidecar.config.dim,
                    sidecar
                        .objective_history
                        .last()
                        .copied()
                        .unwrap_or(f64::NAN)
                ),
            }
        }
        Command::TrainModel { variant } => {
            let variant = variant.into();
            commands::train_classifier(&config, variant, &global.awe_paths())?;
            println!(
                "wrote {}",
                config.output(&commands::checkpoint_file(variant)).display()
            );
        }
        Command::Evaluate {
            checkpoint,
            variant,
            dataset,
            data,
        } => {
            let options = EvaluateOptions {
                checkpoint: checkpoint
                    .unwrap_or_else(|| config.output(&commands::checkpoint_file(variant.into()))),
                dataset,
                data,
                awe: global.awe_paths(),
            };
            let metrics = commands::evaluate_checkpoint(&config, &options)?;
            println!(
                "{} {} accuracy {:.6} loss {:.6}",
                metrics.variant.as_str(),
                metrics.dataset,
                metrics.accuracy,
                metrics.loss
            );
        }
        Command::Sweep { thresholds } => {
            let rows = commands::sweep(&config, &thresholds)?;
            print!("{}", commands::sweep_tsv(&rows));
        }
        Command::Query { w, c } => {
            let emb = global.awe_paths().load(&config)?;
            print!("{}", commands::query(&emb, &w, &c));
        }
        Command::DumpInteractions {
            premise,
            hypothesis,
            out,
        } => {
            let vectors_path = config.require(&config.vectors, "vector file")?;
            let vectors = commands::load_vectors(vectors_path)?;
            let emb = global.awe_paths().load(&config)?;
            let tsv = commands::dump_interactions(&vectors, &emb, &premise, &hypothesis)?;
            match out {
                Some(path) => fs::write(&path, tsv)
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{tsv}"),
            }
        }
        Command::GenerateSynthetic {
            out,
            train_size,
            dev_size,
            test_size,
            fillers_prefix,
            swapped_share,
        } => {
            commands::generate_synthetic(&SyntheticOptions {
                out_dir: out.clone(),
                seed: config.seed,
                train: train_size,
                dev: dev_size,
                test: test_size,
                fillers_prefix,
                swapped_share,
            })?;
            println!("wrote synthetic corpus to {}", out.display());
        }
    }
    Ok(())
}
