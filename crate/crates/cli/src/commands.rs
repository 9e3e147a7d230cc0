use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, ensure, Context, Result};
use awe_core::corpus::{tokenize, Label, SentencePair};
use awe_core::embedding::{load_text_embeddings, save_text_embeddings};
use awe_core::experiment::ExperimentConfig;
use awe_core::interaction::{
    importance_awe, importance_deiste, interaction_combined, interaction_ent, interaction_sym,
    InteractionMatrix,
};
use awe_core::neural::{
    encode_pairs, evaluate, history_tsv, train_model, Checkpoint, Evaluation, Variant,
};
use awe_core::pairs::{extract, load_pairs, save_pairs, ExtractStats};
use awe_core::synthetic::{SyntheticConfig, SyntheticWorld};
use awe_core::trainer::{entailment_score, train_from, AsymmetricEmbeddings, TrainConfig};
use awe_core::EmbeddingTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CorpusFormat, PipelineConfig};

pub const PAIRS_FILE: &str = "pairs.tsv";
pub const PAIR_STATS_FILE: &str = "pairs.stats.json";
pub const PREMISE_EMB_FILE: &str = "awe.premise.txt";
pub const HYPOTHESIS_EMB_FILE: &str = "awe.hypothesis.txt";
pub const SIDECAR_FILE: &str = "awe.sidecar.json";
pub const SWEEP_FILE: &str = "sweep.tsv";

pub fn checkpoint_file(variant: Variant) -> String {
    format!("model.{}.json", variant.as_str())
}

pub fn history_file(variant: Variant) -> String {
    format!("history.{}.tsv", variant.as_str())
}

pub fn metrics_file(variant: Variant, dataset: &str) -> String {
    format!("metrics.{}.{dataset}.json", variant.as_str())
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn load_vectors(path: &Path) -> Result<EmbeddingTable> {
    let file =
        File::open(path).with_context(|| format!("cannot open vectors {}", path.display()))?;
    let loaded = load_text_embeddings(BufReader::new(file), None)
        .with_context(|| format!("cannot parse vectors {}", path.display()))?;
    if loaded.duplicates > 0 {
        log::warn!(
            "{}: ignored {} duplicate tokens",
            path.display(),
            loaded.duplicates
        );
    }
    Ok(loaded.table)
}

/// Explicit table paths, or the files `train-awe` writes into the output dir.
#[derive(Debug, Clone, Default)]
pub struct AwePaths {
    pub premise: Option<PathBuf>,
    pub hypothesis: Option<PathBuf>,
}

impl AwePaths {
    pub fn load(&self, config: &PipelineConfig) -> Result<AsymmetricEmbeddings> {
        let premise = self
            .premise
            .clone()
            .unwrap_or_else(|| config.output(PREMISE_EMB_FILE));
        let hypothesis = self
            .hypothesis
            .clone()
            .unwrap_or_else(|| config.output(HYPOTHESIS_EMB_FILE));
        let open = |p: &Path| {
            File::open(p).with_context(|| format!("cannot open embeddings {}", p.display()))
        };
        AsymmetricEmbeddings::load(
            BufReader::new(open(&premise)?),
            BufReader::new(open(&hypothesis)?),
        )
        .with_context(|| {
            format!(
                "cannot load {} / {}",
                premise.display(),
                hypothesis.display()
            )
        })
    }
}

// ------------------------------------------------------------ extract-pairs

pub fn extract_pairs(config: &PipelineConfig) -> Result<ExtractStats> {
    config.validate()?;
    let train = config.require(&config.train, "training corpus")?;
    let vectors = config.require(&config.vectors, "vector file")?;
    let corpus = config.read_corpus(train)?;
    let table = load_vectors(vectors)?;
    let extraction = extract(&corpus, &table, config.t_plus, config.t_minus)?;

    let mut pairs = Vec::new();
    save_pairs(&extraction.pairs, &mut pairs)?;
    write_file(&config.output(PAIRS_FILE), &pairs)?;
    write_file(
        &config.output(PAIR_STATS_FILE),
        &json_bytes(&extraction.stats)?,
    )?;
    Ok(extraction.stats)
}

// ---------------------------------------------------------------- train-awe

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: TrainConfig,
    pub pipeline_seed: u64,
    pub config_sha256: String,
    pub pairs_sha256: String,
    pub resumed_from_sha256: Option<[String; 2]>,
    pub premise_sha256: String,
    pub hypothesis_sha256: String,
    pub objective_history: Vec<f64>,
    pub created_unix: u64,
}

impl Sidecar {
    /// Same inputs and same output hashes.
    fn same_run(&self, other: &Sidecar) -> bool {
        self.config == other.config
            && self.pipeline_seed == other.pipeline_seed
            && self.config_sha256 == other.config_sha256
            && self.pairs_sha256 == other.pairs_sha256
            && self.resumed_from_sha256 == other.resumed_from_sha256
            && self.premise_sha256 == other.premise_sha256
            && self.hypothesis_sha256 == other.hypothesis_sha256
    }
}

#[derive(Debug, Clone, Default)]
pub struct AweOptions {
    pub pairs: Option<PathBuf>,
    pub resume: Option<AwePaths>,
    pub verify: bool,
}

pub enum AweOutcome {
    Written(Box<Sidecar>),
    Verified,
}

pub fn train_awe(config: &PipelineConfig, options: &AweOptions) -> Result<AweOutcome> {
    config.validate()?;
    let pairs_path = options
        .pairs
        .clone()
        .unwrap_or_else(|| config.output(PAIRS_FILE));
    let pairs_bytes = fs::read(&pairs_path)
        .with_context(|| format!("cannot read pairs {}", pairs_path.display()))?;
    let pairs = load_pairs(&pairs_bytes[..])
        .with_context(|| format!("cannot parse {}", pairs_path.display()))?;
    ensure!(
        !pairs.is_empty(),
        "pair file {} is empty",
        pairs_path.display()
    );

    let train_config = config.awe_config();
    let (resumed, resumed_from) = match &options.resume {
        Some(paths) => {
            let emb = paths.load(config)?;
            let (mut p, mut h) = (Vec::new(), Vec::new());
            emb.save(&mut p, &mut h)?;
            (Some(emb), Some([sha256_hex(&p), sha256_hex(&h)]))
        }
        None => (None, None),
    };
    let outcome = train_from(&pairs, &train_config, resumed.as_ref())?;
    let (mut premise, mut hypothesis) = (Vec::new(), Vec::new());
    outcome.embeddings.save(&mut premise, &mut hypothesis)?;

    let sidecar = Sidecar {
        config_sha256: sha256_hex(serde_json::to_string(&train_config)?.as_bytes()),
        config: train_config,
        pipeline_seed: config.seed,
        pairs_sha256: sha256_hex(&pairs_bytes),
        resumed_from_sha256: resumed_from,
        premise_sha256: sha256_hex(&premise),
        hypothesis_sha256: sha256_hex(&hypothesis),
        objective_history: outcome.objective_history,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };

    if options.verify {
        let path = config.output(SIDECAR_FILE);
        let recorded: Sidecar = serde_json::from_slice(
            &fs::read(&path).with_context(|| format!("cannot read sidecar {}", path.display()))?,
        )
        .with_context(|| format!("invalid sidecar {}", path.display()))?;
        let on_disk = |name: &str| fs::read(config.output(name)).map(|b| sha256_hex(&b)).ok();
        let files_match = on_disk(PREMISE_EMB_FILE).as_ref() == Some(&sidecar.premise_sha256)
            && on_disk(HYPOTHESIS_EMB_FILE).as_ref() == Some(&sidecar.hypothesis_sha256);
        if !recorded.same_run(&sidecar) || !files_match {
            bail!(
                "mismatch: re-running train-awe does not reproduce {}",
                path.display()
            );
        }
        return Ok(AweOutcome::Verified);
    }

    write_file(&config.output(PREMISE_EMB_FILE), &premise)?;
    write_file(&config.output(HYPOTHESIS_EMB_FILE), &hypothesis)?;
    write_file(&config.output(SIDECAR_FILE), &json_bytes(&sidecar)?)?;
    Ok(AweOutcome::Written(Box::new(sidecar)))
}

// -------------------------------------------------------------- train-model

pub fn train_classifier(
    config: &PipelineConfig,
    variant: Variant,
    awe: &AwePaths,
) -> Result<Checkpoint> {
    config.validate()?;
    let train_path = config.require(&config.train, "training corpus")?;
    let vectors = load_vectors(config.require(&config.vectors, "vector file")?)?;
    let emb = match variant {
        Variant::Awe => Some(awe.load(config)?),
        Variant::Plain => None,
    };
    let model_config = awe_core::neural::ModelConfig {
        variant,
        ..config.model_config()
    };
    let c = model_config.class_count;
    let train_set = encode_pairs(&config.read_corpus(train_path)?, &vectors, emb.as_ref(), c)?;
    let dev_set = match &config.dev {
        Some(_) => {
            let path = config.require(&config.dev, "dev corpus")?;
            Some(encode_pairs(
                &config.read_corpus(path)?,
                &vectors,
                emb.as_ref(),
                c,
            )?)
        }
        None => None,
    };
    let trained = train_model(&train_set, dev_set.as_deref(), &model_config)?;
    let checkpoint = Checkpoint::from_params(&trained.params, &model_config);
    let mut bytes = Vec::new();
    checkpoint.write(&mut bytes)?;
    write_file(&config.output(&checkpoint_file(variant)), &bytes)?;
    write_file(
        &config.output(&history_file(variant)),
        history_tsv(&trained.history).as_bytes(),
    )?;
    Ok(checkpoint)
}

// ----------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
    pub confusion: Vec<Vec<u64>>,
    pub variant: Variant,
    pub dataset: String,
    pub seed: u64,
}

pub struct EvaluateOptions {
    pub checkpoint: PathBuf,
    pub dataset: String,
    pub data: Option<PathBuf>,
    pub awe: AwePaths,
}

pub fn evaluate_checkpoint(config: &PipelineConfig, options: &EvaluateOptions) -> Result<Metrics> {
    let path = &options.checkpoint;
    let file =
        File::open(path).with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    let checkpoint = Checkpoint::read(BufReader::new(file))
        .with_context(|| format!("invalid checkpoint {}", path.display()))?;
    let params = checkpoint.to_params()?;
    let data_path = match &options.data {
        Some(p) => Some(p.clone()),
        None => match options.dataset.as_str() {
            "train" => config.train.clone(),
            "dev" => config.dev.clone(),
            "test" => config.test.clone(),
            other => bail!("unknown dataset {other:?}; pass --data with a path"),
        },
    };
    let data_path = config.require(&data_path, "evaluation corpus")?;
    let vectors = load_vectors(config.require(&config.vectors, "vector file")?)?;
    let variant = checkpoint.config.variant;
    let emb = match variant {
        Variant::Awe => Some(options.awe.load(config)?),
        Variant::Plain => None,
    };
    let data = encode_pairs(
        &config.read_corpus(data_path)?,
        &vectors,
        emb.as_ref(),
        params.class_count,
    )?;
    let Evaluation {
        accuracy,
        loss,
        confusion,
    } = evaluate(&params, &data)?;
    let metrics = Metrics {
        accuracy,
        loss,
        confusion,
        variant,
        dataset: options.dataset.clone(),
        seed: checkpoint.config.seed,
    };
    write_file(
        &config.output(&metrics_file(variant, &options.dataset)),
        &json_bytes(&metrics)?,
    )?;
    Ok(metrics)
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t_plus: f64,
    pub n_pairs: u64,
    pub dev_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

pub fn sweep_dir(config: &PipelineConfig, t_plus: f64) -> PathBuf {
    config.output(&format!("sweep/t_plus={t_plus}"))
}

/// Runs extract, train-awe, train-model (embedding variant) and evaluate for
/// each threshold, each in its own subdirectory of the output dir.
pub fn sweep(config: &PipelineConfig, thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    ensure!(!thresholds.is_empty(), "the threshold list is empty");
    let mut unique: Vec<f64> = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        if unique.contains(&t) {
            log::warn!("dropping duplicate threshold {t}");
        } else {
            unique.push(t);
        }
    }
    let mut rows = Vec::with_capacity(unique.len());
    for t_plus in unique {
        let stage = PipelineConfig {
            t_plus,
            output_dir: sweep_dir(config, t_plus),
            ..config.clone()
        };
        let stats = extract_pairs(&stage)?;
        if stats.n_final == 0 {
            log::warn!("no pairs at t_plus={t_plus}; accuracies reported as NA");
            rows.push(SweepRow {
                t_plus,
                n_pairs: 0,
                dev_accuracy: None,
                test_accuracy: None,
            });
            continue;
        }
        train_awe(&stage, &AweOptions::default())?;
        train_classifier(&stage, Variant::Awe, &AwePaths::default())?;
        let score = |dataset: &str, present: bool| -> Result<Option<f64>> {
            if !present {
                return Ok(None);
            }
            let options = EvaluateOptions {
                checkpoint: stage.output(&checkpoint_file(Variant::Awe)),
                dataset: dataset.to_string(),
                data: None,
                awe: AwePaths::default(),
            };
            Ok(Some(evaluate_checkpoint(&stage, &options)?.accuracy))
        };
        rows.push(SweepRow {
            t_plus,
            n_pairs: stats.n_final,
            dev_accuracy: score("dev", config.dev.is_some())?,
            test_accuracy: score("test", config.test.is_some())?,
        });
    }
    write_file(&config.output(SWEEP_FILE), sweep_tsv(&rows).as_bytes())?;
    Ok(rows)
}

pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let acc = |a: Option<f64>| a.map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
    let mut out = String::from("t_plus\tn_pairs\tdev_acc\ttest_acc\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.t_plus,
            r.n_pairs,
            acc(r.dev_accuracy),
            acc(r.test_accuracy)
        ));
    }
    out
}

// -------------------------------------------------------------------- query

/// Both directional scores, each flagged when a lookup fell back to UNK.
pub fn query(emb: &AsymmetricEmbeddings, w: &str, c: &str) -> String {
    let line = |a: &str, b: &str| {
        let unk = !emb.knows_premise(a) || !emb.knows_hypothesis(b);
        format!(
            "score({a} -> {b}) = {:.6}{}\n",
            entailment_score(emb, a, b),
            if unk { " (unk)" } else { "" }
        )
    };
    line(w, c) + &line(c, w)
}

// -------------------------------------------------------- dump-interactions

pub fn dump_interactions(
    vectors: &EmbeddingTable,
    emb: &AsymmetricEmbeddings,
    premise: &str,
    hypothesis: &str,
) -> Result<String> {
    let p = tokenize(premise);
    let h = tokenize(hypothesis);
    ensure!(
        !p.is_empty() && !h.is_empty(),
        "both sentences need at least one token"
    );
    let zero = vec![0.0; vectors.dim()];
    let lookup = |t: &String| vectors.get(t).unwrap_or(&zero).to_vec();
    let pv: Vec<Vec<f64>> = p.iter().map(lookup).collect();
    let hv: Vec<Vec<f64>> = h.iter().map(lookup).collect();
    let i0 = interaction_sym(&pv, &hv)?;
    let i1 = interaction_ent(emb, &p, &h)?;
    let combined = interaction_combined(&i0, &i1)?;

    let mut out = String::from("kind\ti\tj\tpremise\thypothesis\tvalue\n");
    for (kind, m) in [("I0", &i0), ("I1", &i1), ("I_combined", &combined)] {
        push_matrix(&mut out, kind, m, &p, &h);
    }
    let importance = [
        ("importance_deiste", importance_deiste(&i0)),
        ("importance_awe", importance_awe(&i0, &i1)?),
    ];
    for (kind, values) in importance {
        for (i, v) in values.iter().enumerate() {
            out.push_str(&format!("{kind}\t{i}\t-\t{}\t-\t{v:.6}\n", p[i]));
        }
    }
    Ok(out)
}

fn push_matrix(out: &mut String, kind: &str, m: &InteractionMatrix, p: &[String], h: &[String]) {
    for (i, w) in p.iter().enumerate().take(m.rows()) {
        for (j, c) in h.iter().enumerate().take(m.cols()) {
            out.push_str(&format!("{kind}\t{i}\t{j}\t{w}\t{c}\t{:.6}\n", m.get(i, j)));
        }
    }
}

// ------------------------------------------------------- generate-synthetic

pub struct SyntheticOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Regenerates the filler vocabulary under this prefix, keeping the
    /// implication clusters of the base world.
    pub fillers_prefix: Option<String>,
    /// Share of neutral pairs built by swapping an entailment pair's key
    /// words; zero makes the task separable by symmetric similarity.
    pub swapped_share: f64,
}

fn scitail_lines(pairs: &[SentencePair]) -> String {
    pairs
        .iter()
        .map(|p| {
            let label = match p.label {
                Label::Entailment => "entails",
                _ => "neutral",
            };
            format!(
                "{}\t{}\t{label}\n",
                p.premise.join(" "),
                p.hypothesis.join(" ")
            )
        })
        .collect()
}

/// Writes SciTail-format splits, their vector file and a ready-to-run config.
pub fn generate_synthetic(options: &SyntheticOptions) -> Result<()> {
    let base = SyntheticWorld::generate(&SyntheticConfig {
        seed: options.seed,
        swapped_share: options.swapped_share,
        ..SyntheticConfig::default()
    })?;
    let world = match &options.fillers_prefix {
        Some(prefix) => base.with_new_fillers(prefix, options.seed.wrapping_add(1000))?,
        None => base,
    };
    let split_seed = options
        .seed
        .wrapping_add(if options.fillers_prefix.is_some() {
            200
        } else {
            100
        });
    let splits = world.splits(split_seed, options.train, options.dev, options.test);
    let dir = &options.out_dir;
    write_file(
        &dir.join("train.tsv"),
        scitail_lines(&splits.train).as_bytes(),
    )?;
    write_file(&dir.join("dev.tsv"), scitail_lines(&splits.dev).as_bytes())?;
    write_file(
        &dir.join("test.tsv"),
        scitail_lines(&splits.test).as_bytes(),
    )?;
    let mut vectors = BufWriter::new(Vec::new());
    save_text_embeddings(&world.vectors, &mut vectors)?;
    vectors.flush()?;
    write_file(&dir.join("vectors.txt"), vectors.get_ref())?;

    let experiment = ExperimentConfig::default();
    let config = PipelineConfig {
        train: Some("train.tsv".into()),
        dev: Some("dev.tsv".into()),
        test: Some("test.tsv".into()),
        format: CorpusFormat::Scitail,
        vectors: Some("vectors.txt".into()),
        output_dir: "out".into(),
        t_plus: experiment.t_plus,
        t_minus: experiment.t_minus,
        awe: experiment.awe,
        model: experiment.model,
        seed: options.seed,
    };
    write_file(&dir.join("config.json"), &json_bytes(&config)?)?;
    Ok(())
}
