//! Generated entailment tasks with a hidden one-way word-implication relation.
//!
//! Words come in clusters of near-duplicate pretrained vectors. Within a
//! cluster, every *specific* word implies every *general* word and never the
//! reverse. A sentence pair is labeled entailment when its premise carries a
//! specific word and its hypothesis a general word of the same cluster. Two
//! kinds of neutral pairs exist: the same two words with premise and
//! hypothesis roles swapped (indistinguishable by cosine similarity), and a
//! hypothesis word drawn from an unrelated cluster. The remaining tokens are
//! filler words with random vectors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, SentencePair};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub clusters: usize,
    pub specific_per_cluster: usize,
    pub general_per_cluster: usize,
    pub fillers: usize,
    pub dim: usize,
    /// Half-width of the uniform per-coordinate noise around a cluster centre.
    pub cluster_noise: f64,
    pub premise_fillers: usize,
    pub hypothesis_fillers: usize,
    /// Share of entailment pairs; the rest is split between swapped-role and
    /// unrelated neutral pairs according to `swapped_share`.
    pub entailment_share: f64,
    /// Share of neutral pairs that swap the roles of an implication.
    pub swapped_share: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            clusters: 30,
            specific_per_cluster: 2,
            general_per_cluster: 1,
            fillers: 80,
            dim: 16,
            cluster_noise: 0.12,
            premise_fillers: 5,
            hypothesis_fillers: 3,
            entailment_share: 0.5,
            swapped_share: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub specific: Vec<String>,
    pub general: Vec<String>,
}

/// Vocabulary, pretrained vectors and the planted implication relation.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: SyntheticConfig,
    pub clusters: Vec<Cluster>,
    pub fillers: Vec<String>,
    pub vectors: EmbeddingTable,
}

fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl SyntheticWorld {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        if config.clusters < 2
            || config.specific_per_cluster == 0
            || config.general_per_cluster == 0
        {
            return Err(Error::Config(
                "need at least two clusters with specific and general words".into(),
            ));
        }
        if config.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.entailment_share)
            || !(0.0..=1.0).contains(&config.swapped_share)
        {
            return Err(Error::Config("shares must lie in [0, 1]".into()));
        }
        if config.fillers == 0 && (config.premise_fillers > 0 || config.hypothesis_fillers > 0) {
            return Err(Error::Config("filler slots need filler words".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut rows = Vec::new();
        let mut clusters = Vec::with_capacity(config.clusters);
        for k in 0..config.clusters {
            let centre = unit_vector(&mut rng, config.dim);
            let mut member = |name: String, rng: &mut ChaCha8Rng| {
                let v: Vec<f64> = centre
                    .iter()
                    .map(|c| c + rng.gen_range(-config.cluster_noise..=config.cluster_noise))
                    .collect();
                rows.push((name.clone(), v));
                name
            };
            let specific = (0..config.specific_per_cluster)
                .map(|i| member(format!("c{k}s{i}"), &mut rng))
                .collect();
            let general = (0..config.general_per_cluster)
                .map(|i| member(format!("c{k}g{i}"), &mut rng))
                .collect();
            clusters.push(Cluster { specific, general });
        }
        let mut world = SyntheticWorld {
            config: config.clone(),
            clusters,
            fillers: Vec::new(),
            vectors: EmbeddingTable::from_rows(rows.clone())?,
        };
        world.fillers = world.add_fillers(&mut rows, "f", &mut rng)?;
        Ok(world)
    }

    fn add_fillers(
        &mut self,
        rows: &mut Vec<(String, Vec<f64>)>,
        prefix: &str,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<String>> {
        let names: Vec<String> = (0..self.config.fillers)
            .map(|i| format!("{prefix}{i}"))
            .collect();
        for name in &names {
            rows.push((name.clone(), unit_vector(rng, self.config.dim)));
        }
        self.vectors = EmbeddingTable::from_rows(rows.clone())?;
        Ok(names)
    }

    /// Same clusters and implications, but a fresh filler vocabulary named
    /// with `prefix`. The vector table covers clusters and the new fillers.
    pub fn with_new_fillers(&self, prefix: &str, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<(String, Vec<f64>)> = self
            .clusters
            .iter()
            .flat_map(|c| c.specific.iter().chain(&c.general))
            .map(|w| {
                (
                    w.clone(),
                    self.vectors
                        .get(w)
                        .expect("cluster word has a vector")
                        .to_vec(),
                )
            })
            .collect();
        let mut world = SyntheticWorld {
            config: self.config.clone(),
            clusters: self.clusters.clone(),
            fillers: Vec::new(),
            vectors: self.vectors.clone(),
        };
        world.fillers = world.add_fillers(&mut rows, prefix, &mut rng)?;
        Ok(world)
    }

    /// All planted `(specific, general)` implications.
    pub fn implications(&self) -> Vec<(String, String)> {
        self.clusters
            .iter()
            .flat_map(|c| {
                c.specific
                    .iter()
                    .flat_map(move |s| c.general.iter().map(move |g| (s.clone(), g.clone())))
            })
            .collect()
    }

    fn sentence<R: Rng>(&self, rng: &mut R, key: &str, fillers: usize) -> Vec<String> {
        let mut words: Vec<String> = (0..fillers)
            .map(|_| self.fillers.choose(rng).expect("fillers exist").clone())
            .collect();
        let pos = rng.gen_range(0..=words.len());
        words.insert(pos, key.to_string());
        words
    }

    /// Draws `n` labeled pairs.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<SentencePair> {
        let cfg = &self.config;
        (0..n)
            .map(|_| {
                let k = rng.gen_range(0..self.clusters.len());
                let cluster = &self.clusters[k];
                let s = cluster.specific.choose(rng).expect("non-empty");
                let g = cluster.general.choose(rng).expect("non-empty");
                let (p_key, h_key, label) = if rng.gen::<f64>() < cfg.entailment_share {
                    (s.clone(), g.clone(), Label::Entailment)
                } else if rng.gen::<f64>() < cfg.swapped_share {
                    (g.clone(), s.clone(), Label::Neutral)
                } else {
                    let mut other = rng.gen_range(0..self.clusters.len() - 1);
                    if other >= k {
                        other += 1;
                    }
                    let oc = &self.clusters[other];
                    let h = oc.general.choose(rng).expect("non-empty");
                    (s.clone(), h.clone(), Label::Neutral)
                };
                SentencePair {
                    premise: self.sentence(rng, &p_key, cfg.premise_fillers),
                    hypothesis: self.sentence(rng, &h_key, cfg.hypothesis_fillers),
                    label,
                }
            })
            .collect()
    }
}

/// Train/dev/test splits drawn independently from one world.
#[derive(Debug, Clone)]
pub struct SyntheticSplits {
    pub train: Vec<SentencePair>,
    pub dev: Vec<SentencePair>,
    pub test: Vec<SentencePair>,
}

impl SyntheticWorld {
    pub fn splits(&self, seed: u64, train: usize, dev: usize, test: usize) -> SyntheticSplits {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SyntheticSplits {
            train: self.sample(&mut rng, train),
            dev: self.sample(&mut rng, dev),
            test: self.sample(&mut rng, test),
        }
    }
}

/// Accuracy of always predicting the most frequent label in `train` on `test`.
pub fn majority_baseline(train: &[SentencePair], test: &[SentencePair]) -> f64 {
    let mut counts = [0usize; 3];
    for p in train {
        counts[p.label as usize] += 1;
    }
    let majority = (0..3)
        .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
        .unwrap_or(0);
    if test.is_empty() {
        return 0.0;
    }
    test.iter().filter(|p| p.label as usize == majority).count() as f64 / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine;

    #[test]
    fn cluster_words_are_similar_and_roles_symmetric() {
        let world = SyntheticWorld::generate(&SyntheticConfig::default()).unwrap();
        for (s, g) in world.implications() {
            let a = world.vectors.get(&s).unwrap();
            let b = world.vectors.get(&g).unwrap();
            assert_eq!(cosine(a, b).unwrap(), cosine(b, a).unwrap());
            assert!(cosine(a, b).unwrap() > 0.5);
        }
        assert_eq!(world.implications().len(), 60);
        assert!(world.vectors.len() <= 200);
    }

    #[test]
    fn labels_follow_the_planted_relation() {
        let world = SyntheticWorld::generate(&SyntheticConfig::default()).unwrap();
        let implications = world.implications();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for pair in world.sample(&mut rng, 500) {
            let entailed = pair.premise.iter().any(|w| {
                pair.hypothesis
                    .iter()
                    .any(|c| implications.contains(&(w.clone(), c.clone())))
            });
            assert_eq!(entailed, pair.label == Label::Entailment);
        }
    }

    #[test]
    fn new_fillers_share_clusters() {
        let a = SyntheticWorld::generate(&SyntheticConfig::default()).unwrap();
        let b = a.with_new_fillers("g", 3).unwrap();
        assert_eq!(a.implications(), b.implications());
        assert!(b.fillers.iter().all(|f| !a.vectors.vocab().contains(f)));
        let w = &a.clusters[0].specific[0];
        assert_eq!(a.vectors.get(w), b.vectors.get(w));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig::default();
        let a = SyntheticWorld::generate(&cfg).unwrap().splits(4, 20, 5, 5);
        let b = SyntheticWorld::generate(&cfg).unwrap().splits(4, 20, 5, 5);
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }
}
