//! Mining directional (premise word, hypothesis word) pairs from a labeled corpus.
//!
//! Entailment-labeled sentence pairs contribute every cross-sentence token pair
//! whose pretrained cosine exceeds `t_plus`; neutral-labeled pairs do the same
//! at `t_minus`. Any pair type seen on the neutral side is dropped from the
//! entailment multiset. Contradiction pairs are never consulted.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, SentencePair};
use crate::embedding::{cosine, EmbeddingTable};
use crate::error::{Error, Result};

pub const DEFAULT_T_PLUS: f64 = 0.7;
pub const DEFAULT_T_MINUS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordPair {
    pub premise_word: String,
    pub hypothesis_word: String,
}

impl WordPair {
    pub fn new(premise_word: impl Into<String>, hypothesis_word: impl Into<String>) -> Self {
        WordPair {
            premise_word: premise_word.into(),
            hypothesis_word: hypothesis_word.into(),
        }
    }
}

/// Multiset of word pairs, ordered by (premise word, hypothesis word).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordPairSet {
    counts: BTreeMap<WordPair, u64>,
}

impl WordPairSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pair: WordPair, count: u64) {
        if count > 0 {
            *self.counts.entry(pair).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: WordPairSet) {
        for (pair, count) in other.counts {
            self.add(pair, count);
        }
    }

    pub fn count(&self, pair: &WordPair) -> u64 {
        self.counts.get(pair).copied().unwrap_or(0)
    }

    pub fn contains(&self, pair: &WordPair) -> bool {
        self.counts.contains_key(pair)
    }

    /// Sum of all occurrence counts.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Number of distinct pair types.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WordPair, u64)> {
        self.counts.iter().map(|(p, &c)| (p, c))
    }
}

impl FromIterator<(WordPair, u64)> for WordPairSet {
    fn from_iter<I: IntoIterator<Item = (WordPair, u64)>>(iter: I) -> Self {
        let mut set = WordPairSet::new();
        for (pair, count) in iter {
            set.add(pair, count);
        }
        set
    }
}

fn check_threshold(name: &str, t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1], got {t}")))
    }
}

/// Usable vector for `token`: present in the table with non-zero norm.
fn usable<'a>(table: &'a EmbeddingTable, token: &str) -> Option<&'a [f64]> {
    table.get(token).filter(|v| v.iter().any(|&x| x != 0.0))
}

/// All (premise token, hypothesis token) pairs with cosine strictly above
/// `threshold`. Repeated tokens contribute repeated occurrences.
pub fn candidate_pairs(pair: &SentencePair, table: &EmbeddingTable, threshold: f64) -> WordPairSet {
    let mut out = WordPairSet::new();
    collect_candidates(pair, table, threshold, &mut out);
    out
}

/// Returns the number of token occurrences skipped as unusable.
fn collect_candidates(
    pair: &SentencePair,
    table: &EmbeddingTable,
    threshold: f64,
    out: &mut WordPairSet,
) -> u64 {
    let hyp: Vec<(&str, Option<&[f64]>)> = pair
        .hypothesis
        .iter()
        .map(|c| (c.as_str(), usable(table, c)))
        .collect();
    let mut skipped = hyp.iter().filter(|(_, v)| v.is_none()).count() as u64;
    for w in &pair.premise {
        let Some(wv) = usable(table, w) else {
            skipped += 1;
            continue;
        };
        for &(c, cv) in &hyp {
            let Some(cv) = cv else { continue };
            // Both vectors are usable, so cosine cannot fail.
            if cosine(wv, cv).is_ok_and(|s| s > threshold) {
                out.add(WordPair::new(w.as_str(), c), 1);
            }
        }
    }
    skipped
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    /// Total occurrences mined from entailment pairs before subtraction.
    pub n_ent_pairs_raw: u64,
    /// Total occurrences mined from neutral pairs.
    pub n_neu_pairs: u64,
    /// Total occurrences kept after subtraction.
    pub n_final: u64,
    /// Token occurrences missing from the table or with a zero vector.
    pub n_oov_tokens_skipped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub pairs: WordPairSet,
    pub stats: ExtractStats,
}

/// Mines the clean pair multiset from `corpus`.
pub fn extract(
    corpus: &[SentencePair],
    table: &EmbeddingTable,
    t_plus: f64,
    t_minus: f64,
) -> Result<Extraction> {
    check_threshold("t_plus", t_plus)?;
    check_threshold("t_minus", t_minus)?;

    let mut entailed = WordPairSet::new();
    let mut neutral = WordPairSet::new();
    let mut oov = 0;
    for pair in corpus {
        oov += match pair.label {
            Label::Entailment => collect_candidates(pair, table, t_plus, &mut entailed),
            Label::Neutral => collect_candidates(pair, table, t_minus, &mut neutral),
            Label::Contradiction => 0,
        };
    }

    let stats_raw = entailed.total();
    let pairs: WordPairSet = entailed
        .counts
        .into_iter()
        .filter(|(p, _)| !neutral.contains(p))
        .collect();
    if pairs.is_empty() {
        log::warn!("pair extraction produced an empty set (t_plus={t_plus}, t_minus={t_minus})");
    }
    let stats = ExtractStats {
        n_ent_pairs_raw: stats_raw,
        n_neu_pairs: neutral.total(),
        n_final: pairs.total(),
        n_oov_tokens_skipped: oov,
    };
    Ok(Extraction { pairs, stats })
}

/// Writes `premise \t hypothesis \t count` lines in sorted order.
pub fn save_pairs<W: Write>(set: &WordPairSet, mut writer: W) -> Result<()> {
    for (pair, count) in set.iter() {
        writeln!(
            writer,
            "{}\t{}\t{}",
            pair.premise_word, pair.hypothesis_word, count
        )?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_pairs<R: Read>(reader: R) -> Result<WordPairSet> {
    let mut set = WordPairSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [w, c, count] = fields[..] else {
            return Err(Error::parse(
                lineno,
                "expected premise, hypothesis and count",
            ));
        };
        if w.is_empty() || c.is_empty() {
            return Err(Error::parse(lineno, "empty token"));
        }
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid count {count:?}")))?;
        if count < 1 {
            return Err(Error::parse(lineno, "count must be at least 1"));
        }
        let pair = WordPair::new(w, c);
        if set.contains(&pair) {
            return Err(Error::parse(lineno, format!("duplicate pair {w}\t{c}")));
        }
        set.add(pair, count);
    }
    Ok(set)
}
