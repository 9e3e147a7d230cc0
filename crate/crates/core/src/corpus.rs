//! NLI corpus parsing: SNLI-style JSONL and SciTail-style TSV.

use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    /// Class index for a classifier with `class_count` outputs (2 or 3).
    pub fn class_index(self, class_count: usize) -> Result<usize> {
        match (self, class_count) {
            (Label::Entailment, 2 | 3) => Ok(0),
            (Label::Neutral, 2 | 3) => Ok(1),
            (Label::Contradiction, 3) => Ok(2),
            _ => Err(Error::Domain(format!(
                "label {self} has no class in a {class_count}-class problem"
            ))),
        }
    }

    pub fn from_class_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entailment" | "entails" => Ok(Label::Entailment),
            "neutral" => Ok(Label::Neutral),
            "contradiction" => Ok(Label::Contradiction),
            other => Err(Error::Domain(format!("unknown label {other:?}"))),
        }
    }
}

/// A tokenized premise/hypothesis pair with its gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Label,
}

impl SentencePair {
    /// Tokenizes both sides; `None` if either side ends up empty.
    pub fn from_text(premise: &str, hypothesis: &str, label: Label) -> Option<Self> {
        let premise = tokenize(premise);
        let hypothesis = tokenize(hypothesis);
        if premise.is_empty() || hypothesis.is_empty() {
            return None;
        }
        Some(SentencePair {
            premise,
            hypothesis,
            label,
        })
    }
}

/// Lowercases, splits on whitespace and trims non-alphanumeric characters from
/// both ends of every token. Interior punctuation (`two-thirds`) survives.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Parsed pairs in file order plus the number of lines skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCorpus {
    pub pairs: Vec<SentencePair>,
    /// Blank lines, `"-"` gold labels, and pairs with an empty side.
    pub skipped: usize,
}

#[derive(Deserialize)]
struct SnliRecord {
    gold_label: String,
    sentence1: String,
    sentence2: String,
}

/// Parses SNLI JSONL. Malformed lines abort with their line number.
pub fn parse_snli<R: Read>(reader: R) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            out.skipped += 1;
            continue;
        }
        let record: SnliRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if record.gold_label == "-" {
            out.skipped += 1;
            continue;
        }
        let label = match record.gold_label.as_str() {
            "entailment" => Label::Entailment,
            "neutral" => Label::Neutral,
            "contradiction" => Label::Contradiction,
            other => {
                return Err(Error::parse(
                    lineno,
                    format!("unknown gold_label {other:?}"),
                ))
            }
        };
        match SentencePair::from_text(&record.sentence1, &record.sentence2, label) {
            Some(pair) => out.pairs.push(pair),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Parses SciTail TSV: `premise \t hypothesis \t {entails|neutral}`.
pub fn parse_scitail<R: Read>(reader: R) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            out.skipped += 1;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [premise, hypothesis, label] = fields[..] else {
            return Err(Error::parse(
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let label = match label.trim() {
            "entails" => Label::Entailment,
            "neutral" => Label::Neutral,
            other => return Err(Error::parse(lineno, format!("unknown label {other:?}"))),
        };
        match SentencePair::from_text(premise, hypothesis, label) {
            Some(pair) => out.pairs.push(pair),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Four guys are playing basketball."),
            toks(&["four", "guys", "are", "playing", "basketball"])
        );
        assert!(tokenize("  ").is_empty());
        assert_eq!(tokenize("two-thirds, OK?"), toks(&["two-thirds", "ok"]));
        assert_eq!(tokenize("\"Hello\" ... world"), toks(&["hello", "world"]));
    }

    #[test]
    fn snli_records() {
        let input = concat!(
            r#"{"gold_label":"entailment","sentence1":"A b.","sentence2":"C d.","annotator_labels":["entailment"]}"#,
            "\n",
            r#"{"gold_label":"-","sentence1":"A b.","sentence2":"C d."}"#,
            "\n",
            r#"{"gold_label":"contradiction","sentence1":"...","sentence2":"C d."}"#,
            "\n",
        );
        let parsed = parse_snli(input.as_bytes()).unwrap();
        assert_eq!(
            parsed.pairs,
            vec![SentencePair {
                premise: toks(&["a", "b"]),
                hypothesis: toks(&["c", "d"]),
                label: Label::Entailment,
            }]
        );
        assert_eq!(parsed.skipped, 2);
    }

    #[test]
    fn snli_malformed_line_fails_fast() {
        let input =
            "{\"gold_label\":\"neutral\",\"sentence1\":\"a\",\"sentence2\":\"b\"}\nnot json\n";
        assert!(matches!(
            parse_snli(input.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn scitail_records() {
        let parsed =
            parse_scitail("A b.\tC d.\tentails\nA b.\tC d.\tneutral\r\n".as_bytes()).unwrap();
        assert_eq!(parsed.pairs.len(), 2);
        assert_eq!(parsed.pairs[0].label, Label::Entailment);
        assert_eq!(parsed.pairs[1].label, Label::Neutral);
        assert_eq!(parsed.pairs[1].premise, toks(&["a", "b"]));
        assert!(parsed.pairs.iter().all(|p| p.label != Label::Contradiction));

        assert!(matches!(
            parse_scitail("A b.\tC d.\tmaybe".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_scitail("ok\tok\tneutral\nA b.\tentails".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn yielded_plus_skipped_equals_lines() {
        let input = "A b.\tC d.\tentails\n!!\tC d.\tneutral\n\nx\ty\tneutral\n";
        let parsed = parse_scitail(input.as_bytes()).unwrap();
        assert_eq!(parsed.pairs.len() + parsed.skipped, 4);
    }

    #[test]
    fn class_indices() {
        assert_eq!(Label::Neutral.class_index(2).unwrap(), 1);
        assert_eq!(Label::Contradiction.class_index(3).unwrap(), 2);
        assert!(Label::Contradiction.class_index(2).is_err());
        assert_eq!("entails".parse::<Label>().unwrap(), Label::Entailment);
    }
}
