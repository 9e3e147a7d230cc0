#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// The binary with the fixture config and `out` as output dir.
pub fn awe(out: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_awe"));
    cmd.arg("--config")
        .arg(fixture("config.json"))
        .arg("--output-dir")
        .arg(out);
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {cmd:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Fixture goldens are rewritten from the oracles when `AWE_BLESS` is set.
pub fn check_golden(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("AWE_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let golden =
        fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(golden, actual, "golden {name} is stale");
}

// ------------------------------------------------------------------ oracles

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let chars: Vec<char> = raw.chars().collect();
        let start = chars.iter().position(|c| c.is_alphanumeric());
        let end = chars.iter().rposition(|c| c.is_alphanumeric());
        if let (Some(s), Some(e)) = (start, end) {
            out.push(chars[s..=e].iter().collect::<String>().to_lowercase());
        }
    }
    out
}

/// `(premise tokens, hypothesis tokens, gold label)` from SNLI JSONL, dropping
/// blank lines and `-` labels.
pub fn read_snli(path: &Path) -> Vec<(Vec<String>, Vec<String>, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["gold_label"] != "-")
        .map(|v| {
            (
                tokens(v["sentence1"].as_str().unwrap()),
                tokens(v["sentence2"].as_str().unwrap()),
                v["gold_label"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

pub fn read_vectors(path: &Path) -> HashMap<String, Vec<f64>> {
    let mut out = HashMap::new();
    for line in fs::read_to_string(path).unwrap().lines() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let v: Vec<f64> = fields.map(|x| x.parse().unwrap()).collect();
        out.entry(word.to_string()).or_insert(v);
    }
    out
}

fn cos(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| (dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Brute-force pair mining rendered as the pair-file text.
pub fn oracle_pairs_tsv(corpus: &Path, vectors: &Path, t_plus: f64, t_minus: f64) -> String {
    let vectors = read_vectors(vectors);
    let mut ent: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut neu: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (p, h, label) in read_snli(corpus) {
        let (bag, t) = match label.as_str() {
            "entailment" => (&mut ent, t_plus),
            "neutral" => (&mut neu, t_minus),
            _ => continue,
        };
        for w in &p {
            for c in &h {
                let (Some(a), Some(b)) = (vectors.get(w), vectors.get(c)) else {
                    continue;
                };
                if cos(a, b).is_some_and(|s| s > t) {
                    *bag.entry((w.clone(), c.clone())).or_default() += 1;
                }
            }
        }
    }
    ent.into_iter()
        .filter(|(k, _)| !neu.contains_key(k))
        .map(|((w, c), n)| format!("{w}\t{c}\t{n}\n"))
        .collect()
}

struct Net {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Net {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let z = b + x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| self.w1[k * x.len() + i] * xi)
                    .sum::<f64>();
                z.max(0.0)
            })
            .collect();
        self.b2
            .iter()
            .enumerate()
            .map(|(o, b)| {
                b + hidden
                    .iter()
                    .enumerate()
                    .map(|(k, y)| self.w2[o * hidden.len() + k] * y)
                    .sum::<f64>()
            })
            .collect()
    }
}

fn tensor(checkpoint: &Value, name: &str) -> Vec<f64> {
    checkpoint["tensors"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == name)
        .unwrap_or_else(|| panic!("tensor {name}"))["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn net(checkpoint: &Value, prefix: &str) -> Net {
    Net {
        w1: tensor(checkpoint, &format!("{prefix}.w1")),
        b1: tensor(checkpoint, &format!("{prefix}.b1")),
        w2: tensor(checkpoint, &format!("{prefix}.w2")),
        b2: tensor(checkpoint, &format!("{prefix}.b2")),
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Attend/compare/aggregate for the plain variant, straight from the
/// checkpoint JSON. Returns class probabilities.
fn plain_forward(checkpoint: &Value, p: &[Vec<f64>], h: &[Vec<f64>]) -> Vec<f64> {
    let (f, g, top) = (
        net(checkpoint, "F"),
        net(checkpoint, "G"),
        net(checkpoint, "H"),
    );
    let fp: Vec<Vec<f64>> = p.iter().map(|x| f.apply(x)).collect();
    let fh: Vec<Vec<f64>> = h.iter().map(|x| f.apply(x)).collect();
    let e = |i: usize, j: usize| fp[i].iter().zip(&fh[j]).map(|(a, b)| a * b).sum::<f64>();
    let mix = |weights: Vec<f64>, rows: &[Vec<f64>]| {
        let mut out = vec![0.0; rows[0].len()];
        for (w, r) in weights.iter().zip(rows) {
            for (o, x) in out.iter_mut().zip(r) {
                *o += w * x;
            }
        }
        out
    };
    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    for i in 0..p.len() {
        let beta = mix(
            softmax(&(0..h.len()).map(|j| e(i, j)).collect::<Vec<_>>()),
            h,
        );
        v1.push(g.apply(&[p[i].clone(), beta].concat()));
    }
    for j in 0..h.len() {
        let alpha = mix(
            softmax(&(0..p.len()).map(|i| e(i, j)).collect::<Vec<_>>()),
            p,
        );
        v2.push(g.apply(&[h[j].clone(), alpha].concat()));
    }
    let sum = |vs: &[Vec<f64>]| {
        vs.iter().fold(vec![0.0; vs[0].len()], |acc, v| {
            acc.iter().zip(v).map(|(a, b)| a + b).collect()
        })
    };
    softmax(&top.apply(&[sum(&v1), sum(&v2)].concat()))
}

pub struct OracleMetrics {
    pub accuracy: f64,
    pub loss: f64,
    pub confusion: Vec<Vec<u64>>,
}

pub fn oracle_metrics(checkpoint: &Path, corpus: &Path, vectors: &Path) -> OracleMetrics {
    let checkpoint: Value = serde_json::from_str(&fs::read_to_string(checkpoint).unwrap()).unwrap();
    let vectors = read_vectors(vectors);
    let dim = vectors.values().next().unwrap().len();
    let classes = ["entailment", "neutral", "contradiction"];
    let mut confusion = vec![vec![0u64; 3]; 3];
    let mut loss = 0.0;
    let data = read_snli(corpus);
    for (p, h, label) in &data {
        let look = |t: &String| vectors.get(t).cloned().unwrap_or(vec![0.0; dim]);
        let p: Vec<Vec<f64>> = p.iter().map(look).collect();
        let h: Vec<Vec<f64>> = h.iter().map(look).collect();
        let probs = plain_forward(&checkpoint, &p, &h);
        let gold = classes.iter().position(|c| c == label).unwrap();
        let mut best = 0;
        for k in 1..probs.len() {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        confusion[gold][best] += 1;
        loss -= probs[gold].ln();
    }
    let correct: u64 = (0..3).map(|k| confusion[k][k]).sum();
    OracleMetrics {
        accuracy: correct as f64 / data.len() as f64,
        loss: loss / data.len() as f64,
        confusion,
    }
}
