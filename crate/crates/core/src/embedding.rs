//! Dense word-vector tables and the GloVe-style text format.
//!
//! One record per line: the token, then `dim` space-separated decimal numbers.
//! An optional `count dim` header line is recognised when the first record has
//! exactly two integer fields.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::math::{dot, norm};

/// Bidirectional token/id map with a frozen insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from a token list, rejecting duplicates.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for token in tokens {
            let token = token.into();
            if vocab.index.contains_key(&token) {
                return Err(Error::Domain(format!("duplicate token {token:?}")));
            }
            vocab.insert(token);
        }
        Ok(vocab)
    }

    /// Returns the id of `token`, adding it at the end if absent.
    pub fn insert(&mut self, token: impl Into<String>) -> usize {
        let token = token.into();
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.tokens.len();
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// `n x dim` row-major matrix of word vectors keyed by a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} rows of dimension {dim}",
                data.len(),
                vocab.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        Ok(EmbeddingTable { vocab, dim, data })
    }

    /// Builds a table from `(token, vector)` rows; all vectors must share a length.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut tokens = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (token, vector) in rows {
            let expected = *dim.get_or_insert(vector.len());
            if vector.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: vector.len(),
                });
            }
            tokens.push(token.into());
            data.extend(vector);
        }
        let dim = dim.ok_or_else(|| Error::Empty("embedding table has no rows".into()))?;
        EmbeddingTable::new(Vocabulary::from_tokens(tokens)?, dim, data)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|id| self.row(id))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocab
            .tokens()
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }
}

/// A loaded table plus what the loader had to ignore.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub table: EmbeddingTable,
    /// Later occurrences of an already-seen token (first occurrence wins).
    pub duplicates: usize,
    pub had_header: bool,
}

fn parse_header(fields: &[&str]) -> Option<(usize, usize)> {
    match fields {
        [count, dim] => Some((count.parse().ok()?, dim.parse().ok()?)),
        _ => None,
    }
}

/// Reads a GloVe-style text table.
///
/// The dimension comes from the header when present, else from the first
/// record; `expected_dim` additionally pins it. Blank lines are ignored and
/// CRLF endings are tolerated.
pub fn load_text_embeddings<R: Read>(
    reader: R,
    expected_dim: Option<usize>,
) -> Result<LoadedTable> {
    let reader = BufReader::new(reader);
    let mut dim = expected_dim;
    let mut vocab = Vocabulary::new();
    let mut data = Vec::new();
    let mut duplicates = 0;
    let mut had_header = false;
    let mut seen_record = false;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        if !seen_record {
            seen_record = true;
            if let Some((_, header_dim)) = parse_header(&fields) {
                if let Some(d) = dim {
                    if d != header_dim {
                        return Err(Error::parse(
                            lineno,
                            format!("header dimension {header_dim}, expected {d}"),
                        ));
                    }
                }
                if header_dim == 0 {
                    return Err(Error::parse(lineno, "header dimension is zero"));
                }
                dim = Some(header_dim);
                had_header = true;
                continue;
            }
        }

        let token = fields[0];
        let values = &fields[1..];
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(Error::parse(
                lineno,
                format!("expected {d} values, found {}", values.len()),
            ));
        }
        let mut row = Vec::with_capacity(d);
        for field in values {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric field {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value {field:?}")));
            }
            row.push(v);
        }
        if vocab.contains(token) {
            duplicates += 1;
            continue;
        }
        vocab.insert(token);
        data.extend(row);
    }

    if vocab.is_empty() {
        return Err(Error::Empty("embedding stream contains no vectors".into()));
    }
    if duplicates > 0 {
        log::warn!("ignored {duplicates} duplicate token(s) while loading embeddings");
    }
    let dim = dim.expect("dimension is known once a record was read");
    Ok(LoadedTable {
        table: EmbeddingTable::new(vocab, dim, data)?,
        duplicates,
        had_header,
    })
}

/// Writes `table` one record per line with six fractional digits.
pub fn save_text_embeddings<W: Write>(table: &EmbeddingTable, mut writer: W) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Empty("cannot save an empty embedding table".into()));
    }
    let mut line = String::new();
    for (token, row) in table.rows() {
        line.clear();
        line.push_str(token);
        for v in row {
            line.push(' ');
            line.push_str(&format!("{v:.6}"));
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Cosine similarity, clamped to `[-1, 1]`. Zero-norm inputs are an error.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of a zero-norm vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(s: &str) -> Result<LoadedTable> {
        load_text_embeddings(s.as_bytes(), None)
    }

    #[test]
    fn loads_plain_records() {
        let t = load("a 1.0 0.0\nb 0.0 1.0").unwrap().table;
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("a").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn first_duplicate_wins() {
        let loaded = load("a 1.0 0.0\na 9.0 9.0").unwrap();
        assert_eq!(loaded.table.len(), 1);
        assert_eq!(loaded.table.get("a").unwrap(), &[1.0, 0.0]);
        assert_eq!(loaded.duplicates, 1);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        match load("a 1.0\nb 2.0 3.0") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_and_crlf() {
        let loaded = load("2 3\r\nx 1 2 3\r\ny 4 5 6\r\n").unwrap();
        assert!(loaded.had_header);
        assert_eq!(loaded.table.dim(), 3);
        assert_eq!(loaded.table.get("y").unwrap(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(matches!(load(""), Err(Error::Empty(_))));
        assert!(matches!(load("\n\n"), Err(Error::Empty(_))));
        assert!(matches!(load("a 1.0 x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            load("a 1.0 NaN"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            load_text_embeddings("a 1 2".as_bytes(), Some(3)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn saves_fixed_precision() {
        let t = EmbeddingTable::from_rows([("a", vec![1.0, 0.0])]).unwrap();
        let mut out = Vec::new();
        save_text_embeddings(&t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a 1.000000 0.000000\n");
    }

    #[test]
    fn saving_empty_table_fails() {
        let t = EmbeddingTable::new(Vocabulary::new(), 2, vec![]).unwrap();
        assert!(save_text_embeddings(&t, Vec::new()).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        assert!(Vocabulary::from_tokens(["a", "b", "a"]).is_err());
        let v = Vocabulary::from_tokens(["x", "y"]).unwrap();
        assert_eq!(v.id("y"), Some(1));
        assert_eq!(v.token(0), Some("x"));
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, dim)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            (a, b) in (1usize..12).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d))),
            scale in 1e-3f64..1e3,
        ) {
            let ab = cosine(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap());
            let scaled: Vec<f64> = a.iter().map(|x| x * scale).collect();
            prop_assert!((cosine(&scaled, &b).unwrap() - ab).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn save_load_round_trip(
            rows in (1usize..6, 1usize..10).prop_flat_map(|(dim, n)| {
                proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, dim), n)
            })
        ) {
            let table = EmbeddingTable::from_rows(
                rows.iter().enumerate().map(|(i, r)| (format!("w{i}"), r.clone())),
            ).unwrap();
            let mut buf = Vec::new();
            save_text_embeddings(&table, &mut buf).unwrap();
            let back = load_text_embeddings(buf.as_slice(), None).unwrap().table;
            prop_assert_eq!(back.vocab(), table.vocab());
            prop_assert_eq!(back.dim(), table.dim());
            for (x, y) in back.as_slice().iter().zip(table.as_slice()) {
                prop_assert!((x - y).abs() <= 5e-7);
            }
        }
    }
}
