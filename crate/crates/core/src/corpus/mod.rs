//! Corpus ingestion: image+description records, sentence segmentation,
//! tokenization into transactions and the synthetic corpus generator.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

mod image;
mod synth;

pub use image::{load_image, read_pgm, resize_bilinear, write_pgm, write_ppm, ImageTensor};
pub use synth::{generate_synthetic, ShapeSpec, SynthGroundTruth, SynthSpec, TokenPlant};

/// One painting: a unique id, an image on disk and its free-text description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaintingRecord {
    pub id: String,
    pub image_path: PathBuf,
    pub description: String,
}

/// An ordered painting collection loaded from a JSON-Lines manifest.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<PaintingRecord>,
}

impl Corpus {
    pub fn new(records: Vec<PaintingRecord>) -> Self {
        Corpus { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PaintingRecord] {
        &self.records
    }

    pub fn get(&self, index: usize) -> &PaintingRecord {
        &self.records[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PaintingRecord> {
        self.records.iter()
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    id: String,
    image: String,
    description: String,
}

/// Loads a JSON-Lines manifest (keys `id`, `image`, `description`), one
/// record per line, in file order. Image paths are resolved relative to the
/// manifest's directory. Duplicate or missing ids and missing image files
/// are hard errors naming the offending line or file.
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("invalid record: {e}"),
        })?;
        if row.id.is_empty() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty id".into(),
            });
        }
        if row.description.is_empty() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("empty description for id {:?}", row.id),
            });
        }
        if !seen.insert(row.id.clone()) {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("duplicate id {:?}", row.id),
            });
        }
        let image_path = dir.join(&row.image);
        if !image_path.is_file() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("image file not found: {}", image_path.display()),
            });
        }
        records.push(PaintingRecord {
            id: row.id,
            image_path,
            description: row.description,
        });
    }
    Ok(Corpus::new(records))
}

/// Sentence terminators: `.`, `!`, `?`, `;`.
const SENTENCE_TERMINATORS: [char; 4] = ['.', '!', '?', ';'];

/// Splits a description into raw sentence fragments. Terminators are
/// removed, surrounding whitespace trimmed and empty fragments dropped.
pub fn split_sentences(description: &str) -> Vec<String> {
    description
        .split(SENTENCE_TERMINATORS)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A set of lowercase, NFC-normalized stopwords.
#[derive(Debug, Clone, Default)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    /// Builds a list from raw words, normalizing each entry the same way
    /// [`tokenize`] normalizes tokens.
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| normalize_token(w.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        StopwordList { words }
    }

    /// Reads a stopword file: UTF-8, one word per line, `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines().map(|l| {
            match l.find('#') {
                Some(pos) => &l[..pos],
                None => l,
            }
            .trim()
        })))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

fn normalize_token(raw: &str) -> String {
    raw.nfc()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric())
        .collect()
}

/// Tokenizes one sentence: NFC-normalize, lowercase, strip punctuation,
/// split on whitespace and deduplicate into a set. When a stopword list is
/// supplied its members are removed after normalization.
pub fn tokenize(sentence: &str, stopwords: Option<&StopwordList>) -> BTreeSet<String> {
    sentence
        .split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .filter(|t| stopwords.map_or(true, |list| !list.contains(t)))
        .collect()
}

/// Whether stopwords are kept or removed when building transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopwordMode {
    Keep,
    Remove,
}

impl std::fmt::Display for StopwordMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopwordMode::Keep => write!(f, "keep"),
            StopwordMode::Remove => write!(f, "remove"),
        }
    }
}

impl std::str::FromStr for StopwordMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(StopwordMode::Keep),
            "remove" => Ok(StopwordMode::Remove),
            other => Err(Error::Config(format!(
                "unknown stopword mode {other:?} (expected keep|remove)"
            ))),
        }
    }
}

/// The transaction database: one token-set per non-empty tokenized sentence,
/// with each transaction owned by the painting it came from.
#[derive(Debug, Clone)]
pub struct TransactionDb {
    transactions: Vec<BTreeSet<String>>,
    owner: Vec<usize>,
    n_paintings: usize,
    warnings: Vec<String>,
}

impl TransactionDb {
    pub fn transactions(&self) -> &[BTreeSet<String>] {
        &self.transactions
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Painting index that owns transaction `t`.
    pub fn owner(&self, t: usize) -> usize {
        self.owner[t]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn n_paintings(&self) -> usize {
        self.n_paintings
    }

    /// Paintings whose descriptions yielded zero transactions.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Builds a database directly from token sets; used by tests and by the
    /// mining module's oracles.
    pub fn from_parts(transactions: Vec<BTreeSet<String>>, owner: Vec<usize>, n_paintings: usize) -> Self {
        assert_eq!(transactions.len(), owner.len());
        TransactionDb {
            transactions,
            owner,
            n_paintings,
            warnings: Vec::new(),
        }
    }
}

/// Segments and tokenizes every description into transactions. Transaction
/// order is corpus order then sentence order. In `Remove` mode the stopword
/// list is applied during tokenization.
pub fn build_transactions(
    corpus: &Corpus,
    mode: StopwordMode,
    stopwords: &StopwordList,
) -> TransactionDb {
    let effective = match mode {
        StopwordMode::Keep => None,
        StopwordMode::Remove => Some(stopwords),
    };
    let mut transactions = Vec::new();
    let mut owner = Vec::new();
    let mut warnings = Vec::new();
    for (p, record) in corpus.iter().enumerate() {
        let mut emitted = 0usize;
        for sentence in split_sentences(&record.description) {
            let tokens = tokenize(&sentence, effective);
            if !tokens.is_empty() {
                transactions.push(tokens);
                owner.push(p);
                emitted += 1;
            }
        }
        if emitted == 0 {
            warnings.push(format!(
                "painting {:?} produced no transactions; retained with zero transactions",
                record.id
            ));
        }
    }
    TransactionDb {
        transactions,
        owner,
        n_paintings: corpus.len(),
        warnings,
    }
}
