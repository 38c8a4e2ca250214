//! Attributional similarity providers: part-of-speech agreement, corpus
//! PMI-IR, external score tables, and sums of providers.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusIndex;
use crate::term::Term;

/// Tags used by the builtin problems.
pub const KNOWN_TAGS: [&str; 7] = ["NN", "NNS", "VB", "VBD", "VBG", "VBZ", "JJ"];

pub const POS_IDENTICAL: f64 = 100.0;
pub const POS_SAME_TAG: f64 = 10.0;

/// Default co-occurrence window for PMI-IR, in words.
pub const DEFAULT_PMI_WINDOW: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum AttributionalError {
    #[error("unknown part-of-speech tag {0:?}")]
    UnknownTag(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// A Penn Treebank tag from the closed set in [`KNOWN_TAGS`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PosTag(String);

impl PosTag {
    pub fn parse(tag: &str) -> Result<PosTag, AttributionalError> {
        let tag = tag.trim();
        if KNOWN_TAGS.contains(&tag) {
            Ok(PosTag(tag.to_string()))
        } else {
            Err(AttributionalError::UnknownTag(tag.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PosTag {
    type Error = AttributionalError;
    fn try_from(s: String) -> Result<PosTag, AttributionalError> {
        PosTag::parse(&s)
    }
}

impl From<PosTag> for String {
    fn from(t: PosTag) -> String {
        t.0
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `sim_a(a, b)`. Implementations never fail: unknown inputs score 0.
pub trait SimilarityProvider: Send + Sync {
    fn name(&self) -> String;
    fn similarity(&self, a: &Term, b: &Term) -> f64;
}

impl<P: SimilarityProvider + ?Sized> SimilarityProvider for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn similarity(&self, a: &Term, b: &Term) -> f64 {
        (**self).similarity(a, b)
    }
}

impl<P: SimilarityProvider + ?Sized> SimilarityProvider for Arc<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn similarity(&self, a: &Term, b: &Term) -> f64 {
        (**self).similarity(a, b)
    }
}

/// 100 for identical terms, 10 for matching tags, otherwise 0.
pub fn sim_pos(a: &Term, b: &Term, tags: &HashMap<Term, PosTag>) -> f64 {
    if a == b {
        return POS_IDENTICAL;
    }
    match (tags.get(a), tags.get(b)) {
        (Some(ta), Some(tb)) if ta == tb => POS_SAME_TAG,
        (Some(_), Some(_)) => 0.0,
        _ => {
            let missing = if tags.contains_key(a) { b } else { a };
            log::warn!("no part-of-speech tag for {missing:?}; scoring 0");
            0.0
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PosSimilarity {
    tags: HashMap<Term, PosTag>,
}

impl PosSimilarity {
    pub fn new(tags: HashMap<Term, PosTag>) -> PosSimilarity {
        PosSimilarity { tags }
    }

    /// Reads `term<TAB>tag` lines.
    pub fn load(path: &Path) -> Result<PosSimilarity, AttributionalError> {
        let text = read(path)?;
        let mut tags = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| AttributionalError::Malformed {
                path: path.to_path_buf(),
                line: n + 1,
                reason,
            };
            let (term, tag) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected term<TAB>tag".into()))?;
            let term = Term::parse(term).map_err(|e| malformed(e.to_string()))?;
            let tag = PosTag::parse(tag).map_err(|e| malformed(e.to_string()))?;
            tags.insert(term, tag);
        }
        Ok(PosSimilarity { tags })
    }

    pub fn tags(&self) -> &HashMap<Term, PosTag> {
        &self.tags
    }
}

impl SimilarityProvider for PosSimilarity {
    fn name(&self) -> String {
        "pos".into()
    }

    fn similarity(&self, a: &Term, b: &Term) -> f64 {
        sim_pos(a, b, &self.tags)
    }
}

/// `ln((n_ab + 1) · N / (n_a · n_b · 2w))`, or 0 when either term is absent.
///
/// `N` is the corpus size in tokens and `w` the window; `2w` is the number of
/// neighbour slots around each occurrence, so independent terms score near 0.
pub fn sim_pmi_ir(corpus: &CorpusIndex, a: &Term, b: &Term, window: usize) -> f64 {
    let window = window.max(1);
    let (count_a, count_b, count_ab) = corpus.cooccurrence_counts(a, b, window);
    if count_a == 0 || count_b == 0 {
        return 0.0;
    }
    let n = corpus.total_tokens() as f64;
    ((count_ab as f64 + 1.0) * n / (count_a as f64 * count_b as f64 * 2.0 * window as f64)).ln()
}

#[derive(Debug, Clone)]
pub struct PmiIrSimilarity {
    corpus: Arc<CorpusIndex>,
    window: usize,
}

impl PmiIrSimilarity {
    pub fn new(corpus: Arc<CorpusIndex>, window: usize) -> PmiIrSimilarity {
        PmiIrSimilarity {
            corpus,
            window: window.max(1),
        }
    }
}

impl SimilarityProvider for PmiIrSimilarity {
    fn name(&self) -> String {
        format!("pmi-ir(w={})", self.window)
    }

    fn similarity(&self, a: &Term, b: &Term) -> f64 {
        sim_pmi_ir(&self.corpus, a, b, self.window)
    }
}

/// Scores from an external `term_a<TAB>term_b<TAB>score` table, symmetric.
#[derive(Debug, Clone, Default)]
pub struct ExternalSimilarity {
    name: String,
    scores: HashMap<(Term, Term), f64>,
}

impl ExternalSimilarity {
    pub fn from_entries(name: impl Into<String>, entries: impl IntoIterator<Item = (Term, Term, f64)>) -> ExternalSimilarity {
        let mut table = ExternalSimilarity {
            name: name.into(),
            scores: HashMap::new(),
        };
        for (a, b, s) in entries {
            table.insert(a, b, s);
        }
        table
    }

    fn insert(&mut self, a: Term, b: Term, score: f64) {
        if let Some(old) = self.scores.get(&(a.clone(), b.clone())) {
            if *old != score {
                log::warn!("{}: {a} / {b} listed twice ({old} then {score}); keeping {score}", self.name);
            }
        }
        self.scores.insert((b.clone(), a.clone()), score);
        self.scores.insert((a, b), score);
    }

    pub fn load(path: &Path) -> Result<ExternalSimilarity, AttributionalError> {
        let text = read(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "external".into());
        let mut table = ExternalSimilarity {
            name,
            scores: HashMap::new(),
        };
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: String| AttributionalError::Malformed {
                path: path.to_path_buf(),
                line: n + 1,
                reason,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [a, b, score] = fields[..] else {
                return Err(malformed(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let a = Term::parse(a).map_err(|e| malformed(e.to_string()))?;
            let b = Term::parse(b).map_err(|e| malformed(e.to_string()))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad score {score:?}")))?;
            if !score.is_finite() {
                return Err(malformed(format!("non-finite score {score}")));
            }
            table.insert(a, b, score);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl SimilarityProvider for ExternalSimilarity {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn similarity(&self, a: &Term, b: &Term) -> f64 {
        self.scores.get(&(a.clone(), b.clone())).copied().unwrap_or(0.0)
    }
}

/// `base(a, b) + pos(a, b)`.
#[derive(Debug, Clone)]
pub struct Combined<A, B> {
    pub base: A,
    pub pos: B,
}

pub fn combine_with_pos<A: SimilarityProvider, B: SimilarityProvider>(base: A, pos: B) -> Combined<A, B> {
    Combined { base, pos }
}

impl<A: SimilarityProvider, B: SimilarityProvider> SimilarityProvider for Combined<A, B> {
    fn name(&self) -> String {
        format!("{}+{}", self.base.name(), self.pos.name())
    }

    fn similarity(&self, a: &Term, b: &Term) -> f64 {
        self.base.similarity(a, b) + self.pos.similarity(a, b)
    }
}

/// Always 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSimilarity;

impl SimilarityProvider for ZeroSimilarity {
    fn name(&self) -> String {
        "zero".into()
    }
    fn similarity(&self, _: &Term, _: &Term) -> f64 {
        0.0
    }
}

fn read(path: &Path) -> Result<String, AttributionalError> {
    fs::read_to_string(path).map_err(|source| AttributionalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
