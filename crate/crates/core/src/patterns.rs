//! From term pairs to the pair-pattern frequency matrix: the pair list,
//! wildcard pattern generation, row pruning and column selection.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, PhraseOccurrence, MAX_MID, MAX_POST, MAX_PRE};
use crate::problem::{MappingProblem, ProblemError};
use crate::sparse::SparseMatrix;
use crate::term::{Term, TermPair};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PatternError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("phrase {phrase:?} does not hold {pair} at its recorded spans")]
    Inconsistent { phrase: String, pair: String },
    #[error("malformed pattern {0:?}")]
    Malformed(String),
    #[error("column factor t must be positive")]
    ZeroColumnFactor,
    #[error("duplicate row label {0}")]
    DuplicateRow(String),
    #[error("duplicate column label {0:?}")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    X,
    Y,
    /// Matches any single word.
    Wildcard,
    Word(String),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::X => f.write_str("X"),
            Slot::Y => f.write_str("Y"),
            Slot::Wildcard => f.write_str("*"),
            Slot::Word(w) => f.write_str(w),
        }
    }
}

/// A window template such as `a X * Y illustrates`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Pattern {
    slots: Vec<Slot>,
}

impl Pattern {
    pub fn new(slots: Vec<Slot>) -> Result<Pattern, PatternError> {
        let pattern = Pattern { slots };
        if !pattern.is_well_formed() {
            return Err(PatternError::Malformed(pattern.to_string()));
        }
        Ok(pattern)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    fn is_well_formed(&self) -> bool {
        let find = |s: &Slot| self.slots.iter().filter(|x| *x == s).count();
        if find(&Slot::X) != 1 || find(&Slot::Y) != 1 {
            return false;
        }
        let x = self.slots.iter().position(|s| *s == Slot::X).unwrap();
        let y = self.slots.iter().position(|s| *s == Slot::Y).unwrap();
        let (first, second) = (x.min(y), x.max(y));
        first <= MAX_PRE && second - first - 1 <= MAX_MID && self.slots.len() - second - 1 <= MAX_POST
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{slot}")?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Pattern, PatternError> {
        Pattern::new(
            s.split_whitespace()
                .map(|tok| match tok {
                    "X" => Slot::X,
                    "Y" => Slot::Y,
                    "*" => Slot::Wildcard,
                    word => Slot::Word(word.to_string()),
                })
                .collect(),
        )
    }
}

impl TryFrom<String> for Pattern {
    type Error = PatternError;
    fn try_from(s: String) -> Result<Pattern, PatternError> {
        s.parse()
    }
}

impl From<Pattern> for String {
    fn from(p: Pattern) -> String {
        p.to_string()
    }
}

/// Every ordered pair `a_i:a_j` (i ≠ j) within each source list and each
/// target list, without duplicates, in first-seen order.
pub fn build_pair_list(problems: &[MappingProblem]) -> Result<Vec<TermPair>, PatternError> {
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for problem in problems {
        problem.validate()?;
        for terms in [&problem.source, &problem.target] {
            for (i, a) in terms.iter().enumerate() {
                for (j, b) in terms.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let pair = TermPair {
                        x: a.clone(),
                        y: b.clone(),
                    };
                    if seen.insert(pair.clone()) {
                        pairs.push(pair);
                    }
                }
            }
        }
    }
    Ok(pairs)
}

fn spans_hold(tokens: &[String], span: &std::ops::Range<usize>, term: &Term) -> bool {
    tokens.get(span.clone()) == Some(term.tokens())
}

/// All patterns derivable from one phrase of `pair`: the two terms become
/// `X`/`Y` (and then `Y`/`X`), and each remaining word is kept or replaced by
/// `*` independently. With `n` remaining words that gives up to `2^(n+1)`
/// patterns.
pub fn generate_patterns(
    phrase: &PhraseOccurrence,
    pair: &TermPair,
) -> Result<BTreeSet<Pattern>, PatternError> {
    let (xs, ys) = (&phrase.x_span, &phrase.y_span);
    if !spans_hold(&phrase.tokens, xs, &pair.x)
        || !spans_hold(&phrase.tokens, ys, &pair.y)
        || xs.end > ys.start
    {
        return Err(PatternError::Inconsistent {
            phrase: phrase.text(),
            pair: pair.to_string(),
        });
    }
    // skeleton: Some(word) for free words, None for the two term slots
    let mut skeleton: Vec<Option<&str>> = Vec::new();
    skeleton.extend(phrase.tokens[..xs.start].iter().map(|t| Some(t.as_str())));
    skeleton.push(None);
    skeleton.extend(phrase.tokens[xs.end..ys.start].iter().map(|t| Some(t.as_str())));
    skeleton.push(None);
    skeleton.extend(phrase.tokens[ys.end..].iter().map(|t| Some(t.as_str())));

    let free = skeleton.iter().filter(|s| s.is_some()).count();
    let mut out = BTreeSet::new();
    for (first, second) in [(Slot::X, Slot::Y), (Slot::Y, Slot::X)] {
        for mask in 0u32..(1 << free) {
            let mut bit = 0;
            let mut term_slot = 0;
            let slots = skeleton
                .iter()
                .map(|s| match s {
                    Some(word) => {
                        let wild = mask & (1 << bit) != 0;
                        bit += 1;
                        if wild {
                            Slot::Wildcard
                        } else {
                            Slot::Word((*word).to_string())
                        }
                    }
                    None => {
                        term_slot += 1;
                        if term_slot == 1 {
                            first.clone()
                        } else {
                            second.clone()
                        }
                    }
                })
                .collect();
            out.insert(Pattern::new(slots)?);
        }
    }
    Ok(out)
}

/// Pattern bookkeeping over the pair list: for each pair, how many of its
/// phrases generated each pattern.
#[derive(Debug, Clone, Default)]
pub struct PatternStats {
    pairs: Vec<TermPair>,
    pair_ids: HashMap<TermPair, usize>,
    patterns: Vec<Pattern>,
    pattern_ids: HashMap<Pattern, usize>,
    /// Per pair: pattern id -> number of phrases generating it.
    counts: Vec<HashMap<usize, u64>>,
    /// Per pattern: number of distinct pairs generating it.
    support: Vec<usize>,
    phrase_counts: Vec<usize>,
}

/// Phrase count and pattern counts for one pair.
type PairCounts = (usize, HashMap<Pattern, u64>);

impl PatternStats {
    pub fn new(pairs: Vec<TermPair>) -> PatternStats {
        let pair_ids = pairs.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let n = pairs.len();
        PatternStats {
            pairs,
            pair_ids,
            counts: vec![HashMap::new(); n],
            phrase_counts: vec![0; n],
            ..PatternStats::default()
        }
    }

    fn intern(&mut self, pattern: Pattern) -> usize {
        if let Some(&id) = self.pattern_ids.get(&pattern) {
            return id;
        }
        let id = self.patterns.len();
        self.pattern_ids.insert(pattern.clone(), id);
        self.patterns.push(pattern);
        self.support.push(0);
        id
    }

    /// Adds the phrases of pair number `pair`.
    pub fn record(&mut self, pair: usize, phrases: &[PhraseOccurrence]) -> Result<(), PatternError> {
        let mut local: HashMap<Pattern, u64> = HashMap::new();
        for phrase in phrases {
            for pattern in generate_patterns(phrase, &self.pairs[pair])? {
                *local.entry(pattern).or_default() += 1;
            }
        }
        self.merge(pair, phrases.len(), local);
        Ok(())
    }

    fn merge(&mut self, pair: usize, n_phrases: usize, local: HashMap<Pattern, u64>) {
        self.phrase_counts[pair] += n_phrases;
        // sorted so pattern ids do not depend on hash order
        let mut local: Vec<_> = local.into_iter().collect();
        local.sort();
        for (pattern, count) in local {
            let id = self.intern(pattern);
            let slot = self.counts[pair].entry(id).or_insert(0);
            if *slot == 0 {
                self.support[id] += 1;
            }
            *slot += count;
        }
    }

    pub fn pairs(&self) -> &[TermPair] {
        &self.pairs
    }

    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn phrase_counts(&self) -> &[usize] {
        &self.phrase_counts
    }

    pub fn total_phrases(&self) -> usize {
        self.phrase_counts.iter().sum()
    }

    /// Number of distinct pairs that generated `pattern`.
    pub fn support(&self, pattern: &Pattern) -> usize {
        self.pattern_ids.get(pattern).map_or(0, |&id| self.support[id])
    }

    /// Phrases of `pair` that generated `pattern`.
    pub fn count(&self, pair: &TermPair, pattern: &Pattern) -> u64 {
        match (self.pair_ids.get(pair), self.pattern_ids.get(pattern)) {
            (Some(&r), Some(&c)) => self.counts[r].get(&c).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Patterns with their support, sorted by descending support and then by
    /// serialized form.
    pub fn ranked_patterns(&self) -> Vec<(&Pattern, usize)> {
        let mut ranked: Vec<(String, usize, usize)> = self
            .patterns
            .iter()
            .enumerate()
            .map(|(id, p)| (p.to_string(), self.support[id], id))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .map(|(_, support, id)| (&self.patterns[id], support))
            .collect()
    }

    /// Retrieves phrases for every pair (in parallel) and records their
    /// patterns. `cap` limits the phrases used per pair.
    pub fn harvest(
        index: &CorpusIndex,
        pairs: Vec<TermPair>,
        cap: Option<usize>,
    ) -> Result<PatternStats, PatternError> {
        let mut stats = PatternStats::new(pairs);
        let locals: Vec<Result<PairCounts, PatternError>> = stats
            .pairs
            .par_iter()
            .map(|pair| {
                let mut phrases = index.search_phrases(pair);
                if let Some(cap) = cap {
                    phrases.truncate(cap);
                }
                let mut local: HashMap<Pattern, u64> = HashMap::new();
                for phrase in &phrases {
                    for pattern in generate_patterns(phrase, pair)? {
                        *local.entry(pattern).or_default() += 1;
                    }
                }
                Ok((phrases.len(), local))
            })
            .collect();
        for (pair, local) in locals.into_iter().enumerate() {
            let (n, local) = local?;
            stats.merge(pair, n, local);
        }
        Ok(stats)
    }
}

/// Drops `x:y` when neither `x:y` nor `y:x` has any phrase. `phrase_counts`
/// is aligned with `pairs`; a reversed pair missing from `pairs` counts as
/// having no phrases.
pub fn prune_rows(pairs: &[TermPair], phrase_counts: &[usize]) -> Vec<TermPair> {
    let counts: HashMap<&TermPair, usize> = pairs.iter().zip(phrase_counts.iter().copied()).collect();
    pairs
        .iter()
        .filter(|pair| {
            let forward = counts.get(pair).copied().unwrap_or(0);
            let backward = counts.get(&pair.reversed()).copied().unwrap_or(0);
            forward + backward > 0
        })
        .cloned()
        .collect()
}

/// The top `t * n_r` patterns by number of generating pairs.
pub fn select_columns(stats: &PatternStats, t: usize, n_r: usize) -> Result<Vec<Pattern>, PatternError> {
    if t == 0 {
        return Err(PatternError::ZeroColumnFactor);
    }
    Ok(stats
        .ranked_patterns()
        .into_iter()
        .take(t.saturating_mul(n_r))
        .map(|(p, _)| p.clone())
        .collect())
}

/// Pair-pattern frequency matrix with its row and column labels.
#[derive(Debug, Clone)]
pub struct PairPatternMatrix {
    pub rows: Vec<TermPair>,
    pub cols: Vec<Pattern>,
    pub values: SparseMatrix,
}

/// `f_ij` = number of phrases of row pair `i` that generated column pattern `j`.
pub fn build_frequency_matrix(
    rows: &[TermPair],
    cols: &[Pattern],
    stats: &PatternStats,
) -> Result<PairPatternMatrix, PatternError> {
    let mut row_seen = HashSet::new();
    for row in rows {
        if !row_seen.insert(row) {
            return Err(PatternError::DuplicateRow(row.to_string()));
        }
    }
    let mut col_of: HashMap<usize, usize> = HashMap::new();
    let mut col_seen = HashSet::new();
    for (j, col) in cols.iter().enumerate() {
        if !col_seen.insert(col) {
            return Err(PatternError::DuplicateColumn(col.to_string()));
        }
        if let Some(&id) = stats.pattern_ids.get(col) {
            col_of.insert(id, j);
        }
    }
    let mut triplets = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let Some(&r) = stats.pair_ids.get(row) else {
            continue;
        };
        for (id, &count) in &stats.counts[r] {
            if let Some(&j) = col_of.get(id) {
                triplets.push((i, j, count as f64));
            }
        }
    }
    let values = SparseMatrix::from_triplets(rows.len(), cols.len(), triplets)
        .expect("row and column labels are unique");
    Ok(PairPatternMatrix {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        values,
    })
}
