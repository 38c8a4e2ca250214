//! Terms, term pairs and the tokenizer shared by the corpus index and the
//! problem definitions.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Longest multiword term accepted.
pub const MAX_TERM_TOKENS: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TermError {
    #[error("term {0:?} has no word tokens after normalization")]
    Empty(String),
    #[error("term {surface:?} has {count} tokens (at most {MAX_TERM_TOKENS} allowed)")]
    TooLong { surface: String, count: usize },
    #[error("pair {0:?} joins a term with itself")]
    SelfPair(String),
}

/// Token normalization rules.
///
/// Tokens are split on whitespace, optionally lowercased, and stripped of
/// leading and trailing non-alphanumeric characters. No stemming is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

impl Tokenizer {
    /// Normalizes one raw whitespace-free chunk. Returns `None` when nothing
    /// is left (e.g. a lone dash).
    pub fn normalize_token(&self, raw: &str) -> Option<String> {
        let trimmed = if self.strip_punctuation {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
        } else {
            raw
        };
        if trimmed.is_empty() {
            return None;
        }
        Some(if self.lowercase {
            trimmed.to_lowercase()
        } else {
            trimmed.to_string()
        })
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .filter_map(|raw| self.normalize_token(raw))
            .collect()
    }

    /// Re-joins the tokens of `text` with single spaces.
    pub fn normalize(&self, text: &str) -> String {
        self.tokenize(text).join(" ")
    }
}

/// A vocabulary item of one to four words.
///
/// Equality and hashing only look at the normalized tokens, so `"Sun"` and
/// `"sun,"` are the same term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Term {
    tokens: Vec<String>,
    surface: String,
}

impl Term {
    pub fn parse(surface: &str) -> Result<Term, TermError> {
        Term::with_tokenizer(surface, &Tokenizer::default())
    }

    pub fn with_tokenizer(surface: &str, tokenizer: &Tokenizer) -> Result<Term, TermError> {
        let tokens = tokenizer.tokenize(surface);
        if tokens.is_empty() {
            return Err(TermError::Empty(surface.to_string()));
        }
        if tokens.len() > MAX_TERM_TOKENS {
            return Err(TermError::TooLong {
                surface: surface.to_string(),
                count: tokens.len(),
            });
        }
        Ok(Term {
            tokens,
            surface: surface.trim().to_string(),
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    /// Normalized form: tokens joined by single spaces.
    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.tokens.hash(state);
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.tokens.cmp(&other.tokens)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// An ordered pair `x:y` of distinct terms; one row of the pair-pattern matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermPair {
    pub x: Term,
    pub y: Term,
}

impl TermPair {
    pub fn new(x: Term, y: Term) -> Result<TermPair, TermError> {
        if x == y {
            return Err(TermError::SelfPair(x.key()));
        }
        Ok(TermPair { x, y })
    }

    pub fn reversed(&self) -> TermPair {
        TermPair {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

impl fmt::Display for TermPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.x, self.y)
    }
}
