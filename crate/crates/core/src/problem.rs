//! Mapping problems and bijective mappings between their term lists.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attributional::PosTag;
use crate::term::Term;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProblemError {
    #[error("problem {id}: source has {source_len} terms but target has {target_len}")]
    SizeMismatch {
        id: String,
        source_len: usize,
        target_len: usize,
    },
    #[error("problem {id}: needs at least 2 terms per side, got {m}")]
    TooSmall { id: String, m: usize },
    #[error("problem {id}: duplicate term {term:?} in the {side} list")]
    DuplicateTerm {
        id: String,
        term: String,
        side: &'static str,
    },
    #[error("problem {id}: {what} has {got} entries, expected {expected}")]
    AnnotationLength {
        id: String,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("problem {id}: intended mapping is not a bijection")]
    IntendedNotBijective { id: String },
    #[error("problem {id}: intended mapping {source_term} -> {target_term} joins tags {source_tag} and {target_tag}")]
    IntendedTagMismatch {
        id: String,
        source_term: String,
        target_term: String,
        source_tag: String,
        target_tag: String,
    },
    #[error("mapping {perm:?} is not a permutation of 0..{m}")]
    NotBijective { perm: Vec<usize>, m: usize },
    #[error("mappings belong to different problems ({0} vs {1})")]
    ProblemMismatch(String, String),
}

/// Source list `A` and target list `B` of equal size `m`, plus optional
/// annotations (part-of-speech tags, the intended mapping, human agreement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingProblem {
    pub id: String,
    pub source: Vec<Term>,
    pub target: Vec<Term>,
    pub source_tags: Option<Vec<PosTag>>,
    pub target_tags: Option<Vec<PosTag>>,
    /// `intended[i]` is the target index for source term `i`.
    pub intended: Option<Vec<usize>>,
    /// Percent of participants agreeing with `intended`, per source term.
    pub agreement: Option<Vec<f64>>,
    pub mnemonic: Option<String>,
}

impl MappingProblem {
    pub fn new(
        id: impl Into<String>,
        source: Vec<Term>,
        target: Vec<Term>,
    ) -> Result<MappingProblem, ProblemError> {
        let problem = MappingProblem {
            id: id.into(),
            source,
            target,
            source_tags: None,
            target_tags: None,
            intended: None,
            agreement: None,
            mnemonic: None,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Convenience constructor from plain strings; panics on malformed terms.
    pub fn from_strs(id: &str, source: &[&str], target: &[&str]) -> Result<MappingProblem, ProblemError> {
        let parse = |s: &&str| Term::parse(s).expect("malformed term");
        MappingProblem::new(
            id,
            source.iter().map(parse).collect(),
            target.iter().map(parse).collect(),
        )
    }

    pub fn m(&self) -> usize {
        self.source.len()
    }

    pub fn with_intended(mut self, intended: Vec<usize>) -> Result<MappingProblem, ProblemError> {
        self.intended = Some(intended);
        self.validate()?;
        Ok(self)
    }

    pub fn with_tags(
        mut self,
        source_tags: Vec<PosTag>,
        target_tags: Vec<PosTag>,
    ) -> Result<MappingProblem, ProblemError> {
        self.source_tags = Some(source_tags);
        self.target_tags = Some(target_tags);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let id = &self.id;
        let m = self.source.len();
        if self.target.len() != m {
            return Err(ProblemError::SizeMismatch {
                id: id.clone(),
                source_len: m,
                target_len: self.target.len(),
            });
        }
        if m < 2 {
            return Err(ProblemError::TooSmall { id: id.clone(), m });
        }
        for (side, terms) in [("source", &self.source), ("target", &self.target)] {
            for (i, term) in terms.iter().enumerate() {
                if terms[..i].contains(term) {
                    return Err(ProblemError::DuplicateTerm {
                        id: id.clone(),
                        term: term.key(),
                        side,
                    });
                }
            }
        }
        let check_len = |what, got: usize| {
            if got != m {
                Err(ProblemError::AnnotationLength {
                    id: id.clone(),
                    what,
                    got,
                    expected: m,
                })
            } else {
                Ok(())
            }
        };
        if let Some(tags) = &self.source_tags {
            check_len("source tags", tags.len())?;
        }
        if let Some(tags) = &self.target_tags {
            check_len("target tags", tags.len())?;
        }
        if let Some(agreement) = &self.agreement {
            check_len("agreement", agreement.len())?;
        }
        if let Some(intended) = &self.intended {
            if !is_permutation(intended, m) {
                return Err(ProblemError::IntendedNotBijective { id: id.clone() });
            }
            if let (Some(st), Some(tt)) = (&self.source_tags, &self.target_tags) {
                for (i, &j) in intended.iter().enumerate() {
                    if st[i] != tt[j] {
                        return Err(ProblemError::IntendedTagMismatch {
                            id: id.clone(),
                            source_term: self.source[i].key(),
                            target_term: self.target[j].key(),
                            source_tag: st[i].to_string(),
                            target_tag: tt[j].to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn intended_mapping(&self) -> Option<Mapping> {
        self.intended.as_ref().map(|perm| Mapping {
            problem_id: self.id.clone(),
            perm: perm.clone(),
        })
    }

    /// Tag of a term in either list, if the problem is tagged.
    pub fn tag_of(&self, term: &Term) -> Option<&PosTag> {
        fn lookup<'a>(terms: &[Term], tags: &'a Option<Vec<PosTag>>, term: &Term) -> Option<&'a PosTag> {
            let tags = tags.as_ref()?;
            terms.iter().position(|t| t == term).map(|i| &tags[i])
        }
        lookup(&self.source, &self.source_tags, term).or_else(|| lookup(&self.target, &self.target_tags, term))
    }

    /// Mean of the per-term agreement percentages.
    pub fn mean_agreement(&self) -> Option<f64> {
        let values = self.agreement.as_ref()?;
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub(crate) fn is_permutation(perm: &[usize], m: usize) -> bool {
    if perm.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    perm.iter().all(|&j| j < m && !std::mem::replace(&mut seen[j], true))
}

/// A bijection from source indices to target indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mapping {
    pub problem_id: String,
    pub perm: Vec<usize>,
}

impl Mapping {
    pub fn new(problem_id: impl Into<String>, perm: Vec<usize>) -> Result<Mapping, ProblemError> {
        let m = perm.len();
        if !is_permutation(&perm, m) {
            return Err(ProblemError::NotBijective { perm, m });
        }
        Ok(Mapping {
            problem_id: problem_id.into(),
            perm,
        })
    }

    pub fn m(&self) -> usize {
        self.perm.len()
    }

    /// `(source term, target term)` pairs in source order.
    pub fn pairs<'a>(&'a self, problem: &'a MappingProblem) -> impl Iterator<Item = (&'a Term, &'a Term)> + 'a {
        self.perm
            .iter()
            .enumerate()
            .map(move |(i, &j)| (&problem.source[i], &problem.target[j]))
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.problem_id, self.perm)
    }
}
