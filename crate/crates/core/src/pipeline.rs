//! Corpus → pair list → patterns → frequency matrix → relation space.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusIndex;
use crate::patterns::{self, PatternError, PatternStats};
use crate::problem::MappingProblem;
use crate::space::{Provenance, RelationSpace, SpaceError, Transform};
use crate::sparse::SparseMatrix;
use crate::term::TermPair;

pub const DEFAULT_K: usize = 300;
pub const DEFAULT_T: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Parameters of the space construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceConfig {
    /// Columns kept per retained row.
    pub t: usize,
    /// SVD rank; `None` skips smoothing.
    pub k: Option<usize>,
    pub transform: Transform,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            t: DEFAULT_T,
            k: Some(DEFAULT_K),
            transform: Transform::Ppmic,
        }
    }
}

/// Sizes recorded while building a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceStats {
    /// Pairs in the expanded list, before pruning.
    pub n_pairs: usize,
    /// Rows after pruning.
    pub n_r: usize,
    /// Selected pattern columns.
    pub n_c: usize,
    pub phrases: usize,
    pub nnz_f: usize,
    pub density_f: f64,
    pub density_x: f64,
    /// Rank used, or `n_r` when SVD was skipped.
    pub k: usize,
}

/// Phrase and pattern statistics for a batch of problems. Built once and
/// reused for every space configuration.
#[derive(Debug, Clone)]
pub struct Harvest {
    stats: PatternStats,
    corpus_digest: String,
}

impl Harvest {
    /// `cap` limits the phrases used per pair.
    pub fn new(index: &CorpusIndex, problems: &[MappingProblem], cap: Option<usize>) -> Result<Harvest, PipelineError> {
        let pairs = patterns::build_pair_list(problems)?;
        let stats = PatternStats::harvest(index, pairs, cap)?;
        log::info!(
            "harvested {} phrases and {} patterns for {} pairs",
            stats.total_phrases(),
            stats.num_patterns(),
            stats.pairs().len()
        );
        Ok(Harvest {
            stats,
            corpus_digest: index.digest().to_string(),
        })
    }

    pub fn stats(&self) -> &PatternStats {
        &self.stats
    }

    pub fn pairs(&self) -> &[TermPair] {
        self.stats.pairs()
    }

    pub fn retained_rows(&self) -> Vec<TermPair> {
        patterns::prune_rows(self.stats.pairs(), self.stats.phrase_counts())
    }

    pub fn build_space(&self, config: &SpaceConfig) -> Result<(RelationSpace, SpaceStats), PipelineError> {
        let rows = self.retained_rows();
        let cols = patterns::select_columns(&self.stats, config.t, rows.len())?;
        let f = patterns::build_frequency_matrix(&rows, &cols, &self.stats)?.values;
        let provenance = Provenance {
            t: Some(config.t),
            transform: Some(config.transform),
            corpus_digest: Some(self.corpus_digest.clone()),
        };
        let n_r = rows.len();
        let mut stats = SpaceStats {
            n_pairs: self.stats.pairs().len(),
            n_r,
            n_c: cols.len(),
            phrases: self.stats.total_phrases(),
            nnz_f: f.nnz(),
            density_f: f.density(),
            density_x: 0.0,
            k: config.k.unwrap_or(n_r),
        };
        if f.nnz() == 0 {
            // nothing to weight; every similarity is zero
            log::warn!("pair-pattern matrix is empty; all relational similarities are 0");
            let x = SparseMatrix::zeros(n_r, cols.len());
            return Ok((RelationSpace::unsmoothed(&x, rows, provenance)?, stats));
        }
        let x = config.transform.apply(&f)?;
        stats.density_x = x.density();
        let space = RelationSpace::from_transformed(&x, rows, config.k, provenance)?;
        Ok((space, stats))
    }
}

/// One-shot construction of a relation space for `problems`.
pub fn build_space(
    index: &CorpusIndex,
    problems: &[MappingProblem],
    config: &SpaceConfig,
) -> Result<(RelationSpace, SpaceStats), PipelineError> {
    Harvest::new(index, problems, None)?.build_space(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Term, Tokenizer};

    fn pair(x: &str, y: &str) -> TermPair {
        TermPair::new(Term::parse(x).unwrap(), Term::parse(y).unwrap()).unwrap()
    }

    #[test]
    fn empty_corpus_gives_zero_space() {
        let index = CorpusIndex::empty(Tokenizer::default());
        let p = MappingProblem::from_strs("p", &["a", "b", "c"], &["d", "e", "f"]).unwrap();
        let (space, stats) = build_space(&index, &[p], &SpaceConfig::default()).unwrap();
        assert_eq!(stats.n_pairs, 12);
        assert_eq!(stats.n_r, 0);
        assert_eq!(space.sim_r(&pair("a", "b"), &pair("d", "e")), 0.0);
    }

    #[test]
    fn shared_connective_gives_high_similarity() {
        let text = "q a likes b q . q d likes e q . s a hates c s . s d hates f s . u b sees c u . u e sees f u";
        let index = CorpusIndex::from_texts([("doc", text)], Tokenizer::default());
        let p = MappingProblem::from_strs("p", &["a", "b", "c"], &["d", "e", "f"]).unwrap();
        let harvest = Harvest::new(&index, &[p], None).unwrap();
        for config in [
            SpaceConfig {
                k: None,
                ..SpaceConfig::default()
            },
            SpaceConfig {
                k: Some(4),
                ..SpaceConfig::default()
            },
        ] {
            let (space, stats) = harvest.build_space(&config).unwrap();
            assert_eq!(stats.n_r, 12);
            let same = space.sim_r(&pair("a", "b"), &pair("d", "e"));
            let other = space.sim_r(&pair("a", "b"), &pair("d", "f"));
            assert!(same > other + 0.1, "{same} vs {other}");
            assert!((space.sim_r(&pair("a", "b"), &pair("a", "b")) - 1.0).abs() < 1e-9);
        }
    }
}
