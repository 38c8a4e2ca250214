//! Latent relation mapping: find the bijection between two term lists that
//! best preserves the relations among the terms, using pattern statistics
//! mined from a text corpus.

pub mod attributional;
pub mod corpus;
pub mod dataset;
pub mod evaluation;
pub mod patterns;
pub mod pipeline;
pub mod planted;
pub mod problem;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod svd;
pub mod term;

pub use attributional::{PosTag, SimilarityProvider};
pub use dataset::{Dataset, DatasetError};
pub use evaluation::{accuracy, EvalConfig, EvalError, Mode, Report};
pub use corpus::{CorpusError, CorpusIndex, PhraseOccurrence};
pub use patterns::{Pattern, PatternError, PatternStats};
pub use pipeline::{Harvest, PipelineError, SpaceConfig};
pub use problem::{Mapping, MappingProblem, ProblemError};
pub use solver::{solve, Coherence, Combine, ScoreTable, SolveError, SolveOptions, SolveResult, TiePolicy};
pub use space::{RelationSpace, SpaceError, Transform};
pub use sparse::SparseMatrix;
pub use term::{Term, TermPair, Tokenizer};
