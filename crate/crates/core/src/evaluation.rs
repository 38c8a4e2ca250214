//! Accuracy, batch runs over a dataset, and the coherence and sensitivity
//! experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributional::SimilarityProvider;
use crate::dataset::{problem_group, Dataset};
use crate::pipeline::{Harvest, PipelineError, SpaceConfig, SpaceStats};
use crate::problem::{Mapping, MappingProblem, ProblemError};
use crate::solver::{self, Coherence, Combine, ScoreTable, SolveError, SolveOptions, TiePolicy};
use crate::space::{RelationSpace, Transform};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{mode} mode needs {what}")]
    MissingInput { mode: Mode, what: &'static str },
    #[error("{0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Percent of source terms whose predicted target is the intended one.
pub fn accuracy(predicted: &Mapping, intended: &Mapping) -> Result<f64, ProblemError> {
    if predicted.problem_id != intended.problem_id {
        return Err(ProblemError::ProblemMismatch(
            predicted.problem_id.clone(),
            intended.problem_id.clone(),
        ));
    }
    if predicted.m() != intended.m() {
        return Err(ProblemError::NotBijective {
            perm: predicted.perm.clone(),
            m: intended.m(),
        });
    }
    let correct = predicted.perm.iter().zip(&intended.perm).filter(|(a, b)| a == b).count();
    Ok(100.0 * correct as f64 / intended.m() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Relational,
    Attributional,
    HybridAdd,
    HybridMul,
}

impl Mode {
    fn needs_space(self) -> bool {
        self != Mode::Attributional
    }

    fn needs_provider(self) -> bool {
        self != Mode::Relational
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Relational => "relational",
            Mode::Attributional => "attributional",
            Mode::HybridAdd => "hybrid-add",
            Mode::HybridMul => "hybrid-mul",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "relational" => Ok(Mode::Relational),
            "attributional" => Ok(Mode::Attributional),
            "hybrid-add" => Ok(Mode::HybridAdd),
            "hybrid-mul" => Ok(Mode::HybridMul),
            other => Err(format!(
                "unknown mode {other:?} (expected relational, attributional, hybrid-add or hybrid-mul)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub mode: Mode,
    pub space: SpaceConfig,
    pub seed: u64,
    pub ties: TiePolicy,
    pub max_m: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: Mode::Relational,
            space: SpaceConfig::default(),
            seed: 0,
            ties: TiePolicy::Random,
            max_m: solver::DEFAULT_MAX_M,
        }
    }
}

impl EvalConfig {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            seed: self.seed,
            ties: self.ties,
            max_m: self.max_m,
        }
    }
}

/// What a batch run draws similarities from.
#[derive(Clone, Copy, Default)]
pub struct Sources<'a> {
    pub harvest: Option<&'a Harvest>,
    pub provider: Option<&'a dyn SimilarityProvider>,
}

impl<'a> Sources<'a> {
    pub fn relational(harvest: &'a Harvest) -> Sources<'a> {
        Sources {
            harvest: Some(harvest),
            provider: None,
        }
    }

    pub fn attributional(provider: &'a dyn SimilarityProvider) -> Sources<'a> {
        Sources {
            harvest: None,
            provider: Some(provider),
        }
    }
}

/// The similarity tables for one mode, ready to solve problem by problem.
pub struct Scorer<'a> {
    mode: Mode,
    space: Option<RelationSpace>,
    provider: Option<&'a dyn SimilarityProvider>,
}

impl<'a> Scorer<'a> {
    pub fn new(sources: &Sources<'a>, config: &EvalConfig) -> Result<(Scorer<'a>, Option<SpaceStats>), EvalError> {
        let mode = config.mode;
        let (space, stats) = if mode.needs_space() {
            let harvest = sources.harvest.ok_or(EvalError::MissingInput { mode, what: "a corpus" })?;
            let (space, stats) = harvest.build_space(&config.space)?;
            (Some(space), Some(stats))
        } else {
            (None, None)
        };
        if mode.needs_provider() && sources.provider.is_none() {
            return Err(EvalError::MissingInput {
                mode,
                what: "a similarity provider",
            });
        }
        Ok((
            Scorer {
                mode,
                space,
                provider: sources.provider,
            },
            stats,
        ))
    }

    pub fn from_space(space: RelationSpace) -> Scorer<'static> {
        Scorer {
            mode: Mode::Relational,
            space: Some(space),
            provider: None,
        }
    }

    pub fn space(&self) -> Option<&RelationSpace> {
        self.space.as_ref()
    }

    fn relational_table(&self, problem: &MappingProblem) -> ScoreTable {
        ScoreTable::relational(self.space.as_ref().expect("space built"), problem)
    }

    fn attributional_table(&self, problem: &MappingProblem) -> ScoreTable {
        ScoreTable::attributional(self.provider.expect("provider present"), problem)
    }

    /// The single table used for relational or attributional solving.
    pub fn table(&self, problem: &MappingProblem) -> Result<ScoreTable, EvalError> {
        match self.mode {
            Mode::Relational => Ok(self.relational_table(problem)),
            Mode::Attributional => Ok(self.attributional_table(problem)),
            mode => Err(EvalError::Config(format!("{mode} scoring has no single score table"))),
        }
    }

    pub fn solve(&self, problem: &MappingProblem, opts: &SolveOptions) -> Result<solver::SolveResult, EvalError> {
        // refuse before building an m^4 table for an oversized problem
        solver::enumerate_mappings(problem.m(), opts.max_m)?;
        let result = match self.mode {
            Mode::Relational | Mode::Attributional => solver::solve(&self.table(problem)?, opts)?,
            Mode::HybridAdd | Mode::HybridMul => {
                let combine = if self.mode == Mode::HybridAdd {
                    Combine::Add
                } else {
                    Combine::Multiply
                };
                solver::solve_hybrid(
                    &self.relational_table(problem),
                    &self.attributional_table(problem),
                    combine,
                    opts,
                )?
            }
        };
        Ok(result)
    }
}

/// Result for one problem of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub id: String,
    pub m: usize,
    pub accuracy: Option<f64>,
    pub score: Option<f64>,
    pub tie_count: Option<usize>,
    pub mapping: Option<Vec<usize>>,
    /// Set when the problem could not be solved (budget refusal).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: Mode,
    pub seed: u64,
    pub space_config: Option<SpaceConfig>,
    pub space: Option<SpaceStats>,
    pub rows: Vec<ProblemOutcome>,
    /// Unweighted mean over scored problems.
    pub average: Option<f64>,
    pub science_average: Option<f64>,
    pub metaphor_average: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

impl Report {
    fn assemble(mode: Mode, seed: u64, space_config: Option<SpaceConfig>, space: Option<SpaceStats>, rows: Vec<ProblemOutcome>) -> Report {
        let group_mean = |group: Option<&str>| {
            mean(
                rows.iter()
                    .filter(|r| group.is_none() || problem_group(&r.id) == group)
                    .filter_map(|r| r.accuracy),
            )
        };
        Report {
            average: group_mean(None),
            science_average: group_mean(Some("science")),
            metaphor_average: group_mean(Some("metaphor")),
            mode,
            seed,
            space_config,
            space,
            rows,
        }
    }

    pub fn refused(&self) -> impl Iterator<Item = &ProblemOutcome> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// One row per problem, then the group and overall averages.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("problem\tm\taccuracy\tties\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.id,
                r.m,
                fmt_opt(r.accuracy),
                r.tie_count.map_or_else(|| "-".to_string(), |t| t.to_string())
            ));
        }
        let mean_m = mean(self.rows.iter().map(|r| r.m as f64));
        if self.science_average.is_some() && self.metaphor_average.is_some() {
            out.push_str(&format!("Science\t\t{}\t\n", fmt_opt(self.science_average)));
            out.push_str(&format!("Metaphor\t\t{}\t\n", fmt_opt(self.metaphor_average)));
        }
        out.push_str(&format!("Average\t{}\t{}\t\n", fmt_opt(mean_m), fmt_opt(self.average)));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes the TSV to `path` and the JSON sidecar next to it.
    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        write_pair(path, &self.to_tsv(), &self.to_json())
    }
}

fn write_pair(path: &Path, tsv: &str, json: &str) -> Result<(), EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    fs::write(path, tsv).map_err(io(path))?;
    let sidecar = path.with_extension("json");
    fs::write(&sidecar, json).map_err(io(&sidecar))
}

/// Solves every problem of the dataset and scores it against the intended
/// mappings. Problems over the search budget are reported, not fatal.
pub fn run_batch(dataset: &Dataset, sources: &Sources, config: &EvalConfig) -> Result<Report, EvalError> {
    let (scorer, stats) = Scorer::new(sources, config)?;
    run_with_scorer(dataset, &scorer, config, stats)
}

pub fn run_with_scorer(
    dataset: &Dataset,
    scorer: &Scorer,
    config: &EvalConfig,
    stats: Option<SpaceStats>,
) -> Result<Report, EvalError> {
    let opts = config.solve_options();
    let rows: Vec<Result<ProblemOutcome, EvalError>> = dataset
        .problems()
        .par_iter()
        .map(|problem| {
            let mut row = ProblemOutcome {
                id: problem.id.clone(),
                m: problem.m(),
                accuracy: None,
                score: None,
                tie_count: None,
                mapping: None,
                error: None,
            };
            match scorer.solve(problem, &opts) {
                Ok(result) => {
                    if let Some(intended) = problem.intended_mapping() {
                        row.accuracy = Some(accuracy(&result.mapping, &intended)?);
                    }
                    row.score = Some(result.score);
                    row.tie_count = Some(result.tie_count);
                    row.mapping = Some(result.mapping.perm);
                }
                Err(EvalError::Solve(e @ SolveError::BudgetExceeded { .. })) => {
                    log::warn!("problem {}: {e}", problem.id);
                    row.error = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let space_config = config.mode.needs_space().then_some(config.space);
    Ok(Report::assemble(config.mode, config.seed, space_config, stats, rows))
}

/// Settings of the coherence experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    /// Size of each reduced problem.
    pub m_prime: usize,
    pub trials: usize,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub id: String,
    /// Source indices of the reduced problem.
    pub subset: Vec<usize>,
    pub internal_accuracy: f64,
    pub total_accuracy: f64,
    pub internal_mapping: Vec<(usize, usize)>,
    pub total_mapping: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mode: Mode,
    pub m_prime: usize,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<CoherenceRow>,
    pub skipped: Vec<String>,
    pub internal_average: Option<f64>,
    pub total_average: Option<f64>,
}

impl CoherenceReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("problem\tsubset\tinternal\ttotal\n");
        for r in &self.rows {
            let subset: Vec<String> = r.subset.iter().map(ToString::to_string).collect();
            out.push_str(&format!(
                "{}\t{}\t{:.1}\t{:.1}\n",
                r.id,
                subset.join(","),
                r.internal_accuracy,
                r.total_accuracy
            ));
        }
        out.push_str(&format!(
            "Average\t{}\t{}\t{}\n",
            self.rows.len(),
            fmt_opt(self.internal_average),
            fmt_opt(self.total_average)
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        write_pair(path, &self.to_tsv(), &self.to_json())
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `min(trials, C(m, m'))` distinct sorted subsets of `0..m`, each drawn
/// uniformly.
pub fn sample_subsets(m: usize, m_prime: usize, trials: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let wanted = binomial(m, m_prime).min(trials as u128) as usize;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(wanted);
    while out.len() < wanted {
        let mut subset = rand::seq::index::sample(rng, m, m_prime).into_vec();
        subset.sort_unstable();
        if seen.insert(subset.clone()) {
            out.push(subset);
        }
    }
    out
}

fn sub_accuracy(sub_mapping: &[(usize, usize)], intended: &[usize]) -> f64 {
    let correct = sub_mapping.iter().filter(|&&(i, j)| intended[i] == j).count();
    100.0 * correct as f64 / sub_mapping.len() as f64
}

/// Reduced problems `A' → intended(A')` solved with only their own relations
/// (internal) and inside the full problem (total).
pub fn coherence_experiment(
    dataset: &Dataset,
    sources: &Sources,
    config: &CoherenceConfig,
) -> Result<CoherenceReport, EvalError> {
    if config.m_prime < 1 {
        return Err(EvalError::Config("m' must be at least 1".into()));
    }
    let (scorer, _) = Scorer::new(sources, &config.eval)?;
    coherence_with_scorer(dataset, &scorer, config)
}

pub fn coherence_with_scorer(
    dataset: &Dataset,
    scorer: &Scorer,
    config: &CoherenceConfig,
) -> Result<CoherenceReport, EvalError> {
    let opts = config.eval.solve_options();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (n, problem) in dataset.problems().iter().enumerate() {
        let Some(intended) = &problem.intended else {
            log::warn!("problem {}: no intended mapping, skipped", problem.id);
            skipped.push(problem.id.clone());
            continue;
        };
        if config.m_prime > problem.m() {
            log::warn!("problem {}: m' = {} exceeds m = {}, skipped", problem.id, config.m_prime, problem.m());
            skipped.push(problem.id.clone());
            continue;
        }
        let table = scorer.table(problem)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.eval.seed);
        rng.set_stream(n as u64);
        for subset in sample_subsets(problem.m(), config.m_prime, config.trials, &mut rng) {
            let targets: Vec<usize> = subset.iter().map(|&i| intended[i]).collect();
            let internal = solver::solve_constrained(&table, &subset, &targets, Coherence::Internal, &opts)?;
            let total = solver::solve_constrained(&table, &subset, &targets, Coherence::Total, &opts)?;
            rows.push(CoherenceRow {
                id: problem.id.clone(),
                internal_accuracy: sub_accuracy(&internal.sub_mapping, intended),
                total_accuracy: sub_accuracy(&total.sub_mapping, intended),
                internal_mapping: internal.sub_mapping,
                total_mapping: total.sub_mapping,
                subset,
            });
        }
    }
    Ok(CoherenceReport {
        mode: config.eval.mode,
        m_prime: config.m_prime,
        trials: config.trials,
        seed: config.eval.seed,
        internal_average: mean(rows.iter().map(|r| r.internal_accuracy)),
        total_average: mean(rows.iter().map(|r| r.total_accuracy)),
        rows,
        skipped,
    })
}

/// One configuration of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub space: SpaceConfig,
}

impl SweepPoint {
    pub fn new(label: impl Into<String>, space: SpaceConfig) -> SweepPoint {
        SweepPoint {
            label: label.into(),
            space,
        }
    }
}

fn with_k(k: usize) -> SpaceConfig {
    SpaceConfig {
        k: Some(k),
        ..SpaceConfig::default()
    }
}

fn with_t(t: usize) -> SpaceConfig {
    SpaceConfig {
        t,
        ..SpaceConfig::default()
    }
}

pub fn vary_k(ks: impl IntoIterator<Item = usize>) -> Vec<SweepPoint> {
    ks.into_iter().map(|k| SweepPoint::new("varying k", with_k(k))).collect()
}

pub fn vary_t(ts: impl IntoIterator<Item = usize>) -> Vec<SweepPoint> {
    ts.into_iter().map(|t| SweepPoint::new("varying t", with_t(t))).collect()
}

pub fn no_svd_point() -> SweepPoint {
    SweepPoint::new(
        "dropping SVD",
        SpaceConfig {
            k: None,
            ..SpaceConfig::default()
        },
    )
}

pub fn log_entropy_point() -> SweepPoint {
    SweepPoint::new(
        "log entropy",
        SpaceConfig {
            transform: Transform::LogEntropy,
            ..SpaceConfig::default()
        },
    )
}

/// Baseline, k from 50 to 400, t from 5 to 40, no SVD, log entropy.
pub fn full_grid() -> Vec<SweepPoint> {
    let mut grid = vec![SweepPoint::new("baseline", SpaceConfig::default())];
    grid.extend(vary_k((50..=400).step_by(50)));
    grid.extend(vary_t((5..=40).step_by(5)));
    grid.push(no_svd_point());
    grid.push(log_entropy_point());
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub transform: Transform,
    /// The SVD rank, or `n_r` when SVD is dropped.
    pub k: usize,
    pub t: usize,
    pub n_c: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: Mode,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<Report>,
}

impl SweepReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("label\ttransform\tk\tt\tn_c\taccuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.label,
                r.transform,
                r.k,
                r.t,
                r.n_c,
                fmt_opt(r.accuracy)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        write_pair(path, &self.to_tsv(), &self.to_json())
    }
}

/// One batch run per grid point, sharing a single harvest.
pub fn sensitivity_sweep(
    dataset: &Dataset,
    sources: &Sources,
    base: &EvalConfig,
    grid: &[SweepPoint],
) -> Result<SweepReport, EvalError> {
    if !base.mode.needs_space() {
        return Err(EvalError::Config("a sweep varies the relation space; attributional mode has none".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut reports = Vec::with_capacity(grid.len());
    for point in grid {
        let config = EvalConfig {
            space: point.space,
            ..*base
        };
        let report = run_batch(dataset, sources, &config)?;
        let stats = report.space.clone().expect("relational report has space stats");
        log::info!("{} k={:?} t={}: {}", point.label, point.space.k, point.space.t, fmt_opt(report.average));
        rows.push(SweepRow {
            label: point.label.clone(),
            transform: point.space.transform,
            k: point.space.k.unwrap_or(stats.n_r),
            t: point.space.t,
            n_c: stats.n_c,
            accuracy: report.average,
        });
        reports.push(report);
    }
    Ok(SweepReport {
        mode: base.mode,
        seed: base.seed,
        rows,
        reports,
    })
}
