//! Exhaustive search over bijections `A → B`, with relational,
//! attributional, hybrid and coherence-constrained objectives.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributional::SimilarityProvider;
use crate::problem::{Mapping, MappingProblem};
use crate::space::RelationSpace;
use crate::term::{Term, TermPair};

/// Largest problem solved by default (10! ≈ 3.6 million mappings).
pub const DEFAULT_MAX_M: usize = 10;

/// Scores within this distance of the best are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("m = {m} needs {permutations} mappings, over the budget of m <= {max_m}")]
    BudgetExceeded { m: usize, permutations: u128, max_m: usize },
    #[error("score tables disagree: {0}")]
    Shape(String),
    #[error("invalid constraint: {0}")]
    Constraint(String),
}

pub fn factorial(m: usize) -> u128 {
    (1..=m as u128).product()
}

/// Permutations of `0..m` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut p = current.clone();
        // standard next-permutation step
        if let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) {
            let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
            p.swap(i - 1, j);
            p[i..].reverse();
            self.next = Some(p);
        }
        Some(current)
    }
}

/// All `m!` permutations, refusing when `m > max_m`.
pub fn enumerate_mappings(m: usize, max_m: usize) -> Result<Permutations, SolveError> {
    if m > max_m {
        return Err(SolveError::BudgetExceeded {
            m,
            permutations: factorial(m),
            max_m,
        });
    }
    Ok(Permutations {
        next: Some((0..m).collect()),
    })
}

/// One addend of a mapping score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub label: String,
    pub value: f64,
}

/// Precomputed similarities for one problem.
///
/// `unary[i][j]` scores source `i` mapped to target `j`; `pairwise` scores
/// source pair `(i, j)`, `i < j`, mapped to target pair `(k, l)`. A mapping's
/// score is the sum of its unary terms followed by its pairwise terms in
/// `(i, j)` order.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    problem_id: String,
    mode: String,
    m: usize,
    source: Vec<String>,
    target: Vec<String>,
    unary: Option<Vec<f64>>,
    pairwise: Option<Vec<f64>>,
}

impl ScoreTable {
    fn labels(problem: &MappingProblem) -> (Vec<String>, Vec<String>) {
        (
            problem.source.iter().map(Term::key).collect(),
            problem.target.iter().map(Term::key).collect(),
        )
    }

    fn generic_labels(m: usize) -> (Vec<String>, Vec<String>) {
        (
            (0..m).map(|i| format!("a{i}")).collect(),
            (0..m).map(|i| format!("b{i}")).collect(),
        )
    }

    /// `sim_r(a_i:a_j, b_k:b_l)` for every source pair and target pair.
    pub fn relational(space: &RelationSpace, problem: &MappingProblem) -> ScoreTable {
        let (s, t) = (&problem.source, &problem.target);
        let mut table = ScoreTable::from_pairwise(&problem.id, problem.m(), |i, j, k, l| {
            let p = TermPair {
                x: s[i].clone(),
                y: s[j].clone(),
            };
            let q = TermPair {
                x: t[k].clone(),
                y: t[l].clone(),
            };
            space.sim_r(&p, &q)
        });
        (table.source, table.target) = ScoreTable::labels(problem);
        table
    }

    /// `sim_a(a_i, b_j)` for every source and target term.
    pub fn attributional(provider: &dyn SimilarityProvider, problem: &MappingProblem) -> ScoreTable {
        let mut table = ScoreTable::from_unary(&problem.id, problem.m(), |i, j| {
            provider.similarity(&problem.source[i], &problem.target[j])
        });
        (table.source, table.target) = ScoreTable::labels(problem);
        table
    }

    pub fn from_unary(problem_id: &str, m: usize, mut f: impl FnMut(usize, usize) -> f64) -> ScoreTable {
        let unary = (0..m * m).map(|c| f(c / m, c % m)).collect();
        let (source, target) = ScoreTable::generic_labels(m);
        ScoreTable {
            problem_id: problem_id.to_string(),
            mode: "attributional".into(),
            m,
            source,
            target,
            unary: Some(unary),
            pairwise: None,
        }
    }

    /// `f(i, j, k, l)` is only called for `i < j` and `k != l`.
    pub fn from_pairwise(problem_id: &str, m: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> ScoreTable {
        let mut pairwise = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..m {
                    for l in 0..m {
                        if k != l {
                            pairwise[((i * m + j) * m + k) * m + l] = f(i, j, k, l);
                        }
                    }
                }
            }
        }
        let (source, target) = ScoreTable::generic_labels(m);
        ScoreTable {
            problem_id: problem_id.to_string(),
            mode: "relational".into(),
            m,
            source,
            target,
            unary: None,
            pairwise: Some(pairwise),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn mode(&self) -> &str {
        &self.mode
    }

    pub fn with_mode(mut self, mode: impl Into<String>) -> ScoreTable {
        self.mode = mode.into();
        self
    }

    pub fn unary(&self, i: usize, j: usize) -> f64 {
        self.unary.as_ref().map_or(0.0, |u| u[i * self.m + j])
    }

    pub fn pairwise(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let m = self.m;
        self.pairwise.as_ref().map_or(0.0, |p| p[((i * m + j) * m + k) * m + l])
    }

    pub fn score(&self, perm: &[usize]) -> f64 {
        let m = self.m;
        let mut total = 0.0;
        if let Some(unary) = &self.unary {
            for (i, &j) in perm.iter().enumerate() {
                total += unary[i * m + j];
            }
        }
        if let Some(pairwise) = &self.pairwise {
            for i in 0..m {
                for j in i + 1..m {
                    total += pairwise[((i * m + j) * m + perm[i]) * m + perm[j]];
                }
            }
        }
        total
    }

    /// The addends of `score(perm)`, in summation order.
    pub fn contributions(&self, perm: &[usize]) -> Vec<Contribution> {
        let mut out = Vec::new();
        if self.unary.is_some() {
            for (i, &j) in perm.iter().enumerate() {
                out.push(Contribution {
                    label: format!("{} -> {}", self.source[i], self.target[j]),
                    value: self.unary(i, j),
                });
            }
        }
        if self.pairwise.is_some() {
            for i in 0..self.m {
                for j in i + 1..self.m {
                    out.push(Contribution {
                        label: format!(
                            "{}:{} -> {}:{}",
                            self.source[i], self.source[j], self.target[perm[i]], self.target[perm[j]]
                        ),
                        value: self.pairwise(i, j, perm[i], perm[j]),
                    });
                }
            }
        }
        out
    }

    /// The table of the subproblem on `sources × targets` (indices into this
    /// table, kept in the given order).
    pub fn restrict(&self, sources: &[usize], targets: &[usize]) -> ScoreTable {
        let n = sources.len();
        let unary = self.unary.as_ref().map(|_| {
            (0..n * n)
                .map(|c| self.unary(sources[c / n], targets[c % n]))
                .collect()
        });
        let pairwise = self.pairwise.as_ref().map(|_| {
            let mut p = vec![0.0; n * n * n * n];
            for i in 0..n {
                for j in i + 1..n {
                    for k in 0..n {
                        for l in 0..n {
                            if k != l {
                                p[((i * n + j) * n + k) * n + l] =
                                    self.pairwise(sources[i], sources[j], targets[k], targets[l]);
                            }
                        }
                    }
                }
            }
            p
        });
        ScoreTable {
            problem_id: self.problem_id.clone(),
            mode: self.mode.clone(),
            m: n,
            source: sources.iter().map(|&i| self.source[i].clone()).collect(),
            target: targets.iter().map(|&j| self.target[j].clone()).collect(),
            unary,
            pairwise,
        }
    }
}

/// `Σ_{i<j} sim_r(a_i:a_j, M(a_i):M(a_j))`
pub fn score_relational(space: &RelationSpace, problem: &MappingProblem, mapping: &Mapping) -> f64 {
    let m = problem.m();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let p = TermPair {
                x: problem.source[i].clone(),
                y: problem.source[j].clone(),
            };
            let q = TermPair {
                x: problem.target[mapping.perm[i]].clone(),
                y: problem.target[mapping.perm[j]].clone(),
            };
            total += space.sim_r(&p, &q);
        }
    }
    total
}

/// `Σ_i sim_a(a_i, M(a_i))`
pub fn score_attributional(provider: &dyn SimilarityProvider, problem: &MappingProblem, mapping: &Mapping) -> f64 {
    mapping
        .pairs(problem)
        .map(|(a, b)| provider.similarity(a, b))
        .sum()
}

/// Relational quality of the proportional analogy `a1:a2 :: b1:b2`.
pub fn evaluate_proportional(space: &RelationSpace, a1: &Term, a2: &Term, b1: &Term, b2: &Term) -> f64 {
    let p = TermPair {
        x: a1.clone(),
        y: a2.clone(),
    };
    let q = TermPair {
        x: b1.clone(),
        y: b2.clone(),
    };
    space.sim_r(&p, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Uniform choice among co-maximal mappings from the seeded generator.
    #[default]
    Random,
    /// The lexicographically first co-maximal mapping.
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub seed: u64,
    pub ties: TiePolicy,
    pub max_m: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            ties: TiePolicy::Random,
            max_m: DEFAULT_MAX_M,
        }
    }
}

impl SolveOptions {
    pub fn seeded(seed: u64) -> SolveOptions {
        SolveOptions {
            seed,
            ..SolveOptions::default()
        }
    }

    pub fn first_tie() -> SolveOptions {
        SolveOptions {
            ties: TiePolicy::First,
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub mode: String,
    pub seed: u64,
    /// Number of mappings scored.
    pub searched: u64,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub mapping: Mapping,
    pub score: f64,
    pub tie_count: usize,
    pub breakdown: Vec<Contribution>,
    pub diagnostics: SolveDiagnostics,
}

impl SolveResult {
    /// `source<TAB>target` lines followed by one JSON line of diagnostics.
    pub fn to_text(&self, problem: &MappingProblem) -> String {
        let mut out = String::new();
        for (a, b) in self.mapping.pairs(problem) {
            out.push_str(&format!("{}\t{}\n", a.surface(), b.surface()));
        }
        let diag = serde_json::json!({
            "problem": self.mapping.problem_id,
            "score": self.score,
            "tie_count": self.tie_count,
            "mode": self.diagnostics.mode,
            "seed": self.diagnostics.seed,
            "searched": self.diagnostics.searched,
        });
        out.push_str(&diag.to_string());
        out.push('\n');
        out
    }
}

struct Selection {
    perm: Vec<usize>,
    score: f64,
    tie_count: usize,
    searched: u64,
}

/// Scores every candidate, then picks among those within `TIE_TOLERANCE` of
/// the best according to the tie policy. Candidates must come in a fixed
/// order; `candidates` is called twice.
fn select<I, F>(candidates: impl Fn() -> I, score: F, opts: &SolveOptions) -> Selection
where
    I: Iterator<Item = Vec<usize>>,
    F: Fn(&[usize]) -> f64,
{
    let scores: Vec<f64> = candidates().map(|p| score(&p)).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= best - TIE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    let pick = match opts.ties {
        TiePolicy::First => tied[0],
        TiePolicy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            tied[rng.random_range(0..tied.len())]
        }
    };
    Selection {
        perm: candidates().nth(pick).expect("candidate index in range"),
        score: scores[pick],
        tie_count: tied.len(),
        searched: scores.len() as u64,
    }
}

/// Best mapping under `table`.
pub fn solve(table: &ScoreTable, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let m = table.m();
    enumerate_mappings(m, opts.max_m)?;
    let chosen = select(
        || enumerate_mappings(m, opts.max_m).expect("budget checked"),
        |p| table.score(p),
        opts,
    );
    Ok(SolveResult {
        mapping: Mapping {
            problem_id: table.problem_id().to_string(),
            perm: chosen.perm.clone(),
        },
        score: chosen.score,
        tie_count: chosen.tie_count,
        breakdown: table.contributions(&chosen.perm),
        diagnostics: SolveDiagnostics {
            mode: table.mode().to_string(),
            seed: opts.seed,
            searched: chosen.searched,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Add,
    Multiply,
}

/// Scores normalized to sum to one. Negative scores are first shifted up by
/// the minimum; an all-zero field becomes uniform.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let total: f64 = scores.iter().map(|s| s + shift).sum();
    if total > 0.0 {
        scores.iter().map(|s| (s + shift) / total).collect()
    } else {
        vec![1.0 / scores.len() as f64; scores.len()]
    }
}

/// `(prob_r, prob_a)` over all mappings, in lexicographic order.
pub fn hybrid_probabilities(
    relational: &ScoreTable,
    attributional: &ScoreTable,
    max_m: usize,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    if relational.m() != attributional.m() {
        return Err(SolveError::Shape(format!(
            "m = {} vs m = {}",
            relational.m(),
            attributional.m()
        )));
    }
    let perms: Vec<Vec<usize>> = enumerate_mappings(relational.m(), max_m)?.collect();
    let r: Vec<f64> = perms.iter().map(|p| relational.score(p)).collect();
    let a: Vec<f64> = perms.iter().map(|p| attributional.score(p)).collect();
    Ok((normalize_scores(&r), normalize_scores(&a)))
}

/// Best mapping under `prob_r + prob_a` or `prob_r × prob_a`.
pub fn solve_hybrid(
    relational: &ScoreTable,
    attributional: &ScoreTable,
    combine: Combine,
    opts: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let (prob_r, prob_a) = hybrid_probabilities(relational, attributional, opts.max_m)?;
    let combined: Vec<f64> = prob_r
        .iter()
        .zip(&prob_a)
        .map(|(r, a)| match combine {
            Combine::Add => r + a,
            Combine::Multiply => r * a,
        })
        .collect();
    let m = relational.m();
    let chosen = select(
        || (0..combined.len()).map(|i| vec![i]),
        |i| combined[i[0]],
        opts,
    );
    let index = chosen.perm[0];
    let perm = enumerate_mappings(m, opts.max_m)?.nth(index).expect("index in range");
    let breakdown = match combine {
        Combine::Add => vec![
            Contribution {
                label: "prob_r".into(),
                value: prob_r[index],
            },
            Contribution {
                label: "prob_a".into(),
                value: prob_a[index],
            },
        ],
        Combine::Multiply => vec![Contribution {
            label: "prob_r*prob_a".into(),
            value: prob_r[index] * prob_a[index],
        }],
    };
    Ok(SolveResult {
        mapping: Mapping {
            problem_id: relational.problem_id().to_string(),
            perm,
        },
        score: chosen.score,
        tie_count: chosen.tie_count,
        breakdown,
        diagnostics: SolveDiagnostics {
            mode: match combine {
                Combine::Add => "hybrid-add".into(),
                Combine::Multiply => "hybrid-mul".into(),
            },
            seed: opts.seed,
            searched: chosen.searched,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coherence {
    /// Search `P(A', B')` using only relations inside the subproblem.
    Internal,
    /// Search `{M ∈ P(A, B) : M(A') = B'}` with all relations.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedResult {
    /// Full mapping (total mode) or subproblem mapping (internal mode).
    pub result: SolveResult,
    /// `(source index, target index)` for each member of `A'`, in the
    /// indices of the full problem, sorted by source.
    pub sub_mapping: Vec<(usize, usize)>,
}

fn check_subset(indices: &[usize], m: usize, what: &str) -> Result<Vec<usize>, SolveError> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() {
        return Err(SolveError::Constraint(format!("{what} repeats an index")));
    }
    if sorted.last().is_some_and(|&i| i >= m) {
        return Err(SolveError::Constraint(format!("{what} index out of range for m = {m}")));
    }
    Ok(sorted)
}

/// Solves the subproblem `A' → B'` (setwise constraint `M(A') = B'`).
pub fn solve_constrained(
    table: &ScoreTable,
    sub_sources: &[usize],
    sub_targets: &[usize],
    mode: Coherence,
    opts: &SolveOptions,
) -> Result<ConstrainedResult, SolveError> {
    let m = table.m();
    if sub_sources.len() != sub_targets.len() {
        return Err(SolveError::Constraint(format!(
            "|A'| = {} but |B'| = {}",
            sub_sources.len(),
            sub_targets.len()
        )));
    }
    let sources = check_subset(sub_sources, m, "A'")?;
    let targets = check_subset(sub_targets, m, "B'")?;
    match mode {
        Coherence::Internal => {
            let sub = table.restrict(&sources, &targets);
            let mut result = solve(&sub, opts)?;
            result.diagnostics.mode = format!("{}/internal", table.mode());
            let sub_mapping = result
                .mapping
                .perm
                .iter()
                .enumerate()
                .map(|(i, &j)| (sources[i], targets[j]))
                .collect();
            Ok(ConstrainedResult { result, sub_mapping })
        }
        Coherence::Total => {
            let started = Instant::now();
            enumerate_mappings(m, opts.max_m)?;
            let in_targets = {
                let mut mask = vec![false; m];
                targets.iter().for_each(|&j| mask[j] = true);
                mask
            };
            let feasible = |p: &Vec<usize>| sources.iter().all(|&i| in_targets[p[i]]);
            let chosen = select(
                || enumerate_mappings(m, opts.max_m).expect("budget checked").filter(feasible),
                |p| table.score(p),
                opts,
            );
            let sub_mapping = sources.iter().map(|&i| (i, chosen.perm[i])).collect();
            Ok(ConstrainedResult {
                result: SolveResult {
                    mapping: Mapping {
                        problem_id: table.problem_id().to_string(),
                        perm: chosen.perm.clone(),
                    },
                    score: chosen.score,
                    tie_count: chosen.tie_count,
                    breakdown: table.contributions(&chosen.perm),
                    diagnostics: SolveDiagnostics {
                        mode: format!("{}/total", table.mode()),
                        seed: opts.seed,
                        searched: chosen.searched,
                        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
                    },
                },
                sub_mapping,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributional::ExternalSimilarity;

    fn brute_max(table: &ScoreTable) -> f64 {
        // recursive enumeration, independent of the iterator above
        fn go(table: &ScoreTable, perm: &mut Vec<usize>, used: &mut Vec<bool>, best: &mut f64) {
            let m = table.m();
            if perm.len() == m {
                let mut s: f64 = perm.iter().enumerate().map(|(i, &j)| table.unary(i, j)).sum();
                for i in 0..m {
                    for j in i + 1..m {
                        s += table.pairwise(i, j, perm[i], perm[j]);
                    }
                }
                *best = best.max(s);
                return;
            }
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    perm.push(j);
                    go(table, perm, used, best);
                    perm.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        go(table, &mut Vec::new(), &mut vec![false; table.m()], &mut best);
        best
    }

    #[test]
    fn enumeration_counts_and_order() {
        assert_eq!(enumerate_mappings(1, 10).unwrap().count(), 1);
        let three: Vec<_> = enumerate_mappings(3, 10).unwrap().collect();
        assert_eq!(
            three,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
        assert_eq!(enumerate_mappings(9, 10).unwrap().count(), 362_880);
        assert_eq!(
            enumerate_mappings(11, 10).unwrap_err(),
            SolveError::BudgetExceeded {
                m: 11,
                permutations: 39_916_800,
                max_m: 10
            }
        );
    }

    #[test]
    fn zero_field_is_a_total_tie() {
        let table = ScoreTable::from_pairwise("z", 4, |_, _, _, _| 0.0);
        let a = solve(&table, &SolveOptions::seeded(5)).unwrap();
        let b = solve(&table, &SolveOptions::seeded(5)).unwrap();
        assert_eq!(a.tie_count, 24);
        assert_eq!(a.score, 0.0);
        assert_eq!(a.mapping, b.mapping);
        let picks: std::collections::HashSet<_> = (0..40)
            .map(|seed| solve(&table, &SolveOptions::seeded(seed)).unwrap().mapping.perm)
            .collect();
        assert!(picks.len() > 1);
    }

    #[test]
    fn planted_unique_argmax() {
        let planted = [2, 0, 3, 1];
        let table = ScoreTable::from_unary("p", 4, |i, j| if planted[i] == j { 2.5 } else { 0.25 });
        let r = solve(&table, &SolveOptions::default()).unwrap();
        assert_eq!(r.mapping.perm, planted);
        assert_eq!(r.tie_count, 1);
        assert_eq!(r.score, 10.0);
        assert_eq!(brute_max(&table), 10.0);
        let sum: f64 = r.breakdown.iter().map(|c| c.value).sum();
        assert!((sum - r.score).abs() < 1e-9);
    }

    #[test]
    fn three_term_relational_sum() {
        // hand-built similarity for the six relevant entries
        let sims = |i: usize, j: usize, k: usize, l: usize| ((i * 7 + j * 5 + k * 3 + l) % 11) as f64 / 10.0;
        let table = ScoreTable::from_pairwise("r", 3, sims);
        for perm in enumerate_mappings(3, 10).unwrap() {
            let direct = sims(0, 1, perm[0], perm[1]) + sims(0, 2, perm[0], perm[2]) + sims(1, 2, perm[1], perm[2]);
            assert!((table.score(&perm) - direct).abs() < 1e-12);
            assert_eq!(table.contributions(&perm).len(), 3);
        }
    }

    #[test]
    fn attributional_identity() {
        let p = MappingProblem::from_strs("p", &["a", "b", "c"], &["a", "b", "c"]).unwrap();
        let provider = ExternalSimilarity::from_entries(
            "eq",
            p.source.iter().map(|t| (t.clone(), t.clone(), 1.0)),
        );
        let table = ScoreTable::attributional(&provider, &p);
        let r = solve(&table, &SolveOptions::default()).unwrap();
        assert_eq!(r.mapping.perm, vec![0, 1, 2]);
        assert_eq!(r.score, 3.0);
        assert_eq!(score_attributional(&provider, &p, &r.mapping), 3.0);
    }

    #[test]
    fn hybrid_two_by_two() {
        // mappings in order: identity, swap
        let rel = ScoreTable::from_pairwise("h", 2, |_, _, k, _| if k == 0 { 3.0 } else { 1.0 });
        let att = ScoreTable::from_unary("h", 2, |i, j| if i == j { 0.5 } else { 1.5 });
        let (pr, pa) = hybrid_probabilities(&rel, &att, 10).unwrap();
        assert_eq!(pr, vec![0.75, 0.25]);
        assert_eq!(pa, vec![0.25, 0.75]);
        let add = solve_hybrid(&rel, &att, Combine::Add, &SolveOptions::default()).unwrap();
        assert_eq!(add.tie_count, 2);
        assert!((add.score - 1.0).abs() < 1e-15);
        let mul = solve_hybrid(&rel, &att, Combine::Multiply, &SolveOptions::default()).unwrap();
        assert_eq!(mul.tie_count, 2);
        assert!((mul.score - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn normalization_shifts_and_falls_back() {
        assert_eq!(normalize_scores(&[-1.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(normalize_scores(&[0.0, 0.0, 0.0, 0.0]), vec![0.25; 4]);
        let p = normalize_scores(&[1.0, 2.0, 5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constrained_search_sizes() {
        let table = ScoreTable::from_pairwise("c", 5, |i, j, k, l| ((i + 2 * j + 3 * k + 5 * l) % 7) as f64);
        let total = solve_constrained(&table, &[0, 2, 4], &[1, 2, 3], Coherence::Total, &SolveOptions::default()).unwrap();
        assert_eq!(total.result.diagnostics.searched, 12);
        let internal =
            solve_constrained(&table, &[0, 2, 4], &[1, 2, 3], Coherence::Internal, &SolveOptions::default()).unwrap();
        assert_eq!(internal.result.diagnostics.searched, 6);
        for (i, j) in total.sub_mapping.iter().chain(&internal.sub_mapping) {
            assert!([0, 2, 4].contains(i) && [1, 2, 3].contains(j));
        }

        let all: Vec<usize> = (0..5).collect();
        let full = solve_constrained(&table, &all, &all, Coherence::Total, &SolveOptions::seeded(3)).unwrap();
        let plain = solve(&table, &SolveOptions::seeded(3)).unwrap();
        assert_eq!(full.result.mapping, plain.mapping);
        assert_eq!(full.result.score, plain.score);

        assert!(matches!(
            solve_constrained(&table, &[0, 1], &[0], Coherence::Total, &SolveOptions::default()),
            Err(SolveError::Constraint(_))
        ));
        assert!(matches!(
            solve_constrained(&table, &[0, 0], &[0, 1], Coherence::Internal, &SolveOptions::default()),
            Err(SolveError::Constraint(_))
        ));
    }

    #[test]
    fn over_budget_solve_is_refused() {
        let table = ScoreTable::from_unary("big", 11, |_, _| 0.0);
        assert!(matches!(solve(&table, &SolveOptions::default()), Err(SolveError::BudgetExceeded { .. })));
    }
}
