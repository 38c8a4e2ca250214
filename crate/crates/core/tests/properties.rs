use std::collections::HashSet;

use lrme::attributional::{combine_with_pos, ExternalSimilarity, PosSimilarity, SimilarityProvider};
use lrme::dataset::Dataset;
use lrme::evaluation::{self, EvalConfig, Mode, Scorer, Sources};
use lrme::pipeline::{build_space, Harvest, SpaceConfig};
use lrme::planted::{self, PlantedConfig};
use lrme::solver::{self, evaluate_proportional, score_relational, ScoreTable, SolveOptions};
use lrme::space::{RelationSpace, Transform};
use lrme::{CorpusIndex, Mapping, MappingProblem, Term, TermPair, Tokenizer};
use proptest::prelude::*;

fn term(s: &str) -> Term {
    Term::parse(s).unwrap()
}

fn pair(x: &str, y: &str) -> TermPair {
    TermPair::new(term(x), term(y)).unwrap()
}

fn small_planted(symmetric: bool) -> planted::PlantedCorpus {
    planted::generate(&PlantedConfig {
        problems: 2,
        m: 4,
        repeats: 3,
        symmetric,
        target_tokens: 5_000,
        seed: 21,
        ..PlantedConfig::default()
    })
}

#[test]
fn mirrored_phrases_give_symmetric_similarity() {
    let corpus = small_planted(true);
    let index = corpus.index();
    for k in [None, Some(10)] {
        let config = SpaceConfig { k, ..SpaceConfig::default() };
        let (space, _) = build_space(&index, corpus.dataset.problems(), &config).unwrap();
        for p in corpus.dataset.problems() {
            let terms: Vec<&Term> = p.source.iter().chain(&p.target).collect();
            for a in &terms {
                for b in &terms {
                    for c in &terms {
                        for d in &terms {
                            if a == b || c == d {
                                continue;
                            }
                            let fwd = TermPair::new((*a).clone(), (*b).clone()).unwrap();
                            let other = TermPair::new((*c).clone(), (*d).clone()).unwrap();
                            let s1 = space.sim_r(&fwd, &other);
                            let s2 = space.sim_r(&fwd.reversed(), &other.reversed());
                            assert!((s1 - s2).abs() < 1e-9, "{fwd} {other}: {s1} vs {s2}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn analogous_pairs_beat_non_analogous_pairs() {
    let corpus = small_planted(false);
    let index = corpus.index();
    let (space, _) = build_space(&index, corpus.dataset.problems(), &SpaceConfig::default()).unwrap();
    let p = &corpus.dataset.problems()[0];
    let intended = p.intended.clone().unwrap();
    let (a0, a1) = (&p.source[0], &p.source[1]);
    let good = evaluate_proportional(&space, a0, a1, &p.target[intended[0]], &p.target[intended[1]]);
    let bad = evaluate_proportional(&space, a0, a1, &p.target[intended[1]], &p.target[intended[0]]);
    assert!(good > bad && good > 0.01, "{good} vs {bad}");
    assert!((evaluate_proportional(&space, a0, a1, a0, a1) - 1.0).abs() < 1e-9);
    assert_eq!(evaluate_proportional(&space, a0, a1, &term("unseen"), &term("terms")), 0.0);
}

#[test]
fn relational_score_matches_table_and_two_term_case() {
    let corpus = small_planted(false);
    let index = corpus.index();
    let (space, _) = build_space(&index, corpus.dataset.problems(), &SpaceConfig::default()).unwrap();
    let p = &corpus.dataset.problems()[1];
    let table = ScoreTable::relational(&space, p);
    for perm in solver::enumerate_mappings(p.m(), 10).unwrap() {
        let mapping = Mapping::new(p.id.clone(), perm.clone()).unwrap();
        let direct = score_relational(&space, p, &mapping);
        assert!((direct - table.score(&perm)).abs() < 1e-12);
        assert_eq!(table.contributions(&perm).len(), p.m() * (p.m() - 1) / 2);
    }

    let two = MappingProblem::new("two", p.source[..2].to_vec(), p.target[..2].to_vec()).unwrap();
    let identity = Mapping::new("two", vec![0, 1]).unwrap();
    let expected = evaluate_proportional(&space, &two.source[0], &two.source[1], &two.target[0], &two.target[1]);
    assert_eq!(score_relational(&space, &two, &identity), expected);
}

#[test]
fn unsmoothed_space_matches_cosines_of_transformed_rows() {
    let corpus = small_planted(false);
    let index = corpus.index();
    let harvest = Harvest::new(&index, corpus.dataset.problems(), None).unwrap();
    let rows = harvest.retained_rows();
    let cols = lrme::patterns::select_columns(harvest.stats(), 20, rows.len()).unwrap();
    let f = lrme::patterns::build_frequency_matrix(&rows, &cols, harvest.stats()).unwrap().values;
    let x = Transform::Ppmic.apply(&f).unwrap();
    let dense = x.to_dense();
    let (space, stats) = harvest
        .build_space(&SpaceConfig { k: None, ..SpaceConfig::default() })
        .unwrap();
    assert_eq!(stats.k, stats.n_r);
    let cosine = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    for i in (0..rows.len()).step_by(3) {
        for j in (0..rows.len()).step_by(5) {
            let expected = cosine(&dense[i], &dense[j]);
            assert!((space.sim_r(&rows[i], &rows[j]) - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn space_survives_save_and_load() {
    let corpus = small_planted(false);
    let (space, _) = build_space(&corpus.index(), corpus.dataset.problems(), &SpaceConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("space.json");
    space.save(&path).unwrap();
    let back = RelationSpace::load(&path).unwrap();
    for p in space.rows().iter().take(20) {
        for q in space.rows().iter().take(20) {
            assert!((space.sim_r(p, q) - back.sim_r(p, q)).abs() <= 1e-12);
        }
    }
}

#[test]
fn doubling_the_corpus_doubles_counts() {
    let text = "the sun attracts the planet and the planet orbits the sun";
    let once = CorpusIndex::from_texts([("a", text)], Tokenizer::default());
    let twice = CorpusIndex::from_texts([("a", text), ("b", text)], Tokenizer::default());
    let p = pair("sun", "planet");
    assert_eq!(twice.search_phrases(&p).len(), 2 * once.search_phrases(&p).len());
    let (a1, b1, ab1) = once.cooccurrence_counts(&term("sun"), &term("planet"), 10);
    let (a2, b2, ab2) = twice.cooccurrence_counts(&term("sun"), &term("planet"), 10);
    assert_eq!((a2, b2, ab2), (2 * a1, 2 * b1, 2 * ab1));
}

#[test]
fn order_duality_covers_both_orders() {
    let index = CorpusIndex::from_texts([("d", "x a y b y c x")], Tokenizer::default());
    let forward = index.search_phrases(&pair("x", "y"));
    let backward = index.search_phrases(&pair("y", "x"));
    let starts: HashSet<(usize, usize)> = forward
        .iter()
        .map(|p| (p.start + p.x_span.start, p.start + p.y_span.start))
        .chain(backward.iter().map(|p| (p.start + p.y_span.start, p.start + p.x_span.start)))
        .collect();
    // x@0 y@2, x@0 y@4, x@6 after y@2 (mid 3), x@6 after y@4 (mid 1)
    assert_eq!(starts, HashSet::from([(0, 2), (0, 4), (6, 2), (6, 4)]));
}

#[test]
fn empty_corpus_accuracy_is_chance() {
    let d = Dataset::builtin().select(&["A10", "M3", "M8"]);
    let index = CorpusIndex::empty(Tokenizer::default());
    let (space, _) = build_space(&index, d.problems(), &SpaceConfig::default()).unwrap();
    let scorer = Scorer::from_space(space);
    let trials = 1000;
    let mut total = 0.0;
    for seed in 0..trials {
        for p in d.problems() {
            let result = scorer.solve(p, &SolveOptions::seeded(seed)).unwrap();
            total += evaluation::accuracy(&result.mapping, &p.intended_mapping().unwrap()).unwrap();
        }
    }
    let observed = total / (trials as f64 * 3.0);
    // a uniform random bijection has one fixed point on average
    let expected = (100.0 / 5.0 + 100.0 / 6.0 + 100.0 / 5.0) / 3.0;
    assert!((observed - expected).abs() < 2.0, "{observed} vs {expected}");
}

#[test]
fn pos_attributional_keeps_tags_together() {
    let d = Dataset::builtin().select(&["A1"]);
    let p = &d.problems()[0];
    let tags = p
        .source
        .iter()
        .zip(p.source_tags.clone().unwrap())
        .chain(p.target.iter().zip(p.target_tags.clone().unwrap()))
        .map(|(t, g)| (t.clone(), g))
        .collect();
    let pos = PosSimilarity::new(tags);
    let report = evaluation::run_batch(
        &d,
        &Sources::attributional(&pos),
        &EvalConfig { mode: Mode::Attributional, seed: 7, ..EvalConfig::default() },
    )
    .unwrap();
    let perm = report.rows[0].mapping.clone().unwrap();
    let (s, t) = (p.source_tags.as_ref().unwrap(), p.target_tags.as_ref().unwrap());
    for (i, &j) in perm.iter().enumerate() {
        assert_eq!(s[i], t[j]);
    }
    // identical terms score 100 and always map to themselves
    assert_eq!(perm[4], 4);
    assert_eq!(perm[5], 5);

    let base = ExternalSimilarity::from_entries("ext", [(term("sun"), term("nucleus"), 2.5)]);
    let combined = combine_with_pos(base, pos);
    assert_eq!(combined.similarity(&term("sun"), &term("nucleus")), 12.5);
    assert_eq!(combined.similarity(&term("nucleus"), &term("sun")), 12.5);
}

#[test]
fn hybrid_modes_run_on_planted_data() {
    let corpus = small_planted(false);
    let index = corpus.index();
    let harvest = Harvest::new(&index, corpus.dataset.problems(), None).unwrap();
    let zero = lrme::attributional::ZeroSimilarity;
    for mode in [Mode::HybridAdd, Mode::HybridMul] {
        let sources = Sources { harvest: Some(&harvest), provider: Some(&zero) };
        let report = evaluation::run_batch(&corpus.dataset, &sources, &EvalConfig { mode, ..EvalConfig::default() }).unwrap();
        assert_eq!(report.average, Some(100.0), "{mode}");
    }
}

#[test]
fn sweep_rows_follow_the_grid() {
    let corpus = small_planted(false);
    let index = corpus.index();
    let harvest = Harvest::new(&index, corpus.dataset.problems(), None).unwrap();
    let sources = Sources::relational(&harvest);
    let base = EvalConfig::default();
    let ks = evaluation::sensitivity_sweep(&corpus.dataset, &sources, &base, &evaluation::vary_k((50..=400).step_by(50))).unwrap();
    assert_eq!(ks.rows.len(), 8);
    let ts = evaluation::sensitivity_sweep(&corpus.dataset, &sources, &base, &evaluation::vary_t((5..=40).step_by(5))).unwrap();
    let n_r = ts.reports[0].space.as_ref().unwrap().n_r;
    for row in &ts.rows {
        assert!(row.n_c <= row.t * n_r);
    }
    let no_svd = evaluation::sensitivity_sweep(&corpus.dataset, &sources, &base, &[evaluation::no_svd_point()]).unwrap();
    assert_eq!(no_svd.rows[0].k, n_r);
    assert_eq!(evaluation::full_grid().len(), 1 + 8 + 8 + 2);
}

#[test]
fn degenerate_coherence_matches_exactly() {
    let corpus = small_planted(false);
    let index = corpus.index();
    let harvest = Harvest::new(&index, corpus.dataset.problems(), None).unwrap();
    let config = evaluation::CoherenceConfig { m_prime: 4, trials: 5, eval: EvalConfig::default() };
    let report = evaluation::coherence_experiment(&corpus.dataset, &Sources::relational(&harvest), &config).unwrap();
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        assert_eq!(row.internal_accuracy, row.total_accuracy);
    }
    let too_big = evaluation::CoherenceConfig { m_prime: 5, ..config };
    let report = evaluation::coherence_experiment(&corpus.dataset, &Sources::relational(&harvest), &too_big).unwrap();
    assert!(report.rows.is_empty());
    assert_eq!(report.skipped.len(), 2);
}

fn table_strategy() -> impl Strategy<Value = (usize, Vec<i32>)> {
    (2usize..=5).prop_flat_map(|m| (Just(m), proptest::collection::vec(-8i32..8, m * m * m * m)))
}

fn argmax_set(table: &ScoreTable) -> HashSet<Vec<usize>> {
    let perms: Vec<Vec<usize>> = solver::enumerate_mappings(table.m(), 10).unwrap().collect();
    let best = perms.iter().map(|p| table.score(p)).fold(f64::NEG_INFINITY, f64::max);
    perms.into_iter().filter(|p| table.score(p) >= best - 1e-12).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_is_scale_invariant((m, values) in table_strategy(), scale in 1u32..5) {
        let at = |i: usize, j: usize, k: usize, l: usize| values[((i * m + j) * m + k) * m + l] as f64;
        let c = f64::from(1u32 << scale);
        let plain = ScoreTable::from_pairwise("p", m, at);
        let scaled = ScoreTable::from_pairwise("p", m, |i, j, k, l| c * at(i, j, k, l));
        prop_assert_eq!(argmax_set(&plain), argmax_set(&scaled));
    }

    #[test]
    fn seeds_choose_within_the_tied_set((m, values) in table_strategy(), seed in 0u64..1000) {
        let at = |i: usize, j: usize, k: usize, l: usize| (values[((i * m + j) * m + k) * m + l] / 4) as f64;
        let table = ScoreTable::from_pairwise("p", m, at);
        let a = solver::solve(&table, &SolveOptions::seeded(seed)).unwrap();
        let b = solver::solve(&table, &SolveOptions::seeded(seed)).unwrap();
        prop_assert_eq!(&a.mapping, &b.mapping);
        let tied = argmax_set(&table);
        prop_assert!(tied.contains(&a.mapping.perm));
        prop_assert_eq!(a.tie_count, tied.len());
        let sum: f64 = a.breakdown.iter().map(|c| c.value).sum();
        prop_assert!((sum - a.score).abs() < 1e-9);
    }

    #[test]
    fn accuracy_ignores_consistent_reordering(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
                                              order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let intended = Mapping::new("p", (0..6).collect()).unwrap();
        let predicted = Mapping::new("p", perm.clone()).unwrap();
        let before = evaluation::accuracy(&predicted, &intended).unwrap();
        // relist the source terms in `order`
        let reordered_pred = Mapping::new("p", order.iter().map(|&i| perm[i]).collect()).unwrap();
        let reordered_int = Mapping::new("p", order.clone()).unwrap();
        let after = evaluation::accuracy(&reordered_pred, &reordered_int).unwrap();
        prop_assert_eq!(before, after);
        prop_assert!((before - 100.0 * 5.0 / 6.0).abs() > 1e-9);
    }
}
