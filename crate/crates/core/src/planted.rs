//! Synthetic corpora with known analogies.
//!
//! Each planted problem has a source domain and a target domain of `m`
//! terms. Role pair `(i, j)` is expressed in both domains by the sentence
//! `f s_i c_ij s_j g`, where the connective `c_ij` is shared by every
//! problem and the context words `f`, `g` are random filler. Sentences are
//! separated by at least four filler words so no phrase window spans two of
//! them.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusIndex;
use crate::dataset::Dataset;
use crate::problem::MappingProblem;
use crate::term::{Term, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub problems: usize,
    pub m: usize,
    /// Sentences per linked role pair and domain.
    pub repeats: usize,
    /// Chance that an unordered role pair is expressed at all.
    pub link_probability: f64,
    /// Use one connective per unordered pair and mirror every sentence, so
    /// `x:y` and `y:x` rows receive identical patterns.
    pub symmetric: bool,
    /// Pad the corpus with filler up to about this many tokens.
    pub target_tokens: usize,
    pub filler_vocabulary: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            problems: 5,
            m: 5,
            repeats: 6,
            link_probability: 1.0,
            symmetric: false,
            target_tokens: 100_000,
            filler_vocabulary: 5_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub text: String,
    pub dataset: Dataset,
    /// `links[p]` lists the unordered role pairs expressed for problem `p`.
    pub links: Vec<Vec<(usize, usize)>>,
}

impl PlantedCorpus {
    pub fn index(&self) -> CorpusIndex {
        CorpusIndex::from_texts([("planted.txt", self.text.as_str())], Tokenizer::default())
    }

    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

fn source_word(p: usize, i: usize) -> String {
    format!("src{p}r{i}")
}

fn target_word(p: usize, i: usize) -> String {
    format!("tgt{p}r{i}")
}

fn connective(i: usize, j: usize) -> String {
    format!("rel{i}to{j}")
}

pub fn generate(config: &PlantedConfig) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filler: Vec<String> = (0..config.filler_vocabulary.max(1)).map(|n| format!("w{n}")).collect();
    let mut sentences: Vec<Vec<String>> = Vec::new();
    let mut problems = Vec::new();
    let mut links = Vec::new();

    for p in 0..config.problems {
        let mut linked = Vec::new();
        for i in 0..config.m {
            for j in i + 1..config.m {
                if rng.random_bool(config.link_probability.clamp(0.0, 1.0)) {
                    linked.push((i, j));
                }
            }
        }
        for &(i, j) in &linked {
            let orders = [(i, j), (j, i)];
            for _ in 0..config.repeats {
                for word in [source_word as fn(usize, usize) -> String, target_word] {
                    let pre = filler.choose(&mut rng).unwrap().clone();
                    let post = filler.choose(&mut rng).unwrap().clone();
                    for &(a, b) in &orders {
                        let c = if config.symmetric { connective(i, j) } else { connective(a, b) };
                        sentences.push(vec![pre.clone(), word(p, a), c, word(p, b), post.clone()]);
                    }
                }
            }
        }
        links.push(linked);

        // list the targets in a shuffled order so identity is not the answer
        let mut order: Vec<usize> = (0..config.m).collect();
        order.shuffle(&mut rng);
        let source: Vec<Term> = (0..config.m).map(|i| Term::parse(&source_word(p, i)).unwrap()).collect();
        let target: Vec<Term> = order.iter().map(|&i| Term::parse(&target_word(p, i)).unwrap()).collect();
        let mut intended = vec![0; config.m];
        for (pos, &role) in order.iter().enumerate() {
            intended[role] = pos;
        }
        let problem = MappingProblem::new(format!("P{}", p + 1), source, target)
            .and_then(|q| q.with_intended(intended))
            .expect("planted problem is valid");
        problems.push(problem);
    }

    sentences.shuffle(&mut rng);
    let mut tokens: Vec<String> = Vec::new();
    let gap = |rng: &mut ChaCha8Rng, tokens: &mut Vec<String>, n: usize| {
        for _ in 0..n {
            tokens.push(filler.choose(rng).unwrap().clone());
        }
    };
    for sentence in sentences {
        let n = rng.random_range(4..=8);
        gap(&mut rng, &mut tokens, n);
        tokens.extend(sentence);
    }
    let pad = config.target_tokens.saturating_sub(tokens.len() + 4);
    gap(&mut rng, &mut tokens, 4 + pad);

    let mut text = String::with_capacity(tokens.len() * 6);
    for (n, t) in tokens.iter().enumerate() {
        text.push_str(t);
        text.push(if n % 20 == 19 { '\n' } else { ' ' });
    }
    PlantedCorpus {
        text,
        dataset: Dataset::new(problems).expect("unique planted ids"),
        links,
    }
}
