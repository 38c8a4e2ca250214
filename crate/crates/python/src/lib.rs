//! Python bindings for the `lrme` crate.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use lrme::attributional::{PosSimilarity, PosTag};
use lrme::evaluation::{self, EvalConfig, Sources};
use lrme::pipeline::{Harvest, SpaceStats};
use lrme::{solver, CorpusIndex, Mapping, MappingProblem, Mode, SolveOptions, SpaceConfig, Term, TermPair, Tokenizer};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn term(s: &str) -> PyResult<Term> {
    Term::parse(s).map_err(err)
}

fn pair(x: &str, y: &str) -> PyResult<TermPair> {
    TermPair::new(term(x)?, term(y)?).map_err(err)
}

/// A mapping problem: two equal-length term lists.
#[pyclass(name = "Problem", module = "pylrme", frozen, from_py_object)]
#[derive(Clone)]
struct PyProblem(MappingProblem);

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (id, source, target, intended=None))]
    fn new(id: String, source: Vec<String>, target: Vec<String>, intended: Option<Vec<usize>>) -> PyResult<Self> {
        let source: Vec<&str> = source.iter().map(String::as_str).collect();
        let target: Vec<&str> = target.iter().map(String::as_str).collect();
        let mut problem = MappingProblem::from_strs(&id, &source, &target).map_err(err)?;
        if let Some(intended) = intended {
            problem = problem.with_intended(intended).map_err(err)?;
        }
        Ok(PyProblem(problem))
    }

    #[getter]
    fn id(&self) -> &str {
        &self.0.id
    }

    #[getter]
    fn source(&self) -> Vec<String> {
        self.0.source.iter().map(Term::to_string).collect()
    }

    #[getter]
    fn target(&self) -> Vec<String> {
        self.0.target.iter().map(Term::to_string).collect()
    }

    #[getter]
    fn intended(&self) -> Option<Vec<usize>> {
        self.0.intended.clone()
    }

    fn __len__(&self) -> usize {
        self.0.m()
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, m={})", self.0.id, self.0.m())
    }
}

/// A set of problems with unique ids.
#[pyclass(name = "Dataset", module = "pylrme", frozen)]
struct PyDataset(lrme::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn builtin() -> Self {
        PyDataset(lrme::Dataset::builtin())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        lrme::Dataset::load(&path).map(PyDataset).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        lrme::Dataset::from_json(text).map(PyDataset).map_err(err)
    }

    #[staticmethod]
    fn from_problems(problems: Vec<PyProblem>) -> PyResult<Self> {
        lrme::Dataset::new(problems.into_iter().map(|p| p.0).collect())
            .map(PyDataset)
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn problems(&self) -> Vec<PyProblem> {
        self.0.problems().iter().cloned().map(PyProblem).collect()
    }

    fn get(&self, id: &str) -> PyResult<PyProblem> {
        self.0
            .get(id)
            .cloned()
            .map(PyProblem)
            .ok_or_else(|| PyKeyError::new_err(id.to_string()))
    }

    fn mean_agreement(&self) -> Option<f64> {
        self.0.mean_agreement()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// A tokenized, indexed corpus.
#[pyclass(name = "Corpus", module = "pylrme", frozen)]
struct PyCorpus(CorpusIndex);

#[pymethods]
impl PyCorpus {
    /// Index in-memory documents, one string each.
    #[staticmethod]
    fn from_texts(texts: Vec<String>) -> Self {
        let docs = texts.iter().enumerate().map(|(i, t)| (format!("doc{i}"), t));
        PyCorpus(CorpusIndex::from_texts(docs, Tokenizer::default()))
    }

    /// Index every `.txt` file under `path`.
    #[staticmethod]
    fn from_dir(path: PathBuf) -> PyResult<Self> {
        CorpusIndex::ingest_dir(&path, Tokenizer::default())
            .map(PyCorpus)
            .map_err(err)
    }

    #[getter]
    fn total_tokens(&self) -> usize {
        self.0.total_tokens()
    }

    #[getter]
    fn digest(&self) -> &str {
        self.0.digest()
    }
}

fn space_config(k: Option<usize>, t: usize, transform: &str) -> PyResult<SpaceConfig> {
    Ok(SpaceConfig {
        t,
        k,
        transform: transform.parse().map_err(err)?,
    })
}

/// Relation space built from a corpus for a set of problems.
#[pyclass(name = "RelationSpace", module = "pylrme", frozen)]
struct PySpace {
    space: lrme::RelationSpace,
    stats: SpaceStats,
}

#[pymethods]
impl PySpace {
    /// `k=None` skips SVD smoothing.
    #[staticmethod]
    #[pyo3(signature = (corpus, problems, k=Some(300), t=20, transform="ppmic"))]
    fn build(corpus: &PyCorpus, problems: Vec<PyProblem>, k: Option<usize>, t: usize, transform: &str) -> PyResult<Self> {
        let problems: Vec<MappingProblem> = problems.into_iter().map(|p| p.0).collect();
        let (space, stats) =
            lrme::pipeline::build_space(&corpus.0, &problems, &space_config(k, t, transform)?).map_err(err)?;
        Ok(PySpace { space, stats })
    }

    /// Cosine between the rows of `a:b` and `c:d`; 0 when either is absent.
    fn sim_r(&self, a: &str, b: &str, c: &str, d: &str) -> PyResult<f64> {
        Ok(self.space.sim_r(&pair(a, b)?, &pair(c, d)?))
    }

    fn __len__(&self) -> usize {
        self.space.len()
    }

    #[getter]
    fn n_columns(&self) -> usize {
        self.stats.n_c
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.space.save(&path).map_err(err)
    }
}

/// Best mapping by relational similarity: `(perm, score, tie_count)`.
#[pyfunction]
#[pyo3(signature = (space, problem, seed=0))]
fn solve_relational(space: &PySpace, problem: &PyProblem, seed: u64) -> PyResult<(Vec<usize>, f64, usize)> {
    let table = solver::ScoreTable::relational(&space.space, &problem.0);
    let result = solver::solve(&table, &SolveOptions::seeded(seed)).map_err(err)?;
    Ok((result.mapping.perm, result.score, result.tie_count))
}

/// Best mapping by part-of-speech agreement alone, using `tags` (term → tag).
#[pyfunction]
#[pyo3(signature = (problem, tags, seed=0))]
fn solve_pos(problem: &PyProblem, tags: HashMap<String, String>, seed: u64) -> PyResult<(Vec<usize>, f64, usize)> {
    let tags = tags
        .iter()
        .map(|(t, tag)| Ok((term(t)?, PosTag::parse(tag).map_err(err)?)))
        .collect::<PyResult<HashMap<_, _>>>()?;
    let provider = PosSimilarity::new(tags);
    let table = solver::ScoreTable::attributional(&provider, &problem.0);
    let result = solver::solve(&table, &SolveOptions::seeded(seed)).map_err(err)?;
    Ok((result.mapping.perm, result.score, result.tie_count))
}

/// Percent of source terms mapped as intended.
#[pyfunction]
fn accuracy(predicted: Vec<usize>, intended: Vec<usize>) -> PyResult<f64> {
    let p = Mapping::new("p", predicted).map_err(err)?;
    let i = Mapping::new("p", intended).map_err(err)?;
    evaluation::accuracy(&p, &i).map_err(err)
}

/// Relational evaluation over a dataset. Returns the report as TSV and the
/// average accuracy.
#[pyfunction]
#[pyo3(signature = (dataset, corpus, k=Some(300), t=20, transform="ppmic", seed=0))]
fn evaluate(
    dataset: &PyDataset,
    corpus: &PyCorpus,
    k: Option<usize>,
    t: usize,
    transform: &str,
    seed: u64,
) -> PyResult<(String, Option<f64>)> {
    let harvest = Harvest::new(&corpus.0, dataset.0.problems(), None).map_err(err)?;
    let config = EvalConfig {
        mode: Mode::Relational,
        space: space_config(k, t, transform)?,
        seed,
        ..EvalConfig::default()
    };
    let report = evaluation::run_batch(&dataset.0, &Sources::relational(&harvest), &config).map_err(err)?;
    Ok((report.to_tsv(), report.average))
}

#[pymodule]
fn pylrme(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PySpace>()?;
    m.add_function(wrap_pyfunction!(solve_relational, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pos, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
