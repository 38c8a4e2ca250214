//! The twenty builtin mapping problems and the JSON problem-file format.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attributional::{AttributionalError, PosTag};
use crate::problem::{MappingProblem, ProblemError};
use crate::term::{Term, TermError};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid problem file: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("problem {id}: bad term {term:?}: {source}")]
    Term {
        id: String,
        term: String,
        #[source]
        source: TermError,
    },
    #[error("problem {id}: {source}")]
    Tag {
        id: String,
        #[source]
        source: AttributionalError,
    },
    #[error("problem {id}: {what} refers to unknown term {term:?}")]
    UnknownTerm { id: String, what: &'static str, term: String },
    #[error("problem {id}: {what} is incomplete")]
    Incomplete { id: String, what: &'static str },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("duplicate problem id {0}")]
    DuplicateId(String),
}

/// On-disk form of one problem. Annotations are keyed by term surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnemonic: Option<String>,
    pub source: Vec<String>,
    pub target: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intended: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<BTreeMap<String, f64>>,
}

impl ProblemRecord {
    pub fn into_problem(self) -> Result<MappingProblem, DatasetError> {
        let id = self.id.clone();
        let parse = |s: &String| {
            Term::parse(s).map_err(|source| DatasetError::Term {
                id: id.clone(),
                term: s.clone(),
                source,
            })
        };
        let source: Vec<Term> = self.source.iter().map(parse).collect::<Result<_, _>>()?;
        let target: Vec<Term> = self.target.iter().map(parse).collect::<Result<_, _>>()?;
        let mut problem = MappingProblem::new(&id, source.clone(), target.clone())?;
        problem.mnemonic = self.mnemonic;

        // annotations are looked up through normalized terms
        let lookup = |what: &'static str, key: &str| -> Result<Term, DatasetError> {
            Term::parse(key).map_err(|_| DatasetError::UnknownTerm {
                id: id.clone(),
                what,
                term: key.to_string(),
            })
        };

        if let Some(pos) = &self.pos {
            let mut tags: HashMap<Term, PosTag> = HashMap::new();
            for (term, tag) in pos {
                let tag = PosTag::parse(tag).map_err(|source| DatasetError::Tag { id: id.clone(), source })?;
                tags.insert(lookup("pos", term)?, tag);
            }
            let side = |terms: &[Term]| -> Result<Vec<PosTag>, DatasetError> {
                terms
                    .iter()
                    .map(|t| {
                        tags.get(t).cloned().ok_or_else(|| DatasetError::Incomplete {
                            id: id.clone(),
                            what: "pos",
                        })
                    })
                    .collect()
            };
            problem = problem.with_tags(side(&source)?, side(&target)?)?;
        }

        if let Some(intended) = &self.intended {
            let mut perm = vec![usize::MAX; source.len()];
            for (a, b) in intended {
                let a = lookup("intended", a)?;
                let b_term = lookup("intended", b)?;
                let i = source.iter().position(|t| *t == a).ok_or_else(|| DatasetError::UnknownTerm {
                    id: id.clone(),
                    what: "intended",
                    term: a.surface().to_string(),
                })?;
                let j = target.iter().position(|t| *t == b_term).ok_or_else(|| DatasetError::UnknownTerm {
                    id: id.clone(),
                    what: "intended",
                    term: b.clone(),
                })?;
                perm[i] = j;
            }
            if perm.contains(&usize::MAX) {
                return Err(DatasetError::Incomplete {
                    id: id.clone(),
                    what: "intended",
                });
            }
            problem = problem.with_intended(perm)?;
        }

        if let Some(agreement) = &self.agreement {
            let mut values = vec![f64::NAN; source.len()];
            for (a, pct) in agreement {
                let a = lookup("agreement", a)?;
                let i = source.iter().position(|t| *t == a).ok_or_else(|| DatasetError::UnknownTerm {
                    id: id.clone(),
                    what: "agreement",
                    term: a.surface().to_string(),
                })?;
                values[i] = *pct;
            }
            if values.iter().any(|v| v.is_nan()) {
                return Err(DatasetError::Incomplete {
                    id: id.clone(),
                    what: "agreement",
                });
            }
            problem.agreement = Some(values);
            problem.validate()?;
        }
        Ok(problem)
    }

    pub fn from_problem(problem: &MappingProblem) -> ProblemRecord {
        let surface = |t: &Term| t.surface().to_string();
        let pos = match (&problem.source_tags, &problem.target_tags) {
            (Some(s), Some(t)) => Some(
                problem
                    .source
                    .iter()
                    .zip(s)
                    .chain(problem.target.iter().zip(t))
                    .map(|(term, tag)| (surface(term), tag.as_str().to_string()))
                    .collect(),
            ),
            _ => None,
        };
        ProblemRecord {
            id: problem.id.clone(),
            mnemonic: problem.mnemonic.clone(),
            source: problem.source.iter().map(surface).collect(),
            target: problem.target.iter().map(surface).collect(),
            pos,
            intended: problem.intended.as_ref().map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| (surface(&problem.source[i]), surface(&problem.target[j])))
                    .collect()
            }),
            agreement: problem.agreement.as_ref().map(|values| {
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (surface(&problem.source[i]), v))
                    .collect()
            }),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProblemFile {
    Many(Vec<ProblemRecord>),
    One(ProblemRecord),
}

/// An ordered collection of validated problems with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    problems: Vec<MappingProblem>,
}

impl Dataset {
    pub fn new(problems: Vec<MappingProblem>) -> Result<Dataset, DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for p in &problems {
            p.validate()?;
            if !seen.insert(p.id.clone()) {
                return Err(DatasetError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Dataset { problems })
    }

    /// Reads a JSON file holding one problem object or an array of them.
    pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Dataset::from_json(&text).map_err(|e| match e {
            DatasetError::Json { source, .. } => DatasetError::Json {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Dataset, DatasetError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|source| DatasetError::Json {
            path: PathBuf::from("<string>"),
            source,
        })?;
        let records = match file {
            ProblemFile::Many(v) => v,
            ProblemFile::One(r) => vec![r],
        };
        Dataset::new(records.into_iter().map(ProblemRecord::into_problem).collect::<Result<_, _>>()?)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<ProblemRecord> = self.problems.iter().map(ProblemRecord::from_problem).collect();
        serde_json::to_string_pretty(&records).expect("records serialize")
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_json()).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn problems(&self) -> &[MappingProblem] {
        &self.problems
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&MappingProblem> {
        self.problems.iter().find(|p| p.id == id)
    }

    /// Keeps only the listed ids, in dataset order.
    pub fn select(&self, ids: &[&str]) -> Dataset {
        Dataset {
            problems: self.problems.iter().filter(|p| ids.contains(&p.id.as_str())).cloned().collect(),
        }
    }

    /// Mean over problems of the mean per-term agreement.
    pub fn mean_agreement(&self) -> Option<f64> {
        let values: Vec<f64> = self.problems.iter().map(MappingProblem::mean_agreement).collect::<Option<_>>()?;
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn into_problems(self) -> Vec<MappingProblem> {
        self.problems
    }

    /// The ten science analogies (A1–A10) and ten common metaphors (M1–M10),
    /// each listed in intended order: source `i` maps to target `i`.
    pub fn builtin() -> Dataset {
        let problems = BUILTIN
            .iter()
            .map(|(id, mnemonic, rows)| {
                let term = |s: &str| Term::parse(s).expect("builtin term");
                let tag = |s: &str| PosTag::parse(s).expect("builtin tag");
                let mut p = MappingProblem::new(
                    *id,
                    rows.iter().map(|r| term(r.0)).collect(),
                    rows.iter().map(|r| term(r.1)).collect(),
                )
                .expect("builtin problem")
                .with_tags(rows.iter().map(|r| tag(r.3)).collect(), rows.iter().map(|r| tag(r.3)).collect())
                .expect("builtin tags")
                .with_intended((0..rows.len()).collect())
                .expect("builtin mapping");
                p.agreement = Some(rows.iter().map(|r| r.2).collect());
                p.mnemonic = Some(mnemonic.to_string());
                p
            })
            .collect();
        Dataset::new(problems).expect("builtin dataset")
    }
}

/// Whether a problem id belongs to the science group (`A…`) or the
/// metaphor group (`M…`).
pub fn problem_group(id: &str) -> Option<&'static str> {
    match id.chars().next() {
        Some('A') => Some("science"),
        Some('M') => Some("metaphor"),
        _ => None,
    }
}

type Row = (&'static str, &'static str, f64, &'static str);

const BUILTIN: &[(&str, &str, &[Row])] = &[
    (
        "A1",
        "solar system → atom",
        &[
            ("solar system", "atom", 86.4, "NN"),
            ("sun", "nucleus", 100.0, "NN"),
            ("planet", "electron", 95.5, "NN"),
            ("mass", "charge", 86.4, "NN"),
            ("attracts", "attracts", 90.9, "VBZ"),
            ("revolves", "revolves", 95.5, "VBZ"),
            ("gravity", "electromagnetism", 81.8, "NN"),
        ],
    ),
    (
        "A2",
        "water flow → heat transfer",
        &[
            ("water", "heat", 86.4, "NN"),
            ("flows", "transfers", 95.5, "VBZ"),
            ("pressure", "temperature", 86.4, "NN"),
            ("water tower", "burner", 72.7, "NN"),
            ("bucket", "kettle", 72.7, "NN"),
            ("filling", "heating", 95.5, "VBG"),
            ("emptying", "cooling", 95.5, "VBG"),
            ("hydrodynamics", "thermodynamics", 90.9, "NN"),
        ],
    ),
    (
        "A3",
        "waves → sounds",
        &[
            ("waves", "sounds", 86.4, "NNS"),
            ("shore", "wall", 77.3, "NN"),
            ("reflects", "echoes", 95.5, "VBZ"),
            ("water", "air", 95.5, "NN"),
            ("breakwater", "insulation", 81.8, "NN"),
            ("rough", "loud", 63.6, "JJ"),
            ("calm", "quiet", 100.0, "JJ"),
            ("crashing", "vibrating", 54.5, "VBG"),
        ],
    ),
    (
        "A4",
        "combustion → respiration",
        &[
            ("combustion", "respiration", 72.7, "NN"),
            ("fire", "animal", 95.5, "NN"),
            ("fuel", "food", 90.9, "NN"),
            ("burning", "breathing", 72.7, "VBG"),
            ("hot", "living", 59.1, "JJ"),
            ("intense", "vigorous", 77.3, "JJ"),
            ("oxygen", "oxygen", 77.3, "NN"),
            ("carbon dioxide", "carbon dioxide", 86.4, "NN"),
        ],
    ),
    (
        "A5",
        "sound → light",
        &[
            ("sound", "light", 86.4, "NN"),
            ("low", "red", 50.0, "JJ"),
            ("high", "violet", 54.5, "JJ"),
            ("echoes", "reflects", 100.0, "VBZ"),
            ("loud", "bright", 90.9, "JJ"),
            ("quiet", "dim", 77.3, "JJ"),
            ("horn", "lens", 95.5, "NN"),
        ],
    ),
    (
        "A6",
        "projectile → planet",
        &[
            ("projectile", "planet", 100.0, "NN"),
            ("trajectory", "orbit", 100.0, "NN"),
            ("earth", "sun", 100.0, "NN"),
            ("parabolic", "elliptical", 100.0, "JJ"),
            ("air", "space", 100.0, "NN"),
            ("gravity", "gravity", 90.9, "NN"),
            ("attracts", "attracts", 90.9, "VBZ"),
        ],
    ),
    (
        "A7",
        "artificial selection → natural selection",
        &[
            ("breeds", "species", 100.0, "NNS"),
            ("selection", "competition", 59.1, "NN"),
            ("conformance", "adaptation", 59.1, "NN"),
            ("artificial", "natural", 77.3, "JJ"),
            ("popularity", "fitness", 54.5, "NN"),
            ("breeding", "mating", 95.5, "VBG"),
            ("domesticated", "wild", 77.3, "JJ"),
        ],
    ),
    (
        "A8",
        "billiard balls → gas molecules",
        &[
            ("balls", "molecules", 90.9, "NNS"),
            ("billiards", "gas", 72.7, "NN"),
            ("speed", "temperature", 81.8, "NN"),
            ("table", "container", 95.5, "NN"),
            ("bouncing", "pressing", 77.3, "VBG"),
            ("moving", "moving", 86.4, "VBG"),
            ("slow", "cold", 100.0, "JJ"),
            ("fast", "hot", 100.0, "JJ"),
        ],
    ),
    (
        "A9",
        "computer → mind",
        &[
            ("computer", "mind", 90.9, "NN"),
            ("processing", "thinking", 95.5, "VBG"),
            ("erasing", "forgetting", 100.0, "VBG"),
            ("write", "memorize", 72.7, "VB"),
            ("read", "remember", 54.5, "VB"),
            ("memory", "memory", 81.8, "NN"),
            ("outputs", "muscles", 72.7, "NNS"),
            ("inputs", "senses", 90.9, "NNS"),
            ("bug", "mistake", 100.0, "NN"),
        ],
    ),
    (
        "A10",
        "slot machine → bacterial mutation",
        &[
            ("slot machines", "bacteria", 68.2, "NNS"),
            ("reels", "genes", 72.7, "NNS"),
            ("spinning", "mutating", 86.4, "VBG"),
            ("winning", "reproducing", 90.9, "VBG"),
            ("losing", "dying", 100.0, "VBG"),
        ],
    ),
    (
        "M1",
        "war → argument",
        &[
            ("war", "argument", 90.9, "NN"),
            ("soldier", "debater", 100.0, "NN"),
            ("destroy", "refute", 90.9, "VB"),
            ("fighting", "arguing", 95.5, "VBG"),
            ("defeat", "acceptance", 90.9, "NN"),
            ("attacks", "criticizes", 95.5, "VBZ"),
            ("weapon", "logic", 90.9, "NN"),
        ],
    ),
    (
        "M2",
        "buying an item → accepting a belief",
        &[
            ("buyer", "believer", 100.0, "NN"),
            ("merchandise", "belief", 90.9, "NN"),
            ("buying", "accepting", 95.5, "VBG"),
            ("selling", "advocating", 100.0, "VBG"),
            ("returning", "rejecting", 95.5, "VBG"),
            ("valuable", "true", 95.5, "JJ"),
            ("worthless", "false", 95.5, "JJ"),
        ],
    ),
    (
        "M3",
        "grounds for a building → reasons for a theory",
        &[
            ("foundations", "reasons", 72.7, "NNS"),
            ("buildings", "theories", 77.3, "NNS"),
            ("supporting", "confirming", 95.5, "VBG"),
            ("solid", "rational", 90.9, "JJ"),
            ("weak", "dubious", 95.5, "JJ"),
            ("crack", "flaw", 95.5, "NN"),
        ],
    ),
    (
        "M4",
        "impediments to travel → difficulties",
        &[
            ("obstructions", "difficulties", 100.0, "NNS"),
            ("destination", "goal", 100.0, "NN"),
            ("route", "plan", 100.0, "NN"),
            ("traveller", "person", 100.0, "NN"),
            ("travelling", "problem solving", 100.0, "VBG"),
            ("companion", "partner", 100.0, "NN"),
            ("arriving", "succeeding", 100.0, "VBG"),
        ],
    ),
    (
        "M5",
        "money → time",
        &[
            ("money", "time", 95.5, "NN"),
            ("allocate", "invest", 86.4, "VB"),
            ("budget", "schedule", 86.4, "NN"),
            ("effective", "efficient", 86.4, "JJ"),
            ("cheap", "quick", 50.0, "JJ"),
            ("expensive", "slow", 59.1, "JJ"),
        ],
    ),
    (
        "M6",
        "seeds → ideas",
        &[
            ("seeds", "ideas", 90.9, "NNS"),
            ("planted", "inspired", 95.5, "VBD"),
            ("fruitful", "productive", 81.8, "JJ"),
            ("fruit", "product", 95.5, "NN"),
            ("grow", "develop", 81.8, "VB"),
            ("wither", "fail", 100.0, "VB"),
            ("blossom", "succeed", 77.3, "VB"),
        ],
    ),
    (
        "M7",
        "machine → mind",
        &[
            ("machine", "mind", 95.5, "NN"),
            ("working", "thinking", 100.0, "VBG"),
            ("turned on", "awake", 100.0, "JJ"),
            ("turned off", "asleep", 100.0, "JJ"),
            ("broken", "confused", 100.0, "JJ"),
            ("power", "intelligence", 95.5, "NN"),
            ("repair", "therapy", 100.0, "NN"),
        ],
    ),
    (
        "M8",
        "object → idea",
        &[
            ("object", "idea", 90.9, "NN"),
            ("hold", "understand", 81.8, "VB"),
            ("weigh", "analyze", 81.8, "VB"),
            ("heavy", "important", 95.5, "JJ"),
            ("light", "trivial", 95.5, "JJ"),
        ],
    ),
    (
        "M9",
        "following → understanding",
        &[
            ("follow", "understand", 100.0, "VB"),
            ("leader", "speaker", 100.0, "NN"),
            ("path", "argument", 100.0, "NN"),
            ("follower", "listener", 100.0, "NN"),
            ("lost", "misunderstood", 86.4, "JJ"),
            ("wanders", "digresses", 90.9, "VBZ"),
            ("twisted", "complicated", 95.5, "JJ"),
            ("straight", "simple", 100.0, "JJ"),
        ],
    ),
    (
        "M10",
        "seeing → understanding",
        &[
            ("seeing", "understanding", 68.2, "VBG"),
            ("light", "knowledge", 77.3, "NN"),
            ("illuminating", "explaining", 86.4, "VBG"),
            ("darkness", "confusion", 86.4, "NN"),
            ("view", "interpretation", 68.2, "NN"),
            ("hidden", "secret", 86.4, "JJ"),
        ],
    ),
];
