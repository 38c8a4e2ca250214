//! Plain-text corpus ingestion, the positional token index, and phrase
//! retrieval with the `[0..1] x [0..3] y [0..1]` window template.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::term::{Term, TermPair, Tokenizer};

/// Most context words allowed before the first term.
pub const MAX_PRE: usize = 1;
/// Most words allowed between the two terms.
pub const MAX_MID: usize = 3;
/// Most context words allowed after the second term.
pub const MAX_POST: usize = 1;

const CACHE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    NotUtf8 { path: PathBuf },
    #[error("corpus directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("bad index cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub offset: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Document {
    name: String,
    tokens: Vec<u32>,
}

/// Immutable positional index over a set of documents.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    tokenizer: Tokenizer,
    vocab: Vec<String>,
    lookup: HashMap<String, u32>,
    documents: Vec<Document>,
    postings: Vec<Vec<Posting>>,
    total_tokens: usize,
    digest: String,
}

/// One retrieved window: `pre` context words, the first term, `mid` words,
/// the second term, and `post` context words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhraseOccurrence {
    pub doc: u32,
    /// Offset of the window's first token in the document.
    pub start: usize,
    pub tokens: Vec<String>,
    /// Span of the first term, relative to `tokens`.
    pub x_span: Range<usize>,
    /// Span of the second term, relative to `tokens`.
    pub y_span: Range<usize>,
    pub pre: usize,
    pub mid: usize,
    pub post: usize,
}

impl PhraseOccurrence {
    /// Number of window words outside both term spans.
    pub fn free_words(&self) -> usize {
        self.pre + self.mid + self.post
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    tokenizer: Tokenizer,
    digest: String,
    vocab: Vec<String>,
    documents: Vec<Document>,
}

/// Collects `.txt` files under `dir`, recursively, in lexicographic path order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if !dir.is_dir() {
        return Err(CorpusError::MissingDir(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir) {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf()),
            source: e.into(),
        })?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|ext| ext == "txt") {
            files.push(path.to_path_buf());
        }
    }
    files.sort();
    Ok(files)
}

fn read_utf8(path: &Path) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|_| CorpusError::NotUtf8 {
        path: path.to_path_buf(),
    })
}

/// Content digest of a list of files, as used for the index cache key.
pub fn digest_files(paths: &[PathBuf]) -> Result<String, CorpusError> {
    let mut hasher = Sha256::new();
    for path in paths {
        let bytes = fs::read(path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

impl CorpusIndex {
    /// Reads and indexes every path; one file is one document.
    pub fn ingest(paths: &[PathBuf], tokenizer: Tokenizer) -> Result<CorpusIndex, CorpusError> {
        let mut texts = Vec::with_capacity(paths.len());
        for path in paths {
            texts.push((path.display().to_string(), read_utf8(path)?));
        }
        Ok(CorpusIndex::from_texts(texts, tokenizer))
    }

    pub fn ingest_dir(dir: &Path, tokenizer: Tokenizer) -> Result<CorpusIndex, CorpusError> {
        let files = corpus_files(dir)?;
        CorpusIndex::ingest(&files, tokenizer)
    }

    /// Builds an index from in-memory `(name, text)` documents.
    pub fn from_texts<I, N, T>(texts: I, tokenizer: Tokenizer) -> CorpusIndex
    where
        I: IntoIterator<Item = (N, T)>,
        N: Into<String>,
        T: AsRef<str>,
    {
        let mut hasher = Sha256::new();
        let mut vocab = Vec::new();
        let mut lookup: HashMap<String, u32> = HashMap::new();
        let mut documents = Vec::new();
        for (name, text) in texts {
            let text = text.as_ref();
            hasher.update((text.len() as u64).to_le_bytes());
            hasher.update(text.as_bytes());
            let tokens = tokenizer
                .tokenize(text)
                .into_iter()
                .map(|token| {
                    *lookup.entry(token).or_insert_with_key(|key| {
                        vocab.push(key.clone());
                        (vocab.len() - 1) as u32
                    })
                })
                .collect();
            documents.push(Document {
                name: name.into(),
                tokens,
            });
        }
        let digest = format!("{:x}", hasher.finalize());
        CorpusIndex::assemble(tokenizer, vocab, documents, digest)
    }

    fn assemble(
        tokenizer: Tokenizer,
        vocab: Vec<String>,
        documents: Vec<Document>,
        digest: String,
    ) -> CorpusIndex {
        let lookup = vocab
            .iter()
            .enumerate()
            .map(|(id, word)| (word.clone(), id as u32))
            .collect();
        let mut postings = vec![Vec::new(); vocab.len()];
        let mut total_tokens = 0;
        for (doc, document) in documents.iter().enumerate() {
            total_tokens += document.tokens.len();
            for (offset, &token) in document.tokens.iter().enumerate() {
                postings[token as usize].push(Posting {
                    doc: doc as u32,
                    offset: offset as u32,
                });
            }
        }
        CorpusIndex {
            tokenizer,
            vocab,
            lookup,
            documents,
            postings,
            total_tokens,
            digest,
        }
    }

    pub fn empty(tokenizer: Tokenizer) -> CorpusIndex {
        CorpusIndex::from_texts(Vec::<(String, String)>::new(), tokenizer)
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn document_name(&self, doc: usize) -> Option<&str> {
        self.documents.get(doc).map(|d| d.name.as_str())
    }

    /// Sorted positions of a single normalized token.
    pub fn postings(&self, token: &str) -> &[Posting] {
        match self.lookup.get(token) {
            Some(&id) => &self.postings[id as usize],
            None => &[],
        }
    }

    fn term_ids(&self, term: &Term) -> Option<Vec<u32>> {
        term.tokens()
            .iter()
            .map(|t| self.lookup.get(t).copied())
            .collect()
    }

    fn matches_at(&self, doc: &Document, at: usize, ids: &[u32]) -> bool {
        doc.tokens.get(at..at + ids.len()) == Some(ids)
    }

    /// Start positions of every contiguous occurrence of `term`.
    pub fn find_term(&self, term: &Term) -> Vec<Posting> {
        let Some(ids) = self.term_ids(term) else {
            return Vec::new();
        };
        self.postings[ids[0] as usize]
            .iter()
            .filter(|p| {
                let doc = &self.documents[p.doc as usize];
                self.matches_at(doc, p.offset as usize, &ids)
            })
            .copied()
            .collect()
    }

    pub fn term_frequency(&self, term: &Term) -> usize {
        self.find_term(term).len()
    }

    /// All windows where `pair.x` is followed, after 0 to 3 words, by
    /// `pair.y`. Each window takes one word of leading and trailing context
    /// when the document has one.
    pub fn search_phrases(&self, pair: &TermPair) -> Vec<PhraseOccurrence> {
        let Some(y_ids) = self.term_ids(&pair.y) else {
            return Vec::new();
        };
        let x_len = pair.x.len();
        let y_len = y_ids.len();
        let mut found = Vec::new();
        for posting in self.find_term(&pair.x) {
            let doc = &self.documents[posting.doc as usize];
            let x_start = posting.offset as usize;
            let x_end = x_start + x_len;
            for mid in 0..=MAX_MID {
                let y_start = x_end + mid;
                if !self.matches_at(doc, y_start, &y_ids) {
                    continue;
                }
                let y_end = y_start + y_len;
                let pre = x_start.min(MAX_PRE);
                let post = (doc.tokens.len() - y_end).min(MAX_POST);
                let start = x_start - pre;
                let tokens = doc.tokens[start..y_end + post]
                    .iter()
                    .map(|&id| self.vocab[id as usize].clone())
                    .collect();
                found.push(PhraseOccurrence {
                    doc: posting.doc,
                    start,
                    tokens,
                    x_span: pre..pre + x_len,
                    y_span: y_start - start..y_end - start,
                    pre,
                    mid,
                    post,
                });
            }
        }
        found
    }

    /// Returns `(count_a, count_b, count_ab)` where `count_ab` is the number
    /// of unordered position pairs, one occurrence of each term, whose start
    /// offsets lie at most `window` tokens apart in the same document.
    pub fn cooccurrence_counts(&self, a: &Term, b: &Term, window: usize) -> (usize, usize, usize) {
        let occ_a = self.find_term(a);
        let occ_b = self.find_term(b);
        let mut joint = 0usize;
        for pa in &occ_a {
            let lo = pa.offset.saturating_sub(window as u32);
            let hi = pa.offset.saturating_add(window as u32);
            let first = occ_b.partition_point(|pb| (pb.doc, pb.offset) < (pa.doc, lo));
            joint += occ_b[first..]
                .iter()
                .take_while(|pb| pb.doc == pa.doc && pb.offset <= hi)
                .filter(|pb| pb.offset != pa.offset)
                .count();
        }
        if a == b {
            // every unordered pair was seen from both ends
            joint /= 2;
        }
        (occ_a.len(), occ_b.len(), joint)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let cache = CacheFile {
            version: CACHE_VERSION,
            tokenizer: self.tokenizer,
            digest: self.digest.clone(),
            vocab: self.vocab.clone(),
            documents: self.documents.clone(),
        };
        let json = serde_json::to_vec(&cache).map_err(|e| CorpusError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        fs::write(path, json).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<CorpusIndex, CorpusError> {
        let bytes = fs::read(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cache: CacheFile = serde_json::from_slice(&bytes).map_err(|e| CorpusError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if cache.version != CACHE_VERSION {
            return Err(CorpusError::Cache {
                path: path.to_path_buf(),
                reason: format!("unsupported version {}", cache.version),
            });
        }
        let vocab_len = cache.vocab.len() as u32;
        if cache
            .documents
            .iter()
            .any(|d| d.tokens.iter().any(|&t| t >= vocab_len))
        {
            return Err(CorpusError::Cache {
                path: path.to_path_buf(),
                reason: "token id out of range".into(),
            });
        }
        Ok(CorpusIndex::assemble(
            cache.tokenizer,
            cache.vocab,
            cache.documents,
            cache.digest,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(texts: &[&str]) -> CorpusIndex {
        CorpusIndex::from_texts(
            texts.iter().enumerate().map(|(i, t)| (format!("doc{i}"), *t)),
            Tokenizer::default(),
        )
    }

    fn pair(x: &str, y: &str) -> TermPair {
        TermPair::new(Term::parse(x).unwrap(), Term::parse(y).unwrap()).unwrap()
    }

    /// Independent scan: every (x start, y start) combination in every
    /// document, checked token by token.
    fn brute_force(texts: &[&str], pair: &TermPair) -> Vec<(usize, usize, usize, usize)> {
        let tok = Tokenizer::default();
        let mut out = Vec::new();
        for text in texts {
            let words = tok.tokenize(text);
            let (x, y) = (pair.x.tokens(), pair.y.tokens());
            for xs in 0..words.len() {
                for ys in 0..words.len() {
                    let xe = xs + x.len();
                    let ye = ys + y.len();
                    if ye > words.len() || xe > words.len() || ys < xe {
                        continue;
                    }
                    if words[xs..xe] != *x || words[ys..ye] != *y {
                        continue;
                    }
                    let mid = ys - xe;
                    if mid > 3 {
                        continue;
                    }
                    let pre = usize::from(xs > 0);
                    let post = usize::from(ye < words.len());
                    out.push((xs - pre, pre, mid, post));
                }
            }
        }
        out
    }

    #[test]
    fn empty_ingest() {
        let idx = CorpusIndex::ingest(&[], Tokenizer::default()).unwrap();
        assert_eq!(idx.total_tokens(), 0);
        assert_eq!(idx.num_documents(), 0);
    }

    #[test]
    fn single_sentence_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        fs::write(&path, "The sun attracts the planet.").unwrap();
        let idx = CorpusIndex::ingest(std::slice::from_ref(&path), Tokenizer::default()).unwrap();
        assert_eq!(idx.total_tokens(), 5);
        assert_eq!(idx.postings("sun").len(), 1);
        assert_eq!(idx.postings("the").len(), 2);

        let twice = CorpusIndex::ingest(&[path.clone(), path], Tokenizer::default()).unwrap();
        assert_eq!(twice.total_tokens(), 10);
        for word in ["the", "sun", "attracts", "planet"] {
            assert_eq!(twice.postings(word).len(), 2 * idx.postings(word).len());
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = CorpusIndex::ingest(&[PathBuf::from("/nonexistent/x.txt")], Tokenizer::default())
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.txt"));
    }

    #[test]
    fn non_utf8_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, [0x66, 0xff, 0xfe]).unwrap();
        let err = CorpusIndex::ingest(&[path], Tokenizer::default()).unwrap_err();
        assert!(matches!(err, CorpusError::NotUtf8 { .. }));
        assert!(err.to_string().contains("bad.txt"));
    }

    #[test]
    fn postings_point_at_their_token() {
        let idx = index(&["a b a c", "c a b"]);
        for word in ["a", "b", "c"] {
            let posts = idx.postings(word);
            assert!(posts.windows(2).all(|w| (w[0].doc, w[0].offset) < (w[1].doc, w[1].offset)));
            for p in posts {
                let doc = &idx.documents[p.doc as usize];
                assert_eq!(idx.vocab[doc.tokens[p.offset as usize] as usize], word);
            }
        }
    }

    #[test]
    fn worked_example_window() {
        let idx = index(&["we saw how a sun centered solar system illustrates the idea"]);
        let found = idx.search_phrases(&pair("sun", "solar system"));
        assert_eq!(found.len(), 1);
        let occ = &found[0];
        assert_eq!((occ.pre, occ.mid, occ.post), (1, 1, 1));
        assert_eq!(occ.text(), "a sun centered solar system illustrates");
        assert_eq!(occ.x_span, 1..2);
        assert_eq!(occ.y_span, 3..5);
    }

    #[test]
    fn absent_and_too_distant_terms() {
        let idx = index(&["x w1 w2 w3 w4 y"]);
        assert!(idx.search_phrases(&pair("x", "y")).is_empty());
        assert!(idx.search_phrases(&pair("nothere", "y")).is_empty());
        let idx = index(&["x w1 w2 w3 y"]);
        let found = idx.search_phrases(&pair("x", "y"));
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].pre, found[0].mid, found[0].post), (0, 3, 0));
    }

    #[test]
    fn windows_do_not_cross_documents() {
        let idx = index(&["x", "y"]);
        assert!(idx.search_phrases(&pair("x", "y")).is_empty());
    }

    #[test]
    fn matches_brute_force_scan() {
        let texts = [
            "water flows into the water tower and water water tower flows",
            "the tower of water flows water tower water",
            "flows water",
        ];
        let idx = index(&texts);
        for (x, y) in [
            ("water", "water tower"),
            ("water tower", "water"),
            ("water", "flows"),
            ("flows", "water"),
            ("the", "water"),
        ] {
            let p = pair(x, y);
            let mut got: Vec<_> = idx
                .search_phrases(&p)
                .into_iter()
                .map(|o| (o.start, o.pre, o.mid, o.post))
                .collect();
            let mut want = brute_force(&texts, &p);
            got.sort();
            want.sort();
            assert_eq!(got, want, "pair {p}");
        }
    }

    #[test]
    fn cooccurrence_examples() {
        let sun = Term::parse("sun").unwrap();
        let planet = Term::parse("planet").unwrap();
        assert_eq!(index(&[]).cooccurrence_counts(&sun, &planet, 5), (0, 0, 0));
        assert_eq!(index(&["sun planet"]).cooccurrence_counts(&sun, &planet, 5), (1, 1, 1));
        assert_eq!(
            index(&["sun w w w w w w planet"]).cooccurrence_counts(&sun, &planet, 5),
            (1, 1, 0)
        );
        assert_eq!(
            index(&["sun planet", "sun planet"]).cooccurrence_counts(&sun, &planet, 5),
            (2, 2, 2)
        );
        assert_eq!(index(&["sun a sun b sun"]).cooccurrence_counts(&sun, &sun, 2), (3, 3, 2));
    }

    #[test]
    fn cache_round_trip() {
        let idx = index(&["a sun centered solar system illustrates", "sun and solar system"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        idx.save(&path).unwrap();
        let back = CorpusIndex::load(&path).unwrap();
        assert_eq!(back.digest(), idx.digest());
        assert_eq!(back.total_tokens(), idx.total_tokens());
        let p = pair("sun", "solar system");
        assert_eq!(back.search_phrases(&p), idx.search_phrases(&p));
    }

    #[test]
    fn corrupt_cache_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        fs::write(&path, "{not json").unwrap();
        assert!(matches!(CorpusIndex::load(&path), Err(CorpusError::Cache { .. })));
    }
}
