//! Weighting of the frequency matrix, SVD smoothing, and the relational
//! similarity space built from the result.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sparse::SparseMatrix;
use crate::svd::{truncated_svd, SvdError, TruncatedSvd};
use crate::term::TermPair;

#[derive(Debug, thiserror::Error)]
pub enum SpaceError {
    #[error("frequency matrix has no nonzero entries")]
    AllZero,
    #[error("frequency matrix has a negative entry at ({0}, {1})")]
    Negative(usize, usize),
    #[error(transparent)]
    Svd(#[from] SvdError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad space file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("unknown transform {0:?} (expected ppmic or logentropy)")]
    UnknownTransform(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Ppmic,
    LogEntropy,
}

impl Transform {
    pub fn apply(self, f: &SparseMatrix) -> Result<SparseMatrix, SpaceError> {
        match self {
            Transform::Ppmic => transform_ppmic(f),
            Transform::LogEntropy => transform_log_entropy(f),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Ppmic => "ppmic",
            Transform::LogEntropy => "logentropy",
        })
    }
}

impl FromStr for Transform {
    type Err = SpaceError;
    fn from_str(s: &str) -> Result<Transform, SpaceError> {
        match s.to_ascii_lowercase().as_str() {
            "ppmic" | "ppmi" => Ok(Transform::Ppmic),
            "logentropy" | "log-entropy" | "log_entropy" => Ok(Transform::LogEntropy),
            _ => Err(SpaceError::UnknownTransform(s.to_string())),
        }
    }
}

fn check_frequencies(f: &SparseMatrix) -> Result<(), SpaceError> {
    if let Some((i, j, _)) = f.triplets().find(|&(_, _, v)| v < 0.0) {
        return Err(SpaceError::Negative(i, j));
    }
    if f.nnz() == 0 {
        return Err(SpaceError::AllZero);
    }
    Ok(())
}

/// Positive pointwise mutual information: `max(0, ln(p_ij / (p_i* p_*j)))`.
pub fn transform_ppmic(f: &SparseMatrix) -> Result<SparseMatrix, SpaceError> {
    check_frequencies(f)?;
    let total = f.total();
    let rows = f.row_sums();
    let cols = f.col_sums();
    Ok(f.map_entries(|i, j, fij| {
        // p_ij / (p_i* p_*j) = f_ij * total / (row_i * col_j)
        let pmi = (fij * total / (rows[i] * cols[j])).ln();
        if pmi > 0.0 {
            pmi
        } else {
            0.0
        }
    }))
}

/// Log-entropy weighting: `ln(f_ij + 1) * w_j` with
/// `w_j = 1 + Σ_i q_ij ln(q_ij) / ln(n_rows)` and `q_ij = f_ij / Σ_i f_ij`.
pub fn transform_log_entropy(f: &SparseMatrix) -> Result<SparseMatrix, SpaceError> {
    check_frequencies(f)?;
    let col_sums = f.col_sums();
    let col_nnz = f.col_nnz();
    let mut entropy = vec![0.0; f.n_cols()];
    for (_, j, fij) in f.triplets() {
        let q = fij / col_sums[j];
        entropy[j] += q * q.ln();
    }
    let log_n = (f.n_rows() as f64).ln();
    let weights: Vec<f64> = (0..f.n_cols())
        .map(|j| {
            if col_nnz[j] <= 1 || log_n == 0.0 {
                1.0
            } else {
                1.0 + entropy[j] / log_n
            }
        })
        .collect();
    Ok(f.map_entries(|_, j, fij| (fij + 1.0).ln() * weights[j]))
}

/// Row vectors of the space: dense `U_k Σ_k` rows, or the sparse
/// transformed rows when SVD smoothing is switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Embedding {
    Dense { dim: usize, data: Vec<f64> },
    Sparse(Vec<Vec<(usize, f64)>>),
}

impl Embedding {
    fn n_rows(&self) -> usize {
        match self {
            Embedding::Dense { dim, data } => {
                if *dim == 0 {
                    0
                } else {
                    data.len() / dim
                }
            }
            Embedding::Sparse(rows) => rows.len(),
        }
    }

    fn dot(&self, a: usize, b: usize) -> f64 {
        match self {
            Embedding::Dense { dim, data } => {
                let ra = &data[a * dim..(a + 1) * dim];
                let rb = &data[b * dim..(b + 1) * dim];
                ra.iter().zip(rb).map(|(x, y)| x * y).sum()
            }
            Embedding::Sparse(rows) => {
                let (ra, rb) = (&rows[a], &rows[b]);
                let (mut i, mut j, mut sum) = (0, 0, 0.0);
                while i < ra.len() && j < rb.len() {
                    match ra[i].0.cmp(&rb[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            sum += ra[i].1 * rb[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                sum
            }
        }
    }

    pub fn row_norm(&self, row: usize) -> f64 {
        self.dot(row, row).sqrt()
    }
}

/// Where a space came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub t: Option<usize>,
    pub transform: Option<Transform>,
    pub corpus_digest: Option<String>,
}

/// Unit-length row vectors for every retained pair; `sim_r` is their inner
/// product.
#[derive(Debug, Clone)]
pub struct RelationSpace {
    rows: Vec<TermPair>,
    index: HashMap<TermPair, usize>,
    embedding: Embedding,
    /// Retained rank, or `None` when SVD smoothing was skipped.
    k: Option<usize>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    rows: Vec<TermPair>,
    k: Option<usize>,
    provenance: Provenance,
    embedding: Embedding,
}

fn unit_rows<I: Iterator<Item = f64>>(values: I, dim: usize) -> Vec<f64> {
    let mut data: Vec<f64> = values.collect();
    for row in data.chunks_mut(dim.max(1)) {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    data
}

impl RelationSpace {
    fn from_parts(
        rows: Vec<TermPair>,
        embedding: Embedding,
        k: Option<usize>,
        provenance: Provenance,
    ) -> Result<RelationSpace, SpaceError> {
        if embedding.n_rows() != rows.len() {
            return Err(SpaceError::Shape(format!(
                "{} row labels for {} vectors",
                rows.len(),
                embedding.n_rows()
            )));
        }
        let mut index = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if index.insert(row.clone(), i).is_some() {
                return Err(SpaceError::Shape(format!("duplicate row label {row}")));
            }
        }
        Ok(RelationSpace {
            rows,
            index,
            embedding,
            k,
            provenance,
        })
    }

    /// `W` = row-normalized `U_k Σ_k`; all-zero rows stay zero.
    pub fn build(
        u: &nalgebra::DMatrix<f64>,
        sigma: &[f64],
        rows: Vec<TermPair>,
        provenance: Provenance,
    ) -> Result<RelationSpace, SpaceError> {
        let k = sigma.len();
        if u.ncols() != k || u.nrows() != rows.len() {
            return Err(SpaceError::Shape(format!(
                "U is {}x{}, sigma has {k} values, {} rows",
                u.nrows(),
                u.ncols(),
                rows.len()
            )));
        }
        let n = rows.len();
        let data = unit_rows(
            (0..n).flat_map(|i| (0..k).map(move |c| (i, c))).map(|(i, c)| u[(i, c)] * sigma[c]),
            k,
        );
        RelationSpace::from_parts(rows, Embedding::Dense { dim: k, data }, Some(k), provenance)
    }

    pub fn from_svd(svd: &TruncatedSvd, rows: Vec<TermPair>, provenance: Provenance) -> Result<RelationSpace, SpaceError> {
        RelationSpace::build(&svd.u, &svd.sigma, rows, provenance)
    }

    /// Space without smoothing: cosines of the transformed rows directly.
    pub fn unsmoothed(x: &SparseMatrix, rows: Vec<TermPair>, provenance: Provenance) -> Result<RelationSpace, SpaceError> {
        if x.n_rows() != rows.len() {
            return Err(SpaceError::Shape(format!("{} rows for a {}-row matrix", rows.len(), x.n_rows())));
        }
        let vectors = (0..x.n_rows())
            .map(|i| {
                let row: Vec<(usize, f64)> = x.row(i).collect();
                let n = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    row.into_iter().map(|(j, v)| (j, v / n)).collect()
                } else {
                    row
                }
            })
            .collect();
        RelationSpace::from_parts(rows, Embedding::Sparse(vectors), None, provenance)
    }

    /// Weighted matrix → (optional) truncated SVD → space.
    pub fn from_transformed(
        x: &SparseMatrix,
        rows: Vec<TermPair>,
        k: Option<usize>,
        provenance: Provenance,
    ) -> Result<RelationSpace, SpaceError> {
        match k {
            Some(k) => RelationSpace::from_svd(&truncated_svd(x, k)?, rows, provenance),
            None => RelationSpace::unsmoothed(x, rows, provenance),
        }
    }

    pub fn rows(&self) -> &[TermPair] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, pair: &TermPair) -> bool {
        self.index.contains_key(pair)
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    /// Cosine between the rows of `p` and `q`; zero when either pair is not
    /// in the space.
    pub fn sim_r(&self, p: &TermPair, q: &TermPair) -> f64 {
        match (self.index.get(p), self.index.get(q)) {
            (Some(&a), Some(&b)) => self.embedding.dot(a, b).clamp(-1.0, 1.0),
            _ => 0.0,
        }
    }

    /// Full `Z = W Wᵀ`; only sensible for small spaces.
    pub fn similarity_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
        (0..n)
            .map(|a| (0..n).map(|b| self.embedding.dot(a, b).clamp(-1.0, 1.0)).collect())
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), SpaceError> {
        let file = SpaceFile {
            rows: self.rows.clone(),
            k: self.k,
            provenance: self.provenance.clone(),
            embedding: self.embedding.clone(),
        };
        let json = serde_json::to_vec(&file).map_err(|e| SpaceError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        fs::write(path, json).map_err(|source| SpaceError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<RelationSpace, SpaceError> {
        let bytes = fs::read(path).map_err(|source| SpaceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: SpaceFile = serde_json::from_slice(&bytes).map_err(|e| SpaceError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        RelationSpace::from_parts(file.rows, file.embedding, file.k, file.provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    fn pair(x: &str, y: &str) -> TermPair {
        TermPair::new(Term::parse(x).unwrap(), Term::parse(y).unwrap()).unwrap()
    }

    fn m(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Direct evaluation of the probability ratios, one cell at a time.
    fn ppmic_oracle(f: &[&[f64]]) -> Vec<Vec<f64>> {
        let total: f64 = f.iter().flat_map(|r| r.iter()).sum();
        let n_cols = f[0].len();
        let mut out = vec![vec![0.0; n_cols]; f.len()];
        for i in 0..f.len() {
            for j in 0..n_cols {
                if f[i][j] == 0.0 {
                    continue;
                }
                let p_ij = f[i][j] / total;
                let p_i: f64 = f[i].iter().sum::<f64>() / total;
                let p_j: f64 = f.iter().map(|r| r[j]).sum::<f64>() / total;
                out[i][j] = (p_ij / (p_i * p_j)).ln().max(0.0);
            }
        }
        out
    }

    #[test]
    fn ppmic_examples() {
        let uniform = transform_ppmic(&m(&[&[2.0, 2.0], &[2.0, 2.0]])).unwrap();
        assert_eq!(uniform.nnz(), 0);

        let diag = transform_ppmic(&m(&[&[4.0, 0.0], &[0.0, 4.0]])).unwrap();
        let want = ppmic_oracle(&[&[4.0, 0.0], &[0.0, 4.0]]);
        assert!((want[0][0] - 2f64.ln()).abs() < 1e-15);
        for (i, row) in want.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                assert!((diag.get(i, j) - w).abs() < 1e-12);
            }
        }

        let mixed = transform_ppmic(&m(&[&[3.0, 1.0], &[1.0, 3.0]])).unwrap();
        assert_eq!(mixed.get(0, 1), 0.0);
        assert_eq!(mixed.get(1, 0), 0.0);
        assert!((mixed.get(0, 0) - ppmic_oracle(&[&[3.0, 1.0], &[1.0, 3.0]])[0][0]).abs() < 1e-12);
        assert!(mixed.nnz() <= 4);
    }

    #[test]
    fn transforms_reject_degenerate_input() {
        assert!(matches!(transform_ppmic(&SparseMatrix::zeros(2, 2)), Err(SpaceError::AllZero)));
        assert!(matches!(
            transform_log_entropy(&m(&[&[-1.0, 1.0]])),
            Err(SpaceError::Negative(0, 0))
        ));
    }

    #[test]
    fn log_entropy_examples() {
        // concentrated column keeps weight 1
        let x = transform_log_entropy(&m(&[&[5.0, 1.0], &[0.0, 1.0]])).unwrap();
        assert!((x.get(0, 0) - 6f64.ln()).abs() < 1e-12);
        // uniform column over all rows is zeroed
        assert_eq!(x.get(0, 1), 0.0);
        assert_eq!(x.get(1, 1), 0.0);

        // F = [[2,0],[1,1]] evaluated by hand from the weighting formula
        let x = transform_log_entropy(&m(&[&[2.0, 0.0], &[1.0, 1.0]])).unwrap();
        let (q0, q1) = (2.0 / 3.0, 1.0 / 3.0);
        let w0: f64 = 1.0 + (q0 * f64::ln(q0) + q1 * f64::ln(q1)) / 2f64.ln();
        assert!((x.get(0, 0) - 3f64.ln() * w0).abs() < 1e-12);
        assert!((x.get(1, 0) - 2f64.ln() * w0).abs() < 1e-12);
        assert!((x.get(1, 1) - 2f64.ln()).abs() < 1e-12);
        assert!((w0 - 0.081_704_166_652_3).abs() < 1e-9);
    }

    #[test]
    fn build_normalizes_rows() {
        let u = nalgebra::DMatrix::<f64>::identity(3, 2);
        let rows = vec![pair("a", "b"), pair("b", "a"), pair("c", "d")];
        let space = RelationSpace::build(&u, &[2.0, 1.0], rows.clone(), Provenance::default()).unwrap();
        assert!((space.sim_r(&rows[0], &rows[0]) - 1.0).abs() < 1e-15);
        assert_eq!(space.sim_r(&rows[0], &rows[1]), 0.0);
        assert_eq!(space.embedding().row_norm(2), 0.0);
        assert_eq!(space.sim_r(&rows[0], &pair("x", "y")), 0.0);
        assert_eq!(space.similarity_matrix()[1][1], 1.0);
    }

    #[test]
    fn unsmoothed_matches_direct_cosine() {
        let x = m(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, 3.0], &[0.0, 0.0, 0.0]]);
        let rows = vec![pair("a", "b"), pair("c", "d"), pair("e", "f")];
        let space = RelationSpace::unsmoothed(&x, rows.clone(), Provenance::default()).unwrap();
        let want = 2.0 / (5f64.sqrt() * 10f64.sqrt());
        assert!((space.sim_r(&rows[0], &rows[1]) - want).abs() < 1e-15);
        assert_eq!(space.sim_r(&rows[2], &rows[0]), 0.0);
        // full-rank SVD gives the same cosines
        let smoothed = RelationSpace::from_transformed(&x, rows.clone(), Some(3), Provenance::default()).unwrap();
        assert!((smoothed.sim_r(&rows[0], &rows[1]) - want).abs() < 1e-12);
    }

    #[test]
    fn save_load_round_trip() {
        let x = m(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, 3.0], &[4.0, 0.0, 1.0]]);
        let rows = vec![pair("a", "b"), pair("c", "d"), pair("e", "f")];
        let dir = tempfile::tempdir().unwrap();
        for k in [Some(2), None] {
            let space = RelationSpace::from_transformed(&x, rows.clone(), k, Provenance::default()).unwrap();
            let path = dir.path().join("space.json");
            space.save(&path).unwrap();
            let back = RelationSpace::load(&path).unwrap();
            for p in &rows {
                for q in &rows {
                    assert!((space.sim_r(p, q) - back.sim_r(p, q)).abs() <= 1e-12);
                }
            }
            assert_eq!(back.k(), k);
        }
    }
}
