//! Truncated SVD of a sparse matrix by Golub-Kahan-Lanczos
//! bidiagonalization with full reorthogonalization.
//!
//! The operator is arranged so that the right Krylov side has the smaller
//! dimension. Steps are added until the top `k` Ritz triplets have
//! residuals below `CONVERGENCE_TOL * sigma_max`, or until the small side is
//! exhausted (at which point the factorization is exact). Invariant
//! subspaces are handled by restarting from a random vector orthogonal to
//! the current basis, which keeps the bidiagonal block-diagonal.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseMatrix;

const CONVERGENCE_TOL: f64 = 1e-12;
const BREAKDOWN_TOL: f64 = 1e-13;
const CHECK_EVERY: usize = 10;
const START_SEED: u64 = 0x5eed_1a9c;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SvdError {
    #[error("rank k must be at least 1")]
    ZeroRank,
}

/// `X ≈ U diag(sigma) Vᵀ` with `k` columns.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `n_rows × k`
    pub u: DMatrix<f64>,
    /// Descending, zero-padded when the rank is below `k`.
    pub sigma: Vec<f64>,
    /// `n_cols × k`
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// Number of singular values above zero.
    pub fn rank(&self) -> usize {
        self.sigma.iter().filter(|&&s| s > 0.0).count()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.sigma));
        &self.u * sigma * self.v.transpose()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &mut [f64], s: f64) {
    a.iter_mut().for_each(|x| *x *= s);
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            if c != 0.0 {
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
    }
}

/// Random unit vector orthogonal to `basis`. The caller guarantees
/// `basis.len() < dim`.
fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut w, basis);
        let n = norm(&w);
        if n > 1e-8 {
            scale(&mut w, 1.0 / n);
            return w;
        }
    }
}

/// Top-`k` singular triplets of `x`.
pub fn truncated_svd(x: &SparseMatrix, k: usize) -> Result<TruncatedSvd, SvdError> {
    if k == 0 {
        return Err(SvdError::ZeroRank);
    }
    let (n_rows, n_cols) = (x.n_rows(), x.n_cols());
    // run on the orientation whose column count is the smaller dimension
    let transposed = n_cols > n_rows;
    let op = if transposed { x.transpose() } else { x.clone() };
    let (left, sigma, right) = lanczos(&op, k);
    let (u, v) = if transposed { (right, left) } else { (left, right) };
    debug_assert_eq!(u.nrows(), n_rows);
    debug_assert_eq!(v.nrows(), n_cols);
    Ok(TruncatedSvd { u, sigma, v })
}

/// Returns `(left vectors, sigma, right vectors)` for an operator with
/// `n_cols <= n_rows`.
fn lanczos(a: &SparseMatrix, k: usize) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = (a.n_rows(), a.n_cols());
    let mut left = DMatrix::zeros(rows, k);
    let mut right = DMatrix::zeros(cols, k);
    let mut sigma = vec![0.0; k];
    let fro = a.frobenius_norm();
    if cols == 0 || fro == 0.0 {
        return (left, sigma, right);
    }
    let breakdown = BREAKDOWN_TOL * fro;
    let max_steps = cols;
    let first_check = max_steps.min(2 * k + CHECK_EVERY);

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut v = random_orthogonal(&mut rng, cols, &[]);

    let decomposition = loop {
        // left step: u_j = A v_j - beta_{j-1} u_{j-1}
        let mut u = a.mul_vec(&v);
        if let (Some(prev), Some(&beta)) = (us.last(), betas.last()) {
            u.iter_mut().zip(prev).for_each(|(ui, pi)| *ui -= beta * pi);
        }
        vs.push(v);
        orthogonalize(&mut u, &us);
        let mut alpha = norm(&u);
        if alpha <= breakdown {
            alpha = 0.0;
            u = random_orthogonal(&mut rng, rows, &us);
        } else {
            scale(&mut u, 1.0 / alpha);
        }
        alphas.push(alpha);
        us.push(u);

        let steps = vs.len();
        if steps == max_steps {
            break bidiagonal_svd(&alphas, &betas);
        }

        // right step: v_{j+1} = Aᵀ u_j - alpha_j v_j
        let mut w = a.tr_mul_vec(us.last().unwrap());
        w.iter_mut()
            .zip(vs.last().unwrap())
            .for_each(|(wi, vi)| *wi -= alpha * vi);
        orthogonalize(&mut w, &vs);
        let mut beta = norm(&w);
        if beta <= breakdown {
            beta = 0.0;
            w = random_orthogonal(&mut rng, cols, &vs);
        } else {
            scale(&mut w, 1.0 / beta);
        }

        if steps >= first_check && (steps - first_check).is_multiple_of(CHECK_EVERY) {
            let (p, s, q) = bidiagonal_svd(&alphas, &betas);
            let top = s.first().copied().unwrap_or(0.0);
            let wanted = k.min(steps);
            let converged = (0..wanted).all(|i| beta * p[(steps - 1, i)].abs() <= CONVERGENCE_TOL * top);
            if converged {
                break (p, s, q);
            }
        }
        betas.push(beta);
        v = w;
    };

    let (p, s, q) = decomposition;
    let steps = vs.len();
    for i in 0..k.min(steps) {
        sigma[i] = s[i];
        for (j, uj) in us.iter().enumerate() {
            let c = p[(j, i)];
            if c != 0.0 {
                for (r, val) in uj.iter().enumerate() {
                    left[(r, i)] += c * val;
                }
            }
        }
        for (j, vj) in vs.iter().enumerate() {
            let c = q[(j, i)];
            if c != 0.0 {
                for (r, val) in vj.iter().enumerate() {
                    right[(r, i)] += c * val;
                }
            }
        }
    }
    (left, sigma, right)
}

/// SVD of the upper bidiagonal matrix with diagonal `alphas` and
/// superdiagonal `betas`, sorted by descending singular value.
fn bidiagonal_svd(alphas: &[f64], betas: &[f64]) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let p = alphas.len();
    let mut b = DMatrix::zeros(p, p);
    for i in 0..p {
        b[(i, i)] = alphas[i];
        if i + 1 < p {
            b[(i, i + 1)] = betas[i];
        }
    }
    let svd = b.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut pu = DMatrix::zeros(p, p);
    let mut qv = DMatrix::zeros(p, p);
    let mut s = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        s.push(svd.singular_values[src]);
        pu.set_column(dst, &u.column(src));
        qv.set_column(dst, &vt.row(src).transpose());
    }
    (pu, s, qv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(x: &SparseMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(x.n_rows(), x.n_cols(), |i, j| x.get(i, j))
    }

    fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
        let mut triplets = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if rng.random::<f64>() < density {
                    triplets.push((i, j, rng.random::<f64>() * 4.0));
                }
            }
        }
        SparseMatrix::from_triplets(rows, cols, triplets).unwrap()
    }

    #[test]
    fn zero_rank_is_rejected() {
        let x = SparseMatrix::zeros(2, 2);
        assert_eq!(truncated_svd(&x, 0).unwrap_err(), SvdError::ZeroRank);
    }

    #[test]
    fn diagonal_example() {
        let x = SparseMatrix::from_dense(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let svd = truncated_svd(&x, 1).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-12);
        let rec = svd.reconstruct();
        let want = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        assert!((rec - want).norm() < 1e-12);
    }

    #[test]
    fn rank_one_is_exact() {
        let col = [1.0, 2.0, 0.0, 3.0];
        let row = [0.5, 0.0, 2.0];
        let x = SparseMatrix::from_dense(
            &col.iter().map(|a| row.iter().map(|b| a * b).collect()).collect::<Vec<_>>(),
        )
        .unwrap();
        let svd = truncated_svd(&x, 1).unwrap();
        assert!((svd.reconstruct() - dense(&x)).norm() <= 1e-8 * dense(&x).norm());
    }

    #[test]
    fn pads_when_k_exceeds_rank() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let svd = truncated_svd(&x, 5).unwrap();
        assert_eq!(svd.k(), 5);
        assert_eq!(svd.rank(), 1);
        assert!(svd.sigma[1] < 1e-12);
        assert_eq!(&svd.sigma[2..], &[0.0, 0.0, 0.0]);
        assert!((svd.reconstruct() - dense(&x)).norm() < 1e-12);
    }

    #[test]
    fn repeated_singular_values_recovered_at_full_rank() {
        let x = SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let svd = truncated_svd(&x, 3).unwrap();
        for s in &svd.sigma {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_oracle_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (rows, cols, k) in [(30, 80, 5), (80, 30, 7), (40, 40, 40), (60, 200, 12)] {
            let x = random_sparse(&mut rng, rows, cols, 0.2);
            let oracle = dense(&x).svd(false, false).singular_values;
            let mut want: Vec<f64> = oracle.iter().copied().collect();
            want.sort_by(|a, b| b.total_cmp(a));
            let svd = truncated_svd(&x, k).unwrap();
            for i in 0..k {
                assert!((svd.sigma[i] - want[i]).abs() <= 1e-9 * want[0], "{rows}x{cols} sigma {i}");
            }
            let utu = svd.u.transpose() * &svd.u;
            assert!((utu - DMatrix::identity(k, k)).amax() <= 1e-10);
            let vtv = svd.v.transpose() * &svd.v;
            assert!((vtv - DMatrix::identity(k, k)).amax() <= 1e-10);
        }
    }
}
