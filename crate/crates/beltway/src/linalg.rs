//! Dense symmetric-matrix numerics for small matrices.
//!
//! Everything here is dependency-free and bit-reproducible: eigendecomposition
//! uses cyclic Jacobi rotations with a fixed sweep order, which is accurate and
//! plenty fast at the dimensions this crate ever sees (m <= ~32).

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance used for rank decisions in exact mode.
pub const RANK_REL_TOL: f64 = 1e-9;

/// Symmetric matrix with one storage cell per unordered index pair, so
/// `get(i, j) == get(j, i)` holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    // Upper triangle, row-wise: (i, j) with i <= j at offset(i) + j - i.
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = SymMatrix::zeros(dim);
        for i in 0..dim {
            a.set(i, i, 1.0);
        }
        a
    }

    /// Build from a full row-major table; the strict lower triangle is ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut a = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                a.set(i, j, rows[i][j]);
            }
        }
        a
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Entry-wise maximum difference; both matrices must share a dimension.
    pub fn max_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Symmetric permutation P^T A P: entry (i, j) of the result is
    /// `get(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        assert_eq!(perm.len(), self.dim);
        let mut out = SymMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.set(i, j, self.get(perm[i], perm[j]));
            }
        }
        out
    }
}

/// Full spectral decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Eigenvalues sorted non-increasing.
    pub values: Vec<f64>,
    /// `vectors[k]` is the orthonormal eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi on a dense working copy. `want_vectors = false` skips the
/// accumulation of rotations, which roughly halves the cost of rank checks.
fn jacobi(a: &SymMatrix, want_vectors: bool) -> (Vec<f64>, Option<Vec<Vec<f64>>>) {
    let n = a.dim();
    let mut w: Vec<Vec<f64>> = a.to_dense();
    let mut v: Option<Vec<Vec<f64>>> = if want_vectors {
        let mut id = vec![vec![0.0; n]; n];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Some(id)
    } else {
        None
    };

    let fro: f64 = w
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if fro == 0.0 || n == 1 {
        let values = (0..n).map(|i| w[i][i]).collect();
        return (values, v);
    }

    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += w[p][q] * w[p][q];
                }
            }
            (2.0 * s).sqrt()
        };
        if off < 1e-14 * fro {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = w[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let diff = w[q][q] - w[p][p];
                let t = if 100.0 * apq.abs() < f64::EPSILON * diff.abs() {
                    // Rotation angle underflows; tan(theta) ~ apq / diff.
                    apq / diff
                } else {
                    let phi = diff / (2.0 * apq);
                    let mut t = 1.0 / (phi.abs() + (phi * phi + 1.0).sqrt());
                    if phi < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;

                w[p][p] -= h;
                w[q][q] += h;
                w[p][q] = 0.0;
                w[q][p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = w[k][p];
                        let akq = w[k][q];
                        w[k][p] = akp - s * (akq + tau * akp);
                        w[p][k] = w[k][p];
                        w[k][q] = akq + s * (akp - tau * akq);
                        w[q][k] = w[k][q];
                    }
                }
                if let Some(vm) = v.as_mut() {
                    for row in vm.iter_mut() {
                        let vp = row[p];
                        let vq = row[q];
                        row[p] = vp - s * (vq + tau * vp);
                        row[q] = vq + s * (vp - tau * vq);
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j][j].total_cmp(&w[i][i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| w[i][i]).collect();
    let vectors = v.map(|vm| {
        order
            .iter()
            .map(|&col| (0..n).map(|row| vm[row][col]).collect())
            .collect()
    });
    (values, vectors)
}

/// Spectral decomposition with eigenvalues sorted descending.
pub fn eigen_sym(a: &SymMatrix) -> Result<EigenResult> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(
            "matrix has a non-finite entry".to_string(),
        ));
    }
    let (values, vectors) = jacobi(a, true);
    Ok(EigenResult {
        values,
        vectors: vectors.expect("vectors requested"),
    })
}

/// Eigenvalues only (descending); same rotation sequence as `eigen_sym`.
pub fn eigenvalues_sym(a: &SymMatrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(
            "matrix has a non-finite entry".to_string(),
        ));
    }
    Ok(jacobi(a, false).0)
}

pub(crate) fn rank_from_values(values: &[f64], rel_tol: f64) -> usize {
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thresh = rel_tol * max_abs.max(1.0);
    values.iter().filter(|v| v.abs() > thresh).count()
}

/// Count of eigenvalues with |lambda| > rel_tol * max(1, max |lambda|).
pub fn numerical_rank(a: &SymMatrix, rel_tol: f64) -> Result<usize> {
    debug_assert!(rel_tol > 0.0 && rel_tol < 1.0);
    let values = eigenvalues_sym(a)?;
    Ok(rank_from_values(&values, rel_tol))
}

/// Factor a psd matrix as X^T X with X having `n` rows, from its top-n
/// eigenpairs (X = diag(sqrt(lambda)) U^T). Small negative eigenvalues from
/// round-off are clamped to zero; genuinely negative ones are an error.
///
/// Returns the m columns of X, each of length n.
pub fn rank_truncated_factor(a: &SymMatrix, n: usize, rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    let eig = eigen_sym(a)?;
    let m = a.dim();
    let scale = a.max_abs().max(1.0);
    if let Some(&min) = eig.values.last() {
        if min < -rel_tol * scale {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
    }
    let rank = rank_from_values(&eig.values, rel_tol);
    if rank > n {
        return Err(Error::RankTooHigh { rank, target: n });
    }
    let mut columns = vec![vec![0.0; n]; m];
    for k in 0..n.min(m) {
        let lambda = eig.values[k].max(0.0);
        let s = lambda.sqrt();
        for (j, col) in columns.iter_mut().enumerate() {
            col[k] = s * eig.vectors[k][j];
        }
    }
    Ok(columns)
}

/// Determinant of a small dense matrix via LU with partial pivoting.
/// The input is consumed as scratch.
pub fn det_in_place(w: &mut [Vec<f64>]) -> f64 {
    let n = w.len();
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if w[r][col].abs() > w[piv][col].abs() {
                piv = r;
            }
        }
        if w[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            w.swap(piv, col);
            det = -det;
        }
        det *= w[col][col];
        for r in col + 1..n {
            let f = w[r][col] / w[col][col];
            if f != 0.0 {
                for c in col..n {
                    w[r][c] -= f * w[col][c];
                }
            }
        }
    }
    det
}

/// Cayley-Menger determinant of the bordered 5x5 matrix
///
/// ```text
/// | 0   a2  b2  c2  1 |
/// | a2  0   z2  y2  1 |
/// | b2  z2  0   x2  1 |
/// | c2  y2  x2  0   1 |
/// | 1   1   1   1   0 |
/// ```
///
/// where the arguments are squared edge lengths with faces (a,b,z), (a,y,c),
/// (x,b,c), (x,y,z). Positive exactly when the six lengths embed as a
/// tetrahedron of positive volume.
pub fn cayley_menger_det(a2: f64, b2: f64, c2: f64, x2: f64, y2: f64, z2: f64) -> f64 {
    let mut w = vec![
        vec![0.0, a2, b2, c2, 1.0],
        vec![a2, 0.0, z2, y2, 1.0],
        vec![b2, z2, 0.0, x2, 1.0],
        vec![c2, y2, x2, 0.0, 1.0],
        vec![1.0, 1.0, 1.0, 1.0, 0.0],
    ];
    det_in_place(&mut w)
}

/// The two positive roots of alpha z^4 + beta z^2 + gamma with alpha < 0,
/// via the quadratic formula in t = z^2. Returns (z_lo, z_hi).
pub fn biquadratic_positive_roots(alpha: f64, beta: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidInput(format!(
            "biquadratic leading coefficient must be negative, got {alpha}"
        )));
    }
    let mut disc = beta * beta - 4.0 * alpha * gamma;
    if disc < 0.0 {
        if disc >= -1e-12 {
            disc = 0.0;
        } else {
            return Err(Error::NoRealRoots);
        }
    }
    let sq = disc.sqrt();
    // Stable quadratic: compute the larger-magnitude root first.
    let (t1, t2) = if beta == 0.0 {
        let r = sq / (2.0 * alpha);
        (-r, r)
    } else {
        let q = -0.5 * (beta + beta.signum() * sq);
        (q / alpha, gamma / q)
    };
    let (mut t_lo, t_hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    let clamp = 1e-12 * t_hi.abs().max(1.0);
    if t_lo < 0.0 && t_lo >= -clamp {
        t_lo = 0.0;
    }
    if t_hi <= 0.0 || t_lo < 0.0 {
        return Err(Error::NoRealRoots);
    }
    Ok((t_lo.sqrt(), t_hi.sqrt()))
}
