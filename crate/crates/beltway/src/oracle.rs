//! Brute-force ground truth for small instances: enumerate every symmetric
//! rearrangement of a Gram matrix, decide equivalence (simultaneous
//! row/column permutation), certify uniqueness, and run rearrangement
//! censuses over sampled configurations.

use crate::error::{Error, Result};
use crate::forward::sample_config;
use crate::linalg::{eigen_sym, eigenvalues_sym, rank_from_values, SymMatrix, RANK_REL_TOL};
use crate::model::{GramMatrix, PointConfig, CLUSTER_TOL};
use crate::rng::Rng;

/// Hard cap on the matrix size and on the number of streamed arrangements.
const ENUM_MAX_M: usize = 8;
const ENUM_BUDGET: u128 = 100_000_000;

/// A pair permutation: for every off-diagonal position, the source position
/// whose value it received. Positions not listed are unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPermutation {
    pub mapping: Vec<((usize, usize), (usize, usize))>,
}

/// One enumerated rearrangement with its classification.
#[derive(Debug, Clone)]
pub struct RearrangementReport {
    pub perm: PairPermutation,
    pub matrix: SymMatrix,
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub psd: bool,
    pub equivalent_to_source: bool,
}

struct Block {
    /// Same-class off-diagonal positions, lexicographic.
    positions: Vec<(usize, usize)>,
    /// Original values at those positions, in position order.
    values: Vec<f64>,
}

/// Partition indices into diagonal-value classes (clustered within the
/// standard tolerance).
fn diagonal_classes(gram: &GramMatrix) -> Vec<Vec<usize>> {
    let m = gram.m();
    let diag = gram.diagonal();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match classes.last_mut() {
            Some(cls) if (diag[i] - diag[*cls.last().unwrap()]).abs() <= CLUSTER_TOL => {
                cls.push(i)
            }
            _ => classes.push(vec![i]),
        }
    }
    classes
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Lexicographic next permutation in place; false once wrapped to sorted.
fn next_permutation(idx: &mut [usize]) -> bool {
    if idx.len() < 2 {
        return false;
    }
    let mut i = idx.len() - 1;
    while i > 0 && idx[i - 1] >= idx[i] {
        i -= 1;
    }
    if i == 0 {
        idx.sort_unstable();
        return false;
    }
    let mut j = idx.len() - 1;
    while idx[j] <= idx[i - 1] {
        j -= 1;
    }
    idx.swap(i - 1, j);
    idx[i..].reverse();
    true
}

/// Streaming enumeration of the symmetric rearrangements of `a`: values are
/// permuted within each same-diagonal-class block of positions, every
/// arrangement visited exactly once, the identity included. Rearrangements
/// that only relabel the cross-class values attached to an isolated point are
/// equivalent to ones in this stream, so they are not enumerated separately.
pub struct RearrangementIter {
    source: SymMatrix,
    source_eigs: Vec<f64>,
    blocks: Vec<Block>,
    /// Current index permutation per block.
    state: Vec<Vec<usize>>,
    done: bool,
}

impl RearrangementIter {
    /// Total number of arrangements this iterator will yield.
    pub fn total(&self) -> u128 {
        self.blocks
            .iter()
            .map(|b| factorial(b.positions.len()))
            .product()
    }
}

pub fn enumerate_rearrangements(a: &GramMatrix) -> Result<RearrangementIter> {
    let m = a.m();
    let classes = diagonal_classes(a);
    let mut blocks = Vec::new();
    let mut estimate: u128 = 1;
    for cls in &classes {
        let mut positions = Vec::new();
        for x in 0..cls.len() {
            for y in (x + 1)..cls.len() {
                let (i, j) = (cls[x].min(cls[y]), cls[x].max(cls[y]));
                positions.push((i, j));
            }
        }
        positions.sort_unstable();
        estimate = estimate.saturating_mul(factorial(positions.len()));
        if !positions.is_empty() {
            let values = positions.iter().map(|&(i, j)| a.sym.get(i, j)).collect();
            blocks.push(Block { positions, values });
        }
    }
    if m > ENUM_MAX_M || estimate > ENUM_BUDGET {
        return Err(Error::TooLarge { estimate });
    }
    let state = blocks
        .iter()
        .map(|b| (0..b.positions.len()).collect())
        .collect();
    let source_eigs = eigenvalues_sym(&a.sym)?;
    Ok(RearrangementIter {
        source: a.sym.clone(),
        source_eigs,
        blocks,
        state,
        done: false,
    })
}

impl Iterator for RearrangementIter {
    type Item = RearrangementReport;

    fn next(&mut self) -> Option<RearrangementReport> {
        if self.done {
            return None;
        }
        let mut matrix = self.source.clone();
        let mut mapping = Vec::new();
        for (block, perm) in self.blocks.iter().zip(&self.state) {
            for (t, &src) in perm.iter().enumerate() {
                let (i, j) = block.positions[t];
                matrix.set(i, j, block.values[src]);
                mapping.push((block.positions[t], block.positions[src]));
            }
        }

        let eigenvalues = eigenvalues_sym(&matrix).expect("finite rearrangement");
        let rank = rank_from_values(&eigenvalues, RANK_REL_TOL);
        let min_eig = *eigenvalues.last().expect("non-empty spectrum");
        let psd = min_eig >= -1e-9 * matrix.max_abs();
        let spectra_match = self
            .source_eigs
            .iter()
            .zip(&eigenvalues)
            .all(|(a, b)| (a - b).abs() <= 1e-8);
        let equivalent_to_source = spectra_match
            && are_equivalent_sym(&self.source, &matrix, 1e-7);

        // Advance the mixed-radix odometer of block permutations.
        let mut k = self.state.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            if next_permutation(&mut self.state[k]) {
                break;
            }
        }

        Some(RearrangementReport {
            perm: PairPermutation { mapping },
            matrix,
            eigenvalues,
            rank,
            psd,
            equivalent_to_source,
        })
    }
}

/// True when some simultaneous row/column permutation carries `a` onto `b`
/// within 1e-7 entrywise, i.e. the two Gram matrices come from the same point
/// set up to column reordering.
pub fn are_equivalent(a: &GramMatrix, b: &GramMatrix) -> bool {
    are_equivalent_sym(&a.sym, &b.sym, 1e-7)
}

pub(crate) fn are_equivalent_sym(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    let m = a.dim();

    // Permutation-invariant signatures: diagonal value plus sorted row.
    let row_sig = |s: &SymMatrix, i: usize| -> Vec<f64> {
        let mut r: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| s.get(i, j)).collect();
        r.sort_by(f64::total_cmp);
        r
    };
    let sig_a: Vec<Vec<f64>> = (0..m).map(|i| row_sig(a, i)).collect();
    let sig_b: Vec<Vec<f64>> = (0..m).map(|i| row_sig(b, i)).collect();

    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = Vec::new();
        for j in 0..m {
            if (a.get(j, j) - b.get(i, i)).abs() <= tol
                && sig_a[j]
                    .iter()
                    .zip(&sig_b[i])
                    .all(|(x, y)| (x - y).abs() <= tol)
            {
                c.push(j);
            }
        }
        if c.is_empty() {
            return false;
        }
        candidates.push(c);
    }

    // Assign scarcest rows first.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (candidates[i].len(), i));

    fn backtrack(
        a: &SymMatrix,
        b: &SymMatrix,
        order: &[usize],
        candidates: &[Vec<usize>],
        depth: usize,
        assigned: &mut Vec<(usize, usize)>,
        used: &mut Vec<bool>,
        tol: f64,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let bi = order[depth];
        for &aj in &candidates[bi] {
            if used[aj] {
                continue;
            }
            // Consistency against everything already assigned.
            let ok = assigned
                .iter()
                .all(|&(bk, ak)| (a.get(aj, ak) - b.get(bi, bk)).abs() <= tol);
            if !ok {
                continue;
            }
            used[aj] = true;
            assigned.push((bi, aj));
            if backtrack(a, b, order, candidates, depth + 1, assigned, used, tol) {
                return true;
            }
            assigned.pop();
            used[aj] = false;
        }
        false
    }

    let mut assigned = Vec::with_capacity(m);
    let mut used = vec![false; m];
    backtrack(a, b, &order, &candidates, 0, &mut assigned, &mut used, tol)
}

/// Outcome of exhaustively checking Proposition-style uniqueness on one
/// configuration: is every rank-<= n rearrangement of its Gram matrix
/// equivalent to it?
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub total: u128,
    pub rank_at_most_n: u64,
    pub non_equivalent_rank_at_most_n: u64,
    pub unique: bool,
}

pub fn uniqueness_certificate(cfg: &PointConfig) -> Result<UniquenessReport> {
    let gram = cfg.gram();
    let n = cfg.n();
    let iter = enumerate_rearrangements(&gram)?;
    let total = iter.total();
    let mut rank_at_most_n = 0;
    let mut bad = 0;
    for rep in iter {
        if rep.rank <= n {
            rank_at_most_n += 1;
            if !rep.equivalent_to_source {
                bad += 1;
            }
        }
    }
    Ok(UniquenessReport {
        total,
        rank_at_most_n,
        non_equivalent_rank_at_most_n: bad,
        unique: bad == 0,
    })
}

/// Census over sampled configurations: how often does a Gram matrix admit a
/// non-equivalent psd rearrangement, and how many are there?
///
/// Psd rearrangements are counted up to equivalence among themselves (they
/// arrive in orbits under simultaneous relabeling); the non-equivalent
/// denominator counts raw arrangements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CensusStats {
    pub trials: u64,
    pub trials_with_psd_rearrangement: u64,
    pub total_non_equivalent: u64,
    pub total_psd_non_equivalent: u64,
    pub fraction_trials_with_psd: f64,
    pub psd_share_of_non_equivalent: f64,
}

pub fn census(
    trials: u64,
    n: usize,
    norm_spec: &[(f64, usize)],
    seed: u64,
) -> Result<CensusStats> {
    let mut stats = CensusStats {
        trials,
        ..CensusStats::default()
    };
    if trials == 0 {
        return Ok(stats);
    }
    let master = Rng::seeded(seed);
    for trial in 0..trials {
        let cfg = sample_config(n, norm_spec, master.stream_seed(trial))?;
        let gram = cfg.gram();
        let mut non_equiv: u64 = 0;
        let mut psd_reps: Vec<(Vec<f64>, SymMatrix)> = Vec::new();
        for rep in enumerate_rearrangements(&gram)? {
            if rep.equivalent_to_source {
                continue;
            }
            non_equiv += 1;
            if rep.psd {
                psd_reps.push((rep.eigenvalues, rep.matrix));
            }
        }
        // Dedup psd rearrangements by mutual equivalence, using the spectrum
        // as a grouping key first.
        let mut classes: Vec<(Vec<f64>, Vec<SymMatrix>)> = Vec::new();
        'next: for (eigs, mat) in psd_reps {
            for (ceigs, members) in classes.iter_mut() {
                if ceigs.iter().zip(&eigs).all(|(x, y)| (x - y).abs() <= 1e-8) {
                    if members
                        .iter()
                        .any(|rep| are_equivalent_sym(rep, &mat, 1e-7))
                    {
                        continue 'next;
                    }
                    members.push(mat);
                    continue 'next;
                }
            }
            classes.push((eigs, vec![mat]));
        }
        let psd_classes: u64 = classes.iter().map(|(_, ms)| ms.len() as u64).sum();
        stats.total_non_equivalent += non_equiv;
        stats.total_psd_non_equivalent += psd_classes;
        if psd_classes > 0 {
            stats.trials_with_psd_rearrangement += 1;
        }
    }
    stats.fraction_trials_with_psd =
        stats.trials_with_psd_rearrangement as f64 / trials as f64;
    if stats.total_non_equivalent > 0 {
        stats.psd_share_of_non_equivalent =
            stats.total_psd_non_equivalent as f64 / stats.total_non_equivalent as f64;
    }
    Ok(stats)
}

/// Frobenius residual min_Q ||Q X - Y||_F over orthogonal Q, for two
/// configurations with matched point order. Q comes from the polar
/// decomposition of M = Y X^T (reflections allowed, matching the O(n) orbit).
pub fn procrustes_residual(x: &PointConfig, y: &PointConfig) -> Result<f64> {
    if x.n() != y.n() || x.m() != y.m() {
        return Err(Error::InvalidInput(
            "configurations must share dimensions".to_string(),
        ));
    }
    let n = x.n();
    let m = x.m();
    // M = sum_k y_k x_k^T.
    let mut mm = vec![vec![0.0; n]; n];
    for k in 0..m {
        for r in 0..n {
            for c in 0..n {
                mm[r][c] += y.point(k)[r] * x.point(k)[c];
            }
        }
    }
    // S = M^T M, S^{-1/2} via its eigendecomposition.
    let mut s = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut v = 0.0;
            for r in 0..n {
                v += mm[r][i] * mm[r][j];
            }
            s.set(i, j, v);
        }
    }
    let eig = eigen_sym(&s)?;
    let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut inv_sqrt = vec![vec![0.0; n]; n];
    for k in 0..n {
        let lam = eig.values[k];
        if lam <= 1e-14 * lam_max.max(1.0) {
            continue; // rank-deficient direction contributes nothing
        }
        let w = 1.0 / lam.sqrt();
        for i in 0..n {
            for j in 0..n {
                inv_sqrt[i][j] += w * eig.vectors[k][i] * eig.vectors[k][j];
            }
        }
    }
    // Q = M S^{-1/2}.
    let mut q = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            for t in 0..n {
                q[r][c] += mm[r][t] * inv_sqrt[t][c];
            }
        }
    }
    let mut resid2 = 0.0;
    for k in 0..m {
        for r in 0..n {
            let mut v = 0.0;
            for c in 0..n {
                v += q[r][c] * x.point(k)[c];
            }
            let d = v - y.point(k)[r];
            resid2 += d * d;
        }
    }
    Ok(resid2.sqrt())
}
