//! The three recovery engines.
//!
//! All three share one iteration skeleton: keep a table of candidate inner
//! products per unknown Gram entry, repeatedly pick the index tuple whose
//! candidate product is smallest, search its candidate assignments for the
//! one whose bordered principal minor has rank <= n (exact/sphere) or the
//! smallest Eckart-Young distance to the rank-<= n locus (noisy), fix the
//! winning entries, consume them from the pool and update the counts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{
    det_in_place, eigenvalues_sym, numerical_rank, rank_truncated_factor, SymMatrix, RANK_REL_TOL,
};

/// Acceptance tolerance for the candidate rank checks. Tighter than the
/// crate-wide default: true minors of exact data sit at |lambda_{n+1}| ~
/// 1e-15 * scale while wrong candidates have continuous density near zero,
/// and at 1e-9 a few in a thousand runs slip under the threshold and poison
/// the assembly. 1e-12 keeps a ~1000x margin to both sides.
const ENGINE_RANK_TOL: f64 = 1e-12;
use crate::model::{norm_profile, GramMatrix, PointConfig, SecondMoment};
use crate::preprocess::{preprocess, preprocess_with_slack, AmbiguityTable, IsolateParts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sphere,
    Noisy,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Sphere => "sphere",
            Mode::Noisy => "noisy",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sphere" => Ok(Mode::Sphere),
            "noisy" => Ok(Mode::Noisy),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// Output of a recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub gram: GramMatrix,
    /// Factored configuration; absent when the assembled gram is not a
    /// rank-<= n psd matrix (typical for noisy assemblies).
    pub config: Option<PointConfig>,
    pub iterations: u64,
    pub rank_checks: u64,
    pub mode: Mode,
    /// |lambda_{n+1}| of the assembled gram: its Eckart-Young distance to the
    /// rank-<= n locus (~1e-15 in exact mode).
    pub residual: f64,
    /// Candidate evaluations per iteration, in iteration order.
    pub iteration_checks: Vec<u64>,
}

/// Rank-check budget per unresolved index tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    pub counts: BTreeMap<Vec<usize>, u128>,
}

impl CountsTable {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Tuple with the smallest count; ties broken by lexicographic order.
    pub fn argmin(&self) -> Option<&[usize]> {
        let mut best: Option<(&Vec<usize>, u128)> = None;
        for (t, &c) in &self.counts {
            if best.map_or(true, |(_, bc)| c < bc) {
                best = Some((t, c));
            }
        }
        best.map(|(t, _)| t.as_slice())
    }
}

/// All k-subsets of {0, .., n_items - 1} in lexicographic order.
pub fn index_tuples(n_items: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n_items {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Advance the lexicographic odometer.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n_items - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in (i + 1)..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn tuple_pairs(tuple: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(tuple.len() * (tuple.len() - 1) / 2);
    for a in 0..tuple.len() {
        for b in (a + 1)..tuple.len() {
            out.push((tuple[a], tuple[b]));
        }
    }
    out
}

/// counts[t] = product over t's pairs of the current candidate-list length;
/// tuples whose pairs are all fixed are absent.
pub fn update_counts(table: &AmbiguityTable, tuples: &[Vec<usize>]) -> CountsTable {
    let mut counts = BTreeMap::new();
    for t in tuples {
        let pairs = tuple_pairs(t);
        if pairs.iter().all(|p| table.is_fixed(*p)) {
            continue;
        }
        let mut c: u128 = 1;
        for p in &pairs {
            c = c.saturating_mul(table.list_len(*p) as u128);
        }
        counts.insert(t.clone(), c);
    }
    CountsTable { counts }
}

struct Engine {
    table: AmbiguityTable,
    tuples: Vec<Vec<usize>>,
    n: usize,
    /// Diagonal of the full matrix being assembled.
    diag: Vec<f64>,
    /// Border column index (the isolate) for exact/noisy; None on the sphere.
    border: Option<usize>,
    rank_checks: u64,
    iteration_checks: Vec<u64>,
}

enum Selection {
    /// Exact/sphere: accept the first candidate of rank <= n.
    FirstRankAtMost,
    /// Noisy: evaluate everything, keep the argmin of |lambda_{n+1}|.
    MinEckartYoung,
}

impl Engine {
    /// Local dense minor for an index tuple (plus border if present), with
    /// fixed and diagonal entries prefilled. Returns the minor template and
    /// the (row, col) slots of each free pair in enumeration order.
    fn minor_template(
        &self,
        tuple: &[usize],
        free: &[(usize, usize)],
    ) -> (Vec<Vec<f64>>, Vec<(usize, usize)>) {
        let mut idx: Vec<usize> = tuple.to_vec();
        if let Some(b) = self.border {
            idx.push(b);
        }
        let k = idx.len();
        let mut minor = vec![vec![0.0; k]; k];
        for a in 0..k {
            minor[a][a] = self.diag[idx[a]];
            for b in (a + 1)..k {
                let (i, j) = (idx[a], idx[b]);
                let v = if Some(j) == self.border {
                    self.table.alpha[i]
                } else {
                    let pair = (i.min(j), i.max(j));
                    match self.table.fixed_index(pair) {
                        Some(fi) => self.table.pool_value(fi),
                        None => 0.0, // filled per candidate
                    }
                };
                minor[a][b] = v;
                minor[b][a] = v;
            }
        }
        let slots = free
            .iter()
            .map(|&(i, j)| {
                let a = idx.iter().position(|&v| v == i).expect("tuple member");
                let b = idx.iter().position(|&v| v == j).expect("tuple member");
                (a.min(b), a.max(b))
            })
            .collect();
        (minor, slots)
    }

    /// True when the filled minor certainly has numerical rank > n: its
    /// determinant exceeds what any spectrum passing the rank test allows
    /// (|det| <= tol * max(1, s) * s^n with s an upper bound on |lambda| by
    /// Gershgorin). Never rejects a minor the eigenvalue test would accept.
    fn det_filter_rejects(minor: &[Vec<f64>], n: usize, scratch: &mut Vec<Vec<f64>>) -> bool {
        let mut s: f64 = 0.0;
        for row in minor {
            s = s.max(row.iter().map(|v| v.abs()).sum());
        }
        scratch.clear();
        scratch.extend(minor.iter().cloned());
        let det = det_in_place(scratch);
        det.abs() > ENGINE_RANK_TOL * s.max(1.0) * s.powi(n as i32)
    }

    fn eval_rank_at_most(minor: &[Vec<f64>], n: usize, scratch: &mut Vec<Vec<f64>>) -> bool {
        if Self::det_filter_rejects(minor, n, scratch) {
            return false;
        }
        let sym = SymMatrix::from_rows(minor);
        numerical_rank(&sym, ENGINE_RANK_TOL).map_or(false, |r| r <= n)
    }

    /// |lambda_{n+1}| with eigenvalues sorted descending (signed): the
    /// Eckart-Young distance used by the noisy selection.
    fn eval_eckart_young(minor: &[Vec<f64>], n: usize) -> f64 {
        let sym = SymMatrix::from_rows(minor);
        let values = eigenvalues_sym(&sym).expect("finite minor");
        values[n].abs()
    }

    fn run(&mut self, selection: Selection) -> Result<()> {
        loop {
            let counts = update_counts(&self.table, &self.tuples);
            let Some(tuple) = counts.argmin().map(|t| t.to_vec()) else {
                return Ok(());
            };
            let pairs = tuple_pairs(&tuple);
            let free: Vec<(usize, usize)> = pairs
                .iter()
                .copied()
                .filter(|p| !self.table.is_fixed(*p))
                .collect();
            let lists: Vec<Vec<usize>> = free
                .iter()
                .map(|p| self.table.candidates(*p).to_vec())
                .collect();
            let (mut minor, slots) = self.minor_template(&tuple, &free);

            let mut checks: u64 = 0;
            let mut winner: Option<Vec<usize>> = None;
            let mut best_score = f64::INFINITY;
            let mut lu_scratch: Vec<Vec<f64>> = Vec::with_capacity(minor.len());

            let mut chosen: Vec<usize> = Vec::with_capacity(free.len());
            enumerate_injective(&lists, &mut chosen, &mut |assignment: &[usize]| {
                for (slot, &pool_idx) in slots.iter().zip(assignment) {
                    let v = self.table.pool_value(pool_idx);
                    minor[slot.0][slot.1] = v;
                    minor[slot.1][slot.0] = v;
                }
                checks += 1;
                match selection {
                    Selection::FirstRankAtMost => {
                        if Self::eval_rank_at_most(&minor, self.n, &mut lu_scratch) {
                            winner = Some(assignment.to_vec());
                            true
                        } else {
                            false
                        }
                    }
                    Selection::MinEckartYoung => {
                        let score = Self::eval_eckart_young(&minor, self.n);
                        if score < best_score {
                            best_score = score;
                            winner = Some(assignment.to_vec());
                        }
                        false
                    }
                }
            });

            self.rank_checks += checks;
            self.iteration_checks.push(checks);
            let Some(assignment) = winner else {
                return Err(Error::AssemblyFailed {
                    tuple,
                    remaining: self.table.remaining_pool(),
                });
            };
            for (pair, pool_idx) in free.iter().zip(assignment) {
                self.table.fix(*pair, pool_idx);
            }
        }
    }

    fn assembled_gram(&self, m: usize) -> GramMatrix {
        let mut sym = SymMatrix::zeros(m);
        for i in 0..m {
            sym.set(i, i, self.diag[i]);
        }
        if let Some(b) = self.border {
            for i in 0..b {
                sym.set(i, b, self.table.alpha[i]);
            }
        }
        for pair in self.table.pairs().collect::<Vec<_>>() {
            if let Some(v) = self.table.fixed_value(pair) {
                sym.set(pair.0, pair.1, v);
            }
        }
        GramMatrix {
            sym,
            target_rank: self.n,
        }
    }
}

/// Depth-first product over per-pair candidate lists, skipping assignments
/// that reuse a pool element. Lexicographic over the (already sorted) lists;
/// the visitor returns true to stop early.
fn enumerate_injective(
    lists: &[Vec<usize>],
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if chosen.len() == lists.len() {
        return visit(chosen);
    }
    let depth = chosen.len();
    for &idx in &lists[depth] {
        if chosen.contains(&idx) {
            continue;
        }
        chosen.push(idx);
        let stop = enumerate_injective(lists, chosen, visit);
        chosen.pop();
        if stop {
            return true;
        }
    }
    false
}

fn validate_sizes(m: usize, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("target rank {n} < 2")));
    }
    if m <= n {
        return Err(Error::InvalidInput(format!(
            "need more points than dimensions (m = {m}, n = {n})"
        )));
    }
    Ok(())
}

fn finish(engine: Engine, m: usize, n: usize, mode: Mode, strict: bool) -> Result<RecoveryResult> {
    let gram = engine.assembled_gram(m);
    let config = match rank_truncated_factor(&gram.sym, n, RANK_REL_TOL) {
        Ok(cols) => Some(PointConfig::new(n, cols)?),
        Err(e @ (Error::NotPsd { .. } | Error::RankTooHigh { .. })) => {
            if strict {
                return Err(e);
            }
            None
        }
        Err(e) => return Err(e),
    };
    let spectrum = eigenvalues_sym(&gram.sym)?;
    let residual = spectrum[n].abs();
    Ok(RecoveryResult {
        gram,
        config,
        iterations: engine.iteration_checks.len() as u64,
        rank_checks: engine.rank_checks,
        mode,
        residual,
        iteration_checks: engine.iteration_checks,
    })
}

/// Exact recovery for a moment with one isolated point and m-1 points of a
/// common norm. Builds the ambiguity table, then fixes one bordered
/// (n+1)x(n+1) principal minor per iteration.
pub fn assemble_exact(sm: &SecondMoment, n: usize) -> Result<RecoveryResult> {
    let m = sm.m();
    validate_sizes(m, n)?;
    let table = preprocess(sm)?;
    let mut diag = vec![table.class_norm_sq; m];
    diag[m - 1] = table.isolate_norm_sq;
    let mut engine = Engine {
        table,
        tuples: index_tuples(m - 1, n),
        n,
        diag,
        border: Some(m - 1),
        rank_checks: 0,
        iteration_checks: Vec::new(),
    };
    engine.run(Selection::FirstRankAtMost)?;
    finish(engine, m, n, Mode::Exact, true)
}

/// Recovery when every point shares one norm: no pre-processing is possible,
/// candidate lists start as the full pool, tuples grow to size n+1 and the
/// minors carry no border.
pub fn assemble_sphere(sm: &SecondMoment, n: usize) -> Result<RecoveryResult> {
    let m = sm.m();
    validate_sizes(m, n)?;
    let profile = norm_profile(sm)?;
    if profile.classes.len() != 1 {
        return Err(Error::ProfileMismatch {
            detected: profile.describe(),
            expected: "a single norm class of size m".to_string(),
        });
    }
    let s2 = profile.classes[0].value;
    let pool: Vec<f64> = {
        let mut v: Vec<f64> = sm.triples().iter().map(|t| t.ip).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let table = AmbiguityTable::with_uniform_lists(m, s2, s2, Vec::new(), pool, m);
    let mut engine = Engine {
        table,
        tuples: index_tuples(m, n + 1),
        n,
        diag: vec![s2; m],
        border: None,
        rank_checks: 0,
        iteration_checks: Vec::new(),
    };
    engine.run(Selection::FirstRankAtMost)?;
    finish(engine, m, n, Mode::Sphere, true)
}

/// Noisy recovery: same skeleton as `assemble_exact` but every candidate in
/// a tuple's product set is evaluated and the minimizer of the Eckart-Young
/// distance |lambda_{n+1}| is fixed unconditionally.
///
/// `sigma_hat` is the caller's noise-scale estimate: positive values run the
/// Cayley-Menger pre-filter with its interval widened by 6 sigma_hat, zero
/// skips the filter and ranks every pool value.
pub fn assemble_noisy(sm: &SecondMoment, n: usize, sigma_hat: f64) -> Result<RecoveryResult> {
    let m = sm.m();
    validate_sizes(m, n)?;
    if !(sigma_hat >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma_hat must be non-negative, got {sigma_hat}"
        )));
    }
    let table = if sigma_hat > 0.0 {
        preprocess_with_slack(sm, 6.0 * sigma_hat)?
    } else {
        let parts = IsolateParts::extract(sm)?;
        AmbiguityTable::with_uniform_lists(
            m,
            parts.class_norm_sq,
            parts.isolate_norm_sq,
            parts.alpha,
            parts.pool,
            m - 1,
        )
    };
    let mut diag = vec![table.class_norm_sq; m];
    diag[m - 1] = table.isolate_norm_sq;
    let mut engine = Engine {
        table,
        tuples: index_tuples(m - 1, n),
        n,
        diag,
        border: Some(m - 1),
        rank_checks: 0,
        iteration_checks: Vec::new(),
    };
    engine.run(Selection::MinEckartYoung)?;
    finish(engine, m, n, Mode::Noisy, false)
}
