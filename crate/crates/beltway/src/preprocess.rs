//! Cayley-Menger pre-processing: bound each unknown same-class inner product
//! by the two positive roots of the tetrahedron polynomial in the unknown
//! edge, and collect the surviving candidates per pair into ambiguity lists.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::biquadratic_positive_roots;
use crate::model::{norm_profile, SecondMoment, CLUSTER_TOL};

/// Lower/upper bounds on the distance between two points of squared norms
/// `aii`, `ajj` given their (labeled) squared distances `dim2`, `djm2` to a
/// third point of squared norm `amm`. The bounds are the two positive roots
/// of the Cayley-Menger determinant of {0, v_i, v_j, v_m} as a polynomial in
/// the unknown edge, returned as distances.
pub fn cm_bounds(aii: f64, ajj: f64, amm: f64, dim2: f64, djm2: f64) -> Result<(f64, f64)> {
    if !(aii > 0.0 && ajj > 0.0 && amm > 0.0) {
        return Err(Error::InfeasibleGeometry(
            "squared norms must be positive".to_string(),
        ));
    }
    // The root structure needs r distinct from both same-class norms.
    if (amm.sqrt() - aii.sqrt()).abs() <= 1e-9 || (amm.sqrt() - ajj.sqrt()).abs() <= 1e-9 {
        return Err(Error::InfeasibleGeometry(
            "isolated norm coincides with the pair's norm".to_string(),
        ));
    }
    // Both labeled distances must lie in their annulus |r - s| <= d <= r + s.
    let mut dim2 = dim2;
    let mut djm2 = djm2;
    for (d2, s2) in [(&mut dim2, aii), (&mut djm2, ajj)] {
        let r = amm.sqrt();
        let s = s2.sqrt();
        let lo = (r - s) * (r - s);
        let hi = (r + s) * (r + s);
        let slack = 1e-9 * hi.max(1.0);
        if *d2 < lo - slack || *d2 > hi + slack {
            return Err(Error::InfeasibleGeometry(format!(
                "labeled squared distance {d2} outside annulus [{lo}, {hi}]"
            )));
        }
        // Boundary hits within tolerance are clamped into range.
        *d2 = d2.clamp(lo, hi);
    }

    // Biquadratic coefficients of det(CM) in Z = z^2 for the edge layout
    // (a, b, c, x, y, z) = (|v_i|, |v_j|, |v_m|, d_jm, d_im, d_ij):
    // expansion of the bordered 5x5 determinant in the unknown Z.
    let (a, b, c, x, y) = (aii, ajj, amm, djm2, dim2);
    let alpha = -2.0 * c;
    let beta = -2.0 * a * b + 2.0 * a * c + 2.0 * a * x + 2.0 * b * c + 2.0 * b * y
        - 2.0 * c * c
        + 2.0 * c * x
        + 2.0 * c * y
        - 2.0 * x * y;
    let gamma = -2.0
        * (a * a * x - a * b * x - a * b * y - a * c * x + a * c * y + a * x * x - a * x * y
            + b * b * y
            + b * c * x
            - b * c * y
            - b * x * y
            + b * y * y);
    biquadratic_positive_roots(alpha, beta, gamma).map_err(|_| {
        Error::InfeasibleGeometry("Cayley-Menger polynomial has no positive root pair".to_string())
    })
}

/// Ambiguity state for one assembly run: the labeled cross inner products,
/// the same-class candidate pool, per-pair candidate lists and consumption.
///
/// Pool elements are individual multiset members (ties stay distinct slots),
/// so a value with multiplicity k can be consumed at most k times. Candidate
/// lists hold pool indices sorted ascending by value and only ever shrink.
#[derive(Debug, Clone)]
pub struct AmbiguityTable {
    m: usize,
    /// Shared squared norm of the non-isolated class.
    pub class_norm_sq: f64,
    /// Squared norm of the isolated point.
    pub isolate_norm_sq: f64,
    /// Cross inner products assigned to indices 0..m-2 in descending order.
    pub alpha: Vec<f64>,
    pool: Vec<f64>,
    consumed: Vec<bool>,
    valid: BTreeMap<(usize, usize), Vec<usize>>,
    fixed: BTreeMap<(usize, usize), usize>,
}

impl AmbiguityTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pool(&self) -> &[f64] {
        &self.pool
    }

    pub fn pool_value(&self, idx: usize) -> f64 {
        self.pool[idx]
    }

    pub fn is_consumed(&self, idx: usize) -> bool {
        self.consumed[idx]
    }

    pub fn remaining_pool(&self) -> usize {
        self.consumed.iter().filter(|&&c| !c).count()
    }

    /// Current candidate pool indices for an unordered pair (i, j), i < j.
    pub fn candidates(&self, pair: (usize, usize)) -> &[usize] {
        &self.valid[&pair]
    }

    pub fn fixed_index(&self, pair: (usize, usize)) -> Option<usize> {
        self.fixed.get(&pair).copied()
    }

    pub fn fixed_value(&self, pair: (usize, usize)) -> Option<f64> {
        self.fixed_index(pair).map(|i| self.pool[i])
    }

    pub fn is_fixed(&self, pair: (usize, usize)) -> bool {
        self.fixed.contains_key(&pair)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.valid.keys().copied()
    }

    /// Effective list length: 1 once fixed, otherwise the current candidates.
    pub fn list_len(&self, pair: (usize, usize)) -> usize {
        if self.is_fixed(pair) {
            1
        } else {
            self.valid[&pair].len()
        }
    }

    pub fn min_list_len(&self) -> usize {
        self.valid
            .iter()
            .map(|(p, v)| if self.fixed.contains_key(p) { 1 } else { v.len() })
            .min()
            .unwrap_or(0)
    }

    /// Fix a pair to a pool element: collapse its list, consume the element
    /// and drop it from every other unfixed list.
    pub fn fix(&mut self, pair: (usize, usize), pool_idx: usize) {
        debug_assert!(!self.consumed[pool_idx]);
        debug_assert!(!self.is_fixed(pair));
        self.consumed[pool_idx] = true;
        self.fixed.insert(pair, pool_idx);
        self.valid.insert(pair, vec![pool_idx]);
        for (p, list) in self.valid.iter_mut() {
            if *p != pair && !self.fixed.contains_key(p) {
                list.retain(|&k| k != pool_idx);
            }
        }
    }

    /// Multiset of consumed values.
    pub fn used(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .consumed
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(k, _)| self.pool[k])
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Table whose candidate lists start as the whole pool, for the two
    /// situations without a Cayley-Menger filter: sphere assembly (pairs over
    /// all m points, empty alpha) and noisy assembly with unknown noise scale
    /// (pairs over the m-1 same-class points).
    pub fn with_uniform_lists(
        m: usize,
        class_norm_sq: f64,
        isolate_norm_sq: f64,
        alpha: Vec<f64>,
        pool: Vec<f64>,
        n_points: usize,
    ) -> Self {
        let all: Vec<usize> = (0..pool.len()).collect();
        let mut valid = BTreeMap::new();
        for i in 0..n_points {
            for j in (i + 1)..n_points {
                valid.insert((i, j), all.clone());
            }
        }
        let consumed = vec![false; pool.len()];
        AmbiguityTable {
            m,
            class_norm_sq,
            isolate_norm_sq,
            alpha,
            pool,
            consumed,
            valid,
            fixed: BTreeMap::new(),
        }
    }

    #[cfg(test)]
    pub(crate) fn truncate_list_for_test(&mut self, pair: (usize, usize), len: usize) {
        self.valid.get_mut(&pair).unwrap().truncate(len);
    }
}

/// Exact-mode pre-processing with the default rounding slack.
pub fn preprocess(sm: &SecondMoment) -> Result<AmbiguityTable> {
    preprocess_with_slack(sm, 0.0)
}

/// Pre-processing with the candidate interval widened by `extra_slack` (in
/// distance units) on each side; used by the noisy engine with 6 sigma-hat.
pub fn preprocess_with_slack(sm: &SecondMoment, extra_slack: f64) -> Result<AmbiguityTable> {
    let parts = IsolateParts::extract(sm)?;
    let m = sm.m();
    let s2 = parts.class_norm_sq;
    let r2 = parts.isolate_norm_sq;

    let mut valid = BTreeMap::new();
    for i in 0..(m - 1) {
        for j in (i + 1)..(m - 1) {
            let dim2 = s2 + r2 - 2.0 * parts.alpha[i];
            let djm2 = s2 + r2 - 2.0 * parts.alpha[j];
            let (lo, hi) = cm_bounds(s2, s2, r2, dim2, djm2)?;
            // Rounding slack keeps the true distance from being excluded.
            let slack = 1e-7 * (1.0 + hi) + extra_slack;
            let d_lo = (lo - slack).max(0.0);
            let d_hi = hi + slack;
            // d^2 = 2 s^2 - 2 ip is decreasing in ip, so a distance window
            // maps to an ip window and candidates are one contiguous run of
            // the ascending pool.
            let ip_lo = s2 - 0.5 * d_hi * d_hi;
            let ip_hi = s2 - 0.5 * d_lo * d_lo;
            let start = parts.pool.partition_point(|&v| v < ip_lo);
            let end = parts.pool.partition_point(|&v| v <= ip_hi);
            if start >= end {
                return Err(Error::InfeasibleMoment(i, j));
            }
            valid.insert((i, j), (start..end).collect::<Vec<usize>>());
        }
    }

    let consumed = vec![false; parts.pool.len()];
    Ok(AmbiguityTable {
        m,
        class_norm_sq: s2,
        isolate_norm_sq: r2,
        alpha: parts.alpha,
        pool: parts.pool,
        consumed,
        valid,
        fixed: BTreeMap::new(),
    })
}

/// Moment split into the isolated-point pieces required by Algorithms 1-3:
/// alpha labels (descending cross inner products) and the same-class pool.
pub struct IsolateParts {
    pub class_norm_sq: f64,
    pub isolate_norm_sq: f64,
    pub alpha: Vec<f64>,
    /// Ascending same-class inner products, one slot per multiset member.
    pub pool: Vec<f64>,
}

impl IsolateParts {
    pub fn extract(sm: &SecondMoment) -> Result<IsolateParts> {
        let profile = norm_profile(sm)?;
        let m = sm.m();
        let expected = "one isolated class plus one class of size m-1".to_string();
        if profile.classes.len() != 2 {
            return Err(Error::ProfileMismatch {
                detected: profile.describe(),
                expected,
            });
        }
        let iso = profile.isolated_class().ok_or_else(|| Error::ProfileMismatch {
            detected: profile.describe(),
            expected: expected.clone(),
        })?;
        let other = 1 - iso;
        if profile.classes[other].count != m - 1 {
            return Err(Error::ProfileMismatch {
                detected: profile.describe(),
                expected,
            });
        }
        let r2 = profile.classes[iso].value;
        let s2 = profile.classes[other].value;

        let mut alpha = Vec::with_capacity(m - 1);
        let mut pool = Vec::with_capacity((m - 1) * (m - 2) / 2);
        for t in sm.triples() {
            let near = |v: f64, c: f64| (v - c).abs() <= CLUSTER_TOL;
            if near(t.d1, s2) && near(t.d2, s2) {
                pool.push(t.ip);
            } else if (near(t.d1, s2) && near(t.d2, r2)) || (near(t.d1, r2) && near(t.d2, s2)) {
                alpha.push(t.ip);
            } else {
                return Err(Error::MalformedMoment(format!(
                    "triple norms ({}, {}) match no class pair",
                    t.d1, t.d2
                )));
            }
        }
        if alpha.len() != m - 1 || pool.len() != (m - 1) * (m - 2) / 2 {
            return Err(Error::MalformedMoment(format!(
                "cross/same split {}/{} does not match m = {m}",
                alpha.len(),
                pool.len()
            )));
        }
        // Arbitrary-but-fixed labeling: index i gets the i-th largest cross
        // inner product. Any assignment is equivalent after reordering.
        alpha.sort_by(|a, b| b.total_cmp(a));
        pool.sort_by(f64::total_cmp);
        Ok(IsolateParts {
            class_norm_sq: s2,
            isolate_norm_sq: r2,
            alpha,
            pool,
        })
    }
}
