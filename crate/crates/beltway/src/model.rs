//! Domain types shared by every algorithm: point configurations, Gram
//! matrices, second moments, norm profiles and genericity checks.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Absolute tolerance for grouping equal norms / equal triples. The noise
/// model leaves diagonals exact, so the same tolerance serves both modes.
pub const CLUSTER_TOL: f64 = 1e-7;

/// An ordered list of m points in R^n (the columns of X).
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    n: usize,
    points: Vec<Vec<f64>>,
}

impl PointConfig {
    pub fn new(n: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("ambient dimension {n} < 2")));
        }
        if points.is_empty() {
            return Err(Error::InvalidInput("no points".to_string()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::InvalidInput(format!(
                    "point {i} has {} coordinates, expected {n}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(PointConfig { n, points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.dot(i, i)
    }

    pub fn gram(&self) -> GramMatrix {
        let m = self.m();
        let mut sym = SymMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                sym.set(i, j, self.dot(i, j));
            }
        }
        GramMatrix {
            sym,
            target_rank: self.n,
        }
    }

    /// Reorder points; `order[k]` gives the source index of output point k.
    pub fn reordered(&self, order: &[usize]) -> PointConfig {
        PointConfig {
            n: self.n,
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// An m x m Gram matrix together with the rank its configuration should have.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub sym: SymMatrix,
    pub target_rank: usize,
}

impl GramMatrix {
    pub fn m(&self) -> usize {
        self.sym.dim()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.sym.get(i, i)).collect()
    }
}

/// One measurement triple (|v_i|^2, |v_j|^2, <v_i, v_j>), canonically oriented
/// so that d1 <= d2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub d1: f64,
    pub d2: f64,
    pub ip: f64,
}

impl Triple {
    pub fn new(a: f64, b: f64, ip: f64) -> Self {
        let (d1, d2) = if a <= b { (a, b) } else { (b, a) };
        Triple { d1, d2, ip }
    }

    pub fn squared_distance(&self) -> f64 {
        self.d1 + self.d2 - 2.0 * self.ip
    }

    fn cmp_key(&self, other: &Triple) -> std::cmp::Ordering {
        self.d1
            .total_cmp(&other.d1)
            .then(self.d2.total_cmp(&other.d2))
            .then(self.ip.total_cmp(&other.ip))
    }
}

/// The unordered multiset of m(m-1)/2 triples a second moment determines.
///
/// Triples are stored in a canonical sorted order so no pair labeling can leak
/// through construction order; serialization shuffles them separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    m: usize,
    triples: Vec<Triple>,
}

impl SecondMoment {
    pub fn new(triples: Vec<Triple>) -> Result<Self> {
        let t = triples.len();
        // t = m(m-1)/2 must have an integer solution m >= 2.
        let m = (1.0 + (1.0 + 8.0 * t as f64).sqrt()) / 2.0;
        let m_int = m.round() as usize;
        if t == 0 || m_int * (m_int - 1) / 2 != t {
            return Err(Error::MalformedMoment(format!(
                "{t} triples does not equal m(m-1)/2 for any integer m"
            )));
        }
        for tr in &triples {
            if !(tr.d1.is_finite() && tr.d2.is_finite() && tr.ip.is_finite()) {
                return Err(Error::MalformedMoment("non-finite triple".to_string()));
            }
            if tr.d1 < 0.0 || tr.d2 < 0.0 {
                return Err(Error::MalformedMoment(
                    "negative squared norm in triple".to_string(),
                ));
            }
        }
        let mut triples = triples;
        triples.sort_by(|a, b| a.cmp_key(b));
        Ok(SecondMoment { m: m_int, triples })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// All 2 * |triples| diagonal (squared-norm) values, one per endpoint.
    pub fn diagonal_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.triples.len());
        for t in &self.triples {
            out.push(t.d1);
            out.push(t.d2);
        }
        out
    }
}

/// One cluster of equal squared norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormClass {
    /// Representative squared norm (cluster mean).
    pub value: f64,
    /// How many points carry it.
    pub count: usize,
}

/// Squared-norm classes sorted descending by value.
#[derive(Debug, Clone, PartialEq)]
pub struct NormProfile {
    pub classes: Vec<NormClass>,
}

impl NormProfile {
    pub fn m(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Largest class size; identifies the V^l stratum the input lives in.
    pub fn max_multiplicity(&self) -> usize {
        self.classes.iter().map(|c| c.count).max().unwrap_or(0)
    }

    /// Index of the unique singleton class, if there is exactly one.
    pub fn isolated_class(&self) -> Option<usize> {
        let singles: Vec<usize> = self
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.count == 1)
            .map(|(i, _)| i)
            .collect();
        if singles.len() == 1 {
            Some(singles[0])
        } else {
            None
        }
    }

    /// Class index whose value matches within the clustering tolerance.
    pub fn class_of(&self, value: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.classes.iter().enumerate() {
            let d = (c.value - value).abs();
            if d <= CLUSTER_TOL && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .classes
            .iter()
            .map(|c| format!("{}x{}", c.value, c.count))
            .collect();
        parts.join(", ")
    }
}

/// Cluster sorted values by gaps larger than `tol`; returns (mean, count).
fn cluster_values(mut values: Vec<f64>, tol: f64) -> Vec<(f64, usize)> {
    values.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            let chunk = &values[start..i];
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            out.push((mean, chunk.len()));
            start = i;
        }
    }
    out
}

/// Recover the squared-norm classes from a moment's diagonal multiset. Every
/// point's norm appears in exactly m-1 triples, so each cluster's count must
/// be a multiple of m-1 and the multiplicities must sum to m.
pub fn norm_profile(sm: &SecondMoment) -> Result<NormProfile> {
    let m = sm.m();
    let clusters = cluster_values(sm.diagonal_values(), CLUSTER_TOL);
    let mut classes = Vec::with_capacity(clusters.len());
    for (value, count) in clusters {
        if count % (m - 1) != 0 {
            return Err(Error::MalformedMoment(format!(
                "norm value {value} appears {count} times, not a multiple of m-1 = {}",
                m - 1
            )));
        }
        classes.push(NormClass {
            value,
            count: count / (m - 1),
        });
    }
    if classes.iter().map(|c| c.count).sum::<usize>() != m {
        return Err(Error::MalformedMoment(
            "class multiplicities do not sum to m".to_string(),
        ));
    }
    classes.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(NormProfile { classes })
}

/// Genericity flags for a configuration. Report only; nothing here is an
/// error because non-generic inputs are legal, they just void the recovery
/// guarantees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericityReport {
    pub pairwise_distinct: bool,
    /// Every 3-subset of points is linearly independent.
    pub three_independent: bool,
    /// No two distinct unordered pairs produce the same triple.
    pub collision_free: bool,
    /// Some distance to an isolated point sits exactly on the annulus
    /// boundary |r - s| or r + s (within 1e-9), where the biquadratic root
    /// structure degenerates.
    pub annulus_boundary_contact: bool,
}

impl GenericityReport {
    pub fn is_generic(&self) -> bool {
        self.pairwise_distinct && self.three_independent && self.collision_free
    }
}

pub fn genericity_check(cfg: &PointConfig) -> GenericityReport {
    let m = cfg.m();

    let mut pairwise_distinct = true;
    'outer: for i in 0..m {
        for j in (i + 1)..m {
            let d2: f64 = cfg
                .point(i)
                .iter()
                .zip(cfg.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= CLUSTER_TOL * CLUSTER_TOL {
                pairwise_distinct = false;
                break 'outer;
            }
        }
    }

    // 3x3 Gram determinant per 3-subset; zero means linear dependence. In
    // the plane any three vectors are dependent, so the flag is only
    // meaningful from n = 3 up.
    let mut three_independent = true;
    'trip: for i in 0..m {
        if cfg.n() < 3 {
            break;
        }
        for j in (i + 1)..m {
            for k in (j + 1)..m {
                let g = [
                    [cfg.dot(i, i), cfg.dot(i, j), cfg.dot(i, k)],
                    [cfg.dot(i, j), cfg.dot(j, j), cfg.dot(j, k)],
                    [cfg.dot(i, k), cfg.dot(j, k), cfg.dot(k, k)],
                ];
                let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
                    - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
                    + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
                if det <= 1e-10 {
                    three_independent = false;
                    break 'trip;
                }
            }
        }
    }

    // Collision check: sort triples by ip and compare within a sliding window.
    let mut triples = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            triples.push(Triple::new(cfg.norm_sq(i), cfg.norm_sq(j), cfg.dot(i, j)));
        }
    }
    triples.sort_by(|a, b| a.ip.total_cmp(&b.ip));
    let mut collision_free = true;
    'coll: for a in 0..triples.len() {
        for b in (a + 1)..triples.len() {
            if triples[b].ip - triples[a].ip > CLUSTER_TOL {
                break;
            }
            if (triples[a].d1 - triples[b].d1).abs() <= CLUSTER_TOL
                && (triples[a].d2 - triples[b].d2).abs() <= CLUSTER_TOL
            {
                collision_free = false;
                break 'coll;
            }
        }
    }

    // Annulus boundary contact: only defined relative to an isolated norm.
    let norm_clusters = cluster_values((0..m).map(|i| cfg.norm_sq(i)).collect(), CLUSTER_TOL);
    let mut annulus_boundary_contact = false;
    let singles: Vec<f64> = norm_clusters
        .iter()
        .filter(|(_, c)| *c == 1)
        .map(|(v, _)| *v)
        .collect();
    if singles.len() == 1 {
        let r = singles[0].sqrt();
        let iso = (0..m)
            .find(|&i| (cfg.norm_sq(i) - singles[0]).abs() <= CLUSTER_TOL)
            .expect("isolated point exists");
        for i in 0..m {
            if i == iso {
                continue;
            }
            let s = cfg.norm_sq(i).sqrt();
            let d: f64 = cfg
                .point(i)
                .iter()
                .zip(cfg.point(iso))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if (d - (r - s).abs()).abs() <= 1e-9 || (d - (r + s)).abs() <= 1e-9 {
                annulus_boundary_contact = true;
            }
        }
    }

    GenericityReport {
        pairwise_distinct,
        three_independent,
        collision_free,
        annulus_boundary_contact,
    }
}
