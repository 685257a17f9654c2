//! Forward model: second moments from configurations, distance extraction,
//! Gram-space noise injection and reproducible sampling of test geometries.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    genericity_check, norm_profile, GramMatrix, NormProfile, PointConfig, SecondMoment, Triple,
};
use crate::rng::Rng;

/// The measurement: every unordered pair's (norm, norm, inner product) triple.
pub fn second_moment(cfg: &PointConfig) -> SecondMoment {
    moment_from_gram(&cfg.gram())
}

/// Triples extracted from an assembled (possibly noisy) Gram matrix. This is
/// how noisy moments are produced: perturb in Gram space, then re-extract.
pub fn moment_from_gram(gram: &GramMatrix) -> SecondMoment {
    let m = gram.m();
    let mut triples = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            triples.push(Triple::new(
                gram.sym.get(i, i),
                gram.sym.get(j, j),
                gram.sym.get(i, j),
            ));
        }
    }
    SecondMoment::new(triples).expect("gram always yields a well-formed moment")
}

/// Squared interpoint distances partitioned by unordered norm-class pair.
#[derive(Debug, Clone)]
pub struct DistanceSets {
    pub profile: NormProfile,
    /// Keyed by (class index, class index) with the first <= second; values
    /// sorted ascending.
    pub sets: BTreeMap<(usize, usize), Vec<f64>>,
}

/// Reorganize the moment as distance multisets D(r1, r2), one per unordered
/// pair of norm classes, via d^2 = |v_i|^2 + |v_j|^2 - 2 <v_i, v_j>.
pub fn distances_from_moment(sm: &SecondMoment) -> Result<DistanceSets> {
    let profile = norm_profile(sm)?;
    let mut sets: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for t in sm.triples() {
        let c1 = profile.class_of(t.d1).ok_or_else(|| {
            Error::MalformedMoment(format!("norm {} matches no class", t.d1))
        })?;
        let c2 = profile.class_of(t.d2).ok_or_else(|| {
            Error::MalformedMoment(format!("norm {} matches no class", t.d2))
        })?;
        let key = (c1.min(c2), c1.max(c2));
        let mut d2 = t.squared_distance();
        if d2 < 0.0 {
            if d2 < -1e-9 {
                return Err(Error::MalformedMoment(format!(
                    "negative squared distance {d2}"
                )));
            }
            d2 = 0.0;
        }
        sets.entry(key).or_default().push(d2);
    }
    for v in sets.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    Ok(DistanceSets { profile, sets })
}

/// Add a symmetric perturbation with zero diagonal and off-diagonal entries
/// i.i.d. Gaussian with variance `sigma2`. Deterministic per seed.
pub fn add_gram_noise(gram: &GramMatrix, sigma2: f64, seed: u64) -> GramMatrix {
    assert!(sigma2 >= 0.0, "variance must be non-negative");
    let mut out = gram.clone();
    if sigma2 == 0.0 {
        return out;
    }
    let sd = sigma2.sqrt();
    let mut rng = Rng::seeded(seed);
    let m = gram.m();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = gram.sym.get(i, j) + sd * rng.gaussian();
            out.sym.set(i, j, v);
        }
    }
    out
}

const SAMPLE_RETRIES: usize = 100;

/// Sample a configuration with the requested norm structure: for each
/// (radius, count) entry, `count` points uniform on the radius-sphere, except
/// that a single-count class is pinned at radius * e_1 (the isolated-point
/// convention). Resamples until the genericity checks pass.
pub fn sample_config(n: usize, norm_spec: &[(f64, usize)], seed: u64) -> Result<PointConfig> {
    if norm_spec.is_empty() || norm_spec.iter().any(|&(r, _)| !(r > 0.0)) {
        return Err(Error::InvalidInput(
            "norm spec must be non-empty with positive radii".to_string(),
        ));
    }
    let mut rng = Rng::seeded(seed);
    // Pin a class at radius * e_1 only when it is the unique singleton;
    // several pinned classes would all sit on one axis.
    let singletons = norm_spec.iter().filter(|&&(_, c)| c == 1).count();
    for _ in 0..SAMPLE_RETRIES {
        let mut points = Vec::new();
        for &(radius, count) in norm_spec {
            if count == 1 && singletons == 1 {
                let mut p = vec![0.0; n];
                p[0] = radius;
                points.push(p);
                continue;
            }
            for _ in 0..count {
                points.push(random_sphere_point(n, radius, &mut rng));
            }
        }
        let cfg = PointConfig::new(n, points)?;
        if genericity_check(&cfg).is_generic() {
            return Ok(cfg);
        }
    }
    Err(Error::DegenerateSampling(SAMPLE_RETRIES))
}

fn random_sphere_point(n: usize, radius: f64, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.iter().map(|x| radius * x / norm).collect();
        }
    }
}

/// Random orthogonal matrix (rows) via Gram-Schmidt on a Gaussian matrix.
/// Used by tests and experiments to exercise O(n)-invariance.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gaussian()).collect())
            .collect();
        let mut ok = true;
        for i in 0..n {
            for k in 0..i {
                let proj: f64 = rows[i].iter().zip(&rows[k]).map(|(a, b)| a * b).sum();
                for c in 0..n {
                    rows[i][c] -= proj * rows[k][c];
                }
            }
            let norm: f64 = rows[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for c in 0..n {
                rows[i][c] /= norm;
            }
        }
        if ok {
            return rows;
        }
    }
}

/// Apply an orthogonal map (rows) to every point.
pub fn apply_orthogonal(cfg: &PointConfig, q: &[Vec<f64>]) -> PointConfig {
    let n = cfg.n();
    let points = cfg
        .points()
        .iter()
        .map(|p| {
            (0..n)
                .map(|r| q[r].iter().zip(p).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    PointConfig::new(n, points).expect("orthogonal image stays valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn sorted_ips(sm: &SecondMoment) -> Vec<f64> {
        let mut v: Vec<f64> = sm.triples().iter().map(|t| t.ip).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn two_orthonormal_points() {
        let cfg =
            PointConfig::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sm = second_moment(&cfg);
        assert_eq!(sm.triples().len(), 1);
        let t = sm.triples()[0];
        assert_eq!((t.d1, t.d2, t.ip), (1.0, 1.0, 0.0));
    }

    #[test]
    fn fixture_gram_ip_multiset() {
        // Gram matrix of four unit vectors; the moment must carry exactly its
        // off-diagonal entries, all tagged with unit norms.
        let a = SymMatrix::from_rows(&[
            vec![1.0, 0.356348, 0.720577, 0.57735],
            vec![0.356348, 1.0, 0.470757, -0.555492],
            vec![0.720577, 0.470757, 1.0, 0.194145],
            vec![0.57735, -0.555492, 0.194145, 1.0],
        ]);
        let sm = moment_from_gram(&GramMatrix {
            sym: a,
            target_rank: 3,
        });
        let mut want = vec![0.356348, 0.720577, 0.57735, 0.470757, -0.555492, 0.194145];
        want.sort_by(f64::total_cmp);
        let got = sorted_ips(&sm);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        for t in sm.triples() {
            assert!((t.d1 - 1.0).abs() < 1e-12 && (t.d2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_invariant_under_orthogonal_maps() {
        let mut rng = Rng::seeded(4);
        for trial in 0..10 {
            let cfg = sample_config(3, &[(1.0, 5), (2.0, 1)], 1000 + trial).unwrap();
            let q = random_orthogonal(3, &mut rng);
            let rotated = apply_orthogonal(&cfg, &q);
            // Rotation perturbs norms at the last ulp, which can reorder the
            // canonical (d1, d2, ip) sort; pair triples by their generically
            // distinct inner products instead.
            let mut a = second_moment(&cfg).triples().to_vec();
            let mut b = second_moment(&rotated).triples().to_vec();
            a.sort_by(|x, y| x.ip.total_cmp(&y.ip));
            b.sort_by(|x, y| x.ip.total_cmp(&y.ip));
            for (ta, tb) in a.iter().zip(&b) {
                assert!((ta.d1 - tb.d1).abs() < 1e-10);
                assert!((ta.d2 - tb.d2).abs() < 1e-10);
                assert!((ta.ip - tb.ip).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moment_invariant_under_reordering() {
        let cfg = sample_config(3, &[(1.0, 6)], 12).unwrap();
        let order: Vec<usize> = vec![3, 1, 5, 0, 4, 2];
        let a = second_moment(&cfg);
        let b = second_moment(&cfg.reordered(&order));
        assert_eq!(a, b);
    }

    #[test]
    fn distance_round_trip_matches_coordinates() {
        let cfg = sample_config(3, &[(1.0, 5), (2.0, 1)], 77).unwrap();
        let sets = distances_from_moment(&second_moment(&cfg)).unwrap();
        let mut direct: Vec<f64> = Vec::new();
        for i in 0..cfg.m() {
            for j in (i + 1)..cfg.m() {
                direct.push(
                    cfg.point(i)
                        .iter()
                        .zip(cfg.point(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum(),
                );
            }
        }
        direct.sort_by(f64::total_cmp);
        let mut from_moment: Vec<f64> = sets.sets.values().flatten().copied().collect();
        from_moment.sort_by(f64::total_cmp);
        assert_eq!(direct.len(), from_moment.len());
        for (a, b) in direct.iter().zip(&from_moment) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn distance_simple_formulas() {
        let t = Triple::new(1.0, 1.0, 0.0);
        assert!((t.squared_distance() - 2.0).abs() < 1e-15);
        let t = Triple::new(1.0, 4.0, 1.0);
        assert!((t.squared_distance() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_ranges_for_unit_cloud_with_isolate() {
        let cfg = sample_config(3, &[(1.0, 100), (2.0, 1)], 42).unwrap();
        let sets = distances_from_moment(&second_moment(&cfg)).unwrap();
        // Classes sorted descending: class 0 is the isolate (4.0), class 1 the
        // unit sphere.
        let same = &sets.sets[&(1, 1)];
        let cross = &sets.sets[&(0, 1)];
        assert_eq!(same.len(), 100 * 99 / 2);
        assert_eq!(cross.len(), 100);
        assert!(same.iter().all(|&d2| (0.0..=4.0 + 1e-9).contains(&d2)));
        assert!(cross.iter().all(|&d2| (1.0 - 1e-9..=9.0 + 1e-9).contains(&d2)));
        // Spherical concentration: most unit-pair distances lie in [1, 2].
        let inside = same
            .iter()
            .filter(|&&d2| (1.0..=4.0).contains(&d2))
            .count();
        assert!(inside as f64 > 0.6 * same.len() as f64);
    }

    #[test]
    fn noise_zero_is_identity() {
        let cfg = sample_config(3, &[(1.0, 4), (2.0, 1)], 8).unwrap();
        let gram = cfg.gram();
        let noisy = add_gram_noise(&gram, 0.0, 123);
        assert_eq!(gram.sym.max_diff(&noisy.sym), 0.0);
    }

    #[test]
    fn noise_keeps_diagonal_and_tracks_seed() {
        let cfg = sample_config(3, &[(3.0, 5), (4.0, 1)], 8).unwrap();
        let gram = cfg.gram();
        let a = add_gram_noise(&gram, 1e-2, 5);
        let b = add_gram_noise(&gram, 1e-2, 5);
        let c = add_gram_noise(&gram, 1e-2, 6);
        assert_eq!(a.sym.max_diff(&b.sym), 0.0);
        assert!(a.sym.max_diff(&c.sym) > 0.0);
        for i in 0..gram.m() {
            assert_eq!(a.sym.get(i, i), gram.sym.get(i, i));
        }
    }

    #[test]
    fn noise_sample_variance_is_calibrated() {
        // >= 1000 off-diagonal entries: m = 50 gives 1225.
        let m = 50;
        let mut sym = SymMatrix::zeros(m);
        for i in 0..m {
            sym.set(i, i, 1.0);
        }
        let gram = GramMatrix {
            sym,
            target_rank: 3,
        };
        let sigma2 = 1e-2;
        let noisy = add_gram_noise(&gram, sigma2, 99);
        let mut sum2 = 0.0;
        let mut count = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                sum2 += noisy.sym.get(i, j).powi(2);
                count += 1;
            }
        }
        let sample_var = sum2 / count as f64;
        // Var of the variance estimator is 2 sigma^4 / N; allow 3 sigma.
        let sd = (2.0 * sigma2 * sigma2 / count as f64).sqrt();
        assert!(
            (sample_var - sigma2).abs() <= 3.0 * sd,
            "sample variance {sample_var} vs {sigma2}"
        );
    }

    #[test]
    fn sample_config_norms_and_isolate() {
        let cfg = sample_config(3, &[(1.0, 5), (2.0, 1)], 7).unwrap();
        assert_eq!(cfg.m(), 6);
        for i in 0..5 {
            assert!((cfg.norm_sq(i).sqrt() - 1.0).abs() < 1e-12);
        }
        assert_eq!(cfg.point(5), &[2.0, 0.0, 0.0]);

        let noisy_geom = sample_config(3, &[(3.0, 5), (4.0, 1)], 7).unwrap();
        for i in 0..5 {
            assert!((noisy_geom.norm_sq(i).sqrt() - 3.0).abs() < 1e-12);
        }
        assert_eq!(noisy_geom.point(5), &[4.0, 0.0, 0.0]);
    }
}
