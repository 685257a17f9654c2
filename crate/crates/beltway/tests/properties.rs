//! Property tests over randomized inputs: spectral reconstruction, rank
//! invariance, root residuals and serialization round trips.

use proptest::prelude::*;

use beltway::forward::{distances_from_moment, sample_config, second_moment};
use beltway::io::{moment_from_csv, moment_to_csv};
use beltway::linalg::{
    biquadratic_positive_roots, cayley_menger_det, eigen_sym, numerical_rank, SymMatrix,
};
use beltway::model::Triple;
use beltway::rng::Rng;

fn sym_matrix(dim: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-10.0..10.0f64, dim * (dim + 1) / 2).prop_map(move |vals| {
        let mut a = SymMatrix::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                a.set(i, j, vals[k]);
                k += 1;
            }
        }
        a
    })
}

proptest! {
    #[test]
    fn eigen_reconstructs_and_is_orthonormal(a in sym_matrix(5)) {
        let eig = eigen_sym(&a).unwrap();
        let scale = a.max_abs().max(1.0);
        for i in 0..5 {
            for j in i..5 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += eig.values[k] * eig.vectors[k][i] * eig.vectors[k][j];
                }
                prop_assert!((s - a.get(i, j)).abs() <= 1e-8 * scale);
            }
        }
        for p in 0..5 {
            for q in p..5 {
                let dot: f64 = (0..5).map(|i| eig.vectors[p][i] * eig.vectors[q][i]).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-10);
            }
        }
        // Sorted non-increasing.
        for w in eig.values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn rank_is_permutation_invariant(a in sym_matrix(6), perm_seed in 0u64..1000) {
        let mut perm: Vec<usize> = (0..6).collect();
        Rng::seeded(perm_seed).shuffle(&mut perm);
        prop_assert_eq!(
            numerical_rank(&a, 1e-9).unwrap(),
            numerical_rank(&a.permuted(&perm), 1e-9).unwrap()
        );
    }

    #[test]
    fn biquadratic_roots_have_small_residuals(
        r in 1.2..3.0f64,
        fx in 0.01..0.99f64,
        fy in 0.01..0.99f64,
    ) {
        // x, y strictly inside the annulus (r - 1, r + 1).
        let x = (r - 1.0) + 2.0 * fx;
        let y = (r - 1.0) + 2.0 * fy;
        let (x2, y2, r2) = (x * x, y * y, r * r);
        let alpha = -2.0 * r2;
        let beta = -2.0 + 4.0 * r2 - 2.0 * r2 * r2
            + 2.0 * x2 * (1.0 + r2)
            + 2.0 * y2 * (1.0 + r2)
            - 2.0 * x2 * y2;
        let gamma = -2.0 * (x2 - y2) * (x2 - y2);
        let (lo, hi) = biquadratic_positive_roots(alpha, beta, gamma).unwrap();
        prop_assert!(lo <= hi);
        let scale = alpha.abs().max(beta.abs()).max(gamma.abs());
        for z in [lo, hi] {
            let f = alpha * z.powi(4) + beta * z * z + gamma;
            prop_assert!(f.abs() <= 1e-8 * scale, "f({}) = {}", z, f);
        }
        // The same roots kill the bordered determinant.
        for z in [lo, hi] {
            let d = cayley_menger_det(1.0, 1.0, r2, x2, y2, z * z);
            prop_assert!(d.abs() <= 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn triple_distance_formula(d1 in 0.0..10.0f64, d2 in 0.0..10.0f64, ip in -10.0..10.0f64) {
        let t = Triple::new(d1, d2, ip);
        prop_assert!(t.d1 <= t.d2);
        prop_assert!((t.squared_distance() - (d1 + d2 - 2.0 * ip)).abs() < 1e-12);
    }

    #[test]
    fn moment_csv_round_trips_bit_exactly(seed in 0u64..500, shuffle_seed in 0u64..500) {
        let cfg = sample_config(3, &[(1.0, 5), (2.0, 1)], seed).unwrap();
        let sm = second_moment(&cfg);
        let text = moment_to_csv(&sm, &mut Rng::seeded(shuffle_seed));
        let back = moment_from_csv(&text).unwrap();
        prop_assert_eq!(sm, back);
    }

    #[test]
    fn distances_match_coordinates(seed in 0u64..200) {
        let cfg = sample_config(3, &[(1.0, 4), (2.0, 1)], seed).unwrap();
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
        prop_assert_eq!(direct.len(), from_moment.len());
        for (a, b) in direct.iter().zip(&from_moment) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
