//! Experiment harness: the five reproducible studies behind the recovery
//! algorithms, each returning raw per-trial records so callers (CLI, tests)
//! can aggregate or persist them. Trials run on the rayon pool with one
//! derived RNG stream per trial and are collected in trial order, so results
//! are independent of scheduling.

use rayon::prelude::*;

use beltway::assemble::{assemble_exact, assemble_noisy, assemble_sphere};
use beltway::error::Error;
use beltway::forward::{add_gram_noise, moment_from_gram, sample_config, second_moment};
use beltway::linalg::{eigenvalues_sym, SymMatrix};
use beltway::model::{GramMatrix, PointConfig};
use beltway::oracle::{are_equivalent, procrustes_residual};
use beltway::preprocess::preprocess;
use beltway::rng::Rng;

/// Distance distributions of a point cloud: unit-sphere samples plus an
/// isolated point, for several ambient dimensions.
#[derive(Debug, Clone)]
pub struct DistanceStudy {
    pub n: usize,
    /// Distances (not squared) within the unit-norm class.
    pub same_class: Vec<f64>,
    /// Distances from unit points to the isolated point.
    pub cross_class: Vec<f64>,
}

pub fn run_distance_study(
    dims: &[usize],
    cloud_points: usize,
    isolate_radius: f64,
    seed: u64,
) -> Vec<DistanceStudy> {
    let master = Rng::seeded(seed);
    dims.iter()
        .map(|&n| {
            let cfg = sample_config(
                n,
                &[(1.0, cloud_points), (isolate_radius, 1)],
                master.stream_seed(n as u64),
            )
            .expect("cloud sampling succeeds");
            let m = cfg.m();
            let iso = m - 1;
            let mut same_class = Vec::new();
            let mut cross_class = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    let d = cfg
                        .point(i)
                        .iter()
                        .zip(cfg.point(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if j == iso {
                        cross_class.push(d);
                    } else {
                        same_class.push(d);
                    }
                }
            }
            same_class.sort_by(f64::total_cmp);
            cross_class.sort_by(f64::total_cmp);
            DistanceStudy {
                n,
                same_class,
                cross_class,
            }
        })
        .collect()
}

/// One exact-recovery trial on the isolated-point geometry.
#[derive(Debug, Clone)]
pub struct RecoveryTrial {
    pub m: usize,
    pub trial: u64,
    /// Smallest ambiguity list right after pre-processing.
    pub min_valid: usize,
    pub rank_checks: u64,
    pub iterations: u64,
    pub success: bool,
    /// Procrustes residual against the canonically ordered truth (only
    /// meaningful when the recovered configuration exists).
    pub procrustes: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RecoveryGridConfig {
    pub m_values: Vec<usize>,
    pub n: usize,
    pub trials: u64,
    pub class_radius: f64,
    pub isolate_radius: f64,
    pub seed: u64,
}

impl RecoveryGridConfig {
    pub fn defaults_r3() -> Self {
        RecoveryGridConfig {
            m_values: (4..=10).collect(),
            n: 3,
            trials: 100,
            class_radius: 1.0,
            isolate_radius: 2.0,
            seed: 42,
        }
    }

    pub fn defaults_r4() -> Self {
        RecoveryGridConfig {
            m_values: (5..=8).collect(),
            n: 4,
            trials: 100,
            class_radius: 1.0,
            isolate_radius: 2.0,
            seed: 42,
        }
    }
}

/// Truth configuration reordered the way the assembler labels points: unit
/// points by descending inner product with the isolate, isolate last.
fn canonical_truth_order(cfg: &PointConfig) -> PointConfig {
    let m = cfg.m();
    let iso = m - 1;
    let mut order: Vec<usize> = (0..m - 1).collect();
    order.sort_by(|&a, &b| cfg.dot(b, iso).total_cmp(&cfg.dot(a, iso)));
    order.push(iso);
    cfg.reordered(&order)
}

pub fn run_recovery_grid(config: &RecoveryGridConfig) -> Vec<RecoveryTrial> {
    let master = Rng::seeded(config.seed);
    let jobs: Vec<(usize, u64)> = config
        .m_values
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(m, trial)| {
            let seed = master.split(m as u64).stream_seed(trial);
            let cfg = sample_config(
                config.n,
                &[
                    (config.class_radius, m - 1),
                    (config.isolate_radius, 1),
                ],
                seed,
            )
            .expect("sampling succeeds");
            let truth = cfg.gram();
            let sm = second_moment(&cfg);
            let min_valid = preprocess(&sm)
                .map(|t| t.min_list_len())
                .unwrap_or(usize::MAX);
            match assemble_exact(&sm, config.n) {
                Ok(res) => {
                    let procrustes = res.config.as_ref().map(|rec| {
                        procrustes_residual(rec, &canonical_truth_order(&cfg))
                            .expect("matched dimensions")
                    });
                    let success = if m <= 8 {
                        are_equivalent(&res.gram, &truth)
                    } else {
                        procrustes.is_some_and(|r| r <= 1e-5)
                    };
                    RecoveryTrial {
                        m,
                        trial,
                        min_valid,
                        rank_checks: res.rank_checks,
                        iterations: res.iterations,
                        success,
                        procrustes,
                    }
                }
                Err(_) => RecoveryTrial {
                    m,
                    trial,
                    min_valid,
                    rank_checks: 0,
                    iterations: 0,
                    success: false,
                    procrustes: None,
                },
            }
        })
        .collect()
}

/// One sphere-mode (common-norm) recovery trial.
#[derive(Debug, Clone)]
pub struct SphereTrial {
    pub m: usize,
    pub trial: u64,
    pub success: bool,
    pub rank_checks: u64,
    pub iterations: u64,
    /// Candidate evaluations per iteration.
    pub iteration_checks: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SphereGridConfig {
    pub m_values: Vec<usize>,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
}

impl SphereGridConfig {
    pub fn defaults() -> Self {
        SphereGridConfig {
            m_values: (6..=10).collect(),
            n: 3,
            trials: 20,
            seed: 42,
        }
    }
}

pub fn run_sphere_grid(config: &SphereGridConfig) -> Vec<SphereTrial> {
    let master = Rng::seeded(config.seed);
    let jobs: Vec<(usize, u64)> = config
        .m_values
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(m, trial)| {
            let seed = master.split(m as u64).stream_seed(trial);
            let cfg = sample_config(config.n, &[(1.0, m)], seed).expect("sampling succeeds");
            let truth = cfg.gram();
            let sm = second_moment(&cfg);
            match assemble_sphere(&sm, config.n) {
                Ok(res) => SphereTrial {
                    m,
                    trial,
                    success: are_equivalent(&res.gram, &truth),
                    rank_checks: res.rank_checks,
                    iterations: res.iterations,
                    iteration_checks: res.iteration_checks,
                },
                Err(_) => SphereTrial {
                    m,
                    trial,
                    success: false,
                    rank_checks: 0,
                    iterations: 0,
                    iteration_checks: Vec::new(),
                },
            }
        })
        .collect()
}

/// Per-iteration mean rank checks for one m, averaged over trials (series
/// truncated to the shortest trial so every iteration has full support).
pub fn mean_iteration_checks(trials: &[SphereTrial]) -> Vec<f64> {
    let len = trials
        .iter()
        .filter(|t| !t.iteration_checks.is_empty())
        .map(|t| t.iteration_checks.len())
        .min()
        .unwrap_or(0);
    (0..len)
        .map(|k| {
            let (sum, count) = trials
                .iter()
                .filter(|t| !t.iteration_checks.is_empty())
                .fold((0.0, 0u64), |(s, c), t| {
                    (s + t.iteration_checks[k] as f64, c + 1)
                });
            sum / count as f64
        })
        .collect()
}

/// One noisy-recovery trial.
#[derive(Debug, Clone)]
pub struct NoiseTrial {
    /// Noise scale from the experiment grid (the std of the Gram
    /// perturbation; the injected variance is its square).
    pub noise: f64,
    pub trial: u64,
    pub success: bool,
    /// No reconstruction was produced: pre-processing rejected the moment or
    /// consumption starved some pair's candidate list mid-assembly. Only
    /// happens at noise scales where the Cayley-Menger windows are badly
    /// distorted.
    pub aborted: bool,
    pub residual: f64,
    /// For completed but wrong reconstructions: does some bordered principal
    /// minor sit closer to the rank-<= n locus than the same minor of the
    /// clean Gram matrix?
    pub failure_signature: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct NoiseGridConfig {
    pub noise_values: Vec<f64>,
    pub trials: u64,
    pub m: usize,
    pub n: usize,
    pub class_radius: f64,
    pub isolate_radius: f64,
    pub seed: u64,
}

impl NoiseGridConfig {
    /// 30 noise scales log-spaced in [1e-4, 1], 50 clouds of 5 radius-3
    /// points plus an isolate at 4 e_1.
    pub fn defaults() -> Self {
        let lo: f64 = 1e-4;
        let hi: f64 = 1.0;
        let k = 30;
        let noise_values = (0..k)
            .map(|i| {
                let t = i as f64 / (k - 1) as f64;
                lo * (hi / lo).powf(t)
            })
            .collect();
        NoiseGridConfig {
            noise_values,
            trials: 50,
            m: 6,
            n: 3,
            class_radius: 3.0,
            isolate_radius: 4.0,
            seed: 42,
        }
    }
}

pub fn run_noise_grid(config: &NoiseGridConfig) -> Vec<NoiseTrial> {
    let master = Rng::seeded(config.seed);
    let jobs: Vec<(usize, f64, u64)> = config
        .noise_values
        .iter()
        .enumerate()
        .flat_map(|(gi, &g)| (0..config.trials).map(move |t| (gi, g, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(grid_index, noise, trial)| {
            // Reuse the same clouds across the noise grid so grid points
            // differ only in the injected noise.
            let cloud_seed = master.split(1).stream_seed(trial);
            let noise_seed = master
                .split(2)
                .split(grid_index as u64)
                .stream_seed(trial);
            let cfg = sample_config(
                config.n,
                &[
                    (config.class_radius, config.m - 1),
                    (config.isolate_radius, 1),
                ],
                cloud_seed,
            )
            .expect("sampling succeeds");
            let clean = cfg.gram();
            let noisy = add_gram_noise(&clean, noise * noise, noise_seed);
            let sm = moment_from_gram(&noisy);
            match assemble_noisy(&sm, config.n, noise) {
                Ok(res) => {
                    let success = are_equivalent(&res.gram, &noisy);
                    let failure_signature = if success {
                        None
                    } else {
                        Some(has_failure_signature(&res.gram, &clean, &noisy, config.n))
                    };
                    NoiseTrial {
                        noise,
                        trial,
                        success,
                        aborted: false,
                        residual: res.residual,
                        failure_signature,
                    }
                }
                Err(Error::InfeasibleMoment(_, _) | Error::AssemblyFailed { .. }) => NoiseTrial {
                    noise,
                    trial,
                    success: false,
                    aborted: true,
                    residual: f64::NAN,
                    failure_signature: None,
                },
                Err(e) => panic!("unexpected noisy assembly error: {e}"),
            }
        })
        .collect()
}

/// The observed failure mode: every bad reconstruction contains a bordered
/// (n+1)x(n+1) principal minor sitting closer to the rank-<= n locus than
/// the matching minor of the clean Gram matrix. Minors are matched through
/// the same descending-cross-inner-product labeling the assembler uses.
fn has_failure_signature(
    recovered: &GramMatrix,
    clean: &GramMatrix,
    noisy: &GramMatrix,
    n: usize,
) -> bool {
    let m = clean.m();
    let iso = m - 1;
    let mut order: Vec<usize> = (0..m - 1).collect();
    order.sort_by(|&a, &b| {
        noisy
            .sym
            .get(b, iso)
            .total_cmp(&noisy.sym.get(a, iso))
    });
    order.push(iso);
    let clean_canon = clean.sym.permuted(&order);

    let lambda = |sym: &SymMatrix, idx: &[usize]| -> f64 {
        let k = idx.len();
        let mut minor = SymMatrix::zeros(k);
        for a in 0..k {
            for b in a..k {
                minor.set(a, b, sym.get(idx[a], idx[b]));
            }
        }
        eigenvalues_sym(&minor).expect("finite minor")[n]
    };

    for tuple in beltway::assemble::index_tuples(m - 1, n) {
        let mut idx = tuple.clone();
        idx.push(iso);
        if lambda(&recovered.sym, &idx) < lambda(&clean_canon, &idx) {
            return true;
        }
    }
    false
}

/// Success rate per noise value, in grid order.
pub fn noise_success_rates(config: &NoiseGridConfig, trials: &[NoiseTrial]) -> Vec<(f64, f64)> {
    config
        .noise_values
        .iter()
        .map(|&g| {
            let of_g: Vec<&NoiseTrial> = trials
                .iter()
                .filter(|t| (t.noise - g).abs() <= f64::EPSILON * g.abs())
                .collect();
            let rate = of_g.iter().filter(|t| t.success).count() as f64 / of_g.len() as f64;
            (g, rate)
        })
        .collect()
}
