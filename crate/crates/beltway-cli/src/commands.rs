//! Subcommand implementations. Every command is deterministic given its full
//! flag set, including --seed; files are written with shortest-round-trip
//! numbers so identical invocations produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use beltway::assemble::{assemble_exact, assemble_noisy, assemble_sphere, Mode, RecoveryResult};
use beltway::error::{Error, Result};
use beltway::forward::{add_gram_noise, moment_from_gram, sample_config, second_moment};
use beltway::io::{
    config_from_csv, config_to_csv, moment_from_csv, moment_to_csv, read_text, write_text,
    ResultEnvelope,
};
use beltway::oracle::{census, uniqueness_certificate};
use beltway::rng::Rng;

use crate::experiments::{
    mean_iteration_checks, noise_success_rates, run_distance_study, run_noise_grid,
    run_recovery_grid, run_sphere_grid, NoiseGridConfig, RecoveryGridConfig, SphereGridConfig,
};
use crate::svg::{histogram, line_chart, Series};

/// "1x5,2x1" -> [(1.0, 5), (2.0, 1)]
pub fn parse_norm_spec(text: &str) -> Result<Vec<(f64, usize)>> {
    let mut spec = Vec::new();
    for part in text.split(',') {
        let (radius, count) = part
            .split_once('x')
            .ok_or_else(|| Error::Parse(format!("norm spec entry '{part}' is not RADIUSxCOUNT")))?;
        let radius: f64 = radius
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad radius '{radius}'")))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad count '{count}'")))?;
        if !(radius > 0.0) || count == 0 {
            return Err(Error::Parse(format!("norm spec entry '{part}' must be positive")));
        }
        spec.push((radius, count));
    }
    Ok(spec)
}

pub struct SimulateArgs {
    pub m: usize,
    pub n: usize,
    pub norms: Vec<(f64, usize)>,
    pub sigma2: Option<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let total: usize = args.norms.iter().map(|&(_, c)| c).sum();
    if total != args.m {
        return Err(Error::InvalidInput(format!(
            "norm counts sum to {total}, but --m is {}",
            args.m
        )));
    }
    let cfg = sample_config(args.n, &args.norms, args.seed)?;
    write_text(&args.out_dir.join("config.csv"), &config_to_csv(&cfg))?;

    let session = Rng::seeded(args.seed);
    let sm = second_moment(&cfg);
    write_text(
        &args.out_dir.join("moment.csv"),
        &moment_to_csv(&sm, &mut session.split(100)),
    )?;

    if let Some(sigma2) = args.sigma2 {
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidInput("--sigma2 must be >= 0".to_string()));
        }
        let noisy = add_gram_noise(&cfg.gram(), sigma2, session.stream_seed(200));
        write_text(
            &args.out_dir.join("moment_noisy.csv"),
            &moment_to_csv(&moment_from_gram(&noisy), &mut session.split(300)),
        )?;
    }
    Ok(())
}

pub struct RecoverArgs {
    pub moment: PathBuf,
    pub mode: Mode,
    pub n: usize,
    pub sigma_hat: f64,
    pub seed: u64,
    pub out: PathBuf,
}

fn envelope_of(res: &RecoveryResult, seed: u64) -> ResultEnvelope {
    let m = res.gram.m();
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| res.gram.sym.get(i, j)).collect())
        .collect();
    let config = res.config.as_ref().map(|cfg| {
        (0..cfg.n())
            .map(|r| (0..cfg.m()).map(|k| cfg.point(k)[r]).collect())
            .collect()
    });
    ResultEnvelope {
        gram,
        config,
        iterations: res.iterations,
        rank_checks: res.rank_checks,
        seed,
        mode: res.mode.as_str().to_string(),
        residual: res.residual,
    }
}

pub fn cmd_recover(args: &RecoverArgs) -> Result<()> {
    let sm = moment_from_csv(&read_text(&args.moment)?)?;
    let res = match args.mode {
        Mode::Exact => assemble_exact(&sm, args.n)?,
        Mode::Sphere => assemble_sphere(&sm, args.n)?,
        Mode::Noisy => assemble_noisy(&sm, args.n, args.sigma_hat)?,
    };
    eprintln!(
        "recovered m={} in {} iterations, {} rank checks (residual {:e})",
        res.gram.m(),
        res.iterations,
        res.rank_checks,
        res.residual
    );
    write_text(&args.out, &envelope_of(&res, args.seed).to_json())?;
    Ok(())
}

pub struct CensusArgs {
    pub trials: u64,
    pub m: usize,
    pub n: usize,
    pub norms: Vec<(f64, usize)>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn cmd_census(args: &CensusArgs) -> Result<()> {
    let total: usize = args.norms.iter().map(|&(_, c)| c).sum();
    if total != args.m {
        return Err(Error::InvalidInput(format!(
            "norm counts sum to {total}, but --m is {}",
            args.m
        )));
    }
    let stats = census(args.trials, args.n, &args.norms, args.seed)?;
    let mut csv = String::from(
        "trials,trials_with_psd,fraction_trials_with_psd,total_non_equivalent,total_psd_non_equivalent,psd_share\n",
    );
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{}",
        stats.trials,
        stats.trials_with_psd_rearrangement,
        stats.fraction_trials_with_psd,
        stats.total_non_equivalent,
        stats.total_psd_non_equivalent,
        stats.psd_share_of_non_equivalent
    );
    write_text(&args.out_dir.join("census.csv"), &csv)?;
    println!(
        "census: {}/{} trials with a psd non-equivalent rearrangement (share {:.4}%)",
        stats.trials_with_psd_rearrangement,
        stats.trials,
        100.0 * stats.psd_share_of_non_equivalent
    );
    Ok(())
}

pub struct CertifyArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<()> {
    let cfg = config_from_csv(&read_text(&args.config)?)?;
    let report = uniqueness_certificate(&cfg)?;
    let json = format!(
        "{{\n  \"m\": {},\n  \"n\": {},\n  \"total_rearrangements\": {},\n  \"rank_at_most_n\": {},\n  \"non_equivalent_rank_at_most_n\": {},\n  \"unique\": {}\n}}\n",
        cfg.m(),
        cfg.n(),
        report.total,
        report.rank_at_most_n,
        report.non_equivalent_rank_at_most_n,
        report.unique
    );
    write_text(&args.out_dir.join("certify.json"), &json)?;
    println!(
        "certify: {} (rank-at-most-n rearrangements: {}, non-equivalent among them: {})",
        if report.unique { "unique" } else { "NOT unique" },
        report.rank_at_most_n,
        report.non_equivalent_rank_at_most_n
    );
    Ok(())
}

pub struct ExperimentArgs {
    pub figure: String,
    pub trials: Option<u64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub svg: bool,
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    match args.figure.as_str() {
        "fig1" => experiment_distances(args),
        "fig2" => experiment_recovery(args, RecoveryGridConfig::defaults_r3(), "fig2"),
        "fig3" => experiment_recovery(args, RecoveryGridConfig::defaults_r4(), "fig3"),
        "fig4" => experiment_sphere(args),
        "fig5" => experiment_noise(args),
        other => Err(Error::InvalidInput(format!(
            "unknown figure '{other}' (expected fig1..fig5)"
        ))),
    }
}

fn experiment_distances(args: &ExperimentArgs) -> Result<()> {
    let dims = [3usize, 5, 10, 20];
    let studies = run_distance_study(&dims, 100, 2.0, args.seed);
    let mut raw = String::from("n,class,distance\n");
    for s in &studies {
        for d in &s.same_class {
            let _ = writeln!(raw, "{},same,{}", s.n, d);
        }
        for d in &s.cross_class {
            let _ = writeln!(raw, "{},cross,{}", s.n, d);
        }
    }
    write_text(&args.out_dir.join("fig1_raw.csv"), &raw)?;

    let bins = 40;
    let mut hist = String::from("n,class,bin_lo,bin_hi,count\n");
    for s in &studies {
        for (class, values, lo, hi) in [
            ("same", &s.same_class, 0.0, 2.0),
            ("cross", &s.cross_class, 1.0, 3.0),
        ] {
            let mut counts = vec![0usize; bins];
            for &v in values {
                if v < lo || v > hi {
                    continue;
                }
                let k = (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
                counts[k] += 1;
            }
            for (k, c) in counts.iter().enumerate() {
                let w = (hi - lo) / bins as f64;
                let _ = writeln!(
                    hist,
                    "{},{},{},{},{}",
                    s.n,
                    class,
                    lo + k as f64 * w,
                    lo + (k + 1) as f64 * w,
                    c
                );
            }
        }
    }
    write_text(&args.out_dir.join("fig1_hist.csv"), &hist)?;

    if args.svg {
        for s in &studies {
            let chart = histogram(
                &format!("same-class distances, n = {}", s.n),
                &s.same_class,
                0.0,
                2.0,
                bins,
            );
            write_text(&args.out_dir.join(format!("fig1_n{}.svg", s.n)), &chart)?;
        }
    }
    Ok(())
}

fn experiment_recovery(
    args: &ExperimentArgs,
    mut config: RecoveryGridConfig,
    tag: &str,
) -> Result<()> {
    if let Some(t) = args.trials {
        config.trials = t;
    }
    config.seed = args.seed;
    let trials = run_recovery_grid(&config);

    let mut raw = String::from("m,trial,min_valid,rank_checks,iterations,success,procrustes\n");
    for t in &trials {
        let _ = writeln!(
            raw,
            "{},{},{},{},{},{},{}",
            t.m,
            t.trial,
            t.min_valid,
            t.rank_checks,
            t.iterations,
            t.success,
            t.procrustes.map_or(String::new(), |p| format!("{p}"))
        );
    }
    write_text(&args.out_dir.join(format!("{tag}_raw.csv")), &raw)?;

    let n = config.n;
    let mut summary = String::from(
        "m,mean_min_valid,pairs_bound,mean_rank_checks,checks_bound,mean_iterations,iterations_bound,success_rate\n",
    );
    let mut series_checks = Vec::new();
    for &m in &config.m_values {
        let of_m: Vec<_> = trials.iter().filter(|t| t.m == m).collect();
        let count = of_m.len() as f64;
        let mean_min_valid = of_m.iter().map(|t| t.min_valid as f64).sum::<f64>() / count;
        let mean_checks = of_m.iter().map(|t| t.rank_checks as f64).sum::<f64>() / count;
        let mean_iters = of_m.iter().map(|t| t.iterations as f64).sum::<f64>() / count;
        let success = of_m.iter().filter(|t| t.success).count() as f64 / count;
        let pairs_bound = (m * (m - 1) / 2) as f64;
        let checks_bound = (n * n) as f64 * (m as f64).powi((n * (n - 1) + 2) as i32);
        let iter_bound = (m * m) as f64 / n as f64;
        let _ = writeln!(
            summary,
            "{m},{mean_min_valid},{pairs_bound},{mean_checks},{checks_bound},{mean_iters},{iter_bound},{success}"
        );
        series_checks.push((m as f64, mean_checks.log10()));
    }
    write_text(&args.out_dir.join(format!("{tag}_summary.csv")), &summary)?;

    if args.svg {
        let chart = line_chart(
            &format!("mean rank checks (log10), n = {n}"),
            "m",
            "log10 checks",
            &[Series {
                label: "observed".to_string(),
                points: series_checks,
            }],
        );
        write_text(&args.out_dir.join(format!("{tag}.svg")), &chart)?;
    }
    Ok(())
}

fn experiment_sphere(args: &ExperimentArgs) -> Result<()> {
    let mut config = SphereGridConfig::defaults();
    if let Some(t) = args.trials {
        config.trials = t;
    }
    config.seed = args.seed;
    let trials = run_sphere_grid(&config);

    let mut raw = String::from("m,trial,iteration,rank_checks,success\n");
    for t in &trials {
        for (k, &c) in t.iteration_checks.iter().enumerate() {
            let _ = writeln!(raw, "{},{},{},{},{}", t.m, t.trial, k, c, t.success);
        }
    }
    write_text(&args.out_dir.join("fig4_raw.csv"), &raw)?;

    let mut summary = String::from("m,iteration,mean_rank_checks\n");
    let mut all_series = Vec::new();
    for &m in &config.m_values {
        let of_m: Vec<_> = trials.iter().filter(|t| t.m == m).cloned().collect();
        let means = mean_iteration_checks(&of_m);
        for (k, v) in means.iter().enumerate() {
            let _ = writeln!(summary, "{m},{k},{v}");
        }
        all_series.push(Series {
            label: format!("m = {m}"),
            points: means
                .iter()
                .enumerate()
                .map(|(k, &v)| (k as f64, v.max(1.0).log10()))
                .collect(),
        });
    }
    write_text(&args.out_dir.join("fig4_summary.csv"), &summary)?;

    if args.svg {
        let chart = line_chart(
            "mean rank checks per iteration (log10)",
            "iteration",
            "log10 checks",
            &all_series,
        );
        write_text(&args.out_dir.join("fig4.svg"), &chart)?;
    }
    Ok(())
}

fn experiment_noise(args: &ExperimentArgs) -> Result<()> {
    let mut config = NoiseGridConfig::defaults();
    if let Some(t) = args.trials {
        config.trials = t;
    }
    config.seed = args.seed;
    let trials = run_noise_grid(&config);

    let mut raw = String::from("noise,trial,success,aborted,residual,failure_signature\n");
    for t in &trials {
        let _ = writeln!(
            raw,
            "{},{},{},{},{},{}",
            t.noise,
            t.trial,
            t.success,
            t.aborted,
            t.residual,
            t.failure_signature
                .map_or(String::new(), |s| s.to_string())
        );
    }
    write_text(&args.out_dir.join("fig5_raw.csv"), &raw)?;

    let rates = noise_success_rates(&config, &trials);
    let mut summary = String::from("noise,success_rate\n");
    for (g, r) in &rates {
        let _ = writeln!(summary, "{g},{r}");
    }
    write_text(&args.out_dir.join("fig5_summary.csv"), &summary)?;

    if args.svg {
        let chart = line_chart(
            "noisy recovery success rate",
            "log10 noise scale",
            "success rate",
            &[Series {
                label: "success".to_string(),
                points: rates.iter().map(|&(g, r)| (g.log10(), r)).collect(),
            }],
        );
        write_text(&args.out_dir.join("fig5.svg"), &chart)?;
    }
    Ok(())
}

/// Exit code for a failed command: 3 recovery failure, 4 mode/profile
/// mismatch, 5 size cap, 2 usage/validation, 1 everything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AssemblyFailed { .. } | Error::InfeasibleMoment(..) => 3,
        Error::ProfileMismatch { .. } => 4,
        Error::TooLarge { .. } => 5,
        Error::InvalidInput(_) | Error::Parse(_) | Error::MalformedMoment(_) => 2,
        _ => 1,
    }
}

/// Shared output-directory default.
pub fn default_out_dir() -> &'static Path {
    Path::new(".")
}
