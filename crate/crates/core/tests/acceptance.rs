//! Acceptance checks, one line per criterion.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ffsense_core::bounds::{c1, c3, lambda_lower_bound};
use ffsense_core::experiment::{
    minimal_measurements, results_to_csv, results_to_string, run_frip_sweep, run_noise_robustness,
    run_phase_transition, ExperimentConfig, ExperimentKind, Family, OutputFormat,
};
use ffsense_core::frames::{angle_family, coherence, orthogonal_collection, packing_diameter, random_collection};
use ffsense_core::measurement::{
    compose_with_bases, sample_ensemble, Distribution, EnsembleSpec, MeasurementOperator, Normalization,
};
use ffsense_core::rip::{classical_rip, exact_frip, mc_frip, scalar_rip_on_h};
use ffsense_core::seed::mix;
use ffsense_core::signals::{random_sparse_signal, AmplitudeLaw};
use ffsense_core::solver::{
    closed_form_orthogonal, oracle_recover_exhaustive, solve_equality, SolverParams, SolverStatus,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> nalgebra::DMatrix<f64> {
    sample_ensemble(&EnsembleSpec { distribution: Distribution::Gaussian, rows, cols, seed }).unwrap()
}

fn rel(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn results_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../results")
}

fn orthogonal_decoder() -> Outcome {
    let start = Instant::now();
    let c = orthogonal_collection(12, 2, 6).unwrap();
    let params = SolverParams::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for t in 0..100 {
        let x = random_sparse_signal(&c, 6, mix(1, &[t]), AmplitudeLaw::GaussianBlocks).unwrap();
        let a = gaussian(1, 6, mix(2, &[t]));
        let b =
            compose_with_bases(&MeasurementOperator::vector(a.clone(), 12, Normalization::InvSqrtRows), &c).unwrap();
        let y = b.apply(x.coeffs());
        let closed = closed_form_orthogonal(&y, a.row(0).iter().copied().collect::<Vec<_>>().as_slice(), &c).unwrap();
        match solve_equality(&b, &y, &params) {
            Ok(sol) if sol.status == SolverStatus::Converged => {
                worst = worst.max(rel(sol.estimate.coeffs(), closed.coeffs()));
            }
            _ => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("100 trials, max rel error {worst:.2e}, {failures} solver failures, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn solver_vs_oracle() -> Outcome {
    let start = Instant::now();
    let params = SolverParams::default();
    let (mut unique, mut disagreements, mut worst) = (0, 0, 0.0f64);
    let mut instances = 0u64;
    'outer: for rep in 0.. {
        for s in 1..=2usize {
            for m in 3..=8usize {
                if instances == 200 {
                    break 'outer;
                }
                let seed = mix(3, &[rep, s as u64, m as u64]);
                let c = random_collection(4, 2, 8, mix(seed, &[0])).unwrap();
                let x = random_sparse_signal(&c, s, mix(seed, &[1]), AmplitudeLaw::GaussianBlocks).unwrap();
                let a = gaussian(m, 8, mix(seed, &[2]));
                let b = compose_with_bases(&MeasurementOperator::vector(a, 4, Normalization::InvSqrtRows), &c).unwrap();
                let y = b.apply(x.coeffs());
                instances += 1;
                let oracle = oracle_recover_exhaustive(&b, &y, s).unwrap();
                if !oracle.unique {
                    continue;
                }
                unique += 1;
                let target = oracle.solution.unwrap();
                let err = match solve_equality(&b, &y, &params) {
                    Ok(sol) => rel(sol.estimate.coeffs(), target.coeffs()),
                    Err(_) => f64::INFINITY,
                };
                worst = worst.max(err);
                if err > 1e-6 {
                    disagreements += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        disagreements == 0 && elapsed < Duration::from_secs(120),
        format!(
            "{instances} instances, {unique} unique oracle fits, {disagreements} disagreements, max rel error {worst:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn frip_identity() -> Outcome {
    let (mut worst_identity, mut worst_excess) = (0.0f64, f64::NEG_INFINITY);
    for t in 0..100u64 {
        let n = 3 + (t % 6) as usize;
        let s = 1 + (t % 3) as usize;
        let d = 2 + (t % 4) as usize;
        let k = 1 + (t % d as u64) as usize;
        let m = 1 + (t % 5) as usize;
        let c = random_collection(d, k, n, mix(4, &[t])).unwrap();
        let a = gaussian(m, n, mix(5, &[t]));
        let fusion = exact_frip(&a, &c, s, Normalization::InvSqrtRows).unwrap();
        let phi = MeasurementOperator::vector(a.clone(), d, Normalization::InvSqrtRows).materialize();
        let scalar = scalar_rip_on_h(&phi, &c, s).unwrap();
        let classical = classical_rip(&a, s, Normalization::InvSqrtRows).unwrap();
        worst_identity = worst_identity.max((fusion.value - scalar.value).abs());
        worst_excess = worst_excess.max(fusion.value - classical.value);
    }
    outcome(
        worst_identity <= 1e-12 && worst_excess <= 1e-12,
        format!("max |delta - theta| {worst_identity:.2e}, max (delta - classical) {worst_excess:.2e}"),
    )
}

fn monte_carlo_soundness() -> Outcome {
    let (mut violations, mut worst_gap) = (0, 0.0f64);
    for t in 0..60u64 {
        let n = 4 + (t % 4) as usize;
        let s = 1 + (t % 3) as usize;
        let c = random_collection(4, 2, n, mix(6, &[t])).unwrap();
        let a = gaussian(3, n, mix(7, &[t]));
        let exact = exact_frip(&a, &c, s, Normalization::InvSqrtRows).unwrap();
        let few = mc_frip(&a, &c, s, 3, t, Normalization::InvSqrtRows).unwrap();
        if few.value > exact.value + 1e-15 {
            violations += 1;
        }
        // 2000 draws over at most 35 supports cover all of them
        let many = mc_frip(&a, &c, s, 2000, t, Normalization::InvSqrtRows).unwrap();
        if many.value > exact.value + 1e-15 {
            violations += 1;
        }
        worst_gap = worst_gap.max((many.value - exact.value).abs());
        let full = mc_frip(&a, &c, n, 1, t, Normalization::InvSqrtRows).unwrap();
        let full_exact = exact_frip(&a, &c, n, Normalization::InvSqrtRows).unwrap();
        worst_gap = worst_gap.max((full.value - full_exact.value).abs());
    }
    outcome(
        violations == 0 && worst_gap <= 1e-12,
        format!("60 instances, {violations} violations, exhaustive-sampling gap {worst_gap:.2e}"),
    )
}

fn welch_bound() -> Outcome {
    let (mut tested, mut lambda_violations, mut packing_violations) = (0, 0, 0);
    let mut t = 0u64;
    while tested < 500 {
        t += 1;
        let d = 2 + (mix(8, &[t, 0]) % 7) as usize;
        let k = 1 + (mix(8, &[t, 1]) % d as u64) as usize;
        let n = 2 + (mix(8, &[t, 2]) % 9) as usize;
        if k * n <= d {
            continue;
        }
        tested += 1;
        let c = random_collection(d, k, n, mix(9, &[t])).unwrap();
        let lambda = coherence(&c).unwrap().lambda;
        if lambda < lambda_lower_bound(d, k, n).unwrap() - 1e-9 {
            lambda_violations += 1;
        }
        let p = packing_diameter(&c).unwrap();
        let cap = (d - k) as f64 / d as f64 * n as f64 / (n - 1) as f64;
        if p * p > cap + 1e-9 {
            packing_violations += 1;
        }
    }
    outcome(
        lambda_violations == 0 && packing_violations == 0,
        format!("{tested} collections, {lambda_violations} coherence and {packing_violations} packing violations"),
    )
}

fn constant_recovery() -> Outcome {
    let rounded = (format!("{:.2}", c1()), format!("{:.2}", c3()));
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let theta = FRAC_PI_2 * i as f64 / 19.0;
        let c = angle_family(2, 5, theta).unwrap();
        worst = worst.max((coherence(&c).unwrap().lambda - theta.sin().powi(2)).abs());
    }
    outcome(
        rounded == ("0.46".into(), "0.18".into()) && worst <= 1e-10,
        format!("c1 = {} ({:.4}), c3 = {} ({:.4}), max |lambda - sin^2| {worst:.2e}", rounded.0, c1(), rounded.1, c3()),
    )
}

fn lambda_phase_transition() -> Outcome {
    let start = Instant::now();
    let (k, n) = (2, 10);
    let cfg = ExperimentConfig {
        sparsity_grid: vec![2],
        measurement_grid: (1..=6).collect(),
        trials_per_cell: 50,
        base_seed: 2024,
        ..ExperimentConfig::new(
            ExperimentKind::PhaseTransition,
            Family::Angle { thetas: vec![0.0, 1.2] },
            k * (n + 1),
            k,
            n,
        )
    };
    let rows = match run_phase_transition(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mstar = minimal_measurements(&rows, 0.95);
    let find = |theta: f64| mstar.iter().find(|r| r.0 == Some(theta)).and_then(|r| r.2);
    let (m0, m1) = (find(0.0), find(1.2));
    let dir = results_dir();
    let _ = std::fs::create_dir_all(&dir);
    let mut table = String::from("theta,s,m_star\n");
    for (theta, s, m) in &mstar {
        table += &format!("{},{s},{}\n", theta.unwrap(), m.map_or("none".into(), |m| m.to_string()));
    }
    let written = std::fs::write(dir.join("m_star_angle_family.csv"), table).is_ok()
        && std::fs::write(dir.join("phase_angle_family.csv"), results_to_csv(&rows)).is_ok();
    let ok = matches!((m0, m1), (Some(a), Some(b)) if a <= b) || matches!((m0, m1), (Some(_), None));
    let elapsed = start.elapsed();
    outcome(
        ok && written && elapsed < Duration::from_secs(600),
        format!("m*(theta=0) = {m0:?}, m*(theta=1.2) = {m1:?}, archived {}, {:.1}s", written, elapsed.as_secs_f64()),
    )
}

fn rip_implies_recovery() -> Outcome {
    let params = SolverParams::default();
    let (mut certified, mut failures, mut worst) = (0, 0, 0.0f64);
    let threshold = SQRT_2 - 1.0;
    let mut t = 0u64;
    while certified < 8 && t < 400 {
        t += 1;
        let n = 5 + (t % 3) as usize;
        let s = 1 + (t % 2) as usize;
        let m = [24, 48, 96][(t % 3) as usize];
        let c = random_collection(4, 2, n, mix(10, &[t])).unwrap();
        let a = gaussian(m, n, mix(11, &[t]));
        let theta = exact_frip(&a, &c, 2 * s, Normalization::InvSqrtRows).unwrap();
        if theta.value >= threshold {
            continue;
        }
        certified += 1;
        let b = compose_with_bases(&MeasurementOperator::vector(a, 4, Normalization::InvSqrtRows), &c).unwrap();
        for i in 0..50 {
            let x = random_sparse_signal(&c, s, mix(12, &[t, i]), AmplitudeLaw::GaussianBlocks).unwrap();
            let y = b.apply(x.coeffs());
            let err =
                solve_equality(&b, &y, &params).map_or(f64::INFINITY, |sol| rel(sol.estimate.coeffs(), x.coeffs()));
            worst = worst.max(err);
            if err > 1e-6 {
                failures += 1;
            }
        }
    }
    outcome(
        certified > 0 && failures == 0,
        format!("{certified} certified instances x 50 signals, {failures} failures, max rel error {worst:.2e}"),
    )
}

fn noise_config() -> ExperimentConfig {
    ExperimentConfig {
        sparsity_grid: vec![2],
        measurement_grid: vec![6],
        trials_per_cell: 20,
        eta_grid: (0..=10).map(|i| i as f64 * 1e-4).collect(),
        base_seed: 99,
        ..ExperimentConfig::new(ExperimentKind::NoiseRobustness, Family::Random, 4, 2, 16)
    }
}

fn noise_stability() -> Outcome {
    let report = match run_noise_robustness(&noise_config()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let fit = &report.fits[0];
    let errs = &fit.mean_abs_errors;
    let inversions = errs.windows(2).filter(|w| w[1] < w[0]).count();
    let allowed = (0.05 * (errs.len() - 1) as f64).floor() as usize;
    let exact = report.rows[0].max_rel_error <= 1e-6;
    outcome(
        inversions <= allowed && fit.intercept.abs() <= 1e-5 && exact,
        format!(
            "{} eta values, {inversions} inversions, slope {:.3}, intercept {:.2e}, eta=0 max rel error {:.2e}",
            errs.len(),
            fit.slope,
            fit.intercept,
            report.rows[0].max_rel_error
        ),
    )
}

fn determinism() -> Outcome {
    let phase = ExperimentConfig {
        sparsity_grid: vec![1, 2],
        measurement_grid: vec![2, 4],
        trials_per_cell: 6,
        base_seed: 5,
        ..ExperimentConfig::new(ExperimentKind::PhaseTransition, Family::Random, 4, 2, 6)
    };
    let frip = ExperimentConfig {
        experiment: ExperimentKind::FripSweep,
        sparsity_grid: vec![2],
        measurement_grid: vec![4, 8],
        ..phase.clone()
    };
    let noise = ExperimentConfig { trials_per_cell: 4, ..noise_config() };
    let run = || {
        let a = results_to_string(&run_phase_transition(&phase).unwrap(), OutputFormat::Csv);
        let b = results_to_string(&run_frip_sweep(&frip).unwrap(), OutputFormat::Csv);
        let c = results_to_string(&run_noise_robustness(&noise).unwrap().rows, OutputFormat::Csv);
        (a, b, c)
    };
    let first = run();
    let second = run();
    outcome(
        first == second,
        format!("phase, frip and noise CSVs, {} bytes compared", first.0.len() + first.1.len() + first.2.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("orthogonal closed-form decoder", orthogonal_decoder),
        ("solver agrees with exhaustive oracle", solver_vs_oracle),
        ("FRIP identity and classical inequality", frip_identity),
        ("Monte Carlo soundness", monte_carlo_soundness),
        ("coherence and packing bounds", welch_bound),
        ("constant recovery and angle family", constant_recovery),
        ("coherence-monotone phase transition", lambda_phase_transition),
        ("RIP implies recovery", rip_implies_recovery),
        ("noise stability", noise_stability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
