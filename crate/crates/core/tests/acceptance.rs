//! End-to-end acceptance criteria. Runs without the libtest harness so the
//! PASS/FAIL line for each criterion is always printed; exits non-zero if any
//! criterion fails.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taskquant::bounds::gaussian_distortion_rate;
use taskquant::design::{
    design, equal_diagonal_rotation, solve_waterfilling_zeta, DesignMethod, LevelBudget,
    LinearTaskModel,
};
use taskquant::experiments::{
    run_sweep, run_sweep_with_threads, write_csv, Method, SweepConfig, SweepRecord,
};
use taskquant::linalg::orthonormality_residual;
use taskquant::scenarios::{build_channel_scenario, EstimatorVariant};
use taskquant::stats::Z_95;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn sweep(
    preset: &str,
    methods: &[Method],
    bits: &[u32],
    trials: usize,
    seed: u64,
) -> Vec<SweepRecord> {
    let mut cfg = SweepConfig::for_preset(preset).unwrap();
    cfg.methods = methods.to_vec();
    cfg.bits = bits.to_vec();
    cfg.trials = trials;
    cfg.bound_trials = trials;
    cfg.seed = seed;
    run_sweep(&cfg).unwrap()
}

fn find(recs: &[SweepRecord], method: Method, bits: u32) -> &SweepRecord {
    recs.iter()
        .find(|r| r.method == method.name() && r.log_m == bits)
        .expect("record present")
}

fn value(rec: &SweepRecord) -> Result<f64, String> {
    rec.estimate.ok_or_else(|| {
        format!(
            "{} at log M = {} failed: {}",
            rec.method,
            rec.log_m,
            rec.error.as_deref().unwrap_or("no value")
        )
    })
}

fn theory_matches_simulation() -> Outcome {
    let bits: Vec<u32> = (2..=10).map(|i| 2 * i).collect();
    let recs = sweep("fig5", &[Method::Thm1], &bits, 10_000, 1);
    let mut worst: f64 = 0.0;
    for rec in &recs {
        let est = value(rec)?;
        let theory = rec.theoretical.ok_or("missing theoretical value")?;
        let se = rec.ci.unwrap() / Z_95;
        let z = (est - theory).abs() / se;
        worst = worst.max(z);
        if z > 3.0 {
            return Err(format!(
                "log M = {}: simulated {est:.6} vs theory {theory:.6} ({z:.2} standard errors)",
                rec.log_m
            ));
        }
    }
    Ok(format!(
        "largest deviation {worst:.2} standard errors over log M = 4..20"
    ))
}

fn quantization_error_negligible() -> Outcome {
    let mut notes = Vec::new();
    for (preset, k) in [("fig5", 2u32), ("fig6", 8)] {
        let bits = 5 * k;
        let recs = sweep(
            preset,
            &[Method::Thm1, Method::MmseFloor],
            &[bits],
            10_000,
            2,
        );
        let total = value(find(&recs, Method::Thm1, bits))?;
        let ci = find(&recs, Method::Thm1, bits).ci.unwrap();
        let floor = value(find(&recs, Method::MmseFloor, bits))?;
        let excess = (total - floor) / floor;
        if total - floor > 0.05 * floor + ci {
            return Err(format!(
                "k = {k}, log M = {bits}: excess {:.2}% of the floor",
                excess * 100.0
            ));
        }
        notes.push(format!("k = {k}: {:+.2}%", excess * 100.0));
    }
    Ok(format!("excess over floor {}", notes.join(", ")))
}

fn theoretical_ordering() -> Outcome {
    let tol = 1e-9;
    let mut checked = 0;
    for (k, grid) in [
        (
            2usize,
            (1..=30)
                .map(|i| 2 * i)
                .chain([120, 160, 240])
                .collect::<Vec<u32>>(),
        ),
        (8, (1..=12).map(|i| 8 * i).chain([120, 160, 240]).collect()),
    ] {
        let scenario = build_channel_scenario(k, 120).map_err(|e| e.to_string())?;
        let model = scenario.model();
        let floor = model.mmse_floor();
        for &bits in &grid {
            let budget = LevelBudget::from_bits(bits);
            let predicted =
                |m| design(m, model, &budget, 3.0, None).map(|s| s.predicted_mse + floor);
            let (Ok(thm1), Ok(cor3)) = (
                predicted(DesignMethod::Optimal),
                predicted(DesignMethod::QuantizeMmse),
            ) else {
                continue;
            };
            if !(floor <= thm1 + tol && thm1 <= cor3 + tol) {
                return Err(format!(
                    "k = {k}, log M = {bits}: floor {floor}, thm1 {thm1}, cor3 {cor3}"
                ));
            }
            if let Ok(cor2) = predicted(DesignMethod::DigitalOnly) {
                if thm1 > cor2 + tol {
                    return Err(format!(
                        "k = {k}, log M = {bits}: thm1 {thm1} > cor2 {cor2}"
                    ));
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} grid points ordered"))
}

fn normalized_task_model(k: usize, scale: &[f64], rng: &mut impl Rng) -> LinearTaskModel {
    let g = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let d = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            (scale[i] / k as f64).sqrt()
        } else {
            0.0
        }
    });
    LinearTaskModel::new(DMatrix::identity(k, k), d * q, 0.0).unwrap()
}

fn mmse_quantization_optimal_when_normalized() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let equal = normalized_task_model(3, &[1.0, 1.0, 1.0], &mut rng);
    let perturbed = normalized_task_model(3, &[1.1, 1.0, 1.0], &mut rng);
    let mut gap_min = f64::INFINITY;
    for bits in [6u32, 9, 12, 18, 24] {
        let budget = LevelBudget::from_bits(bits);
        let mse = |model: &LinearTaskModel, m| {
            design(m, model, &budget, 3.0, None)
                .map(|s| s.predicted_mse)
                .map_err(|e| e.to_string())
        };
        let (t, c) = (
            mse(&equal, DesignMethod::Optimal)?,
            mse(&equal, DesignMethod::QuantizeMmse)?,
        );
        if (t - c).abs() > 1e-9 {
            return Err(format!("log M = {bits}: thm1 {t} vs cor3 {c} on Γ̃Γ̃ᵀ = I/3"));
        }
        let (t, c) = (
            mse(&perturbed, DesignMethod::Optimal)?,
            mse(&perturbed, DesignMethod::QuantizeMmse)?,
        );
        if t >= c {
            return Err(format!(
                "log M = {bits}: perturbed thm1 {t} not below cor3 {c}"
            ));
        }
        gap_min = gap_min.min(c - t);
    }
    Ok(format!(
        "equal within 1e-9; perturbed gap at least {gap_min:.3e}"
    ))
}

fn distortion_rate_analytics() -> Outcome {
    let mut worst: f64 = 0.0;
    for var in [0.25, 1.0, 7.5] {
        for rate in [0.0, 0.5, 1.0, 3.0, 8.0] {
            let (d, _) = gaussian_distortion_rate(&[var], rate).map_err(|e| e.to_string())?;
            worst = worst.max((d - var * 2f64.powf(-2.0 * rate)).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("scalar D(R) off by {worst:.3e}"));
    }
    let (d, _) = gaussian_distortion_rate(&[4.0, 1.0], 0.5).map_err(|e| e.to_string())?;
    // Independent oracle: scan the water level and invert the rate.
    let rate_at = |level: f64| -> f64 {
        [4.0f64, 1.0]
            .iter()
            .map(|&l| {
                if l > level {
                    0.5 * (l / level).log2()
                } else {
                    0.0
                }
            })
            .sum()
    };
    let (mut lo, mut hi) = (1e-9, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle: f64 = [4.0f64, 1.0].iter().map(|&l| l.min(lo)).sum();
    if (d - 3.0).abs() > 1e-10 || (oracle - 3.0).abs() > 1e-10 {
        return Err(format!("λ = [4, 1], R = 0.5: D = {d}, oracle {oracle}"));
    }
    Ok(format!(
        "scalar error {worst:.1e}; λ = [4, 1] gives D = {d}"
    ))
}

fn bound_sandwich() -> Outcome {
    let bits = [4u32, 8, 12, 16];
    let recs = sweep(
        "fig5",
        &[
            Method::Prop1Lower,
            Method::Prop1Upper,
            Method::TaskIgnorantEmp,
        ],
        &bits,
        20_000,
        6,
    );
    let mut notes = Vec::new();
    for &b in &bits {
        let lower = value(find(&recs, Method::Prop1Lower, b))?;
        let upper = find(&recs, Method::Prop1Upper, b);
        let ignorant = find(&recs, Method::TaskIgnorantEmp, b);
        let (u, uci) = (value(upper)?, upper.ci.unwrap());
        let (t, tci) = (value(ignorant)?, ignorant.ci.unwrap());
        if lower > u + uci {
            return Err(format!(
                "log M = {b}: lower {lower} above upper {u} ± {uci}"
            ));
        }
        if t + tci < u - uci {
            return Err(format!(
                "log M = {b}: task-ignorant {t} ± {tci} below upper {u} ± {uci}"
            ));
        }
        notes.push(format!("{b}: {lower:.4} ≤ {u:.4} ≤ {t:.4}"));
    }
    Ok(notes.join("; "))
}

fn task_ignorant_approximation() -> Outcome {
    let bits = [12u32, 14, 16];
    let recs = sweep(
        "fig5",
        &[Method::TaskIgnorantEmp, Method::TaskIgnorantApprox],
        &bits,
        20_000,
        7,
    );
    let mut notes = Vec::new();
    for &b in &bits {
        // Compare distortions relative to the MMSE estimate, without the floor.
        let emp = find(&recs, Method::TaskIgnorantEmp, b)
            .distortion
            .ok_or("no empirical value")?;
        let approx = find(&recs, Method::TaskIgnorantApprox, b)
            .distortion
            .ok_or("no approximation")?;
        let rel = (approx - emp).abs() / emp;
        if rel > 0.10 {
            return Err(format!(
                "log M = {b}: approximation {approx:.5} vs empirical {emp:.5} ({:.1}% apart)",
                rel * 100.0
            ));
        }
        notes.push(format!("{b}: {:.1}%", rel * 100.0));
    }
    Ok(format!("relative gaps {}", notes.join(", ")))
}

fn waterfilling_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(1..=6);
        let s: Vec<f64> = (0..len).map(|_| rng.random_range(0.2..3.0)).collect();
        let c = rng.random_range(0.2..2.0);
        let zeta = solve_waterfilling_zeta(&s, c).map_err(|e| e.to_string())?;
        let f = |z: f64| c * s.iter().map(|&v| (z * v - 1.0).max(0.0)).sum::<f64>() - 1.0;
        let smax = s.iter().copied().fold(0.0, f64::max);
        let lo = 1.0 / smax;
        let steps = ((1.0 / (c * smax)) / 1e-6).ceil() as usize + 1;
        let crossing = (0..=steps)
            .map(|i| lo + i as f64 * 1e-6)
            .find(|&z| f(z) >= 0.0)
            .ok_or("grid did not bracket the root")?;
        worst = worst.max((crossing - zeta).abs());
    }
    if worst > 1e-5 {
        return Err(format!("largest disagreement {worst:.3e}"));
    }
    Ok(format!("largest disagreement {worst:.2e} over 100 sets"))
}

fn rotation_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut spread_w, mut unit_w, mut trace_w) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = rng.random_range(1..=16);
        let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.0)).collect();
        let u = equal_diagonal_rotation(&d).map_err(|e| e.to_string())?;
        let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&d));
        let r = &u * dm * u.transpose();
        let trace: f64 = d.iter().sum();
        let diag: Vec<f64> = (0..p).map(|i| r[(i, i)]).collect();
        let spread = diag.iter().copied().fold(f64::MIN, f64::max)
            - diag.iter().copied().fold(f64::MAX, f64::min);
        spread_w = spread_w.max(spread / trace);
        unit_w = unit_w.max(orthonormality_residual(&u));
        trace_w = trace_w.max((r.trace() - trace).abs());
    }
    if spread_w > 1e-9 || unit_w > 1e-12 || trace_w > 1e-12 {
        return Err(format!(
            "spread {spread_w:.2e}·trace, unitarity {unit_w:.2e}, trace {trace_w:.2e}"
        ));
    }
    Ok(format!(
        "spread {spread_w:.1e}·trace, unitarity {unit_w:.1e}, trace {trace_w:.1e}"
    ))
}

fn dither_free_is_no_worse() -> Outcome {
    let bits: Vec<u32> = (2..=10).map(|i| 2 * i).collect();
    let recs = sweep(
        "fig5",
        &[Method::Thm1, Method::Thm1NoDither],
        &bits,
        10_000,
        10,
    );
    let mut violations = Vec::new();
    for &b in &bits {
        let d = find(&recs, Method::Thm1, b);
        let n = find(&recs, Method::Thm1NoDither, b);
        let (dv, nv) = (value(d)?, value(n)?);
        let ci = d.ci.unwrap();
        if nv > dv + ci {
            // Isolated excursions within another CI are tolerated.
            if nv > dv + 2.0 * ci {
                return Err(format!(
                    "log M = {b}: no dither {nv:.5} vs dither {dv:.5} ± {ci:.5}"
                ));
            }
            violations.push(b);
        }
    }
    if violations.len() > 1 {
        return Err(format!("CI-level violations at log M = {violations:?}"));
    }
    let gain: f64 = bits
        .iter()
        .map(|&b| {
            value(find(&recs, Method::Thm1, b)).unwrap()
                / value(find(&recs, Method::Thm1NoDither, b)).unwrap()
        })
        .fold(0.0, f64::max);
    Ok(format!(
        "{} CI-level excursions; largest dither/no-dither ratio {gain:.2}",
        violations.len()
    ))
}

fn eig_crossover() -> Outcome {
    let mut cfg = SweepConfig::for_preset("eig-setup1").unwrap();
    cfg.methods = vec![Method::EigPipeline];
    cfg.estimator = EstimatorVariant::PosteriorMean;
    cfg.partitions = vec![1, 2, 4, 5, 10, 20];
    cfg.bits = vec![40, 60, 80, 100, 120, 160, 200, 240];
    cfg.trials = 10_000;
    cfg.seed = 11;
    let recs = run_sweep(&cfg).unwrap();
    let n_x = 20;
    let mut preferred = Vec::new();
    let mut crossover = None;
    for &b in &cfg.bits {
        let at: Vec<&SweepRecord> = recs
            .iter()
            .filter(|r| r.log_m == b && r.estimate.is_some())
            .collect();
        let best = at
            .iter()
            .min_by(|a, c| a.estimate.unwrap().total_cmp(&c.estimate.unwrap()))
            .ok_or("no feasible partition")?;
        preferred.push(best.n_s.unwrap());
        if crossover.is_none() {
            if let Some(full) = at.iter().find(|r| r.n_s == Some(n_x)) {
                let margin = full.ci.unwrap() + best.ci.unwrap();
                if best.n_s != Some(n_x) && best.estimate.unwrap() + margin < full.estimate.unwrap()
                {
                    crossover = Some(b);
                }
            }
        }
    }
    let Some(cross) = crossover else {
        return Err(format!("n_s = {n_x} never beaten; preferred {preferred:?}"));
    };
    if preferred.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!(
            "preferred n_s not monotone along {:?}: {preferred:?}",
            cfg.bits
        ));
    }
    Ok(format!(
        "n_s = {n_x} beaten at log M = {cross}; preferred n_s {preferred:?} over {:?}",
        cfg.bits
    ))
}

fn sweeps_are_deterministic() -> Outcome {
    let mut channel = SweepConfig::for_preset("fig5").unwrap();
    channel.methods = vec![
        Method::Thm1,
        Method::Thm1NoDither,
        Method::Cor3,
        Method::Prop1Upper,
        Method::TaskIgnorantEmp,
    ];
    channel.bits = vec![4, 8];
    channel.trials = 500;
    channel.bound_trials = 200;
    channel.seed = 12;
    let mut eig = SweepConfig::for_preset("eig-setup1").unwrap();
    eig.partitions = vec![2, 10];
    eig.bits = vec![40, 80];
    eig.trials = 300;
    eig.seed = 12;
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get().max(4));
    for cfg in [&channel, &eig] {
        let mut outputs = Vec::new();
        for threads in [1, workers, 1, workers] {
            let recs = run_sweep_with_threads(cfg, threads).map_err(|e| e.to_string())?;
            let mut buf = Vec::new();
            write_csv(&recs, &mut buf).map_err(|e| e.to_string())?;
            outputs.push(buf);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("CSV differs between runs for {:?}", cfg.scenario));
        }
    }
    Ok(format!(
        "identical CSV at 1 and {workers} threads, twice each"
    ))
}

fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 12] = [
        ("theory/simulation agreement", theory_matches_simulation),
        (
            "negligible quantization error",
            quantization_error_negligible,
        ),
        ("method ordering", theoretical_ordering),
        (
            "MMSE quantization optimal for normalized task",
            mmse_quantization_optimal_when_normalized,
        ),
        ("rate-distortion analytics", distortion_rate_analytics),
        ("bound sandwich", bound_sandwich),
        ("task-ignorant approximation", task_ignorant_approximation),
        ("waterfilling oracle", waterfilling_oracle),
        ("rotation invariants", rotation_invariants),
        ("no-dither improvement", dither_free_is_no_worse),
        ("eigen-spectrum crossover", eig_crossover),
        ("determinism", sweeps_are_deterministic),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail} ({secs:.1} s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
