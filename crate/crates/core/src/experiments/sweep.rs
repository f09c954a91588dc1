use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    prop1_lower, prop1_upper, random_code_distortion, task_ignorant_approx,
    task_ignorant_empirical, VectorSource,
};
use crate::design::{design, DesignMethod, HardwareLimitedSystem, LevelBudget};
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::scenarios::{
    build_covariance_plan, quantized_covariance, ChannelScenario, EigScenario, EstimatorVariant,
};
use crate::seeding::{derive_seed, trial_rng};
use crate::stats::{run_trials, McEstimate};

use super::config::{Method, SweepConfig};

/// A scenario ready to simulate.
#[derive(Debug, Clone)]
pub enum BuiltScenario {
    Channel(ChannelScenario),
    Eig(EigScenario),
}

/// One row of sweep output. Failed grid points carry `error` and no values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: String,
    #[serde(rename = "logM")]
    pub log_m: u32,
    pub n_s: Option<usize>,
    /// Mean total error `E‖θ − θ̂‖²`.
    pub estimate: Option<f64>,
    /// 95% half-width of `estimate`.
    pub ci: Option<f64>,
    pub theoretical: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub wall_ms: Option<f64>,
    /// Mean error relative to the MMSE estimate, `E‖θ̃ − θ̂‖²`, where known.
    pub distortion: Option<f64>,
    pub error: Option<String>,
}

impl SweepRecord {
    fn new(method: Method, log_m: u32, n_s: Option<usize>, seed: u64) -> Self {
        Self {
            method: method.name().to_string(),
            log_m,
            n_s,
            estimate: None,
            ci: None,
            theoretical: None,
            trials: 0,
            seed,
            wall_ms: None,
            distortion: None,
            error: None,
        }
    }

    fn analytic(mut self, value: f64) -> Self {
        self.estimate = Some(value);
        self.ci = Some(0.0);
        self.theoretical = Some(value);
        self
    }

    fn simulated(mut self, total: &McEstimate) -> Self {
        self.estimate = Some(total.mean);
        self.ci = Some(total.half_width);
        self.trials = total.trials;
        self
    }
}

/// Runs the sweep described by `cfg` on the thread count it names (or the
/// global pool).
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    match cfg.threads {
        Some(n) => run_sweep_with_threads(cfg, n),
        None => dispatch(cfg),
    }
}

/// Runs the sweep on a dedicated pool of `threads` workers. Records do not
/// depend on the thread count.
pub fn run_sweep_with_threads(cfg: &SweepConfig, threads: usize) -> Result<Vec<SweepRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if cfg.scenario.is_channel() {
        run_channel_sweep(cfg)
    } else {
        run_eig_sweep(cfg)
    }
}

/// Scenario draws are shared by every record of a sweep, so methods are
/// compared on common random numbers.
fn scenario_seed(cfg: &SweepConfig) -> u64 {
    derive_seed(cfg.seed, "scenario")
}

fn record_seed(cfg: &SweepConfig, method: Method, log_m: u32, n_s: Option<usize>) -> u64 {
    let n_s = n_s.map_or_else(|| "-".to_string(), |n| n.to_string());
    derive_seed(cfg.seed, &format!("{method}/{log_m}/{n_s}"))
}

fn timed(
    cfg: &SweepConfig,
    mut rec: SweepRecord,
    body: impl FnOnce(SweepRecord) -> Result<SweepRecord>,
) -> SweepRecord {
    let start = Instant::now();
    let fallback = rec.clone();
    rec = body(rec).unwrap_or_else(|e| SweepRecord {
        error: Some(e.to_string()),
        ..fallback
    });
    if cfg.record_timing {
        rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    rec
}

/// Channel-estimation sweep: method-major, then bits.
pub fn run_channel_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let BuiltScenario::Channel(scenario) = cfg.scenario.build(cfg.estimator)? else {
        return Err(Error::invalid("channel sweep needs a channel scenario"));
    };
    let floor = scenario.model().mmse_floor();
    let mut records = Vec::with_capacity(cfg.methods.len() * cfg.bits.len());
    for &method in &cfg.methods {
        for &bits in &cfg.bits {
            let rec = SweepRecord::new(method, bits, None, cfg.seed);
            records.push(timed(cfg, rec, |rec| {
                channel_point(cfg, &scenario, method, bits, floor, rec)
            }));
        }
    }
    Ok(records)
}

fn channel_point(
    cfg: &SweepConfig,
    scenario: &ChannelScenario,
    method: Method,
    bits: u32,
    floor: f64,
    rec: SweepRecord,
) -> Result<SweepRecord> {
    let model = scenario.model();
    let budget = LevelBudget::from_bits(bits);
    let bound_seed = record_seed(cfg, method, bits, None);
    let (design_method, dithered) = match method {
        Method::Thm1 => (DesignMethod::Optimal, true),
        Method::Thm1NoDither => (DesignMethod::Optimal, false),
        Method::Cor3 => (DesignMethod::QuantizeMmse, true),
        Method::Cor3NoDither => (DesignMethod::QuantizeMmse, false),
        Method::Cor2 => (DesignMethod::DigitalOnly, true),
        Method::MmseFloor => {
            let mut rec = rec.analytic(floor);
            rec.distortion = Some(0.0);
            return Ok(rec);
        }
        Method::Prop1Lower => {
            let d = prop1_lower(model, &budget)?;
            let mut rec = rec.analytic(d + floor);
            rec.distortion = Some(d);
            return Ok(rec);
        }
        Method::TaskIgnorantApprox => {
            let d = task_ignorant_approx(model, &budget)?;
            let mut rec = rec.analytic(d + floor);
            rec.distortion = Some(d);
            return Ok(rec);
        }
        Method::Prop1Upper | Method::TaskIgnorantEmp => {
            let est = if method == Method::Prop1Upper {
                prop1_upper(
                    model,
                    &budget,
                    cfg.bound_trials,
                    bound_seed,
                    cfg.bound_max_bits,
                )?
            } else {
                task_ignorant_empirical(
                    model,
                    &budget,
                    cfg.bound_trials,
                    bound_seed,
                    cfg.bound_max_bits,
                )?
            };
            let mut rec = rec.simulated(&est.shifted(floor));
            rec.distortion = Some(est.mean);
            return Ok(rec);
        }
        Method::EigPipeline | Method::PriorMean => {
            return Err(Error::invalid(format!(
                "{method} does not apply to a channel scenario"
            )))
        }
    };
    let p = match method {
        Method::Thm1 | Method::Thm1NoDither => cfg.output_dim,
        _ => None,
    };
    let system = design(design_method, model, &budget, cfg.eta, p)?.with_dither(dithered);
    let (total, distortion) = simulate_channel(
        scenario,
        &system,
        cfg.trials,
        scenario_seed(cfg),
        bound_seed,
    )?;
    let mut rec = rec.simulated(&total);
    rec.distortion = Some(distortion.mean);
    if dithered {
        rec.theoretical = Some(system.predicted_mse + floor);
    }
    Ok(rec)
}

/// Monte Carlo of `θ̂ = B Q(Ax)` on the channel scenario. Returns the total
/// error and the error relative to the MMSE estimate `Γx`.
fn simulate_channel(
    scenario: &ChannelScenario,
    system: &HardwareLimitedSystem,
    trials: usize,
    scenario_seed: u64,
    dither_seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    let task = scenario.model().task();
    let pairs = run_trials(trials, |t| {
        let (theta, x) = scenario.sample(&mut trial_rng(scenario_seed, t));
        let estimate = system.estimate(&x, &mut trial_rng(dither_seed, t))?;
        let mmse = task * &x;
        Ok((
            (&theta - &estimate).norm_squared(),
            (&mmse - &estimate).norm_squared(),
        ))
    })?;
    let (total, dist): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        McEstimate::from_samples(&total),
        McEstimate::from_samples(&dist),
    ))
}

/// Eigen-spectrum sweep: method-major; the pipeline then iterates set counts
/// before bits.
pub fn run_eig_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let BuiltScenario::Eig(scenario) = cfg.scenario.build(cfg.estimator)? else {
        return Err(Error::invalid(
            "eigen-spectrum sweep needs an eigen-spectrum scenario",
        ));
    };
    let floor_needed = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::MmseFloor | Method::Prop1Upper));
    let floor = if floor_needed {
        Some(eig_mmse(&scenario, cfg.trials, scenario_seed(cfg))?)
    } else {
        None
    };
    let mut records = Vec::new();
    for &method in &cfg.methods {
        match method {
            Method::EigPipeline => {
                for &n_s in &cfg.partitions {
                    for &bits in &cfg.bits {
                        let rec = SweepRecord::new(method, bits, Some(n_s), cfg.seed);
                        records.push(timed(cfg, rec, |rec| {
                            eig_pipeline_point(cfg, &scenario, n_s, bits, rec)
                        }));
                    }
                }
            }
            _ => {
                for &bits in &cfg.bits {
                    let rec = SweepRecord::new(method, bits, None, cfg.seed);
                    records.push(timed(cfg, rec, |rec| {
                        eig_baseline_point(cfg, &scenario, method, bits, floor.as_ref(), rec)
                    }));
                }
            }
        }
    }
    Ok(records)
}

fn eig_pipeline_point(
    cfg: &SweepConfig,
    scenario: &EigScenario,
    n_s: usize,
    bits: u32,
    rec: SweepRecord,
) -> Result<SweepRecord> {
    let plan = build_covariance_plan(scenario.samples(), scenario.dim(), n_s)?;
    let p = plan.quantizers();
    let resolution = LevelBudget::from_bits(bits).resolution(p);
    if resolution < 2 {
        return Err(Error::Infeasible(format!(
            "{p} quantizers with log2 M = {bits} leave floor(M^(1/p)) = {resolution} level per \
             quantizer"
        )));
    }
    let variance = plan.set_size() as f64 * scenario.peak_sample_variance();
    let spec = QuantizerSpec::for_input_variance(resolution, variance, cfg.eta, cfg.dither)?;
    let scen_seed = scenario_seed(cfg);
    let dither_seed = record_seed(cfg, Method::EigPipeline, bits, Some(n_s));
    let total = McEstimate::from_samples(&run_trials(cfg.trials, |t| {
        let (theta, samples) = scenario.sample(&mut trial_rng(scen_seed, t));
        let r_hat = quantized_covariance(&samples, &plan, &spec, &mut trial_rng(dither_seed, t))?;
        let est = scenario.estimate_eigenspectrum(&r_hat)?;
        Ok(squared_distance(&theta, &est))
    })?);
    Ok(rec.simulated(&total))
}

fn eig_baseline_point(
    cfg: &SweepConfig,
    scenario: &EigScenario,
    method: Method,
    bits: u32,
    floor: Option<&McEstimate>,
    rec: SweepRecord,
) -> Result<SweepRecord> {
    match method {
        Method::PriorMean => {
            let mean = scenario.prior_mean();
            let seed = scenario_seed(cfg);
            let total = McEstimate::from_samples(&run_trials(cfg.trials, |t| {
                let (theta, _) = scenario.sample(&mut trial_rng(seed, t));
                Ok(squared_distance(&theta, &mean))
            })?);
            let mut rec = rec.simulated(&total);
            rec.theoretical = Some(scenario.prior_variance().iter().sum());
            Ok(rec)
        }
        Method::MmseFloor => {
            let floor = floor.expect("floor computed when requested");
            let mut rec = rec.simulated(floor);
            rec.distortion = Some(0.0);
            Ok(rec)
        }
        Method::Prop1Upper => {
            let floor = floor.expect("floor computed when requested");
            let budget = LevelBudget::from_bits(bits);
            if budget.log2() > cfg.bound_max_bits as f64 {
                return Err(Error::invalid(format!(
                    "random-coding bound: log2 M = {bits} exceeds the enumeration cap of {} bits",
                    cfg.bound_max_bits
                )));
            }
            let codewords = budget
                .levels_u64()
                .ok_or_else(|| Error::invalid("random-coding bound: codebook too large"))?;
            let target = PosteriorMeanSource::new(scenario);
            let codebook = PriorSource(scenario);
            let est = random_code_distortion(
                &target,
                &codebook,
                codewords,
                cfg.bound_trials,
                record_seed(cfg, method, bits, None),
            )?;
            let mut rec = rec.simulated(&est.shifted(floor.mean));
            rec.distortion = Some(est.mean);
            Ok(rec)
        }
        _ => Err(Error::invalid(format!(
            "{method} does not apply to an eigen-spectrum scenario"
        ))),
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sample_covariance(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let r = samples * samples.transpose() / samples.ncols() as f64;
    (&r + r.transpose()) * 0.5
}

/// MMSE of the eigen-spectrum from unquantized samples: the posterior mean
/// applied to the full sample covariance.
fn eig_mmse(scenario: &EigScenario, trials: usize, seed: u64) -> Result<McEstimate> {
    let posterior = scenario
        .clone()
        .with_variant(EstimatorVariant::PosteriorMean);
    Ok(McEstimate::from_samples(&run_trials(trials, |t| {
        let (theta, samples) = posterior.sample(&mut trial_rng(seed, t));
        let est = posterior.estimate_eigenspectrum(&sample_covariance(&samples))?;
        Ok(squared_distance(&theta, &est))
    })?))
}

/// Posterior mean of the eigen-spectrum given unquantized samples.
struct PosteriorMeanSource(EigScenario);

impl PosteriorMeanSource {
    fn new(scenario: &EigScenario) -> Self {
        Self(
            scenario
                .clone()
                .with_variant(EstimatorVariant::PosteriorMean),
        )
    }
}

impl VectorSource for PosteriorMeanSource {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let (_, samples) = self.0.sample(rng);
        let est = self
            .0
            .estimate_eigenspectrum(&sample_covariance(&samples))
            .expect("posterior coefficients are finite");
        out.copy_from_slice(&est);
    }
}

/// Eigenvalues drawn from the prior, used as random codewords.
struct PriorSource<'a>(&'a EigScenario);

impl VectorSource for PriorSource<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        // Only θ is needed; the samples are a by-product.
        let (theta, _) = self.0.sample(rng);
        out.copy_from_slice(&theta);
    }
}
