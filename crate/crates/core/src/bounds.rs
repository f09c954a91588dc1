//! Vector-quantizer benchmarks: the Gaussian distortion-rate function, the
//! converse and random-coding achievability bounds for task-based vector
//! quantization, and the distortion of a quantizer that ignores the task.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::design::{LevelBudget, LinearTaskModel};
use crate::error::{Error, Result};
use crate::linalg::{self, orthonormality_residual};
use crate::seeding::trial_rng;
use crate::stats::{monte_carlo, McEstimate};

/// Largest `log₂ M` for which codebooks are enumerated by default.
pub const DEFAULT_MAX_CODEBOOK_BITS: u32 = 16;

/// Eigen-decomposition of a Gaussian source covariance.
#[derive(Debug, Clone)]
pub struct GaussianSpectrum {
    eigenvalues: Vec<f64>,
    basis: DMatrix<f64>,
}

impl GaussianSpectrum {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let sym = linalg::symmetrized(cov, "source covariance")?;
        let (values, basis) = linalg::sym_eigen_desc(&sym);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(&low) = values.last() {
            if low < -1e-10 * top.max(f64::MIN_POSITIVE) {
                return Err(Error::Numerical(format!(
                    "source covariance has a negative eigenvalue {low:.3e}"
                )));
            }
        }
        Ok(Self {
            eigenvalues: values.into_iter().map(|v| v.max(0.0)).collect(),
            basis,
        })
    }

    /// Spectrum with the given eigenvalues in the canonical basis.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        check_eigenvalues(eigenvalues)?;
        let mut values = eigenvalues.to_vec();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let n = values.len();
        let mut basis = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            values[dst] = eigenvalues[src];
            basis[(src, dst)] = 1.0;
        }
        Ok(Self {
            eigenvalues: values,
            basis,
        })
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_residual(&self) -> f64 {
        orthonormality_residual(&self.basis.transpose())
    }

    /// Distortion `D(R)` and water level at a rate of `rate` bits.
    pub fn distortion_rate(&self, rate: f64) -> Result<(f64, f64)> {
        gaussian_distortion_rate(&self.eigenvalues, rate)
    }
}

fn check_eigenvalues(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("spectrum is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!(
            "eigenvalues must be finite and non-negative, got {v}"
        )));
    }
    Ok(())
}

/// Reverse waterfilling for a Gaussian source with the given covariance
/// eigenvalues: returns `(D, θ_wf)` where `Σ max(0, ½log₂(λᵢ/θ_wf)) = rate`
/// and `D = Σ min(λᵢ, θ_wf)`.
///
/// The water level is found in closed form: with the m largest eigenvalues
/// active, `log₂θ = (Σ_{i≤m} log₂λᵢ − 2R)/m`, and the active count is the one
/// for which `θ` lies between the m-th and (m+1)-th eigenvalue.
pub fn gaussian_distortion_rate(eigenvalues: &[f64], rate: f64) -> Result<(f64, f64)> {
    check_eigenvalues(eigenvalues)?;
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::invalid(format!(
            "rate must be non-negative, got {rate}"
        )));
    }
    let mut positive: Vec<f64> = eigenvalues.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::invalid("spectrum has zero total variance"));
    }
    positive.sort_by(|a, b| b.total_cmp(a));
    let mut log_sum = 0.0;
    let mut level = positive[0];
    for (m, &lam) in positive.iter().enumerate() {
        log_sum += lam.log2();
        let count = (m + 1) as f64;
        let candidate = ((log_sum - 2.0 * rate) / count).exp2();
        let next = positive.get(m + 1).copied().unwrap_or(0.0);
        if candidate >= next {
            level = candidate.min(lam);
            break;
        }
    }
    let distortion = eigenvalues.iter().map(|&l| l.min(level)).sum();
    Ok((distortion, level))
}

/// Converse bound: no vector quantizer with `M` codewords applied to the
/// observation achieves `E‖θ̃ − θ̂‖²` below `D_θ̃(log₂ M)`.
pub fn prop1_lower(model: &LinearTaskModel, budget: &LevelBudget) -> Result<f64> {
    let energies: Vec<f64> = model.singular_values().iter().map(|s| s * s).collect();
    if energies.iter().all(|&e| e == 0.0) {
        return Ok(0.0);
    }
    Ok(gaussian_distortion_rate(&energies, budget.log2())?.0)
}

/// A distribution that can be sampled into a fixed-length buffer.
pub trait VectorSource: Sync {
    fn dim(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);
}

/// Zero-mean Gaussian `Lz` with `z` standard normal.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    factor: DMatrix<f64>,
}

impl GaussianSource {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            factor: linalg::psd_factor(cov)?,
        })
    }
}

impl VectorSource for GaussianSource {
    fn dim(&self) -> usize {
        self.factor.nrows()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out.fill(0.0);
        for j in 0..self.factor.ncols() {
            let z: f64 = rng.sample(StandardNormal);
            for (o, l) in out.iter_mut().zip(self.factor.column(j).iter()) {
                *o += l * z;
            }
        }
    }
}

fn codebook_size(budget: &LevelBudget, max_bits: u32, what: &str) -> Result<u64> {
    if budget.log2() > max_bits as f64 {
        return Err(Error::invalid(format!(
            "{what}: log2 M = {} exceeds the enumeration cap of {max_bits} bits; raise the cap \
             or use the closed-form approximation",
            budget.log2()
        )));
    }
    budget
        .levels_u64()
        .ok_or_else(|| Error::invalid(format!("{what}: codebook too large to enumerate")))
}

/// Random-coding distortion with an arbitrary target and codeword source:
/// per trial, draws a target vector and `codewords` i.i.d. codewords and
/// records the smallest squared distance. Codewords are streamed, never stored.
pub fn random_code_distortion<T, C>(
    target: &T,
    codebook: &C,
    codewords: u64,
    trials: usize,
    seed: u64,
) -> Result<McEstimate>
where
    T: VectorSource,
    C: VectorSource,
{
    if target.dim() != codebook.dim() {
        return Err(Error::dims(format!(
            "target has dimension {} but codewords have {}",
            target.dim(),
            codebook.dim()
        )));
    }
    if codewords == 0 {
        return Err(Error::invalid(
            "codebook must contain at least one codeword",
        ));
    }
    let dim = target.dim();
    monte_carlo(trials, |t| {
        let mut rng = trial_rng(seed, t);
        let mut x = vec![0.0; dim];
        let mut c = vec![0.0; dim];
        target.sample(&mut rng, &mut x);
        let mut best = f64::INFINITY;
        for _ in 0..codewords {
            codebook.sample(&mut rng, &mut c);
            let d: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d);
        }
        Ok(best)
    })
}

/// Random Gaussian codebook matched to a Gaussian source in the source's
/// eigenbasis, with distortion measured through a linear map.
///
/// Coordinates the map ignores only influence which codeword is nearest, so
/// coordinates sharing an eigenvalue are collapsed: their contribution to the
/// squared distance is a scaled noncentral chi-square with one draw per
/// codeword, whatever the group size.
struct GaussianCode {
    /// Source and codeword standard deviations of coordinates seen by the map.
    seen: Vec<(f64, f64)>,
    /// k×r map restricted to the seen coordinates.
    map: DMatrix<f64>,
    /// Groups of unseen coordinates.
    groups: Vec<UnseenGroup>,
}

struct UnseenGroup {
    source_std: f64,
    code_std: f64,
    rest: Option<ChiSquared<f64>>,
    norm: ChiSquared<f64>,
}

const SEEN_TOL: f64 = 1e-18;
const GROUP_TOL: f64 = 1e-9;

impl GaussianCode {
    /// `eigenvalues` of the source, `map` with one column per eigendirection,
    /// and the water level fixing the codeword variances `(λ − θ)⁺`.
    fn new(eigenvalues: &[f64], map: &DMatrix<f64>, level: f64) -> Result<Self> {
        let col_norms: Vec<f64> = map.column_iter().map(|c| c.norm_squared()).collect();
        let top = col_norms.iter().copied().fold(0.0, f64::max);
        let mut seen = Vec::new();
        let mut seen_cols = Vec::new();
        let mut unseen: Vec<f64> = Vec::new();
        for (i, &lam) in eigenvalues.iter().enumerate() {
            let code_var = (lam - level).max(0.0);
            if col_norms[i] > SEEN_TOL * top {
                seen.push((lam.sqrt(), code_var.sqrt()));
                seen_cols.push(map.column(i).into_owned());
            } else if lam > 0.0 {
                unseen.push(lam);
            }
        }
        unseen.sort_by(|a, b| b.total_cmp(a));
        let mut groups: Vec<UnseenGroup> = Vec::new();
        let mut start = 0;
        while start < unseen.len() {
            let head = unseen[start];
            let mut end = start + 1;
            while end < unseen.len() && head - unseen[end] <= GROUP_TOL * head {
                end += 1;
            }
            let dim = end - start;
            let lam = unseen[start..end].iter().sum::<f64>() / dim as f64;
            let code_var = (lam - level).max(0.0);
            let chi =
                |d: usize| ChiSquared::new(d as f64).map_err(|e| Error::Numerical(e.to_string()));
            groups.push(UnseenGroup {
                source_std: lam.sqrt(),
                code_std: code_var.sqrt(),
                rest: if dim > 1 { Some(chi(dim - 1)?) } else { None },
                norm: chi(dim)?,
            });
            start = end;
        }
        let map = if seen_cols.is_empty() {
            DMatrix::zeros(map.nrows(), 0)
        } else {
            DMatrix::from_columns(&seen_cols)
        };
        Ok(Self { seen, map, groups })
    }

    /// One trial: draws the source and `codewords` codewords and returns the
    /// mapped squared error of the nearest codeword.
    fn trial<R: Rng + ?Sized>(&self, rng: &mut R, codewords: u64) -> f64 {
        let r = self.seen.len();
        let y: Vec<f64> = self
            .seen
            .iter()
            .map(|&(s, _)| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        // Noncentrality of each unseen group relative to the codeword scale.
        let shifts: Vec<f64> = self
            .groups
            .iter()
            .map(|g| {
                let energy = g.source_std * g.source_std * g.norm.sample(rng);
                if g.code_std > 0.0 {
                    energy.sqrt() / g.code_std
                } else {
                    0.0
                }
            })
            .collect();
        let mut best = f64::INFINITY;
        let mut best_code = vec![0.0; r];
        let mut code = vec![0.0; r];
        for _ in 0..codewords {
            let mut dist = 0.0;
            for (i, &(_, s)) in self.seen.iter().enumerate() {
                code[i] = if s > 0.0 {
                    s * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let e = y[i] - code[i];
                dist += e * e;
            }
            for (g, &shift) in self.groups.iter().zip(&shifts) {
                if g.code_std == 0.0 {
                    continue;
                }
                let z: f64 = rng.sample(StandardNormal);
                let mut chi = (z - shift) * (z - shift);
                if let Some(rest) = &g.rest {
                    chi += rest.sample(rng);
                }
                dist += g.code_std * g.code_std * chi;
            }
            if dist < best {
                best = dist;
                best_code.copy_from_slice(&code);
            }
        }
        let err: Vec<f64> = y.iter().zip(&best_code).map(|(a, b)| a - b).collect();
        let mut total = 0.0;
        for row in 0..self.map.nrows() {
            let v: f64 = (0..r).map(|j| self.map[(row, j)] * err[j]).sum();
            total += v * v;
        }
        total
    }

    fn run(&self, codewords: u64, trials: usize, seed: u64) -> Result<McEstimate> {
        monte_carlo(trials, |t| {
            Ok(self.trial(&mut trial_rng(seed, t), codewords))
        })
    }
}

/// Achievability bound: Monte Carlo estimate of `E[min_m ‖c_m − θ̃‖²]` for a
/// codebook of `M` i.i.d. codewords drawn from the distortion-rate optimal
/// output distribution of `θ̃` at rate `log₂ M`.
pub fn prop1_upper(
    model: &LinearTaskModel,
    budget: &LevelBudget,
    trials: usize,
    seed: u64,
    max_bits: u32,
) -> Result<McEstimate> {
    let m = codebook_size(budget, max_bits, "random-coding bound")?;
    let energies: Vec<f64> = model.singular_values().iter().map(|s| s * s).collect();
    if energies.iter().all(|&e| e == 0.0) {
        return Ok(McEstimate::exact(0.0));
    }
    let (_, level) = gaussian_distortion_rate(&energies, budget.log2())?;
    let k = energies.len();
    let code = GaussianCode::new(&energies, &DMatrix::identity(k, k), level)?;
    code.run(m, trials, seed)
}

/// Distortion `E‖Γ(x − q(x))‖²` of a vector quantizer designed for the
/// observation alone: `q(x)` is the nearest of `M` i.i.d. codewords drawn from
/// the distortion-rate optimal output distribution of `x`.
pub fn task_ignorant_empirical(
    model: &LinearTaskModel,
    budget: &LevelBudget,
    trials: usize,
    seed: u64,
    max_bits: u32,
) -> Result<McEstimate> {
    let m = codebook_size(budget, max_bits, "task-ignorant quantizer")?;
    let spectrum = GaussianSpectrum::from_covariance(model.sigma_x())?;
    let (_, level) = spectrum.distortion_rate(budget.log2())?;
    let map = model.task() * spectrum.basis();
    let code = GaussianCode::new(spectrum.eigenvalues(), &map, level)?;
    code.run(m, trials, seed)
}

/// Closed-form approximation of [`task_ignorant_empirical`]:
/// `Σᵢ ‖Γuᵢ‖² min(λᵢ, θ_wf)` over the eigenpairs of `Σx`.
pub fn task_ignorant_approx(model: &LinearTaskModel, budget: &LevelBudget) -> Result<f64> {
    let spectrum = GaussianSpectrum::from_covariance(model.sigma_x())?;
    let (_, level) = spectrum.distortion_rate(budget.log2())?;
    let map = model.task() * spectrum.basis();
    Ok(spectrum
        .eigenvalues()
        .iter()
        .zip(map.column_iter())
        .map(|(&lam, col)| col.norm_squared() * lam.min(level))
        .sum())
}
