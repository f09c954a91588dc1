use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::budget::LevelBudget;
use super::model::LinearTaskModel;
use super::rotation::equal_diagonal_rotation;
use super::waterfill::{solve_waterfilling_zeta, waterfilling_weights};
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::quantizer::{kappa, serial_adc_into, QuantizerSpec};

/// Which design rule produced a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMethod {
    /// Jointly optimal analog combiner, quantizer support and digital filter.
    Optimal,
    /// Quantize the raw observation (`A = I`).
    DigitalOnly,
    /// Quantize the MMSE estimate (`A = Γ`).
    QuantizeMmse,
}

impl DesignMethod {
    pub fn name(self) -> &'static str {
        match self {
            DesignMethod::Optimal => "optimal",
            DesignMethod::DigitalOnly => "digital-only",
            DesignMethod::QuantizeMmse => "quantize-mmse",
        }
    }
}

impl fmt::Display for DesignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Intermediate factors of the optimal design.
#[derive(Debug, Clone)]
pub struct DesignReport {
    /// Singular values of `Γ̃`, padded with zeros to length `max(k, p)`.
    pub singular_values: Vec<f64>,
    pub zeta: f64,
    /// Waterfilling weights `Λ_A,ii²` (length p).
    pub weights: Vec<f64>,
    /// p×p rotation equalizing the diagonal of `A Σx Aᵀ`.
    pub u_a: DMatrix<f64>,
    /// n×n right factor.
    pub v_a: DMatrix<f64>,
}

impl DesignReport {
    /// Number of positive waterfilling weights.
    pub fn active_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// p×n diagonal factor `Λ_A`.
    pub fn lambda_a(&self) -> DMatrix<f64> {
        let p = self.u_a.nrows();
        let n = self.v_a.nrows();
        let mut l = DMatrix::zeros(p, n);
        for (i, w) in self.weights.iter().enumerate().take(p.min(n)) {
            l[(i, i)] = w.sqrt();
        }
        l
    }
}

/// Analog combiner `A`, serial ADC and digital filter `B` producing
/// `θ̂ = B Q(Ax)`.
#[derive(Debug, Clone)]
pub struct HardwareLimitedSystem {
    pub method: DesignMethod,
    /// p×n analog combiner.
    pub combiner: DMatrix<f64>,
    /// k×p digital filter.
    pub digital: DMatrix<f64>,
    pub quantizer: QuantizerSpec,
    pub budget: LevelBudget,
    /// Model-predicted `E‖θ̃ − θ̂‖²` under the additive dither model.
    pub predicted_mse: f64,
    pub report: Option<DesignReport>,
}

impl HardwareLimitedSystem {
    /// Number of scalar quantizers p.
    pub fn output_dim(&self) -> usize {
        self.combiner.nrows()
    }

    pub fn observation_dim(&self) -> usize {
        self.combiner.ncols()
    }

    pub fn task_dim(&self) -> usize {
        self.digital.nrows()
    }

    /// Same system with dithering switched on or off. The predicted MSE
    /// keeps referring to the dithered model.
    pub fn with_dither(mut self, dithered: bool) -> Self {
        self.quantizer = self.quantizer.with_dither(dithered);
        self
    }

    /// Applies the system to one observation.
    pub fn estimate<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        if x.len() != self.observation_dim() {
            return Err(Error::dims(format!(
                "observation has {} entries, system expects {}",
                x.len(),
                self.observation_dim()
            )));
        }
        let analog = &self.combiner * x;
        let mut quantized = DVector::zeros(analog.len());
        serial_adc_into(
            analog.as_slice(),
            &self.quantizer,
            rng,
            quantized.as_mut_slice(),
        )?;
        Ok(&self.digital * quantized)
    }

    /// Design summary as a JSON document; matrices are row-major nested arrays.
    pub fn to_json(&self) -> Value {
        let mut doc = json!({
            "method": self.method.name(),
            "p": self.output_dim(),
            "log2_M": self.budget.log2(),
            "M": self.budget.levels_u64(),
            "M_tilde": self.quantizer.resolution(),
            "gamma": self.quantizer.dynamic_range(),
            "eta": self.quantizer.eta(),
            "dithered": self.quantizer.dithered(),
            "predicted_mse": self.predicted_mse,
            "A": matrix_rows(&self.combiner),
            "B": matrix_rows(&self.digital),
            "zeta": Value::Null,
        });
        if let Some(r) = &self.report {
            doc["zeta"] = json!(r.zeta);
            doc["active_directions"] = json!(r.active_count());
            doc["waterfilling_weights"] = json!(r.weights);
            doc["singular_values"] = json!(r.singular_values);
        }
        doc
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&v| json!(v)).collect()))
            .collect(),
    )
}

/// Variance of the additive noise of a dithered quantizer, `2γ²/(3M̃²)`.
pub fn adc_noise_variance(dynamic_range: f64, resolution: u64) -> f64 {
    let m = resolution as f64;
    2.0 * dynamic_range * dynamic_range / (3.0 * m * m)
}

fn check_combiner(a: &DMatrix<f64>, model: &LinearTaskModel) -> Result<()> {
    if a.ncols() != model.observation_dim() || a.nrows() == 0 {
        return Err(Error::dims(format!(
            "combiner is {}x{} but the observation has dimension {}",
            a.nrows(),
            a.ncols(),
            model.observation_dim()
        )));
    }
    Ok(())
}

fn check_noise(dynamic_range: f64, resolution: u64) -> Result<f64> {
    if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
        return Err(Error::invalid(format!(
            "dynamic range must be positive, got {dynamic_range}"
        )));
    }
    if resolution == 0 {
        return Err(Error::invalid("resolution must be positive"));
    }
    Ok(adc_noise_variance(dynamic_range, resolution))
}

/// `(A Σx Aᵀ + vI)⁻¹` and `A Σx Γᵀ`.
fn noisy_gram(
    a: &DMatrix<f64>,
    model: &LinearTaskModel,
    v: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a_sigma = a * model.sigma_x();
    let p = a.nrows();
    let gram = &a_sigma * a.transpose() + DMatrix::identity(p, p) * v;
    let inv = linalg::spd_inverse(&gram).map_err(|_| {
        Error::Numerical("A Σx Aᵀ + vI is not positive definite; the combiner is degenerate".into())
    })?;
    let cross = a_sigma * model.task().transpose();
    Ok((inv, cross))
}

/// MSE-optimal digital filter for a fixed combiner under the additive
/// dither model: `B = ΓΣxAᵀ(AΣxAᵀ + vI)⁻¹` with `v = 2γ²/(3M̃²)`.
pub fn digital_matrix_for(
    a: &DMatrix<f64>,
    model: &LinearTaskModel,
    dynamic_range: f64,
    resolution: u64,
) -> Result<DMatrix<f64>> {
    check_combiner(a, model)?;
    let v = check_noise(dynamic_range, resolution)?;
    let (inv, cross) = noisy_gram(a, model, v)?;
    Ok(cross.transpose() * inv)
}

/// MSE `E‖θ̃ − θ̂‖²` achieved with the filter of [`digital_matrix_for`]:
/// `Tr(ΓΣxΓᵀ) − Tr(ΓΣxAᵀ(AΣxAᵀ + vI)⁻¹AΣxΓᵀ)`.
pub fn mse_for_combiner(
    a: &DMatrix<f64>,
    model: &LinearTaskModel,
    dynamic_range: f64,
    resolution: u64,
) -> Result<f64> {
    check_combiner(a, model)?;
    let v = check_noise(dynamic_range, resolution)?;
    let (inv, cross) = noisy_gram(a, model, v)?;
    let explained = (cross.transpose() * inv * &cross).trace();
    Ok((model.estimate_energy() - explained).max(0.0))
}

/// Dynamic range from the rule `γ² = κ · max_l E[(Ax)_l²]`.
pub fn dynamic_range_for(
    a: &DMatrix<f64>,
    model: &LinearTaskModel,
    eta: f64,
    resolution: u64,
) -> Result<f64> {
    check_combiner(a, model)?;
    let k = kappa(eta, resolution)?;
    let gram = a * model.sigma_x() * a.transpose();
    let peak = gram.diagonal().max();
    if !(peak > 0.0) {
        return Err(Error::invalid("combiner outputs have zero variance"));
    }
    Ok((k * peak).sqrt())
}

fn resolution_at_least_two(budget: &LevelBudget, p: usize, what: &str) -> Result<u64> {
    let res = budget.resolution(p);
    if res < 2 {
        return Err(Error::Infeasible(format!(
            "{what}: log2 M = {} bits across {p} scalar quantizers leaves floor(M^(1/{p})) = {res} \
             level per quantizer",
            budget.log2()
        )));
    }
    Ok(res)
}

/// Closed-form MSE of the optimal design for output dimension `p`:
/// `Σ_{i≤p} σᵢ²/((ζσᵢ − 1)⁺ + 1) + Σ_{i>p} σᵢ²`.
pub fn optimal_mse_formula(singulars: &[f64], p: usize, zeta: f64) -> f64 {
    singulars
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if i < p {
                s * s / ((zeta * s - 1.0).max(0.0) + 1.0)
            } else {
                s * s
            }
        })
        .sum()
}

/// Jointly optimal system with `p` scalar quantizers.
pub fn design_optimal(
    model: &LinearTaskModel,
    p: usize,
    budget: &LevelBudget,
    eta: f64,
) -> Result<HardwareLimitedSystem> {
    let n = model.observation_dim();
    if p == 0 || p > n {
        return Err(Error::invalid(format!(
            "number of quantizers must be in 1..={n}, got {p}"
        )));
    }
    let res = resolution_at_least_two(budget, p, "optimal design")?;
    let kap = kappa(eta, res)?;
    let m2 = (res as f64) * (res as f64);
    let c = 2.0 * kap / (3.0 * m2 * p as f64);

    let sigma = model.singular_values();
    let mut padded: Vec<f64> = sigma.to_vec();
    if padded.len() < p {
        padded.resize(p, 0.0);
    }
    let zeta = solve_waterfilling_zeta(&padded[..p], c)?;
    let weights = waterfilling_weights(&padded[..p], c, zeta);

    let u_a = equal_diagonal_rotation(&weights)?;
    let v_a = model.right_vectors().clone();
    let report = DesignReport {
        singular_values: padded,
        zeta,
        weights,
        u_a,
        v_a,
    };
    let lambda = report.lambda_a();

    // A = U Λ Vᵀ Σx^{-1/2}
    let combiner = &report.u_a * &lambda * report.v_a.transpose() * model.sigma_x_inv_sqrt();
    let gamma = (kap / p as f64).sqrt();
    let v = adc_noise_variance(gamma, res);
    // B = Γ̃ V Λᵀ (ΛΛᵀ + vI)⁻¹ Uᵀ, with ΛΛᵀ diagonal.
    let mut lambda_t_inv = lambda.transpose();
    for (i, w) in report.weights.iter().enumerate() {
        if i < n {
            lambda_t_inv.column_mut(i).scale_mut(1.0 / (w + v));
        }
    }
    let digital = model.whitened_task() * &report.v_a * lambda_t_inv * report.u_a.transpose();
    let predicted_mse = optimal_mse_formula(sigma, p, zeta);

    Ok(HardwareLimitedSystem {
        method: DesignMethod::Optimal,
        combiner,
        digital,
        quantizer: QuantizerSpec::new(res, gamma, eta, true)?,
        budget: budget.clone(),
        predicted_mse,
        report: Some(report),
    })
}

/// Output dimension in `1..=n` minimizing the predicted optimal MSE; ties
/// (within a relative `1e-12`) go to the smallest p. Dimensions that leave
/// fewer than two levels per quantizer are skipped.
pub fn select_output_dimension(
    model: &LinearTaskModel,
    budget: &LevelBudget,
    eta: f64,
) -> Result<usize> {
    let n = model.observation_dim();
    let mut best: Option<(usize, f64)> = None;
    for p in 1..=n {
        let res = budget.resolution(p);
        if res < 2 {
            break;
        }
        let kap = match kappa(eta, res) {
            Ok(k) => k,
            Err(_) => continue,
        };
        let c = 2.0 * kap / (3.0 * (res as f64) * (res as f64) * p as f64);
        let mut padded = model.singular_values().to_vec();
        if padded.len() < p {
            padded.resize(p, 0.0);
        }
        let zeta = solve_waterfilling_zeta(&padded[..p], c)?;
        let mse = optimal_mse_formula(model.singular_values(), p, zeta);
        match best {
            Some((_, b)) if mse >= b - 1e-12 * b.abs() => {}
            _ => best = Some((p, mse)),
        }
    }
    best.map(|(p, _)| p).ok_or_else(|| {
        Error::Infeasible(format!(
            "log2 M = {} bits cannot give even one quantizer two levels under eta = {eta}",
            budget.log2()
        ))
    })
}

/// Quantizes the raw observation with n scalar quantizers and applies the
/// optimal digital filter.
pub fn design_digital_only(
    model: &LinearTaskModel,
    budget: &LevelBudget,
    eta: f64,
) -> Result<HardwareLimitedSystem> {
    let n = model.observation_dim();
    let res = resolution_at_least_two(budget, n, "digital-only design")?;
    let kap = kappa(eta, res)?;
    let peak = model.sigma_x().diagonal().max();
    let gamma = (kap * peak).sqrt();
    let v = adc_noise_variance(gamma, res);
    let combiner = DMatrix::identity(n, n);
    let digital = digital_matrix_for(&combiner, model, gamma, res)?;
    // Tr(Γ̃ᵀΓ̃ (I + Σx/v)⁻¹)
    let shrink = linalg::spd_inverse(&(DMatrix::identity(n, n) + model.sigma_x() / v))?;
    let wt = model.whitened_task();
    let predicted_mse = (wt.transpose() * wt * shrink).trace();
    Ok(HardwareLimitedSystem {
        method: DesignMethod::DigitalOnly,
        combiner,
        digital,
        quantizer: QuantizerSpec::new(res, gamma, eta, true)?,
        budget: budget.clone(),
        predicted_mse,
        report: None,
    })
}

/// Quantizes the MMSE estimate `Γx` with k scalar quantizers and applies
/// the optimal digital filter.
pub fn design_quantize_mmse(
    model: &LinearTaskModel,
    budget: &LevelBudget,
    eta: f64,
) -> Result<HardwareLimitedSystem> {
    let k = model.task_dim();
    let res = resolution_at_least_two(budget, k, "MMSE-quantization design")?;
    let kap = kappa(eta, res)?;
    let cov = model.estimate_covariance();
    let peak = cov.diagonal().max();
    if !(peak > 0.0) {
        return Err(Error::Infeasible(
            "the task is trivially constant: the MMSE estimate has zero variance".into(),
        ));
    }
    let gamma = (kap * peak).sqrt();
    let v = adc_noise_variance(gamma, res);
    let combiner = model.task().clone();
    let digital = &cov * linalg::spd_inverse(&(&cov + DMatrix::identity(k, k) * v))?;
    let predicted_mse = model
        .singular_values()
        .iter()
        .map(|s| {
            let e = s * s;
            e * v / (e + v)
        })
        .sum();
    Ok(HardwareLimitedSystem {
        method: DesignMethod::QuantizeMmse,
        combiner,
        digital,
        quantizer: QuantizerSpec::new(res, gamma, eta, true)?,
        budget: budget.clone(),
        predicted_mse,
        report: None,
    })
}

/// Dispatches on `method`; `p` only applies to [`DesignMethod::Optimal`],
/// where `None` selects the best output dimension.
pub fn design(
    method: DesignMethod,
    model: &LinearTaskModel,
    budget: &LevelBudget,
    eta: f64,
    p: Option<usize>,
) -> Result<HardwareLimitedSystem> {
    match method {
        DesignMethod::Optimal => {
            let p = match p {
                Some(p) => p,
                None => select_output_dimension(model, budget, eta)?,
            };
            design_optimal(model, p, budget, eta)
        }
        DesignMethod::DigitalOnly => design_digital_only(model, budget, eta),
        DesignMethod::QuantizeMmse => design_quantize_mmse(model, budget, eta),
    }
}

/// Whether the MMSE estimate has (up to `tol`) the covariance `I/k`, the
/// normalization under which quantizing the MMSE estimate is optimal.
pub fn is_mmse_quantization_optimal(model: &LinearTaskModel, tol: f64) -> Result<bool> {
    let k = model.task_dim();
    if model.rank() < k {
        return Err(Error::Numerical(format!(
            "covariance of the MMSE estimate is singular (rank {} < {k})",
            model.rank()
        )));
    }
    let cov = model.estimate_covariance();
    let target = DMatrix::identity(k, k) / k as f64;
    Ok(max_abs(&(cov - target)) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_residual;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(n: usize, k: usize, seed: u64) -> LinearTaskModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sigma = &g * g.transpose() + DMatrix::identity(n, n) * 0.3;
        let task = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        LinearTaskModel::new(sigma, task, 0.0).unwrap()
    }

    fn scalar_model(var: f64) -> LinearTaskModel {
        LinearTaskModel::new(dmatrix![var], dmatrix![1.0], 0.0).unwrap()
    }

    #[test]
    fn scalar_case_closed_form() {
        // n = k = p = 1, Γ = 1, Σx = 1, log M = 4.
        let m = scalar_model(1.0);
        let budget = LevelBudget::from_bits(4);
        let sys = design_optimal(&m, 1, &budget, 3.0).unwrap();
        let kap = 9.0 / (1.0 - 9.0 / (3.0 * 256.0));
        let v = 2.0 * kap / (3.0 * 256.0);
        let want = v / (1.0 + v);
        assert!((sys.predicted_mse - want).abs() < 1e-14);
        let direct =
            mse_for_combiner(&sys.combiner, &m, sys.quantizer.dynamic_range(), 16).unwrap();
        assert!((direct - want).abs() < 1e-12);
        assert!((sys.quantizer.dynamic_range().powi(2) - kap).abs() < 1e-12);
    }

    #[test]
    fn single_direction_mse_is_inverse_zeta() {
        let m = LinearTaskModel::new(DMatrix::identity(2, 2), dmatrix![1.0, 0.0], 0.0).unwrap();
        let budget = LevelBudget::from_bits(6);
        let sys = design_optimal(&m, 1, &budget, 3.0).unwrap();
        let zeta = sys.report.as_ref().unwrap().zeta;
        assert!((sys.predicted_mse - 1.0 / zeta).abs() < 1e-14);
    }

    #[test]
    fn matrices_and_formula_agree() {
        for (seed, (n, k)) in [(3, 2), (6, 3), (5, 5), (8, 1)].into_iter().enumerate() {
            let m = random_model(n, k, seed as u64);
            let budget = LevelBudget::from_bits(12);
            for p in 1..=n {
                let Ok(sys) = design_optimal(&m, p, &budget, 3.0) else {
                    continue;
                };
                let res = sys.quantizer.resolution();
                let gamma = sys.quantizer.dynamic_range();
                let direct = mse_for_combiner(&sys.combiner, &m, gamma, res).unwrap();
                assert!(
                    (direct - sys.predicted_mse).abs() <= 1e-9 * m.estimate_energy(),
                    "p={p}: {direct} vs {}",
                    sys.predicted_mse
                );
                let b = digital_matrix_for(&sys.combiner, &m, gamma, res).unwrap();
                assert!(max_abs(&(b - &sys.digital)) < 1e-8 * max_abs(&sys.digital).max(1.0));
                let rule = dynamic_range_for(&sys.combiner, &m, 3.0, res).unwrap();
                assert!((rule - gamma).abs() < 1e-9 * gamma);
                assert!(sys.predicted_mse <= m.estimate_energy() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rotation_equalizes_quantizer_inputs() {
        let m = random_model(6, 3, 11);
        let sys = design_optimal(&m, 5, &LevelBudget::from_bits(30), 3.0).unwrap();
        let gram = &sys.combiner * m.sigma_x() * sys.combiner.transpose();
        for i in 0..5 {
            assert!((gram[(i, i)] - 0.2).abs() < 1e-9, "{}", gram[(i, i)]);
        }
        let r = sys.report.unwrap();
        assert!(orthonormality_residual(&r.u_a) < 1e-12);
        assert!(orthonormality_residual(&r.v_a.transpose()) < 1e-12);
    }

    #[test]
    fn mse_decreases_with_bits() {
        let m = random_model(6, 2, 4);
        let mut prev = f64::INFINITY;
        for bits in [8, 12, 16, 24, 32, 48] {
            let budget = LevelBudget::from_bits(bits);
            let p = select_output_dimension(&m, &budget, 3.0).unwrap();
            let mse = design_optimal(&m, p, &budget, 3.0).unwrap().predicted_mse;
            assert!(mse <= prev * (1.0 + 1e-12));
            prev = mse;
        }
    }

    #[test]
    fn selected_dimension_beats_fixed_choices() {
        let m = random_model(7, 3, 9);
        let budget = LevelBudget::from_bits(20);
        let best = select_output_dimension(&m, &budget, 3.0).unwrap();
        let best_mse = design_optimal(&m, best, &budget, 3.0)
            .unwrap()
            .predicted_mse;
        for p in 1..=7 {
            if let Ok(s) = design_optimal(&m, p, &budget, 3.0) {
                assert!(best_mse <= s.predicted_mse * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn digital_only_formula_matches_direct() {
        let m = random_model(4, 2, 2);
        let budget = LevelBudget::from_bits(24);
        let sys = design_digital_only(&m, &budget, 3.0).unwrap();
        let direct = mse_for_combiner(
            &sys.combiner,
            &m,
            sys.quantizer.dynamic_range(),
            sys.quantizer.resolution(),
        )
        .unwrap();
        assert!((direct - sys.predicted_mse).abs() < 1e-10);
        assert!(matches!(
            design_digital_only(&m, &LevelBudget::from_bits(3), 3.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn quantize_mmse_formula_matches_direct() {
        let m = random_model(5, 3, 6);
        let budget = LevelBudget::from_bits(18);
        let sys = design_quantize_mmse(&m, &budget, 3.0).unwrap();
        let direct = mse_for_combiner(
            &sys.combiner,
            &m,
            sys.quantizer.dynamic_range(),
            sys.quantizer.resolution(),
        )
        .unwrap();
        assert!((direct - sys.predicted_mse).abs() < 1e-10);
    }

    #[test]
    fn scalar_task_optimal_equals_quantize_mmse() {
        let m = random_model(5, 1, 8);
        let budget = LevelBudget::from_bits(10);
        let opt = design_optimal(&m, 1, &budget, 3.0).unwrap();
        let mmse = design_quantize_mmse(&m, &budget, 3.0).unwrap();
        assert!((opt.predicted_mse - mmse.predicted_mse).abs() < 1e-12);
    }

    #[test]
    fn normalization_check() {
        // Γ̃Γ̃ᵀ = I₂/2 exactly.
        let half = 0.5f64.sqrt();
        let m = LinearTaskModel::new(
            DMatrix::identity(3, 3),
            dmatrix![half, 0.0, 0.0; 0.0, half, 0.0],
            0.0,
        )
        .unwrap();
        assert!(is_mmse_quantization_optimal(&m, 1e-12).unwrap());
        let m2 = LinearTaskModel::new(
            DMatrix::identity(3, 3),
            dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.0],
            0.0,
        )
        .unwrap();
        assert!(!is_mmse_quantization_optimal(&m2, 1e-6).unwrap());
        let singular =
            LinearTaskModel::new(DMatrix::identity(2, 2), dmatrix![1.0, 0.0; 2.0, 0.0], 0.0)
                .unwrap();
        assert!(matches!(
            is_mmse_quantization_optimal(&singular, 1e-6),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn isotropic_estimate_ties_optimal_and_mmse_quantization() {
        // With Γ̃Γ̃ᵀ = I₂ the optimal design picks p = 2 and both designs reach
        // 2v/(1 + v).
        let m =
            LinearTaskModel::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), 0.0).unwrap();
        let budget = LevelBudget::from_bits(8);
        let opt = design_optimal(&m, 2, &budget, 3.0).unwrap();
        let mmse = design_quantize_mmse(&m, &budget, 3.0).unwrap();
        assert!((opt.predicted_mse - mmse.predicted_mse).abs() < 1e-12);
        let kap = kappa(3.0, 16).unwrap();
        let v = 2.0 * kap / (3.0 * 256.0);
        assert!((mmse.predicted_mse - 2.0 * v / (1.0 + v)).abs() < 1e-14);
    }

    #[test]
    fn estimate_runs_and_checks_shape() {
        let m = random_model(4, 2, 1);
        let sys = design_optimal(&m, 2, &LevelBudget::from_bits(16), 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = sys
            .estimate(&DVector::from_element(4, 0.1), &mut rng)
            .unwrap();
        assert_eq!(out.len(), 2);
        assert!(sys.estimate(&DVector::zeros(3), &mut rng).is_err());
        let doc = sys.to_json();
        assert_eq!(doc["p"], 2);
        assert_eq!(doc["A"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_output_dimension() {
        let m = random_model(3, 1, 0);
        let b = LevelBudget::from_bits(8);
        assert!(design_optimal(&m, 0, &b, 3.0).is_err());
        assert!(design_optimal(&m, 4, &b, 3.0).is_err());
        assert!(matches!(
            design_optimal(&m, 3, &LevelBudget::from_bits(2), 3.0),
            Err(Error::Infeasible(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn optimal_beats_baselines(seed in 0u64..10_000, n in 2usize..6, kf in 0.0f64..1.0, bits in 8u32..40) {
            let k = 1 + ((n - 1) as f64 * kf) as usize;
            let m = random_model(n, k, seed);
            let budget = LevelBudget::from_bits(bits);
            let p = select_output_dimension(&m, &budget, 3.0).unwrap();
            let opt = design_optimal(&m, p, &budget, 3.0).unwrap();
            let energy = m.estimate_energy();
            prop_assert!(opt.predicted_mse <= energy * (1.0 + 1e-12));
            if let Ok(d) = design_digital_only(&m, &budget, 3.0) {
                prop_assert!(opt.predicted_mse <= d.predicted_mse * (1.0 + 1e-9) + 1e-12);
            }
            if let Ok(q) = design_quantize_mmse(&m, &budget, 3.0) {
                prop_assert!(opt.predicted_mse <= q.predicted_mse * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
