use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::orthonormality_residual;

/// Coefficient used by the eigenvalue estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorVariant {
    /// `1/(αᵢ − n_x/2 − 1)`.
    AsPrinted,
    /// `1/(αᵢ + n_x/2 − 1)`, the inverse-gamma posterior mean.
    PosteriorMean,
}

impl EstimatorVariant {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorVariant::AsPrinted => "as-printed",
            EstimatorVariant::PosteriorMean => "posterior-mean",
        }
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigPreset {
    /// k = 2, n_x = 20, real 2×2 DFT basis.
    Setup1,
    /// k = 4, n_x = 60, identity basis.
    Setup2,
}

/// `n_x` i.i.d. samples `N(0, U diag(θ) Uᵀ)` whose eigenvalues `θᵢ` are
/// independent inverse-gamma variables with shape `αᵢ` and scale `βᵢ`.
#[derive(Debug, Clone)]
pub struct EigScenario {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    samples: usize,
    basis: DMatrix<f64>,
    variant: EstimatorVariant,
    gammas: Vec<Gamma<f64>>,
}

/// Builds a preset with the given estimator variant.
pub fn build_eig_scenario(preset: EigPreset, variant: EstimatorVariant) -> EigScenario {
    let (alpha, beta, n_x, basis) = match preset {
        EigPreset::Setup1 => (
            vec![5.5, 6.5],
            vec![8.4, 11.6],
            20,
            EigScenario::dft_basis(2).expect("2x2 transform exists"),
        ),
        EigPreset::Setup2 => (
            vec![4.0, 5.0, 6.0, 7.0],
            vec![4.2, 6.9, 10.0, 13.4],
            60,
            DMatrix::identity(4, 4),
        ),
    };
    EigScenario::new(alpha, beta, n_x, basis, variant).expect("preset parameters are valid")
}

impl EigScenario {
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        samples: usize,
        basis: DMatrix<f64>,
        variant: EstimatorVariant,
    ) -> Result<Self> {
        let k = alpha.len();
        if k == 0 || beta.len() != k {
            return Err(Error::dims(format!(
                "need one shape and one scale per eigenvalue, got {} and {}",
                alpha.len(),
                beta.len()
            )));
        }
        if basis.nrows() != k || basis.ncols() != k {
            return Err(Error::dims(format!(
                "basis must be {k}x{k}, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 2.0)) {
            return Err(Error::invalid(format!(
                "shape parameters must exceed 2 for a finite prior variance, got {a}"
            )));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::invalid(format!(
                "scale parameters must be positive, got {b}"
            )));
        }
        if samples == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        let resid = orthonormality_residual(&basis);
        if resid > 1e-12 {
            return Err(Error::invalid(format!(
                "basis is not orthonormal (residual {resid:.3e})"
            )));
        }
        let gammas = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::invalid(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            alpha,
            beta,
            samples,
            basis,
            variant,
            gammas,
        })
    }

    /// Real orthonormal DFT for k ≤ 2: `[1]` or `[[1, 1], [1, −1]]/√2`.
    pub fn dft_basis(k: usize) -> Result<DMatrix<f64>> {
        match k {
            1 => Ok(DMatrix::identity(1, 1)),
            2 => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                Ok(DMatrix::from_row_slice(2, 2, &[h, h, h, -h]))
            }
            _ => Err(Error::invalid(format!(
                "a real DFT basis is only available for k <= 2, got k = {k}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn variant(&self) -> EstimatorVariant {
        self.variant
    }

    pub fn with_variant(mut self, variant: EstimatorVariant) -> Self {
        self.variant = variant;
        self
    }

    /// `E{θᵢ} = βᵢ/(αᵢ − 1)`.
    pub fn prior_mean(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| b / (a - 1.0))
            .collect()
    }

    /// `Var{θᵢ} = βᵢ²/((αᵢ − 1)²(αᵢ − 2))`.
    pub fn prior_variance(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| b * b / ((a - 1.0).powi(2) * (a - 2.0)))
            .collect()
    }

    /// Largest diagonal entry of the prior-mean covariance `U diag(E{θ}) Uᵀ`,
    /// the per-entry variance of a single sample.
    pub fn peak_sample_variance(&self) -> f64 {
        let mean = self.prior_mean();
        (0..self.dim())
            .map(|j| {
                (0..self.dim())
                    .map(|i| self.basis[(j, i)].powi(2) * mean[i])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Estimator coefficients for the configured variant.
    pub fn coefficients(&self) -> Vec<f64> {
        let half = self.samples as f64 / 2.0;
        self.alpha
            .iter()
            .map(|&a| match self.variant {
                EstimatorVariant::AsPrinted => 1.0 / (a - half - 1.0),
                EstimatorVariant::PosteriorMean => 1.0 / (a + half - 1.0),
            })
            .collect()
    }

    /// Whether any coefficient is negative, which makes the estimate negative
    /// for typical inputs.
    pub fn has_negative_coefficients(&self) -> bool {
        self.coefficients().iter().any(|&c| c < 0.0)
    }

    /// Draws eigenvalues `θ` and a `k × n_x` matrix of samples (one per column).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, DMatrix<f64>) {
        let theta: Vec<f64> = self
            .gammas
            .iter()
            .zip(&self.beta)
            .map(|(g, b)| b / g.sample(rng))
            .collect();
        let k = self.dim();
        let scaled = DMatrix::from_fn(k, self.samples, |i, _| {
            theta[i].sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        (theta, &self.basis * scaled)
    }

    /// `θ̂ᵢ = coeffᵢ (βᵢ + ½ (Uᵀ n_x R̂ U)ᵢᵢ)`.
    pub fn estimate_eigenspectrum(&self, r_hat: &DMatrix<f64>) -> Result<Vec<f64>> {
        let k = self.dim();
        if r_hat.nrows() != k || r_hat.ncols() != k {
            return Err(Error::dims(format!(
                "covariance estimate must be {k}x{k}, got {}x{}",
                r_hat.nrows(),
                r_hat.ncols()
            )));
        }
        let half = self.samples as f64 / 2.0;
        let coeffs = self.coefficients();
        if let Some(i) = self.alpha.iter().position(|&a| match self.variant {
            EstimatorVariant::AsPrinted => a - half - 1.0 == 0.0,
            EstimatorVariant::PosteriorMean => a + half - 1.0 == 0.0,
        }) {
            return Err(Error::invalid(format!(
                "estimator coefficient {i} divides by zero"
            )));
        }
        let rotated = self.basis.transpose() * r_hat * &self.basis * self.samples as f64;
        Ok((0..k)
            .map(|i| coeffs[i] * (self.beta[i] + 0.5 * rotated[(i, i)]))
            .collect())
    }
}
