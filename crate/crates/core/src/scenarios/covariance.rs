use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quantizer::{serial_adc_into, QuantizerSpec};

/// Partition of `n_x` samples of dimension `m_x` into `n_s` consecutive sets
/// of `m_s = n_x/n_s` samples that are summed before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CovariancePlan {
    n_x: usize,
    m_x: usize,
    n_s: usize,
}

pub fn build_covariance_plan(n_x: usize, m_x: usize, n_s: usize) -> Result<CovariancePlan> {
    if n_x == 0 || m_x == 0 || n_s == 0 {
        return Err(Error::invalid(
            "sample count, dimension and set count must be positive",
        ));
    }
    if !n_x.is_multiple_of(n_s) {
        return Err(Error::invalid(format!(
            "number of sets n_s = {n_s} must divide the sample count n_x = {n_x}"
        )));
    }
    Ok(CovariancePlan { n_x, m_x, n_s })
}

impl CovariancePlan {
    pub fn samples(&self) -> usize {
        self.n_x
    }

    pub fn dim(&self) -> usize {
        self.m_x
    }

    pub fn sets(&self) -> usize {
        self.n_s
    }

    /// Samples per set, `m_s`.
    pub fn set_size(&self) -> usize {
        self.n_x / self.n_s
    }

    /// Number of scalar quantizers, `m_x · n_s`.
    pub fn quantizers(&self) -> usize {
        self.m_x * self.n_s
    }

    /// The analog combiner as an explicit `(n_s m_x) × (n_x m_x)` matrix acting
    /// on the samples stacked one after another.
    pub fn combiner_matrix(&self) -> DMatrix<f64> {
        let (m_x, m_s) = (self.m_x, self.set_size());
        DMatrix::from_fn(self.n_s * m_x, self.n_x * m_x, |r, c| {
            let (set, q1) = (r / m_x, r % m_x);
            let (sample, q2) = (c / m_x, c % m_x);
            if q1 == q2 && sample / m_s == set {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Applies the combiner to an `m_x × n_x` sample matrix (one sample per
    /// column), giving the `m_x × n_s` matrix of set sums.
    pub fn combine(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(samples)?;
        let m_s = self.set_size();
        let mut z = DMatrix::zeros(self.m_x, self.n_s);
        for set in 0..self.n_s {
            for j in set * m_s..(set + 1) * m_s {
                let mut col = z.column_mut(set);
                col += samples.column(j);
            }
        }
        Ok(z)
    }

    fn check(&self, samples: &DMatrix<f64>) -> Result<()> {
        if samples.nrows() != self.m_x || samples.ncols() != self.n_x {
            return Err(Error::dims(format!(
                "samples are {}x{}, plan expects {}x{}",
                samples.nrows(),
                samples.ncols(),
                self.m_x,
                self.n_x
            )));
        }
        Ok(())
    }
}

fn outer_average(z: &DMatrix<f64>, n_x: usize) -> DMatrix<f64> {
    let r = z * z.transpose() / n_x as f64;
    (&r + r.transpose()) * 0.5
}

/// `(1/n_x) Σ_l z_l z_lᵀ` over the unquantized set sums.
pub fn combined_covariance(samples: &DMatrix<f64>, plan: &CovariancePlan) -> Result<DMatrix<f64>> {
    Ok(outer_average(&plan.combine(samples)?, plan.samples()))
}

/// Covariance estimate from quantized set sums: every entry of every `z_l`
/// passes through the serial ADC before `(1/n_x) Σ_l z̄_l z̄_lᵀ` is formed.
pub fn quantized_covariance<R: Rng + ?Sized>(
    samples: &DMatrix<f64>,
    plan: &CovariancePlan,
    spec: &QuantizerSpec,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let z = plan.combine(samples)?;
    let mut q = DMatrix::zeros(z.nrows(), z.ncols());
    serial_adc_into(z.as_slice(), spec, rng, q.as_mut_slice())?;
    Ok(outer_average(&q, plan.samples()))
}
