//! Scalar uniform quantization with optional non-subtractive dither.
//!
//! A quantizer with `M̃` levels and dynamic range `γ` has spacing
//! `Δ = 2γ/M̃` and output levels `−γ + Δ(l + ½)` for `l = 0..M̃`. Inputs
//! beyond `±γ` saturate to the outermost level. Bins are half-open,
//! `[−γ + lΔ, −γ + (l+1)Δ)`, except that `y = γ` maps to the top level.
//!
//! With dither enabled, each input is offset by an independent draw from
//! `U(−Δ/2, Δ/2]` before quantization and the dither is *not* removed
//! afterwards. As long as no overload occurs, the resulting error is
//! zero-mean, white, uncorrelated with the input and has variance `Δ²/6`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overload multiplier used when none is configured.
pub const DEFAULT_ETA: f64 = 3.0;

/// `κ = η² (1 − η²/(3M̃²))⁻¹`, the factor linking the input variance of a
/// dithered quantizer to its dynamic range (`γ² = κ σ²`).
pub fn kappa(eta: f64, resolution: u64) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if resolution < 2 {
        return Err(Error::invalid(format!(
            "quantizer resolution must be at least 2, got {resolution}"
        )));
    }
    let m = resolution as f64;
    let shrink = 1.0 - eta * eta / (3.0 * m * m);
    if eta >= 3f64.sqrt() * m || shrink <= 0.0 {
        return Err(Error::invalid(format!(
            "eta = {eta} must be below sqrt(3)*{resolution} for kappa to be positive"
        )));
    }
    Ok(eta * eta / shrink)
}

/// Parameters of one scalar quantizer in a serial ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    resolution: u64,
    dynamic_range: f64,
    eta: f64,
    dithered: bool,
}

impl QuantizerSpec {
    pub fn new(resolution: u64, dynamic_range: f64, eta: f64, dithered: bool) -> Result<Self> {
        // validates eta against the resolution
        kappa(eta, resolution)?;
        if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
            return Err(Error::invalid(format!(
                "dynamic range must be positive and finite, got {dynamic_range}"
            )));
        }
        Ok(Self {
            resolution,
            dynamic_range,
            eta,
            dithered,
        })
    }

    /// Builds a quantizer whose dynamic range is `η` standard deviations of
    /// its input. With dither the input variance includes the dither itself,
    /// giving `γ² = κ·variance`; without dither `γ² = η²·variance`.
    pub fn for_input_variance(
        resolution: u64,
        variance: f64,
        eta: f64,
        dithered: bool,
    ) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid(format!(
                "quantizer input variance must be positive, got {variance}"
            )));
        }
        let scale = if dithered {
            kappa(eta, resolution)?
        } else {
            eta * eta
        };
        Self::new(resolution, (scale * variance).sqrt(), eta, dithered)
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    pub fn dynamic_range(&self) -> f64 {
        self.dynamic_range
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dithered(&self) -> bool {
        self.dithered
    }

    /// Same quantizer with dithering switched on or off.
    pub fn with_dither(mut self, dithered: bool) -> Self {
        self.dithered = dithered;
        self
    }

    /// Spacing `Δ = 2γ/M̃`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.dynamic_range / self.resolution as f64
    }

    /// Level `l`, computed as `Δ(l + ½ − M̃/2)` so that levels are exactly
    /// odd-symmetric.
    pub fn level(&self, index: u64) -> f64 {
        let offset = index as f64 + 0.5 - 0.5 * self.resolution as f64;
        self.spacing() * offset
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.resolution).map(|l| self.level(l)).collect()
    }

    /// Largest output magnitude, `γ − Δ/2`.
    pub fn saturation_level(&self) -> f64 {
        self.level(self.resolution - 1)
    }

    /// Variance of the additive error model under dithering, `Δ²/6`
    /// (equivalently `2γ²/(3M̃²)`).
    pub fn dithered_noise_variance(&self) -> f64 {
        let d = self.spacing();
        d * d / 6.0
    }

    /// Quantizes one value without dither.
    pub fn quantize(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::invalid(format!(
                "cannot quantize non-finite value {y}"
            )));
        }
        Ok(self.quantize_finite(y))
    }

    #[inline]
    fn quantize_finite(&self, y: f64) -> f64 {
        let gamma = self.dynamic_range;
        if y > gamma {
            return self.saturation_level();
        }
        if y < -gamma {
            return -self.saturation_level();
        }
        let bin = ((y + gamma) / self.spacing()).floor();
        let top = (self.resolution - 1) as f64;
        self.level(bin.clamp(0.0, top) as u64)
    }

    /// Draws one dither value, uniform on `(−Δ/2, Δ/2]`.
    #[inline]
    pub fn draw_dither<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.spacing() * (0.5 - u)
    }
}

/// Scalar uniform quantization rule (no dither).
pub fn uniform_quantize(y: f64, spec: &QuantizerSpec) -> Result<f64> {
    spec.quantize(y)
}

/// Serial scalar ADC: quantizes every entry of `input` with `spec`, adding
/// fresh dither from `rng` per entry when the quantizer is dithered.
pub fn serial_adc<R: Rng + ?Sized>(
    input: &[f64],
    spec: &QuantizerSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; input.len()];
    serial_adc_into(input, spec, rng, &mut out)?;
    Ok(out)
}

/// In-place variant of [`serial_adc`].
pub fn serial_adc_into<R: Rng + ?Sized>(
    input: &[f64],
    spec: &QuantizerSpec,
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    if input.len() != out.len() {
        return Err(Error::dims(format!(
            "ADC input has {} entries but output buffer has {}",
            input.len(),
            out.len()
        )));
    }
    for (o, &v) in out.iter_mut().zip(input) {
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "cannot quantize non-finite value {v}"
            )));
        }
        let dither = if spec.dithered {
            spec.draw_dither(rng)
        } else {
            0.0
        };
        *o = spec.quantize_finite(v + dither);
    }
    Ok(())
}
