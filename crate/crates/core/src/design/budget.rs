use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cap on the per-quantizer resolution. Beyond 2⁵² levels the quantizer is
/// indistinguishable from the identity in double precision.
pub const MAX_RESOLUTION: u64 = 1 << 52;

/// Total number of quantization levels `M` available to a system.
///
/// Budgets are often quoted in bits (`log₂ M`) and can exceed any machine
/// integer (e.g. 720 bits), so the level count is kept as a big integer and
/// all per-quantizer resolutions are derived exactly.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct LevelBudget {
    levels: BigUint,
}

impl LevelBudget {
    /// `M = 2^bits`.
    pub fn from_bits(bits: u32) -> Self {
        Self {
            levels: BigUint::from(1u8) << bits,
        }
    }

    pub fn from_levels(levels: u128) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("a quantizer needs at least one level"));
        }
        Ok(Self {
            levels: BigUint::from(levels),
        })
    }

    /// `log₂ M`.
    pub fn log2(&self) -> f64 {
        let bits = self.levels.bits();
        if bits <= 64 {
            let v = self.levels.iter_u64_digits().next().unwrap_or(0);
            return (v as f64).log2();
        }
        let shift = bits - 60;
        let top = (&self.levels >> shift)
            .iter_u64_digits()
            .next()
            .unwrap_or(0);
        (top as f64).log2() + shift as f64
    }

    /// `M` as a machine integer, when it fits.
    pub fn levels_u64(&self) -> Option<u64> {
        if self.levels.bits() <= 64 {
            self.levels.iter_u64_digits().next().or(Some(0))
        } else {
            None
        }
    }

    /// Per-quantizer resolution `M̃ = ⌊M^{1/p}⌋` in exact integer arithmetic,
    /// saturating at [`MAX_RESOLUTION`].
    pub fn resolution(&self, quantizers: usize) -> u64 {
        assert!(quantizers > 0, "at least one quantizer is required");
        let p = quantizers as u32;
        let guess = (self.log2() / quantizers as f64).exp2();
        if guess >= MAX_RESOLUTION as f64 {
            return MAX_RESOLUTION;
        }
        let fits = |m: u64| BigUint::from(m).pow(p) <= self.levels;
        let mut m = (guess.floor() as u64).max(1);
        while m > 1 && !fits(m) {
            m -= 1;
        }
        while m < MAX_RESOLUTION && fits(m + 1) {
            m += 1;
        }
        m
    }
}

impl fmt::Debug for LevelBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelBudget(log2 M = {})", self.log2())
    }
}

impl From<LevelBudget> for f64 {
    fn from(b: LevelBudget) -> f64 {
        b.log2()
    }
}

impl TryFrom<f64> for LevelBudget {
    type Error = String;

    fn try_from(bits: f64) -> std::result::Result<Self, String> {
        if bits >= 0.0 && bits.fract() == 0.0 && bits <= u32::MAX as f64 {
            Ok(Self::from_bits(bits as u32))
        } else {
            Err(format!(
                "bit budget must be a non-negative integer, got {bits}"
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_roots() {
        assert_eq!(LevelBudget::from_bits(10).resolution(2), 32);
        assert_eq!(LevelBudget::from_bits(10).resolution(3), 10);
        assert_eq!(LevelBudget::from_bits(40).resolution(120), 1);
        assert_eq!(LevelBudget::from_bits(120).resolution(120), 2);
        assert_eq!(LevelBudget::from_bits(2).resolution(2), 2);
        assert_eq!(LevelBudget::from_levels(1000).unwrap().resolution(3), 10);
        assert_eq!(LevelBudget::from_levels(999).unwrap().resolution(3), 9);
        assert_eq!(LevelBudget::from_levels(1).unwrap().resolution(1), 1);
        assert_eq!(LevelBudget::from_bits(720).resolution(1), MAX_RESOLUTION);
        assert_eq!(LevelBudget::from_bits(720).resolution(240), 8);
    }

    #[test]
    fn log2_of_large_budgets() {
        assert_eq!(LevelBudget::from_bits(16).log2(), 16.0);
        assert!((LevelBudget::from_bits(720).log2() - 720.0).abs() < 1e-9);
        assert_eq!(LevelBudget::from_bits(16).levels_u64(), Some(65536));
        assert_eq!(LevelBudget::from_bits(64).levels_u64(), None);
        assert!(LevelBudget::from_levels(0).is_err());
    }

    #[test]
    fn resolution_brackets_budget() {
        for bits in 1..90u32 {
            for p in 1..12usize {
                let m = LevelBudget::from_bits(bits).resolution(p);
                if m == MAX_RESOLUTION {
                    continue;
                }
                let m = m as f64;
                assert!(p as f64 * m.log2() <= bits as f64 + 1e-9);
                assert!(p as f64 * (m + 1.0).log2() > bits as f64 - 1e-9);
            }
        }
    }
}
