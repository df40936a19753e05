//! The exotic book as seen through its frozen market-model Vega buckets.

use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::pricing::VegaProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoticBook {
    /// Market-model Vega of the book per vanilla bucket.
    pub vega_mm: Vec<f64>,
    /// Frozen spot Delta of the book, only used for the stock overlay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ExoticBook {
    pub fn new(vega_mm: Vec<f64>) -> Self {
        ExoticBook {
            vega_mm,
            delta: None,
        }
    }
}

/// Vanilla positions that cancel every Vega bucket: 𝔳_i = 𝒱_MM^i / 𝒱_BS^i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetVector(pub Vec<f64>);

impl TargetVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn target_ratios(book: &ExoticBook, vp: &VegaProfile) -> Result<TargetVector> {
    HedgeError::check_len("target_ratios", vp.vega_bs.len(), book.vega_mm.len())?;
    book.vega_mm
        .iter()
        .zip(&vp.vega_bs)
        .map(|(mm, bs)| {
            if !(*bs > 0.0) {
                return Err(HedgeError::domain(format!(
                    "Black-Scholes vega must be positive, got {bs}"
                )));
            }
            if !mm.is_finite() {
                return Err(HedgeError::domain(format!(
                    "book vega must be finite, got {mm}"
                )));
            }
            Ok(mm / bs)
        })
        .collect::<Result<Vec<_>>>()
        .map(TargetVector)
}

/// Residual Vega exposure in the SV model: Σ_i (q_i + 𝔳_i)·𝒱_SV^i.
pub fn exposure(q: &[f64], target: &[f64], vega_sv: &[f64]) -> Result<f64> {
    HedgeError::check_len("exposure (target)", q.len(), target.len())?;
    HedgeError::check_len("exposure (vega)", q.len(), vega_sv.len())?;
    Ok(exposure_unchecked(q, target, vega_sv))
}

#[inline]
pub(crate) fn exposure_unchecked(q: &[f64], target: &[f64], vega_sv: &[f64]) -> f64 {
    q.iter()
        .zip(target)
        .zip(vega_sv)
        .map(|((q, v), w)| (q + v) * w)
        .sum()
}
