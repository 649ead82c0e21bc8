//! Ground-truth boundary targets on the snippet grid.
//!
//! Annotations in seconds are divided by the snippet length. The conventional
//! pipeline then quantises that position to an integer snippet before drawing
//! a Gaussian target around it; the calibrated variant draws the Gaussian
//! around the exact, non-quantised position instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SnippetCoord, TemporalGrid};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub start_sec: f64,
    pub end_sec: f64,
    pub label: Label,
}

impl GroundTruthInstance {
    pub fn new(start_sec: f64, end_sec: f64, label: Label) -> Result<Self> {
        if !(start_sec.is_finite()
            && end_sec.is_finite()
            && start_sec >= 0.0
            && start_sec < end_sec)
        {
            return Err(Error::param(
                "ground truth segment",
                format!("[{start_sec}, {end_sec}] must satisfy 0 <= start < end"),
            ));
        }
        Ok(Self {
            start_sec,
            end_sec,
            label,
        })
    }

    pub fn check_within(&self, duration_sec: f64) -> Result<()> {
        if self.end_sec > duration_sec {
            return Err(Error::range(
                "ground truth end (s)",
                self.end_sec,
                0.0,
                duration_sec,
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantizeMode {
    #[default]
    Floor,
    Ceil,
    Round,
}

impl QuantizeMode {
    pub const ALL: [QuantizeMode; 3] =
        [QuantizeMode::Floor, QuantizeMode::Ceil, QuantizeMode::Round];

    pub fn as_str(self) -> &'static str {
        match self {
            QuantizeMode::Floor => "floor",
            QuantizeMode::Ceil => "ceil",
            QuantizeMode::Round => "round",
        }
    }
}

impl std::str::FromStr for QuantizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floor" => Ok(QuantizeMode::Floor),
            "ceil" => Ok(QuantizeMode::Ceil),
            "round" => Ok(QuantizeMode::Round),
            other => Err(Error::param(
                "quantize mode",
                format!("unknown mode {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for QuantizeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Peak-normalised Gaussian target sampled on the snippet grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryHeatmap {
    pub values: Vec<f64>,
    pub center: f64,
    pub sigma: f64,
}

/// Exact (unquantised) snippet positions of both endpoints.
pub fn downsample_gt(
    gt: &GroundTruthInstance,
    grid: &TemporalGrid,
) -> Result<(SnippetCoord, SnippetCoord)> {
    Ok((grid.to_snippet(gt.start_sec)?, grid.to_snippet(gt.end_sec)?))
}

/// Rounding uses half-away-from-zero.
pub fn quantize_point(x: f64, mode: QuantizeMode) -> Result<usize> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::range("quantize input", x, 0.0, f64::INFINITY));
    }
    let q = match mode {
        QuantizeMode::Floor => x.floor(),
        QuantizeMode::Ceil => x.ceil(),
        QuantizeMode::Round => x.round(),
    };
    Ok(q as usize)
}

pub fn synthesize_heatmap(center: f64, num_snippets: usize, sigma: f64) -> Result<BoundaryHeatmap> {
    if num_snippets < 2 {
        return Err(Error::param(
            "num_snippets",
            format!("{num_snippets} must be at least 2"),
        ));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(
            "sigma",
            format!("{sigma} must be finite and > 0"),
        ));
    }
    let last = (num_snippets - 1) as f64;
    if !(0.0..=last).contains(&center) {
        return Err(Error::range("heatmap center", center, 0.0, last));
    }
    let denom = 2.0 * sigma * sigma;
    // The 1/(2 pi sigma^2) prefactor cancels in the peak normalisation below.
    let raw: Vec<f64> = (0..num_snippets)
        .map(|x| (-(x as f64 - center).powi(2) / denom).exp())
        .collect();
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    let values = if peak > 0.0 {
        raw.into_iter().map(|v| v / peak).collect()
    } else {
        raw
    };
    Ok(BoundaryHeatmap {
        values,
        center,
        sigma,
    })
}

/// Start/end heatmaps plus the quantisation error each endpoint would carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTargets {
    pub start: BoundaryHeatmap,
    pub end: BoundaryHeatmap,
    /// `|g' - g''|` per endpoint, in snippets.
    pub quantization_error: (f64, f64),
}

pub fn make_training_targets(
    gt: &GroundTruthInstance,
    grid: &TemporalGrid,
    sigma: f64,
    calibrated: bool,
    mode: QuantizeMode,
) -> Result<TrainingTargets> {
    let (s, e) = downsample_gt(gt, grid)?;
    let last = grid.last_index() as f64;
    let center = |x: SnippetCoord| -> Result<(f64, f64)> {
        let exact = x.get().min(last);
        let quantized = (quantize_point(x.get(), mode)? as f64).min(last);
        Ok((exact, quantized))
    };
    let (s_exact, s_quant) = center(s)?;
    let (e_exact, e_quant) = center(e)?;
    let pick = |exact: f64, quant: f64| if calibrated { exact } else { quant };
    let t = grid.num_snippets();
    Ok(TrainingTargets {
        start: synthesize_heatmap(pick(s_exact, s_quant), t, sigma)?,
        end: synthesize_heatmap(pick(e_exact, e_quant), t, sigma)?,
        quantization_error: ((s_exact - s_quant).abs(), (e_exact - e_quant).abs()),
    })
}
