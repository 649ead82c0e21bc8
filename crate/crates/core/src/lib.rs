//! Sub-snippet temporal action boundary refinement.
//!
//! Temporal action detectors score boundaries on a coarse grid of snippets,
//! so every predicted start and end is off by up to half a snippet once it is
//! mapped back to seconds. This crate recovers the continuous boundary from
//! the detector's per-snippet score curves, and carries the surrounding
//! machinery: ground-truth target synthesis, Soft-NMS, ActivityNet/THUMOS
//! style evaluation, dump formats and a seeded synthetic benchmark.
//!
//! ```
//! use tadrefine_core::curve_refine::{refine_boundary, BoundaryKind, RefinementConfig, ScoreCurve};
//! use tadrefine_core::grid::SnippetCoord;
//!
//! let scores: Vec<f64> = (0..32).map(|t| (-(t as f64 - 11.3f64).powi(2) / 8.0).exp()).collect();
//! let curve = ScoreCurve::new(scores, BoundaryKind::Start).unwrap();
//! let cfg = RefinementConfig { smoothing_enabled: false, ..Default::default() };
//! let r = refine_boundary(&curve, SnippetCoord::new(11.0).unwrap(), &cfg).unwrap();
//! assert!((r.coord.get() - 11.3).abs() < 1e-9);
//! ```

pub mod curve_refine;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod gt_calibration;
pub mod io;
pub mod proposal_pipeline;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Action category, either a numeric id or a class name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Id(u64),
    Name(String),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Name(s.to_owned())
    }
}

impl From<u64> for Label {
    fn from(id: u64) -> Self {
        Label::Id(id)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Id(id) => write!(f, "{id}"),
            Label::Name(name) => f.write_str(name),
        }
    }
}
