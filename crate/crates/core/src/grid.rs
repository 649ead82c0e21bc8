//! Temporal coordinate systems.
//!
//! A video of `duration_sec` seconds is resampled into `T` equidistant
//! snippets. Snippet coordinates are 0-based reals; snippet `i` sits at
//! `i * lambda_sec` seconds where `lambda_sec = duration_sec / T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which quantity the downsampling factor was declared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaUnit {
    Frames,
    Seconds,
}

/// Real-valued position on the snippet axis.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnippetCoord(f64);

impl SnippetCoord {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::param(
                "snippet coordinate",
                format!("{value} is not finite"),
            ));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Nearest snippet index (half away from zero); `None` for negative values.
    pub fn nearest_index(self) -> Option<usize> {
        (self.0 >= 0.0).then(|| self.0.round() as usize)
    }
}

impl From<SnippetCoord> for f64 {
    fn from(c: SnippetCoord) -> f64 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalGrid {
    duration_sec: f64,
    num_frames: Option<u64>,
    num_snippets: usize,
    lambda: f64,
    lambda_unit: LambdaUnit,
}

impl TemporalGrid {
    /// Grid whose downsampling factor is expressed in seconds per snippet.
    pub fn from_seconds(duration_sec: f64, num_snippets: usize) -> Result<Self> {
        Self::validate(duration_sec, num_snippets)?;
        Ok(Self {
            duration_sec,
            num_frames: None,
            num_snippets,
            lambda: duration_sec / num_snippets as f64,
            lambda_unit: LambdaUnit::Seconds,
        })
    }

    /// Grid whose downsampling factor is expressed in frames per snippet.
    pub fn from_frames(duration_sec: f64, num_frames: u64, num_snippets: usize) -> Result<Self> {
        Self::validate(duration_sec, num_snippets)?;
        if num_frames == 0 {
            return Err(Error::param("num_frames", "must be at least 1"));
        }
        Ok(Self {
            duration_sec,
            num_frames: Some(num_frames),
            num_snippets,
            lambda: num_frames as f64 / num_snippets as f64,
            lambda_unit: LambdaUnit::Frames,
        })
    }

    fn validate(duration_sec: f64, num_snippets: usize) -> Result<()> {
        if !(duration_sec.is_finite() && duration_sec > 0.0) {
            return Err(Error::param(
                "duration_sec",
                format!("{duration_sec} must be finite and > 0"),
            ));
        }
        if num_snippets < 2 {
            return Err(Error::param(
                "num_snippets",
                format!("{num_snippets} must be at least 2"),
            ));
        }
        Ok(())
    }

    pub fn duration_sec(&self) -> f64 {
        self.duration_sec
    }

    pub fn num_frames(&self) -> Option<u64> {
        self.num_frames
    }

    pub fn num_snippets(&self) -> usize {
        self.num_snippets
    }

    /// Downsampling factor in the grid's declared unit.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_unit(&self) -> LambdaUnit {
        self.lambda_unit
    }

    /// Seconds covered by one snippet.
    pub fn lambda_sec(&self) -> f64 {
        self.duration_sec / self.num_snippets as f64
    }

    /// Largest index on the discrete snippet axis.
    pub fn last_index(&self) -> usize {
        self.num_snippets - 1
    }

    pub fn to_snippet(&self, t_sec: f64) -> Result<SnippetCoord> {
        if !(0.0..=self.duration_sec).contains(&t_sec) {
            return Err(Error::range("time (s)", t_sec, 0.0, self.duration_sec));
        }
        Ok(SnippetCoord(t_sec / self.lambda_sec()))
    }

    pub fn to_seconds(&self, x: SnippetCoord) -> Result<f64> {
        let hi = self.num_snippets as f64;
        if !(0.0..=hi).contains(&x.0) {
            return Err(Error::range("snippet coordinate", x.0, 0.0, hi));
        }
        Ok(x.0 * self.lambda_sec())
    }

    /// Clamp a coordinate onto the discrete domain `[0, T-1]`.
    pub fn clamp(&self, x: SnippetCoord) -> SnippetCoord {
        SnippetCoord(x.0.clamp(0.0, self.last_index() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_lambda_is_identity() {
        let g = TemporalGrid::from_seconds(100.0, 100).unwrap();
        assert_eq!(g.to_snippet(12.4).unwrap().get(), 12.4);
        assert_eq!(g.to_snippet(0.0).unwrap().get(), 0.0);
    }

    #[test]
    fn coarse_grid_examples() {
        let g = TemporalGrid::from_seconds(100.0, 25).unwrap();
        let x = g.to_snippet(37.2).unwrap();
        assert!((x.get() - 9.3).abs() < 1e-12);
        assert!((g.to_seconds(SnippetCoord::new(9.3).unwrap()).unwrap() - 37.2).abs() < 1e-12);
        assert_eq!(g.to_seconds(SnippetCoord::default()).unwrap(), 0.0);
        let last = g.to_seconds(SnippetCoord::new(24.0).unwrap()).unwrap();
        assert!((last - 100.0 * 24.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_time_names_value() {
        let g = TemporalGrid::from_seconds(10.0, 5).unwrap();
        let err = g.to_snippet(10.5).unwrap_err();
        assert!(err.to_string().contains("10.5"), "{err}");
        assert!(g.to_snippet(-0.1).is_err());
        assert!(g.to_seconds(SnippetCoord::new(5.5).unwrap()).is_err());
    }

    #[test]
    fn frame_grid_records_its_unit() {
        let g = TemporalGrid::from_frames(40.0, 1200, 100).unwrap();
        assert_eq!(g.lambda(), 12.0);
        assert_eq!(g.lambda_unit(), LambdaUnit::Frames);
        assert_eq!(g.lambda_sec(), 0.4);
        assert!(TemporalGrid::from_frames(40.0, 0, 100).is_err());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TemporalGrid::from_seconds(0.0, 10).is_err());
        assert!(TemporalGrid::from_seconds(f64::NAN, 10).is_err());
        assert!(TemporalGrid::from_seconds(10.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(duration in 0.5f64..5000.0, t in 2usize..2000, frac in 0.0f64..=1.0) {
            let g = TemporalGrid::from_seconds(duration, t).unwrap();
            let ts = frac * duration;
            let back = g.to_seconds(g.to_snippet(ts).unwrap()).unwrap();
            prop_assert!((back - ts).abs() <= 1e-9 * duration);
        }

        #[test]
        fn monotone(duration in 0.5f64..5000.0, t in 2usize..2000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!(a < b);
            let g = TemporalGrid::from_seconds(duration, t).unwrap();
            let xa = g.to_snippet(a * duration).unwrap();
            let xb = g.to_snippet(b * duration).unwrap();
            prop_assume!(a * duration < b * duration);
            prop_assert!(xa < xb);
        }
    }
}
