//! Per-video post-processing: boundary refinement, Soft-NMS and conversion
//! back to seconds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curve_refine::{PreparedCurve, RefineOutcome, Refinement, RefinementConfig, ScoreCurve};
use crate::error::{Error, Result};
use crate::evaluation::{tiou, Interval};
use crate::grid::{SnippetCoord, TemporalGrid};
use crate::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub start: SnippetCoord,
    pub end: SnippetCoord,
    pub score: f64,
    pub label: Label,
    /// Whether the start / end coordinate came out of a successful refinement.
    pub refined: [bool; 2],
}

impl Proposal {
    pub fn new(start: f64, end: f64, score: f64, label: Label) -> Result<Self> {
        let start = SnippetCoord::new(start)?;
        let end = SnippetCoord::new(end)?;
        if start.get() >= end.get() {
            return Err(Error::param(
                "proposal",
                format!("start {} must be before end {}", start.get(), end.get()),
            ));
        }
        if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
            return Err(Error::range("proposal score", score, 0.0, 1.0));
        }
        Ok(Self {
            start,
            end,
            score,
            label,
            refined: [false; 2],
        })
    }

    pub fn interval(&self) -> Interval {
        Interval {
            start: self.start.get(),
            end: self.end.get(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoPredictions {
    pub video_id: String,
    pub grid: TemporalGrid,
    pub start_curve: Option<ScoreCurve>,
    pub end_curve: Option<ScoreCurve>,
    pub proposals: Vec<Proposal>,
}

impl VideoPredictions {
    pub fn new(
        video_id: impl Into<String>,
        grid: TemporalGrid,
        start_curve: Option<ScoreCurve>,
        end_curve: Option<ScoreCurve>,
        proposals: Vec<Proposal>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        let t = grid.num_snippets();
        for (field, curve) in [("start_curve", &start_curve), ("end_curve", &end_curve)] {
            if let Some(c) = curve {
                if c.len() != t {
                    return Err(Error::Validation {
                        video_id,
                        field: field.into(),
                        line: None,
                        reason: format!("length {} does not match num_snippets {t}", c.len()),
                    });
                }
            }
        }
        let hi = t as f64;
        for (i, p) in proposals.iter().enumerate() {
            if p.end.get() > hi || p.start.get() < 0.0 {
                return Err(Error::Validation {
                    video_id,
                    field: format!("proposals[{i}]"),
                    line: None,
                    reason: format!("[{}, {}] lies outside [0, {t}]", p.start.get(), p.end.get()),
                });
            }
        }
        Ok(Self {
            video_id,
            grid,
            start_curve,
            end_curve,
            proposals,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStatus {
    Refined,
    /// One or both curves absent; proposals passed through untouched.
    MissingCurves,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineReport {
    pub status: RefineStatus,
    pub outcomes: BTreeMap<String, usize>,
    /// Proposals whose refined start would not precede the refined end.
    pub crossings: usize,
}

impl RefineReport {
    fn new(status: RefineStatus) -> Self {
        Self {
            status,
            outcomes: BTreeMap::new(),
            crossings: 0,
        }
    }

    fn record(&mut self, outcome: RefineOutcome) {
        let key = match outcome {
            RefineOutcome::Refined => "refined",
            RefineOutcome::Clamped => "clamped",
            RefineOutcome::NonConcave => "non_concave",
            RefineOutcome::Edge => "edge",
        };
        *self.outcomes.entry(key.to_owned()).or_default() += 1;
    }
}

fn refine_endpoint(
    curve: &PreparedCurve,
    x: SnippetCoord,
    cfg: &RefinementConfig,
) -> Result<Refinement> {
    let last = (curve.len() - 1) as f64;
    if x.get() > last {
        return Ok(Refinement {
            coord: x,
            outcome: RefineOutcome::Edge,
        });
    }
    curve.refine(x, cfg)
}

/// Refine both endpoints of every proposal against the video's boundary
/// curves. Scores, labels and order are preserved.
pub fn refine_proposals(
    v: &VideoPredictions,
    cfg: &RefinementConfig,
) -> Result<(VideoPredictions, RefineReport)> {
    cfg.validate()?;
    let (Some(start_curve), Some(end_curve)) = (&v.start_curve, &v.end_curve) else {
        log::warn!(
            "video {:?}: boundary curves missing, proposals passed through",
            v.video_id
        );
        return Ok((v.clone(), RefineReport::new(RefineStatus::MissingCurves)));
    };
    let starts = PreparedCurve::new(start_curve, cfg)?;
    let ends = PreparedCurve::new(end_curve, cfg)?;

    let mut report = RefineReport::new(RefineStatus::Refined);
    let mut out = v.clone();
    for p in &mut out.proposals {
        let s = refine_endpoint(&starts, p.start, cfg)?;
        let e = refine_endpoint(&ends, p.end, cfg)?;
        report.record(s.outcome);
        report.record(e.outcome);
        if s.coord.get() >= e.coord.get() {
            report.crossings += 1;
            p.refined = [false; 2];
            continue;
        }
        p.start = s.coord;
        p.end = e.coord;
        p.refined = [s.is_refined(), e.is_refined()];
    }
    Ok((out, report))
}

/// One detection in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub start_sec: f64,
    pub end_sec: f64,
    pub score: f64,
    pub label: Label,
}

impl Detection {
    pub fn interval(&self) -> Interval {
        Interval {
            start: self.start_sec,
            end: self.end_sec,
        }
    }
}

/// Map proposals back to seconds, ordered by descending score (ties by start).
pub fn recover_resolution(v: &VideoPredictions) -> Result<Vec<Detection>> {
    let mut out = v
        .proposals
        .iter()
        .map(|p| {
            Ok(Detection {
                start_sec: v.grid.to_seconds(p.start)?,
                end_sec: v.grid.to_seconds(p.end)?,
                score: p.score,
                label: p.label.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.start_sec.total_cmp(&b.start_sec))
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftNmsConfig {
    pub sigma: f64,
    pub score_floor: f64,
    pub top_k: usize,
}

impl Default for SoftNmsConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            score_floor: 1e-4,
            top_k: 100,
        }
    }
}

/// Gaussian Soft-NMS, suppressing only within a label. Returns survivors in
/// selection order, which is non-increasing in decayed score.
pub fn soft_nms(props: &[Proposal], cfg: &SoftNmsConfig) -> Result<Vec<Proposal>> {
    Ok(soft_nms_indexed(props, cfg)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// As [`soft_nms`], pairing each survivor with its index in `props`.
pub fn soft_nms_indexed(props: &[Proposal], cfg: &SoftNmsConfig) -> Result<Vec<(usize, Proposal)>> {
    if !(cfg.sigma.is_finite() && cfg.sigma > 0.0) {
        return Err(Error::param(
            "soft-nms sigma",
            format!("{} must be > 0", cfg.sigma),
        ));
    }
    let mut pool: Vec<(usize, Proposal)> = props.iter().cloned().enumerate().collect();
    let mut kept = Vec::with_capacity(cfg.top_k.min(pool.len()));
    while kept.len() < cfg.top_k {
        let Some(best) = (0..pool.len()).reduce(|a, b| {
            let (pa, pb) = (&pool[a].1, &pool[b].1);
            if pb.score > pa.score || (pb.score == pa.score && pb.start.get() < pa.start.get()) {
                b
            } else {
                a
            }
        }) else {
            break;
        };
        let chosen = pool.remove(best);
        let reference = chosen.1.interval();
        for (_, p) in pool.iter_mut().filter(|(_, p)| p.label == chosen.1.label) {
            let overlap = tiou(reference, p.interval())?;
            p.score *= (-(overlap * overlap) / cfg.sigma).exp();
        }
        pool.retain(|(_, p)| p.score >= cfg.score_floor);
        if chosen.1.score >= cfg.score_floor {
            kept.push(chosen);
        }
    }
    Ok(kept)
}
