//! Seeded synthetic detector output.
//!
//! Each video gets ground-truth instances at continuous times. For every
//! requested snippet count the generator draws boundary curves as
//! peak-normalised Gaussians centred on the exact snippet positions (plus
//! optional clamped Gaussian noise), and emits baseline proposals snapped to
//! the integer grid. The snapped proposals carry exactly the quantisation
//! error a real detector would, and the curves carry the information needed
//! to undo it.
//!
//! Randomness is drawn from per-video ChaCha streams, so results do not
//! depend on how videos are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve_refine::{BoundaryKind, RefinementConfig, ScoreCurve};
use crate::error::{Error, Result};
use crate::evaluation::{mean_ap, Benchmark, GroundTruth, Predictions};
use crate::grid::TemporalGrid;
use crate::gt_calibration::{
    quantize_point, synthesize_heatmap, GroundTruthInstance, QuantizeMode,
};
use crate::io::{AnnotationEntry, AnnotationFile};
use crate::proposal_pipeline::{recover_resolution, refine_proposals, Proposal, VideoPredictions};
use crate::Label;

const MAX_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthScenario {
    pub num_videos: usize,
    pub duration_range_sec: (f64, f64),
    pub instances_per_video: (usize, usize),
    pub snippet_counts: Vec<usize>,
    /// Width of the boundary curves, in snippets of each grid.
    pub curve_sigma: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub num_classes: usize,
    /// Boundaries keep this distance (coarsest-grid snippets) from both ends.
    pub margin_snippets: f64,
    /// Minimum gap between two starts (or two ends) of one video.
    pub min_separation_snippets: f64,
    pub min_length_snippets: f64,
    pub baseline_quantize: QuantizeMode,
}

impl Default for SynthScenario {
    fn default() -> Self {
        Self {
            num_videos: 100,
            duration_range_sec: (30.0, 240.0),
            instances_per_video: (1, 2),
            snippet_counts: vec![100],
            curve_sigma: 2.0,
            noise_std: 0.0,
            seed: 0,
            num_classes: 1,
            margin_snippets: 4.0,
            min_separation_snippets: 6.0,
            min_length_snippets: 2.0,
            baseline_quantize: QuantizeMode::Round,
        }
    }
}

impl SynthScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (dlo, dhi) = self.duration_range_sec;
        if !(dlo.is_finite() && dhi.is_finite() && dlo > 0.0 && dlo <= dhi) {
            return bad(format!(
                "duration_range_sec ({dlo}, {dhi}) must satisfy 0 < lo <= hi"
            ));
        }
        let (ilo, ihi) = self.instances_per_video;
        if ilo == 0 || ilo > ihi {
            return bad(format!(
                "instances_per_video ({ilo}, {ihi}) must satisfy 1 <= lo <= hi"
            ));
        }
        if self.snippet_counts.is_empty() || self.snippet_counts.len() > 31 {
            return bad("snippet_counts must list between 1 and 31 grid sizes".into());
        }
        if !(self.curve_sigma.is_finite() && self.curve_sigma > 0.0) {
            return bad(format!("curve_sigma {} must be > 0", self.curve_sigma));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std {} must be >= 0", self.noise_std));
        }
        if self.num_classes == 0 {
            return bad("num_classes must be at least 1".into());
        }
        let coarse = self.coarsest();
        if coarse < 3 {
            return bad(format!(
                "snippet count {coarse} is too small; use at least 3"
            ));
        }
        let span = self.span(coarse);
        let at_least = |v: f64, lo: f64| v.is_finite() && v >= lo;
        if !at_least(self.margin_snippets, 1.0)
            || !at_least(self.min_length_snippets, f64::MIN_POSITIVE)
            || !at_least(self.min_separation_snippets, 0.0)
        {
            return bad("margin_snippets must be >= 1, min_length_snippets > 0 and min_separation_snippets >= 0".into());
        }
        if span < self.min_length_snippets {
            return bad(format!(
                "usable span {span:.3} snippets at T={coarse} is shorter than min_length_snippets"
            ));
        }
        if (ihi - 1) as f64 * self.min_separation_snippets > span - self.min_length_snippets {
            return bad(format!(
                "{ihi} instances separated by {} snippets do not fit in T={coarse}",
                self.min_separation_snippets
            ));
        }
        Ok(())
    }

    fn coarsest(&self) -> usize {
        self.snippet_counts.iter().copied().min().unwrap_or(0)
    }

    fn span(&self, coarse: usize) -> f64 {
        (coarse - 1) as f64 - 2.0 * self.margin_snippets
    }
}

fn stream(seed: u64, video: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((video as u64) << 6) | purpose);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub predictions: VideoPredictions,
    pub ground_truth: Vec<GroundTruthInstance>,
    /// Exact (start, end) snippet positions of every instance.
    pub boundaries: Vec<(f64, f64)>,
    pub scores: Vec<f64>,
}

impl SynthVideo {
    /// Proposals snapped to the grid with `mode`, one per instance.
    pub fn baseline_proposals(&self, mode: QuantizeMode) -> Result<Vec<Proposal>> {
        let last = self.predictions.grid.last_index() as f64;
        self.boundaries
            .iter()
            .zip(&self.scores)
            .zip(&self.ground_truth)
            .map(|(((s, e), score), g)| {
                let qs = (quantize_point(*s, mode)? as f64).min(last);
                let qe = (quantize_point(*e, mode)? as f64).min(last);
                Proposal::new(qs, qe, *score, g.label.clone())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub num_snippets: usize,
    pub videos: Vec<SynthVideo>,
}

impl SynthDataset {
    pub fn ground_truth(&self) -> GroundTruth {
        self.videos
            .iter()
            .map(|v| (v.predictions.video_id.clone(), v.ground_truth.clone()))
            .collect()
    }

    pub fn annotations(&self) -> AnnotationFile {
        AnnotationFile {
            videos: self
                .videos
                .iter()
                .map(|v| {
                    let entry = AnnotationEntry {
                        duration_sec: v.predictions.grid.duration_sec(),
                        instances: v.ground_truth.clone(),
                        extra: Default::default(),
                    };
                    (v.predictions.video_id.clone(), entry)
                })
                .collect(),
        }
    }

    pub fn predictions(&self) -> Vec<VideoPredictions> {
        self.videos.iter().map(|v| v.predictions.clone()).collect()
    }
}

struct VideoTruth {
    duration: f64,
    /// (start, end) in fractions of the video.
    fractions: Vec<(f64, f64)>,
    labels: Vec<Label>,
    scores: Vec<f64>,
}

fn place_instances(
    rng: &mut ChaCha8Rng,
    n: usize,
    lo: f64,
    hi: f64,
    s: &SynthScenario,
) -> Option<Vec<(f64, f64)>> {
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.gen_range(lo..=hi);
        let b = rng.gen_range(lo..=hi);
        let (st, en) = if a < b { (a, b) } else { (b, a) };
        let clear = placed.iter().all(|&(ps, pe)| {
            (ps - st).abs() >= s.min_separation_snippets
                && (pe - en).abs() >= s.min_separation_snippets
        });
        if en - st < s.min_length_snippets || !clear {
            return None;
        }
        placed.push((st, en));
    }
    Some(placed)
}

fn draw_truth(s: &SynthScenario, index: usize) -> Result<VideoTruth> {
    let mut rng = stream(s.seed, index, 0);
    let (dlo, dhi) = s.duration_range_sec;
    let duration = if dlo < dhi {
        rng.gen_range(dlo..dhi)
    } else {
        dlo
    };
    let (ilo, ihi) = s.instances_per_video;
    let n = rng.gen_range(ilo..=ihi);
    let coarse = s.coarsest() as f64;
    let lo = s.margin_snippets;
    let hi = coarse - 1.0 - s.margin_snippets;

    let mut placed = (0..MAX_ATTEMPTS)
        .find_map(|_| place_instances(&mut rng, n, lo, hi, s))
        .ok_or_else(|| {
            Error::Config(format!(
                "video {index}: could not place {n} separated instances in {MAX_ATTEMPTS} attempts"
            ))
        })?;
    placed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let labels = (0..n)
        .map(|_| Label::Id(rng.gen_range(0..s.num_classes as u64)))
        .collect();
    let scores = (0..n).map(|_| rng.gen_range(0.5..1.0)).collect();
    Ok(VideoTruth {
        duration,
        fractions: placed
            .iter()
            .map(|&(a, b)| (a / coarse, b / coarse))
            .collect(),
        labels,
        scores,
    })
}

fn boundary_curve(
    centers: impl Iterator<Item = f64>,
    t: usize,
    sigma: f64,
    noise: Option<(Normal<f64>, &mut ChaCha8Rng)>,
    kind: BoundaryKind,
) -> Result<ScoreCurve> {
    let mut values = vec![0.0f64; t];
    for c in centers {
        let h = synthesize_heatmap(c, t, sigma)?;
        values
            .iter_mut()
            .zip(&h.values)
            .for_each(|(v, &x)| *v = v.max(x));
    }
    if let Some((dist, rng)) = noise {
        values
            .iter_mut()
            .for_each(|v| *v = (*v + dist.sample(rng)).max(0.0));
    }
    ScoreCurve::new(values, kind)
}

fn build_video(
    s: &SynthScenario,
    index: usize,
    truth: &VideoTruth,
    t_index: usize,
    t: usize,
) -> Result<SynthVideo> {
    let grid = TemporalGrid::from_seconds(truth.duration, t)?;
    let tf = t as f64;
    let boundaries: Vec<(f64, f64)> = truth
        .fractions
        .iter()
        .map(|&(a, b)| (a * tf, b * tf))
        .collect();
    let ground_truth = truth
        .fractions
        .iter()
        .zip(&truth.labels)
        .map(|(&(a, b), l)| {
            GroundTruthInstance::new(a * truth.duration, b * truth.duration, l.clone())
        })
        .collect::<Result<Vec<_>>>()?;

    let noise = (s.noise_std > 0.0)
        .then(|| Normal::new(0.0, s.noise_std).map_err(|e| Error::Config(e.to_string())))
        .transpose()?;
    let purpose = 1 + 2 * t_index as u64;
    let mut start_rng = stream(s.seed, index, purpose);
    let mut end_rng = stream(s.seed, index, purpose + 1);
    let start_curve = boundary_curve(
        boundaries.iter().map(|b| b.0),
        t,
        s.curve_sigma,
        noise.map(|d| (d, &mut start_rng)),
        BoundaryKind::Start,
    )?;
    let end_curve = boundary_curve(
        boundaries.iter().map(|b| b.1),
        t,
        s.curve_sigma,
        noise.map(|d| (d, &mut end_rng)),
        BoundaryKind::End,
    )?;

    let mut video = SynthVideo {
        predictions: VideoPredictions::new(
            format!("synth_{index:05}"),
            grid,
            Some(start_curve),
            Some(end_curve),
            Vec::new(),
        )?,
        ground_truth,
        boundaries,
        scores: truth.scores.clone(),
    };
    video.predictions.proposals = video.baseline_proposals(s.baseline_quantize)?;
    Ok(video)
}

/// One dataset per entry of `snippet_counts`, all sharing the same videos.
pub fn generate(s: &SynthScenario) -> Result<Vec<SynthDataset>> {
    s.validate()?;
    let truths = (0..s.num_videos)
        .into_par_iter()
        .map(|i| draw_truth(s, i))
        .collect::<Result<Vec<_>>>()?;
    s.snippet_counts
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let videos = truths
                .par_iter()
                .enumerate()
                .map(|(i, truth)| build_video(s, i, truth, ti, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(SynthDataset {
                num_snippets: t,
                videos,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub num_snippets: usize,
    pub quantize_mode: QuantizeMode,
    pub gap: bool,
    pub smoothing: bool,
    pub boundary_mae_sec: f64,
    pub boundary_mae_snippets: f64,
    pub average_map: f64,
}

/// Mean absolute boundary error of `proposals` against the video's exact
/// boundaries, in snippets and in seconds. Returns per-boundary sums.
fn boundary_errors(video: &SynthVideo, proposals: &[Proposal]) -> (f64, f64, usize) {
    let lambda = video.predictions.grid.lambda_sec();
    let mut snippets = 0.0;
    for (p, (s, e)) in proposals.iter().zip(&video.boundaries) {
        snippets += (p.start.get() - s).abs() + (p.end.get() - e).abs();
    }
    (snippets, snippets * lambda, 2 * proposals.len())
}

fn score_cell(
    videos: &[SynthVideo],
    outputs: &[Vec<Proposal>],
    gts: &GroundTruth,
) -> Result<(f64, f64, f64)> {
    let (mut snip, mut sec, mut n) = (0.0, 0.0, 0usize);
    let mut preds = Predictions::new();
    for (v, props) in videos.iter().zip(outputs) {
        let (a, b, c) = boundary_errors(v, props);
        snip += a;
        sec += b;
        n += c;
        let mut pv = v.predictions.clone();
        pv.proposals = props.clone();
        preds.insert(pv.video_id.clone(), recover_resolution(&pv)?);
    }
    let map = mean_ap(&preds, gts, &Benchmark::Anet.thresholds())?.average_map;
    let n = n.max(1) as f64;
    Ok((sec / n, snip / n, map))
}

/// Every (T, quantisation mode, GAP on/off, smoothing on/off) cell.
/// `modes` selects the baseline snapping functions to sweep.
pub fn run_sweep(
    s: &SynthScenario,
    cfg: &RefinementConfig,
    modes: &[QuantizeMode],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for ds in generate(s)? {
        let gts = ds.ground_truth();
        for &mode in modes {
            let baseline = ds
                .videos
                .iter()
                .map(|v| v.baseline_proposals(mode))
                .collect::<Result<Vec<_>>>()?;
            let (sec, snip, map) = score_cell(&ds.videos, &baseline, &gts)?;
            rows.push(SweepRow {
                num_snippets: ds.num_snippets,
                quantize_mode: mode,
                gap: false,
                smoothing: false,
                boundary_mae_sec: sec,
                boundary_mae_snippets: snip,
                average_map: map,
            });
            for smoothing in [false, true] {
                let cell_cfg = RefinementConfig {
                    smoothing_enabled: smoothing,
                    ..*cfg
                };
                let refined = ds
                    .videos
                    .par_iter()
                    .zip(&baseline)
                    .map(|(v, props)| {
                        let mut pv = v.predictions.clone();
                        pv.proposals = props.clone();
                        Ok(refine_proposals(&pv, &cell_cfg)?.0.proposals)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (sec, snip, map) = score_cell(&ds.videos, &refined, &gts)?;
                rows.push(SweepRow {
                    num_snippets: ds.num_snippets,
                    quantize_mode: mode,
                    gap: true,
                    smoothing,
                    boundary_mae_sec: sec,
                    boundary_mae_snippets: snip,
                    average_map: map,
                });
            }
        }
    }
    Ok(rows)
}
