//! Detection metrics: temporal IoU, per-class average precision, mAP over
//! threshold sets, boundary error and the false-positive profile.
//!
//! Matching follows the public ActivityNet evaluator: predictions of a class
//! are visited by descending score and each claims the still-unmatched ground
//! truth of the same video with the highest tIoU, provided it reaches the
//! threshold. AP is the area under the precision envelope.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gt_calibration::GroundTruthInstance;
use crate::proposal_pipeline::Detection;
use crate::Label;

/// Minimum overlap for a false positive to count as a localisation error.
pub const LOCALIZATION_MIN_TIOU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

impl From<&GroundTruthInstance> for Interval {
    fn from(g: &GroundTruthInstance) -> Self {
        Interval::new(g.start_sec, g.end_sec)
    }
}

pub fn tiou(a: Interval, b: Interval) -> Result<f64> {
    for iv in [a, b] {
        if !(iv.start.is_finite() && iv.end.is_finite() && iv.start < iv.end) {
            return Err(Error::param(
                "interval",
                format!("[{}, {}] is degenerate", iv.start, iv.end),
            ));
        }
    }
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.end.max(b.end) - a.start.min(b.start);
    Ok(inter / union)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Anet,
    Thumos,
}

impl Benchmark {
    /// 0.5:0.05:0.95 for ActivityNet, 0.3:0.1:0.7 for THUMOS.
    pub fn thresholds(self) -> Vec<f64> {
        match self {
            Benchmark::Anet => (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            Benchmark::Thumos => (0..5).map(|i| (3 + i) as f64 / 10.0).collect(),
        }
    }
}

pub type Predictions = BTreeMap<String, Vec<Detection>>;
pub type GroundTruth = BTreeMap<String, Vec<GroundTruthInstance>>;

/// Area under the interpolated precision/recall curve for predictions
/// already sorted by descending score.
pub fn average_precision(is_tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let n = is_tp.len();
    let mut recall = Vec::with_capacity(n + 2);
    let mut precision = Vec::with_capacity(n + 2);
    recall.push(0.0);
    precision.push(0.0);
    let (mut tp, mut fp) = (0usize, 0usize);
    for &hit in is_tp {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    (1..recall.len())
        .filter(|&i| recall[i] != recall[i - 1])
        .map(|i| (recall[i] - recall[i - 1]) * precision[i])
        .sum()
}

/// A prediction/ground-truth pair accepted by the matcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub prediction: Interval,
    pub ground_truth: Interval,
}

struct ClassMatch {
    is_tp: Vec<bool>,
    pairs: Vec<MatchedPair>,
    num_gt: usize,
}

fn match_class(
    preds: &Predictions,
    gts: &GroundTruth,
    label: &Label,
    threshold: f64,
) -> Result<ClassMatch> {
    let mut ranked: Vec<(&str, &Detection)> = preds
        .iter()
        .flat_map(|(vid, dets)| dets.iter().map(move |d| (vid.as_str(), d)))
        .filter(|(_, d)| &d.label == label)
        .collect();
    ranked.sort_by(|a, b| b.1.score.total_cmp(&a.1.score));

    let class_gt: BTreeMap<&str, Vec<Interval>> = gts
        .iter()
        .map(|(vid, g)| {
            let ivs = g
                .iter()
                .filter(|x| &x.label == label)
                .map(Interval::from)
                .collect();
            (vid.as_str(), ivs)
        })
        .collect();
    let num_gt = class_gt.values().map(Vec::len).sum();
    let mut locked: BTreeMap<&str, Vec<bool>> = class_gt
        .iter()
        .map(|(vid, g)| (*vid, vec![false; g.len()]))
        .collect();

    let mut is_tp = Vec::with_capacity(ranked.len());
    let mut pairs = Vec::new();
    for (vid, det) in ranked {
        let pred = det.interval();
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = class_gt.get(vid) {
            let taken = &locked[vid];
            for (j, gt) in candidates.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let o = tiou(pred, *gt)?;
                if o >= threshold && best.map_or(true, |(_, b)| o > b) {
                    best = Some((j, o));
                }
            }
        }
        match best {
            Some((j, _)) => {
                locked.get_mut(vid).expect("video present")[j] = true;
                pairs.push(MatchedPair {
                    prediction: pred,
                    ground_truth: class_gt[vid][j],
                });
                is_tp.push(true);
            }
            None => is_tp.push(false),
        }
    }
    Ok(ClassMatch {
        is_tp,
        pairs,
        num_gt,
    })
}

fn gt_classes(gts: &GroundTruth) -> BTreeSet<Label> {
    gts.values().flatten().map(|g| g.label.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub map: f64,
    pub per_class_ap: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub per_threshold: Vec<ThresholdResult>,
    pub average_map: f64,
    pub warnings: Vec<String>,
}

pub fn mean_ap(preds: &Predictions, gts: &GroundTruth, thresholds: &[f64]) -> Result<MapSummary> {
    let classes = gt_classes(gts);
    let mut warnings = Vec::new();
    if classes.is_empty() {
        let msg = "ground truth contains no instances; mAP reported as 0".to_owned();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let unknown = preds.keys().filter(|v| !gts.contains_key(*v)).count();
    if unknown > 0 {
        warnings.push(format!("{unknown} predicted video(s) have no annotations; their detections count as false positives"));
    }
    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &thr in thresholds {
        let mut per_class_ap = BTreeMap::new();
        for label in &classes {
            let m = match_class(preds, gts, label, thr)?;
            per_class_ap.insert(label.to_string(), average_precision(&m.is_tp, m.num_gt));
        }
        let map = if per_class_ap.is_empty() {
            0.0
        } else {
            per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64
        };
        per_threshold.push(ThresholdResult {
            threshold: thr,
            map,
            per_class_ap,
        });
    }
    let average_map = if per_threshold.is_empty() {
        0.0
    } else {
        per_threshold.iter().map(|t| t.map).sum::<f64>() / per_threshold.len() as f64
    };
    Ok(MapSummary {
        per_threshold,
        average_map,
        warnings,
    })
}

/// Greedy matches of every class at `threshold`.
pub fn matched_pairs(
    preds: &Predictions,
    gts: &GroundTruth,
    threshold: f64,
) -> Result<Vec<MatchedPair>> {
    let mut out = Vec::new();
    for label in gt_classes(gts) {
        out.extend(match_class(preds, gts, &label, threshold)?.pairs);
    }
    Ok(out)
}

/// Mean of `(|d_start| + |d_end|) / 2`; `None` when there is nothing to average.
pub fn boundary_mae(pairs: &[MatchedPair]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let total: f64 = pairs
        .iter()
        .map(|p| {
            0.5 * ((p.prediction.start - p.ground_truth.start).abs()
                + (p.prediction.end - p.ground_truth.end).abs())
        })
        .sum();
    Some(total / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpKind {
    TruePositive,
    LocalizationError,
    BackgroundError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpBucket {
    /// Budget multiple `k`: each video contributes its top `k * G` predictions.
    pub multiple: usize,
    pub budget: usize,
    pub true_positive: usize,
    pub localization_error: usize,
    pub background_error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpProfile {
    pub threshold: f64,
    pub buckets: Vec<FpBucket>,
}

/// Classify each of a video's predictions, visited in descending score order.
pub fn classify_video(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    threshold: f64,
) -> Result<Vec<FpKind>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut locked = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for i in order {
        let d = &dets[i];
        let mut best_free: Option<(usize, f64)> = None;
        let mut best_any = 0.0f64;
        for (j, g) in gts.iter().enumerate() {
            if g.label != d.label {
                continue;
            }
            let o = tiou(d.interval(), g.into())?;
            best_any = best_any.max(o);
            if !locked[j] && o >= threshold && best_free.map_or(true, |(_, b)| o > b) {
                best_free = Some((j, o));
            }
        }
        out.push(match best_free {
            Some((j, _)) => {
                locked[j] = true;
                FpKind::TruePositive
            }
            None if best_any >= LOCALIZATION_MIN_TIOU => FpKind::LocalizationError,
            None => FpKind::BackgroundError,
        });
    }
    Ok(out)
}

pub fn fp_profile(
    preds: &Predictions,
    gts: &GroundTruth,
    multiples: &[usize],
    threshold: f64,
) -> Result<FpProfile> {
    if let Some(bad) = multiples.iter().find(|&&k| k == 0) {
        return Err(Error::param(
            "budget multiple",
            format!("{bad} must be positive"),
        ));
    }
    let empty = Vec::new();
    let mut buckets = Vec::with_capacity(multiples.len());
    for &k in multiples {
        let mut b = FpBucket {
            multiple: k,
            budget: 0,
            true_positive: 0,
            localization_error: 0,
            background_error: 0,
        };
        for (vid, g) in gts {
            let mut dets = preds.get(vid).unwrap_or(&empty).clone();
            dets.sort_by(|a, b| b.score.total_cmp(&a.score));
            dets.truncate(k * g.len());
            for kind in classify_video(&dets, g, threshold)? {
                b.budget += 1;
                match kind {
                    FpKind::TruePositive => b.true_positive += 1,
                    FpKind::LocalizationError => b.localization_error += 1,
                    FpKind::BackgroundError => b.background_error += 1,
                }
            }
        }
        buckets.push(b);
    }
    Ok(FpProfile { threshold, buckets })
}

/// Video-duration cut points in seconds: short < cuts[0] <= medium < cuts[1] <= long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthCuts(pub [f64; 2]);

impl Default for LengthCuts {
    fn default() -> Self {
        LengthCuts([30.0, 180.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub name: String,
    pub num_gt: usize,
    pub mean_best_tiou: Option<f64>,
    pub std_best_tiou: Option<f64>,
}

/// Overlap statistics of each ground truth with its best same-label
/// prediction among the video's top-G detections, bucketed by video duration.
pub fn length_breakdown(
    preds: &Predictions,
    gts: &GroundTruth,
    durations: &BTreeMap<String, f64>,
    cuts: LengthCuts,
) -> Result<Vec<LengthBucket>> {
    let mut samples: [Vec<f64>; 3] = Default::default();
    let empty = Vec::new();
    for (vid, g) in gts {
        let Some(&dur) = durations.get(vid) else {
            continue;
        };
        let bucket = if dur < cuts.0[0] {
            0
        } else if dur < cuts.0[1] {
            1
        } else {
            2
        };
        let mut dets = preds.get(vid).unwrap_or(&empty).clone();
        dets.sort_by(|a, b| b.score.total_cmp(&a.score));
        dets.truncate(g.len());
        for inst in g {
            let mut best = 0.0f64;
            for d in dets.iter().filter(|d| d.label == inst.label) {
                best = best.max(tiou(d.interval(), inst.into())?);
            }
            samples[bucket].push(best);
        }
    }
    Ok(["short", "medium", "long"]
        .iter()
        .zip(samples)
        .map(|(name, xs)| {
            let n = xs.len();
            let mean = (n > 0).then(|| xs.iter().sum::<f64>() / n as f64);
            let std =
                mean.map(|m| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt());
            LengthBucket {
                name: (*name).to_owned(),
                num_gt: n,
                mean_best_tiou: mean,
                std_best_tiou: std,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub thresholds: Vec<f64>,
    pub budget_multiples: Vec<usize>,
    /// Threshold separating true positives from localisation errors.
    pub profile_threshold: f64,
    pub length_cuts: LengthCuts,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            thresholds: Benchmark::Anet.thresholds(),
            budget_multiples: (1..=10).collect(),
            profile_threshold: 0.5,
            length_cuts: LengthCuts::default(),
        }
    }
}

pub fn threshold_key(t: f64) -> String {
    format!("{t:.2}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub per_threshold_map: BTreeMap<String, f64>,
    pub average_map: f64,
    /// Over pairs matched at tIoU 0.5; `None` when nothing matched.
    pub boundary_mae_sec: Option<f64>,
    pub fp_profile: FpProfile,
    pub length_cuts_sec: LengthCuts,
    pub length_breakdown: Vec<LengthBucket>,
    pub warnings: Vec<String>,
}

pub fn evaluate(
    preds: &Predictions,
    gts: &GroundTruth,
    durations: &BTreeMap<String, f64>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let summary = mean_ap(preds, gts, &opts.thresholds)?;
    let mut warnings = summary.warnings;
    let pairs = matched_pairs(preds, gts, 0.5)?;
    let boundary_mae_sec = boundary_mae(&pairs);
    if boundary_mae_sec.is_none() {
        warnings.push("no prediction matched at tIoU 0.5; boundary error undefined".to_owned());
    }
    Ok(EvalReport {
        thresholds: opts.thresholds.clone(),
        per_threshold_map: summary
            .per_threshold
            .iter()
            .map(|t| (threshold_key(t.threshold), t.map))
            .collect(),
        average_map: summary.average_map,
        boundary_mae_sec,
        fp_profile: fp_profile(preds, gts, &opts.budget_multiples, opts.profile_threshold)?,
        length_cuts_sec: opts.length_cuts,
        length_breakdown: length_breakdown(preds, gts, durations, opts.length_cuts)?,
        warnings,
    })
}
