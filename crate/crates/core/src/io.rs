//! JSON prediction dumps and annotation files.
//!
//! Both formats are validated in full on load. Errors carry the video id,
//! the offending field and the 1-based line of the video's entry. Fields this
//! crate does not interpret are kept and written back unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::{Map, Value};

use crate::curve_refine::{BoundaryKind, ScoreCurve};
use crate::error::{Error, Result};
use crate::grid::{SnippetCoord, TemporalGrid};
use crate::gt_calibration::GroundTruthInstance;
use crate::proposal_pipeline::{Proposal, VideoPredictions};
use crate::Label;

pub const DUMP_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Snippet,
    Second,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Snippet => "snippet",
            Units::Second => "second",
        }
    }
}

/// Round seconds to 6 decimal places.
pub fn round_seconds(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn line_of(source: &str, fragment: &str) -> usize {
    let offset = (fragment.as_ptr() as usize).saturating_sub(source.as_ptr() as usize);
    source[..offset.min(source.len())].matches('\n').count() + 1
}

fn syntax(e: serde_json::Error) -> Error {
    Error::Syntax {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    }
}

fn top_level(source: &str) -> Result<BTreeMap<String, &RawValue>> {
    serde_json::from_str(source).map_err(syntax)
}

#[derive(Debug, Deserialize)]
struct RawProposal {
    start: f64,
    end: f64,
    score: f64,
    label: Label,
    #[serde(default)]
    refined: Option<[bool; 2]>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Deserialize)]
struct RawVideo {
    duration_sec: f64,
    num_snippets: usize,
    #[serde(default)]
    num_frames: Option<u64>,
    #[serde(default)]
    units: Option<Units>,
    proposals: Vec<RawProposal>,
    #[serde(default)]
    start_curve: Option<Vec<f64>>,
    #[serde(default)]
    end_curve: Option<Vec<f64>>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoEntry {
    pub predictions: VideoPredictions,
    /// Uninterpreted fields of each proposal, aligned with `predictions.proposals`.
    pub proposal_extra: Vec<Map<String, Value>>,
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDump {
    pub version: String,
    /// Units the source file declared.
    pub units: Units,
    pub videos: Vec<VideoEntry>,
    /// Emit per-proposal `refined` flags when writing.
    pub with_refined_flags: bool,
    pub extra: Map<String, Value>,
}

struct VideoCtx<'a> {
    video_id: &'a str,
    line: usize,
}

impl VideoCtx<'_> {
    fn invalid(&self, field: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::Validation {
            video_id: self.video_id.to_owned(),
            field: field.into(),
            line: Some(self.line),
            reason: reason.into(),
        }
    }
}

fn parse_video(ctx: &VideoCtx<'_>, raw: &RawValue, units: Units) -> Result<(VideoEntry, bool)> {
    let v: RawVideo = serde_json::from_str(raw.get()).map_err(|e| Error::Validation {
        video_id: ctx.video_id.to_owned(),
        field: "<entry>".into(),
        line: Some(ctx.line + e.line() - 1),
        reason: e.to_string(),
    })?;
    if let Some(found) = v.units {
        if found != units {
            return Err(Error::UnitMismatch {
                video_id: ctx.video_id.to_owned(),
                expected: units.as_str().into(),
                found: found.as_str().into(),
            });
        }
    }
    let grid = match v.num_frames {
        Some(frames) => TemporalGrid::from_frames(v.duration_sec, frames, v.num_snippets),
        None => TemporalGrid::from_seconds(v.duration_sec, v.num_snippets),
    }
    .map_err(|e| ctx.invalid("duration_sec/num_snippets", e.to_string()))?;

    let curve = |field: &str, values: Option<Vec<f64>>, kind| -> Result<Option<ScoreCurve>> {
        let Some(values) = values else {
            return Ok(None);
        };
        if values.len() != v.num_snippets {
            return Err(ctx.invalid(
                field,
                format!(
                    "length {} does not match num_snippets {}",
                    values.len(),
                    v.num_snippets
                ),
            ));
        }
        ScoreCurve::new(values, kind)
            .map(Some)
            .map_err(|e| ctx.invalid(field, e.to_string()))
    };
    let start_curve = curve("start_curve", v.start_curve, BoundaryKind::Start)?;
    let end_curve = curve("end_curve", v.end_curve, BoundaryKind::End)?;

    let mut proposals = Vec::with_capacity(v.proposals.len());
    let mut proposal_extra = Vec::with_capacity(v.proposals.len());
    let mut any_flags = false;
    for (i, p) in v.proposals.into_iter().enumerate() {
        let field = format!("proposals[{i}]");
        let (start, end) = match units {
            Units::Snippet => {
                let hi = grid.num_snippets() as f64;
                if !(p.start >= 0.0 && p.end <= hi) {
                    return Err(ctx.invalid(
                        field,
                        format!("[{}, {}] lies outside [0, {hi}] snippets", p.start, p.end),
                    ));
                }
                (p.start, p.end)
            }
            Units::Second => {
                let to = |t: f64| grid.to_snippet(t).map(SnippetCoord::get);
                match (to(p.start), to(p.end)) {
                    (Ok(s), Ok(e)) => (s, e),
                    (Err(e), _) | (_, Err(e)) => return Err(ctx.invalid(field, e.to_string())),
                }
            }
        };
        let mut proposal = Proposal::new(start, end, p.score, p.label)
            .map_err(|e| ctx.invalid(field.clone(), e.to_string()))?;
        if let Some(flags) = p.refined {
            proposal.refined = flags;
            any_flags = true;
        }
        proposals.push(proposal);
        proposal_extra.push(p.extra);
    }
    let predictions = VideoPredictions::new(ctx.video_id, grid, start_curve, end_curve, proposals)
        .map_err(|e| ctx.invalid("<entry>", e.to_string()))?;
    Ok((
        VideoEntry {
            predictions,
            proposal_extra,
            extra: v.extra,
        },
        any_flags,
    ))
}

fn raw_to_value(raw: &RawValue) -> Result<Value> {
    serde_json::from_str(raw.get()).map_err(syntax)
}

fn missing(field: &str) -> Error {
    Error::Validation {
        video_id: String::new(),
        field: field.into(),
        line: Some(1),
        reason: "required top-level field is missing".into(),
    }
}

impl PredictionDump {
    pub fn parse(source: &str) -> Result<Self> {
        let mut top = top_level(source)?;
        let field_err = |field: &str, raw: &RawValue, e: serde_json::Error| Error::Validation {
            video_id: String::new(),
            field: field.into(),
            line: Some(line_of(source, raw.get())),
            reason: e.to_string(),
        };
        let version_raw = top.remove("version").ok_or_else(|| missing("version"))?;
        let version: String = serde_json::from_str(version_raw.get())
            .map_err(|e| field_err("version", version_raw, e))?;
        let units_raw = top.remove("units").ok_or_else(|| missing("units"))?;
        let units: Units =
            serde_json::from_str(units_raw.get()).map_err(|e| field_err("units", units_raw, e))?;
        let results_raw = top.remove("results").ok_or_else(|| missing("results"))?;
        let results: BTreeMap<String, &RawValue> = serde_json::from_str(results_raw.get())
            .map_err(|e| field_err("results", results_raw, e))?;

        let mut videos = Vec::with_capacity(results.len());
        let mut with_refined_flags = false;
        for (video_id, raw) in &results {
            let ctx = VideoCtx {
                video_id,
                line: line_of(source, raw.get()),
            };
            let (entry, flags) = parse_video(&ctx, raw, units)?;
            with_refined_flags |= flags;
            videos.push(entry);
        }
        let extra = top
            .into_iter()
            .map(|(k, v)| Ok((k, raw_to_value(v)?)))
            .collect::<Result<Map<_, _>>>()?;
        Ok(Self {
            version,
            units,
            videos,
            with_refined_flags,
            extra,
        })
    }

    /// Assemble a dump from in-memory predictions.
    pub fn from_predictions(videos: Vec<VideoPredictions>, units: Units) -> Self {
        Self {
            version: DUMP_VERSION.to_owned(),
            units,
            videos: videos
                .into_iter()
                .map(|predictions| VideoEntry {
                    proposal_extra: vec![Map::new(); predictions.proposals.len()],
                    predictions,
                    extra: Map::new(),
                })
                .collect(),
            with_refined_flags: false,
            extra: Map::new(),
        }
    }

    pub fn to_value(&self, units: Units) -> Result<Value> {
        let mut results = Map::new();
        for entry in &self.videos {
            let v = &entry.predictions;
            let mut obj = entry.extra.clone();
            obj.insert("duration_sec".into(), v.grid.duration_sec().into());
            obj.insert("num_snippets".into(), v.grid.num_snippets().into());
            if let Some(frames) = v.grid.num_frames() {
                obj.insert("num_frames".into(), frames.into());
            }
            let mut proposals = Vec::with_capacity(v.proposals.len());
            for (i, p) in v.proposals.iter().enumerate() {
                let mut po = entry.proposal_extra.get(i).cloned().unwrap_or_default();
                let (s, e) = match units {
                    Units::Snippet => (p.start.get(), p.end.get()),
                    Units::Second => (
                        round_seconds(v.grid.to_seconds(p.start)?),
                        round_seconds(v.grid.to_seconds(p.end)?),
                    ),
                };
                po.insert("start".into(), s.into());
                po.insert("end".into(), e.into());
                po.insert("score".into(), p.score.into());
                po.insert(
                    "label".into(),
                    serde_json::to_value(&p.label).map_err(syntax)?,
                );
                if self.with_refined_flags {
                    po.insert(
                        "refined".into(),
                        serde_json::to_value(p.refined).map_err(syntax)?,
                    );
                }
                proposals.push(Value::Object(po));
            }
            obj.insert("proposals".into(), Value::Array(proposals));
            for (key, curve) in [("start_curve", &v.start_curve), ("end_curve", &v.end_curve)] {
                if let Some(c) = curve {
                    obj.insert(key.into(), c.values().to_vec().into());
                }
            }
            // A per-video `units` field must agree with the file-wide one.
            if obj.contains_key("units") {
                obj.insert("units".into(), units.as_str().into());
            }
            results.insert(v.video_id.clone(), Value::Object(obj));
        }
        let mut top = self.extra.clone();
        top.insert("version".into(), self.version.clone().into());
        top.insert("units".into(), units.as_str().into());
        top.insert("results".into(), Value::Object(results));
        Ok(Value::Object(top))
    }

    /// Compact JSON with sorted keys, newline-terminated.
    pub fn to_json(&self, units: Units) -> Result<String> {
        let mut s = serde_json::to_string(&self.to_value(units)?).map_err(syntax)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Deserialize)]
struct RawSegment {
    segment: [f64; 2],
    label: Label,
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    #[serde(alias = "duration")]
    duration_sec: f64,
    annotations: Vec<RawSegment>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationEntry {
    pub duration_sec: f64,
    pub instances: Vec<GroundTruthInstance>,
    pub extra: Map<String, Value>,
}

/// Video id → annotated instances. An ActivityNet-style `{"database": {...}}`
/// wrapper is accepted on input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationFile {
    pub videos: BTreeMap<String, AnnotationEntry>,
}

impl AnnotationFile {
    pub fn parse(source: &str) -> Result<Self> {
        let mut top = top_level(source)?;
        let entries: BTreeMap<String, &RawValue> = match top.remove("database") {
            Some(db) if db.get().trim_start().starts_with('{') => {
                serde_json::from_str(db.get()).map_err(syntax)?
            }
            Some(other) => {
                top.insert("database".into(), other);
                top
            }
            None => top,
        };
        let mut videos = BTreeMap::new();
        for (video_id, raw) in entries {
            let ctx = VideoCtx {
                video_id: &video_id,
                line: line_of(source, raw.get()),
            };
            let a: RawAnnotation =
                serde_json::from_str(raw.get()).map_err(|e| Error::Validation {
                    video_id: video_id.clone(),
                    field: "<entry>".into(),
                    line: Some(ctx.line + e.line() - 1),
                    reason: e.to_string(),
                })?;
            if !(a.duration_sec.is_finite() && a.duration_sec > 0.0) {
                return Err(ctx.invalid("duration_sec", format!("{} must be > 0", a.duration_sec)));
            }
            let mut instances = Vec::with_capacity(a.annotations.len());
            for (i, seg) in a.annotations.into_iter().enumerate() {
                let field = format!("annotations[{i}].segment");
                let [s, e] = seg.segment;
                let inst = GroundTruthInstance::new(s, e, seg.label)
                    .and_then(|g| g.check_within(a.duration_sec).map(|_| g))
                    .map_err(|err| ctx.invalid(field, err.to_string()))?;
                instances.push(inst);
            }
            videos.insert(
                video_id.clone(),
                AnnotationEntry {
                    duration_sec: a.duration_sec,
                    instances,
                    extra: a.extra,
                },
            );
        }
        Ok(Self { videos })
    }

    pub fn to_value(&self) -> Value {
        let mut top = Map::new();
        for (vid, entry) in &self.videos {
            let mut obj = entry.extra.clone();
            obj.insert("duration_sec".into(), entry.duration_sec.into());
            let anns: Vec<Value> = entry
                .instances
                .iter()
                .map(|g| {
                    serde_json::json!({
                        "segment": [round_seconds(g.start_sec), round_seconds(g.end_sec)],
                        "label": g.label,
                    })
                })
                .collect();
            obj.insert("annotations".into(), Value::Array(anns));
            top.insert(vid.clone(), Value::Object(obj));
        }
        Value::Object(top)
    }

    pub fn to_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_value()).expect("annotation values are finite");
        s.push('\n');
        s
    }

    pub fn ground_truth(&self) -> BTreeMap<String, Vec<GroundTruthInstance>> {
        self.videos
            .iter()
            .map(|(k, v)| (k.clone(), v.instances.clone()))
            .collect()
    }

    pub fn durations(&self) -> BTreeMap<String, f64> {
        self.videos
            .iter()
            .map(|(k, v)| (k.clone(), v.duration_sec))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "version": "1.0",
  "units": "snippet",
  "results": {
    "vid_a": {
      "duration_sec": 100.0,
      "num_snippets": 25,
      "proposals": [{"start": 3.0, "end": 9.0, "score": 0.8, "label": "jump"}]
    }
  }
}"#;

    #[test]
    fn minimal_file_loads() {
        let d = PredictionDump::parse(MINIMAL).unwrap();
        assert_eq!(d.videos.len(), 1);
        let v = &d.videos[0].predictions;
        assert_eq!(v.video_id, "vid_a");
        assert_eq!(v.proposals[0].label, Label::from("jump"));
        assert!(v.start_curve.is_none());
    }

    #[test]
    fn curve_length_error_names_video_and_line() {
        let text = r#"{
  "version": "1.0",
  "units": "snippet",
  "results": {
    "ok": {"duration_sec": 10, "num_snippets": 4, "proposals": []},
    "bad_vid": {"duration_sec": 10, "num_snippets": 4, "proposals": [],
                "start_curve": [0.1, 0.2, 0.3]}
  }
}"#;
        match PredictionDump::parse(text).unwrap_err() {
            Error::Validation {
                video_id,
                field,
                line,
                ..
            } => {
                assert_eq!(video_id, "bad_vid");
                assert_eq!(field, "start_curve");
                assert_eq!(line, Some(6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_error_inside_video_has_absolute_line() {
        let text = "{\"version\": \"1.0\", \"units\": \"snippet\",\n\"results\": {\n\"v\": {\"duration_sec\": 10,\n\"num_snippets\": \"four\", \"proposals\": []}}}";
        match PredictionDump::parse(text).unwrap_err() {
            Error::Validation { video_id, line, .. } => {
                assert_eq!(video_id, "v");
                assert_eq!(line, Some(4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_conflict_is_distinct() {
        let text = r#"{"version": "1.0", "units": "snippet", "results": {
            "v": {"units": "second", "duration_sec": 10, "num_snippets": 4, "proposals": []}}}"#;
        assert!(matches!(
            PredictionDump::parse(text),
            Err(Error::UnitMismatch { .. })
        ));
    }

    #[test]
    fn second_units_are_normalised() {
        let text = r#"{"version": "1.0", "units": "second", "results": {
            "v": {"duration_sec": 100.0, "num_snippets": 25, "proposals": [
                {"start": 37.2, "end": 50, "score": 0.5, "label": 3}]}}}"#;
        let d = PredictionDump::parse(text).unwrap();
        let p = &d.videos[0].predictions.proposals[0];
        assert!((p.start.get() - 9.3).abs() < 1e-12);
        assert_eq!(p.label, Label::Id(3));

        let bad = text.replace("\"end\": 50", "\"end\": 101");
        assert!(matches!(
            PredictionDump::parse(&bad),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_unknown_fields() {
        let text = r#"{"version": "1.0", "units": "second", "model": "bmn", "results": {
            "v": {"duration_sec": 100.0, "num_snippets": 25, "fps": 30, "proposals": [
                {"start": 12.345678, "end": 50.5, "score": 0.5, "label": "a", "iou_pred": 0.7}],
                "start_curve": [0.0, 0.5, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]}}}"#;
        let d = PredictionDump::parse(text).unwrap();
        let written = d.to_json(Units::Second).unwrap();
        let original: Value = serde_json::from_str(text).unwrap();
        let reread: Value = serde_json::from_str(&written).unwrap();
        assert_eq!(original, reread);
        let again = PredictionDump::parse(&written)
            .unwrap()
            .to_json(Units::Second)
            .unwrap();
        assert_eq!(written, again);
    }

    #[test]
    fn syntax_errors_report_position() {
        match PredictionDump::parse("{\n  \"version\": ,\n}") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(PredictionDump::parse(r#"{"units": "snippet", "results": {}}"#).is_err());
    }

    #[test]
    fn annotations_parse_and_validate() {
        let text = r#"{"database": {"v1": {"duration": 120.5, "subset": "validation",
            "annotations": [{"segment": [1.5, 20.25], "label": "run"}]}}}"#;
        let a = AnnotationFile::parse(text).unwrap();
        let e = &a.videos["v1"];
        assert_eq!(e.duration_sec, 120.5);
        assert_eq!(e.instances[0].end_sec, 20.25);
        assert_eq!(e.extra["subset"], "validation");

        let bad = r#"{"v1": {"duration_sec": 10, "annotations": [{"segment": [1, 12], "label": "run"}]}}"#;
        match AnnotationFile::parse(bad).unwrap_err() {
            Error::Validation {
                video_id, field, ..
            } => {
                assert_eq!(video_id, "v1");
                assert_eq!(field, "annotations[0].segment");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
