use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use tadrefine_core::curve_refine::RefinementConfig;
use tadrefine_core::evaluation::{
    evaluate, fp_profile, threshold_key, Benchmark, EvalOptions, Predictions,
};
use tadrefine_core::grid::TemporalGrid;
use tadrefine_core::gt_calibration::{make_training_targets, QuantizeMode};
use tadrefine_core::io::{AnnotationFile, PredictionDump, Units, VideoEntry};
use tadrefine_core::proposal_pipeline::{
    recover_resolution, refine_proposals, soft_nms_indexed, RefineReport, RefineStatus,
    SoftNmsConfig,
};
use tadrefine_core::synth::{generate, run_sweep, SynthScenario};
use tadrefine_core::Error;

use crate::config::FileConfig;
use crate::error::CliError;
use crate::{
    BenchmarkArg, EvalArgs, GtCalibrateArgs, ProfileArgs, RefineArgs, SimulateArgs, Switch,
};

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Unreadable {
        path: path.to_owned(),
        source,
    })
}

fn load_dump(path: &Path) -> Result<PredictionDump> {
    PredictionDump::parse(&read(path)?).map_err(CliError::invalid(path))
}

fn load_annotations(path: &Path) -> Result<AnnotationFile> {
    AnnotationFile::parse(&read(path)?).map_err(CliError::invalid(path))
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let err = |source| CliError::Write {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

fn refine_config(args: &RefineArgs, file: &FileConfig) -> (RefinementConfig, SoftNmsConfig) {
    let mut cfg = file.refine;
    if let Some(s) = args.sigma {
        cfg.sigma = s;
    }
    if args.no_smoothing {
        cfg.smoothing_enabled = false;
    }
    if let Some(w) = args.snap_window {
        cfg.snap_window = w;
    }
    if let Some(m) = args.max_offset {
        cfg.max_offset = m;
    }
    let mut nms = file.soft_nms;
    if let Some(s) = args.soft_nms_sigma {
        nms.sigma = s;
    }
    if let Some(k) = args.top_k {
        nms.top_k = k;
    }
    (cfg, nms)
}

fn refine_video(
    entry: &VideoEntry,
    cfg: Option<&RefinementConfig>,
    nms: Option<&SoftNmsConfig>,
) -> tadrefine_core::Result<(VideoEntry, Option<RefineReport>)> {
    let (refined, report) = match cfg {
        Some(cfg) => {
            let (v, r) = refine_proposals(&entry.predictions, cfg)?;
            (v, Some(r))
        }
        None => (entry.predictions.clone(), None),
    };
    let mut out = VideoEntry {
        predictions: refined,
        proposal_extra: entry.proposal_extra.clone(),
        extra: entry.extra.clone(),
    };
    if let Some(nms) = nms {
        let kept = soft_nms_indexed(&out.predictions.proposals, nms)?;
        out.proposal_extra = kept
            .iter()
            .map(|(i, _)| entry.proposal_extra.get(*i).cloned().unwrap_or_default())
            .collect();
        out.predictions.proposals = kept.into_iter().map(|(_, p)| p).collect();
    }
    Ok((out, report))
}

pub fn refine(args: &RefineArgs, file: &FileConfig) -> Result<()> {
    let (cfg, nms) = refine_config(args, file);
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("invalid refinement settings: {e}")))?;
    if !(nms.sigma.is_finite() && nms.sigma > 0.0) {
        return Err(CliError::Usage(format!(
            "--soft-nms-sigma {} must be > 0",
            nms.sigma
        )));
    }
    let dump = load_dump(&args.dump)?;
    let nms = (!args.no_soft_nms).then_some(&nms);
    let cfg = (!args.no_refine).then_some(&cfg);
    let text = refine_dump(dump, cfg, nms, args.jobs).map_err(|e| match e {
        CliError::Invalid { source, .. } => CliError::invalid(&args.dump)(source),
        other => other,
    })?;
    write_atomic(&args.out, &text)
}

/// Refine, suppress and serialise a parsed dump, in seconds. `None` skips
/// the corresponding stage.
pub fn refine_dump(
    mut dump: PredictionDump,
    cfg: Option<&RefinementConfig>,
    nms: Option<&SoftNmsConfig>,
    jobs: usize,
) -> Result<String> {
    let results: Vec<_> = pool(jobs)?.install(|| {
        dump.videos
            .par_iter()
            .map(|entry| refine_video(entry, cfg, nms))
            .collect()
    });

    let mut failures = Vec::new();
    let mut videos = Vec::with_capacity(results.len());
    let mut totals: BTreeMap<String, usize> = BTreeMap::new();
    let (mut missing, mut crossings) = (0usize, 0usize);
    for (entry, result) in dump.videos.iter().zip(results) {
        match result {
            Ok((video, Some(report))) => {
                for (k, n) in report.outcomes {
                    *totals.entry(k).or_default() += n;
                }
                missing += usize::from(report.status == RefineStatus::MissingCurves);
                crossings += report.crossings;
                videos.push(video);
            }
            Ok((video, None)) => videos.push(video),
            Err(e) => failures.push((entry.predictions.video_id.clone(), e)),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Processing { failures });
    }
    if missing > 0 {
        log::warn!("{missing} video(s) had no boundary curves and were passed through unrefined");
    }
    log::info!("endpoint outcomes {totals:?}, {crossings} crossing proposal(s) kept unrefined");

    dump.videos = videos;
    dump.with_refined_flags = true;
    dump.to_json(Units::Second)
        .map_err(|source| CliError::Invalid {
            path: PathBuf::new(),
            source,
        })
}

pub fn gt_calibrate(args: &GtCalibrateArgs) -> Result<()> {
    let mode: QuantizeMode = args
        .mode
        .parse()
        .map_err(|e: Error| CliError::Usage(format!("--mode: {e}")))?;
    if !(args.sigma.is_finite() && args.sigma > 0.0) {
        return Err(CliError::Usage(format!(
            "--sigma {} must be > 0",
            args.sigma
        )));
    }
    let calibrated = matches!(args.calibrated, Switch::On);
    let ann = load_annotations(&args.annotations)?;

    let mut out = Map::new();
    for (video_id, entry) in &ann.videos {
        let build = || -> tadrefine_core::Result<Value> {
            let grid = TemporalGrid::from_seconds(entry.duration_sec, args.num_snippets)?;
            let t = grid.num_snippets();
            let (mut start, mut end) = (vec![0.0f64; t], vec![0.0f64; t]);
            let mut instances = Vec::with_capacity(entry.instances.len());
            for gt in &entry.instances {
                let targets = make_training_targets(gt, &grid, args.sigma, calibrated, mode)?;
                start
                    .iter_mut()
                    .zip(&targets.start.values)
                    .for_each(|(a, &b)| *a = a.max(b));
                end.iter_mut()
                    .zip(&targets.end.values)
                    .for_each(|(a, &b)| *a = a.max(b));
                instances.push(json!({
                    "label": gt.label,
                    "start_center": targets.start.center,
                    "end_center": targets.end.center,
                    "quantization_error": [targets.quantization_error.0, targets.quantization_error.1],
                }));
            }
            Ok(json!({
                "duration_sec": entry.duration_sec,
                "num_snippets": t,
                "instances": instances,
                "start_target": start,
                "end_target": end,
            }))
        };
        let value = build().map_err(|e| CliError::Processing {
            failures: vec![(video_id.clone(), e)],
        })?;
        out.insert(video_id.clone(), value);
    }
    let doc = json!({
        "sigma": args.sigma,
        "mode": mode.as_str(),
        "calibrated": calibrated,
        "videos": out,
    });
    write_atomic(&args.out, &pretty(&doc))
}

pub fn simulate(args: &SimulateArgs, file: &FileConfig) -> Result<()> {
    let scenario: SynthScenario = serde_json::from_str(&read(&args.scenario)?).map_err(|e| {
        CliError::invalid(&args.scenario)(Error::Syntax {
            line: e.line(),
            column: e.column(),
            reason: e.to_string(),
        })
    })?;
    let invalid = CliError::invalid(&args.scenario);
    let pool = pool(args.jobs)?;
    let datasets = pool.install(|| generate(&scenario)).map_err(invalid)?;

    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let annotations = datasets
        .first()
        .map(|d| d.annotations().to_json())
        .unwrap_or_default();
    files.push((args.out_dir.join("annotations.json"), annotations));
    for ds in &datasets {
        let dump = PredictionDump::from_predictions(ds.predictions(), Units::Snippet);
        let text = dump
            .to_json(Units::Snippet)
            .map_err(CliError::invalid(&args.scenario))?;
        files.push((
            args.out_dir.join(format!("dump_T{}.json", ds.num_snippets)),
            text,
        ));
    }
    if args.sweep {
        let rows = pool
            .install(|| run_sweep(&scenario, &file.refine, &QuantizeMode::ALL))
            .map_err(CliError::invalid(&args.scenario))?;
        files.push((args.out_dir.join("sweep.json"), pretty(&rows)));
    }
    for (path, text) in &files {
        write_atomic(path, text)?;
    }
    Ok(())
}

fn detections(dump: &PredictionDump, path: &Path) -> Result<Predictions> {
    dump.videos
        .iter()
        .map(|v| {
            let dets = recover_resolution(&v.predictions).map_err(CliError::invalid(path))?;
            Ok((v.predictions.video_id.clone(), dets))
        })
        .collect()
}

fn format_table(report: &tadrefine_core::evaluation::EvalReport) -> String {
    let mut header = String::from("tIoU   ");
    let mut row = String::from("mAP    ");
    for t in &report.thresholds {
        let key = threshold_key(*t);
        header.push_str(&format!(" {key:>6}"));
        row.push_str(&format!(" {:>6.2}", 100.0 * report.per_threshold_map[&key]));
    }
    header.push_str("    avg");
    row.push_str(&format!(" {:>6.2}", 100.0 * report.average_map));
    format!("{header}\n{row}\n")
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let dump = load_dump(&args.dump)?;
    let ann = load_annotations(&args.annotations)?;
    let preds = detections(&dump, &args.dump)?;
    let benchmark = match args.benchmark {
        BenchmarkArg::Anet => Benchmark::Anet,
        BenchmarkArg::Thumos => Benchmark::Thumos,
    };
    let opts = EvalOptions {
        thresholds: benchmark.thresholds(),
        ..Default::default()
    };
    let report = evaluate(&preds, &ann.ground_truth(), &ann.durations(), &opts)
        .map_err(CliError::invalid(&args.annotations))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(out) = &args.out {
        write_atomic(out, &pretty(&report))?;
    }
    print!("{}", format_table(&report));
    Ok(())
}

pub fn profile(args: &ProfileArgs) -> Result<()> {
    if args.budgets.is_empty() || args.budgets.contains(&0) {
        return Err(CliError::Usage(
            "--budgets must list positive multiples".into(),
        ));
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage(format!(
            "--threshold {} must lie in [0, 1]",
            args.threshold
        )));
    }
    let dump = load_dump(&args.dump)?;
    let ann = load_annotations(&args.annotations)?;
    let preds = detections(&dump, &args.dump)?;
    let profile = fp_profile(&preds, &ann.ground_truth(), &args.budgets, args.threshold)
        .map_err(CliError::invalid(&args.annotations))?;
    let text = pretty(&profile);
    match &args.out {
        Some(out) => write_atomic(out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thumos_table_has_five_columns() {
        let thresholds = Benchmark::Thumos.thresholds();
        let report = tadrefine_core::evaluation::EvalReport {
            per_threshold_map: thresholds
                .iter()
                .map(|t| (threshold_key(*t), 0.5))
                .collect(),
            thresholds,
            average_map: 0.5,
            boundary_mae_sec: None,
            fp_profile: tadrefine_core::evaluation::FpProfile {
                threshold: 0.5,
                buckets: vec![],
            },
            length_cuts_sec: Default::default(),
            length_breakdown: vec![],
            warnings: vec![],
        };
        let table = format_table(&report);
        let header: Vec<_> = table.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(
            header,
            ["tIoU", "0.30", "0.40", "0.50", "0.60", "0.70", "avg"]
        );
    }
}
