use tadrefine_core::curve_refine::RefinementConfig;
use tadrefine_core::evaluation::{evaluate, EvalOptions, Predictions};
use tadrefine_core::io::{PredictionDump, Units};
use tadrefine_core::proposal_pipeline::{
    recover_resolution, refine_proposals, soft_nms, SoftNmsConfig,
};
use tadrefine_core::synth::{generate, SynthScenario};

fn scenario() -> SynthScenario {
    SynthScenario {
        num_videos: 40,
        snippet_counts: vec![50],
        num_classes: 3,
        seed: 17,
        ..Default::default()
    }
}

#[test]
fn noiseless_pipeline_is_exact() {
    let ds = generate(&scenario()).unwrap().remove(0);
    let cfg = RefinementConfig {
        smoothing_enabled: false,
        ..Default::default()
    };
    let mut preds = Predictions::new();
    let mut baseline = Predictions::new();
    for v in ds.predictions() {
        baseline.insert(v.video_id.clone(), recover_resolution(&v).unwrap());
        let (mut refined, report) = refine_proposals(&v, &cfg).unwrap();
        assert_eq!(report.crossings, 0);
        refined.proposals = soft_nms(&refined.proposals, &SoftNmsConfig::default()).unwrap();
        preds.insert(v.video_id.clone(), recover_resolution(&refined).unwrap());
    }
    let ann = ds.annotations();
    let opts = EvalOptions::default();
    let before = evaluate(&baseline, &ann.ground_truth(), &ann.durations(), &opts).unwrap();
    let after = evaluate(&preds, &ann.ground_truth(), &ann.durations(), &opts).unwrap();
    assert_eq!(after.average_map, 1.0);
    assert!(after.boundary_mae_sec.unwrap() < 1e-9);
    assert!(before.average_map < 1.0);
    assert!(before.boundary_mae_sec.unwrap() > 100.0 * after.boundary_mae_sec.unwrap());
}

#[test]
fn generated_dump_round_trips() {
    let ds = generate(&scenario()).unwrap().remove(0);
    let dump = PredictionDump::from_predictions(ds.predictions(), Units::Snippet);
    let text = dump.to_json(Units::Snippet).unwrap();
    let parsed = PredictionDump::parse(&text).unwrap();
    assert_eq!(parsed.to_json(Units::Snippet).unwrap(), text);
    assert_eq!(parsed.videos.len(), 40);

    let ann_text = ds.annotations().to_json();
    let ann = tadrefine_core::io::AnnotationFile::parse(&ann_text).unwrap();
    assert_eq!(ann.to_json(), ann_text);
}
