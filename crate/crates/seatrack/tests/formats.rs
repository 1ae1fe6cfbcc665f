use std::io::Cursor;

use proptest::prelude::*;

use seatrack::format::{
    config_to_text, parse_config, parse_line, record_to_line, session_from_str, session_to_string, truth_from_str,
    truth_to_string, FormatError, StreamReader,
};
use seatrack_core::ingest::kp;
use seatrack_core::simulator::{generate, random_script, CameraModel, NoiseModel, ScenarioSpec, ScriptOptions};
use seatrack_core::{analyze, BBox, BehaviorCategory, BodyPose, Detection, FrameRecord, Keypoint};

fn read_all(text: &str) -> Vec<Result<FrameRecord, FormatError>> {
    StreamReader::new(Cursor::new(text.to_string())).collect()
}

#[test]
fn empty_frame_line() {
    let rec = parse_line(r#"{"frame":0,"t":0.0,"detections":[],"poses":[]}"#, 1).unwrap();
    assert_eq!(rec, FrameRecord { frame_index: 0, t: 0.0, detections: vec![], poses: vec![] });
}

#[test]
fn missing_bbox_reports_line() {
    let text = concat!(
        r#"{"frame":0,"t":0.0,"detections":[],"poses":[]}"#,
        "\n",
        r#"{"frame":1,"t":3.0,"detections":[{"cat":"smiling","conf":0.9}],"poses":[]}"#,
        "\n"
    );
    let out = read_all(text);
    assert!(out[0].is_ok());
    match &out[1] {
        Err(FormatError::Line { line: 2, message }) => assert!(message.contains("bbox"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_category_is_rejected() {
    let line = r#"{"frame":0,"t":0.0,"detections":[{"cat":"waving","bbox":[1,2,3,4],"conf":0.9}],"poses":[]}"#;
    assert!(matches!(parse_line(line, 7), Err(FormatError::Line { line: 7, .. })));
}

#[test]
fn stream_order_is_preserved() {
    let text: String = (0..3).map(|i| format!("{{\"frame\":{i},\"t\":{}.0,\"detections\":[],\"poses\":[]}}\n\n", i * 3)).collect();
    let idx: Vec<u64> = read_all(&text).into_iter().map(|r| r.unwrap().frame_index).collect();
    assert_eq!(idx, vec![0, 1, 2]);
}

#[test]
fn wrong_keypoint_count_names_pose() {
    let good: Vec<String> = (0..17).map(|_| "[1,2,0.9]".to_string()).collect();
    let bad: Vec<String> = (0..16).map(|_| "[1,2,0.9]".to_string()).collect();
    let line = format!(
        r#"{{"frame":4,"t":12.0,"detections":[],"poses":[{{"kps":[{}]}},{{"kps":[{}]}}]}}"#,
        good.join(","),
        bad.join(",")
    );
    match parse_line(&line, 5) {
        Err(e @ FormatError::KeypointCount { line: 5, pose: 1, count: 16 }) => {
            assert!(e.to_string().contains("pose 1"));
        }
        other => panic!("{other:?}"),
    }
}

fn arb_record() -> impl Strategy<Value = FrameRecord> {
    let det = (0..6usize, any::<(f32, f32)>(), 0.1f64..500.0, 0.1f64..500.0, 0.0f64..=1.0).prop_map(|(c, (x, y), w, h, conf)| {
        Detection::new(BehaviorCategory::ALL[c], BBox::new(x as f64, y as f64, w, h), conf)
    });
    let kpt = (-1e4f64..1e4, -1e4f64..1e4, 0.0f64..=1.0).prop_map(|(x, y, c)| Keypoint::new(x, y, c));
    let pose = proptest::collection::vec(kpt, kp::COUNT)
        .prop_map(|v| BodyPose::new(v.try_into().unwrap()));
    (any::<u32>(), 0.0f64..1e5, proptest::collection::vec(det, 0..5), proptest::collection::vec(pose, 0..4))
        .prop_map(|(f, t, detections, poses)| FrameRecord { frame_index: f as u64, t, detections, poses })
}

proptest! {
    #[test]
    fn record_round_trip(rec in arb_record()) {
        let line = record_to_line(&rec);
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(parse_line(&line, 1).unwrap(), rec);
    }
}

#[test]
fn config_round_trip_and_errors() {
    let mut cfg = CameraModel::wide_left_view(0.1);
    cfg.k2 = -0.01;
    let mut c = ScenarioSpec::new(5, 7, 60.0, cfg).config();
    c.principal_point = Some(seatrack_core::Point::new(955.5, 541.25));
    c.row_origin_front = false;
    let text = config_to_text(&c);
    assert_eq!(parse_config(&text).unwrap(), c);

    let minimal = "# room\nimage_w = 1920\nimage_h=1080\nrows = 5\ncols = 7 # seats\nrect_quad = 430 230, 1260 190, 1840 930, 70 1000\n";
    let parsed = parse_config(minimal).unwrap();
    assert_eq!(parsed, ScenarioSpec::new(5, 7, 60.0, CameraModel::left_view()).config());

    assert!(matches!(parse_config("image_w = 1920\n"), Err(FormatError::MissingKey("image_h"))));
    let unknown = format!("{minimal}colour = blue\n");
    assert!(matches!(parse_config(&unknown), Err(FormatError::Config { line: 7, .. })));
    let dup = format!("{minimal}rows = 6\n");
    assert!(matches!(parse_config(&dup), Err(FormatError::Config { line: 7, .. })));
    let short_quad = minimal.replace("70 1000", "70");
    assert!(matches!(parse_config(&short_quad), Err(FormatError::Config { line: 6, .. })));
    let bad_rows = minimal.replace("rows = 5", "rows = 0");
    assert!(matches!(parse_config(&bad_rows), Err(FormatError::Core(_))));
}

#[test]
fn documents_round_trip_byte_exact() {
    let mut s = ScenarioSpec::new(4, 6, 240.0, CameraModel::right_view());
    s.noise = NoiseModel { miss_prob: 0.1, keypoint_dropout: 0.2, bbox_jitter_px: 2.0, false_positive_rate: 0.1, position_jitter_pitch: 0.05 };
    s.events = random_script(&s, &ScriptOptions { events: 30, ..Default::default() }, 8);
    let (frames, truth) = generate(&s, 8).unwrap();
    let session = analyze(s.config(), "room", frames).unwrap();

    let text = session_to_string(&session);
    let back = session_from_str(&text).unwrap();
    assert_eq!(back, session);
    assert_eq!(session_to_string(&back), text);

    let t = truth_to_string(&truth);
    assert_eq!(truth_from_str(&t).unwrap(), truth);
}

#[test]
fn document_version_is_checked() {
    let session = analyze(ScenarioSpec::new(2, 2, 9.0, CameraModel::left_view()).config(), "v", vec![]).unwrap();
    let text = session_to_string(&session).replacen("\"format_version\": 1", "\"format_version\": 9", 1);
    assert!(matches!(session_from_str(&text), Err(FormatError::Version { found: 9, expected: 1 })));
}
