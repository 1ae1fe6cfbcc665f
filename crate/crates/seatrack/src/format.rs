//! Line-delimited detection streams, the flat config file, and the
//! session and truth documents.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use seatrack_core::ingest::{kp, BodyPose, ClassroomConfig, Detection, FrameRecord, Keypoint, Point};
use seatrack_core::simulator::GroundTruth;
use seatrack_core::tracker::{ClassSession, FrameObservation, SessionEvent, SessionMeta};
use seatrack_core::SeatId;

pub const SESSION_FORMAT_VERSION: u32 = 1;
pub const TRUTH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: pose {pose} has {count} keypoints, expected 17")]
    KeypointCount { line: usize, pose: usize, count: usize },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("config is missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Core(#[from] seatrack_core::Error),
}

#[derive(Serialize, Deserialize)]
struct WirePose {
    kps: Vec<Keypoint>,
}

#[derive(Serialize, Deserialize)]
struct WireFrame {
    frame: u64,
    t: f64,
    detections: Vec<Detection>,
    poses: Vec<WirePose>,
}

/// Parses one stream line. `line` is 1-based and only used in errors.
pub fn parse_line(text: &str, line: usize) -> Result<FrameRecord, FormatError> {
    let wire: WireFrame =
        serde_json::from_str(text).map_err(|e| FormatError::Line { line, message: e.to_string() })?;
    let mut poses = Vec::with_capacity(wire.poses.len());
    for (pose, p) in wire.poses.into_iter().enumerate() {
        let count = p.kps.len();
        let kps: [Keypoint; kp::COUNT] =
            p.kps.try_into().map_err(|_| FormatError::KeypointCount { line, pose, count })?;
        poses.push(BodyPose::new(kps));
    }
    Ok(FrameRecord { frame_index: wire.frame, t: wire.t, detections: wire.detections, poses })
}

/// Serializes one record as a single line (no trailing newline).
pub fn record_to_line(rec: &FrameRecord) -> String {
    let wire = WireFrame {
        frame: rec.frame_index,
        t: rec.t,
        detections: rec.detections.clone(),
        poses: rec.poses.iter().map(|p| WirePose { kps: p.keypoints.to_vec() }).collect(),
    };
    serde_json::to_string(&wire).expect("stream records always serialize")
}

/// Streaming reader over a line-delimited record source. Blank lines are
/// skipped.
pub struct StreamReader<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, line: 0, buf: String::new() }
    }

    /// Number of lines consumed so far.
    pub fn line(&self) -> usize {
        self.line
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<FrameRecord, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line += 1;
                    let text = self.buf.trim();
                    if text.is_empty() {
                        continue;
                    }
                    return Some(parse_line(text, self.line));
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

pub fn write_stream<W: Write>(mut out: W, records: &[FrameRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", record_to_line(r))?;
    }
    out.flush()
}

fn parse_f64(v: &str, line: usize) -> Result<f64, FormatError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| FormatError::Config { line, message: format!("`{v}` is not a finite number") })
}

fn parse_floats(v: &str, n: usize, line: usize) -> Result<Vec<f64>, FormatError> {
    let vals = v
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(s, line))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() != n {
        return Err(FormatError::Config { line, message: format!("expected {n} numbers, got {}", vals.len()) });
    }
    Ok(vals)
}

/// Parses the flat `key = value` config. `#` starts a comment. Required
/// keys: `image_w`, `image_h`, `rows`, `cols`, `rect_quad` (8 numbers, TL TR
/// BR BL). Everything else falls back to the defaults.
pub fn parse_config(text: &str) -> Result<ClassroomConfig, FormatError> {
    let mut cfg = ClassroomConfig::new(0.0, 0.0, 0, 0, [Point::new(0.0, 0.0); 4]);
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| FormatError::Config { line, message: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(FormatError::Config { line, message: format!("duplicate key `{key}`") });
        }
        let int = |v: &str| {
            v.parse::<u32>().map_err(|_| FormatError::Config { line, message: format!("`{v}` is not an integer") })
        };
        let boolean = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(FormatError::Config { line, message: format!("`{v}` is not true/false") }),
        };
        match key {
            "image_w" => cfg.image_w = parse_f64(value, line)?,
            "image_h" => cfg.image_h = parse_f64(value, line)?,
            "rows" => cfg.rows = int(value)?,
            "cols" => cfg.cols = int(value)?,
            "k1" => cfg.k1 = parse_f64(value, line)?,
            "k2" => cfg.k2 = parse_f64(value, line)?,
            "principal_point" => {
                let v = parse_floats(value, 2, line)?;
                cfg.principal_point = Some(Point::new(v[0], v[1]));
            }
            "rect_quad" => {
                let v = parse_floats(value, 8, line)?;
                for (c, p) in cfg.rect_quad.iter_mut().enumerate() {
                    *p = Point::new(v[2 * c], v[2 * c + 1]);
                }
            }
            "sample_interval_s" => cfg.sample_interval_s = parse_f64(value, line)?,
            "iou_threshold" => cfg.iou_threshold = parse_f64(value, line)?,
            "miss_tolerance_t" => cfg.miss_tolerance_t = int(value)?,
            "kp_conf_min" => cfg.kp_conf_min = parse_f64(value, line)?,
            "row_origin_front" => cfg.row_origin_front = boolean(value)?,
            "col_origin_left" => cfg.col_origin_left = boolean(value)?,
            "wrist_weight" => cfg.wrist_weight = parse_f64(value, line)?,
            "elbow_weight" => cfg.elbow_weight = parse_f64(value, line)?,
            "hand_box_expand" => cfg.hand_box_expand = parse_f64(value, line)?,
            "r_max_factor" => cfg.r_max_factor = parse_f64(value, line)?,
            _ => return Err(FormatError::Config { line, message: format!("unknown key `{key}`") }),
        }
    }
    for key in ["image_w", "image_h", "rows", "cols", "rect_quad"] {
        if !seen.contains(key) {
            return Err(FormatError::MissingKey(key));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every config field; [`parse_config`] reads it back unchanged.
pub fn config_to_text(cfg: &ClassroomConfig) -> String {
    let q = &cfg.rect_quad;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    kv("image_w", cfg.image_w.to_string());
    kv("image_h", cfg.image_h.to_string());
    kv("rows", cfg.rows.to_string());
    kv("cols", cfg.cols.to_string());
    kv(
        "rect_quad",
        format!("{} {}  {} {}  {} {}  {} {}", q[0].x, q[0].y, q[1].x, q[1].y, q[2].x, q[2].y, q[3].x, q[3].y),
    );
    kv("k1", cfg.k1.to_string());
    kv("k2", cfg.k2.to_string());
    if let Some(p) = cfg.principal_point {
        kv("principal_point", format!("{} {}", p.x, p.y));
    }
    kv("sample_interval_s", cfg.sample_interval_s.to_string());
    kv("iou_threshold", cfg.iou_threshold.to_string());
    kv("miss_tolerance_t", cfg.miss_tolerance_t.to_string());
    kv("kp_conf_min", cfg.kp_conf_min.to_string());
    kv("row_origin_front", cfg.row_origin_front.to_string());
    kv("col_origin_left", cfg.col_origin_left.to_string());
    kv("wrist_weight", cfg.wrist_weight.to_string());
    kv("elbow_weight", cfg.elbow_weight.to_string());
    kv("hand_box_expand", cfg.hand_box_expand.to_string());
    kv("r_max_factor", cfg.r_max_factor.to_string());
    s
}

/// Persisted form of a [`ClassSession`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub format_version: u32,
    pub config: ClassroomConfig,
    pub meta: SessionMeta,
    pub occupancy: Vec<SeatId>,
    pub events: Vec<SessionEvent>,
    #[serde(default)]
    pub observations: Vec<FrameObservation>,
}

impl SessionDocument {
    pub fn from_session(s: &ClassSession) -> Self {
        Self {
            format_version: SESSION_FORMAT_VERSION,
            config: s.config.clone(),
            meta: s.meta.clone(),
            occupancy: s.occupied_seats(),
            events: s.events(),
            observations: s.observations.clone(),
        }
    }

    pub fn into_session(self) -> Result<ClassSession, FormatError> {
        Ok(ClassSession::from_parts(self.config, self.meta, &self.occupancy, &self.events, self.observations)?)
    }
}

fn check_version(found: u32, expected: u32) -> Result<(), FormatError> {
    if found == expected { Ok(()) } else { Err(FormatError::Version { found, expected }) }
}

pub fn session_to_string(s: &ClassSession) -> String {
    let mut out = serde_json::to_string_pretty(&SessionDocument::from_session(s)).expect("session serializes");
    out.push('\n');
    out
}

pub fn session_from_str(text: &str) -> Result<ClassSession, FormatError> {
    #[derive(Deserialize)]
    struct Probe {
        format_version: u32,
    }
    check_version(serde_json::from_str::<Probe>(text)?.format_version, SESSION_FORMAT_VERSION)?;
    serde_json::from_str::<SessionDocument>(text)?.into_session()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub format_version: u32,
    #[serde(flatten)]
    pub truth: GroundTruth,
}

pub fn truth_to_string(truth: &GroundTruth) -> String {
    let doc = TruthDocument { format_version: TRUTH_FORMAT_VERSION, truth: truth.clone() };
    let mut out = serde_json::to_string(&doc).expect("truth serializes");
    out.push('\n');
    out
}

pub fn truth_from_str(text: &str) -> Result<GroundTruth, FormatError> {
    let doc: TruthDocument = serde_json::from_str(text)?;
    check_version(doc.format_version, TRUTH_FORMAT_VERSION)?;
    Ok(doc.truth)
}
