//! File-level implementations of the CLI subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};

use seatrack_core::evaluator::{eval_counts, eval_matching, eval_seats};
use seatrack_core::pipeline::PipelineStats;
use seatrack_core::simulator::{generate, ScenarioSpec};
use seatrack_core::{BehaviorCategory, ClassSession, Pipeline};

use crate::format::{
    config_to_text, parse_config, session_from_str, session_to_string, truth_from_str, truth_to_string,
    write_stream, StreamReader,
};
use crate::live::{follow, LiveFeed};
use crate::report::{count_table, matching_table, seat_table, EvaluationDocument};
use crate::store::SessionStore;

pub fn read_config(path: &Path) -> Result<seatrack_core::ClassroomConfig> {
    if !path.exists() {
        bail!("config not found: {}", path.display());
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Runs the full analysis over a stream file and writes the session
/// document. Returns the session and pipeline statistics.
pub fn analyze(input: &Path, config: &Path, out: &Path) -> Result<(ClassSession, PipelineStats)> {
    let cfg = read_config(config)?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let course = input.file_stem().map_or_else(|| "course".into(), |s| s.to_string_lossy().into_owned());
    let mut pipeline = Pipeline::new(cfg, course)?;
    for rec in StreamReader::new(BufReader::new(file)) {
        let rec = rec.with_context(|| format!("reading {}", input.display()))?;
        let frame = rec.frame_index;
        pipeline.push_frame(rec).with_context(|| format!("frame {frame}"))?;
    }
    let stats = pipeline.stats();
    let session = pipeline.finish()?;
    std::fs::write(out, session_to_string(&session)).with_context(|| format!("writing {}", out.display()))?;
    Ok((session, stats))
}

pub fn summary(session: &ClassSession, stats: &PipelineStats) -> String {
    let mut s = format!(
        "frames {}  dropped poses {}  rejected detections {}  irregular intervals {}\n",
        stats.frames, stats.dropped_poses, stats.rejected_detections, stats.irregular_intervals
    );
    let totals = session.totals();
    let unassigned = session.unassigned_counts();
    for (i, cat) in BehaviorCategory::BEHAVIORS.iter().enumerate() {
        s.push_str(&format!("{:<14} {:>6}  (unassigned {})\n", cat.name(), totals[i], unassigned[i]));
    }
    s.push_str(&format!("occupied seats {}\n", session.occupied_seats().len()));
    s
}

pub struct SimulateOutputs<'a> {
    pub stream: &'a Path,
    pub truth: &'a Path,
    pub config: Option<&'a Path>,
}

/// Generates a stream and its truth from a scenario spec file. `seed`
/// overrides the spec's own seed.
pub fn simulate(spec_path: &Path, seed: Option<u64>, out: SimulateOutputs<'_>) -> Result<usize> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: ScenarioSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    simulate_spec(&spec, seed.unwrap_or(spec.seed), out)
}

pub fn simulate_spec(spec: &ScenarioSpec, seed: u64, out: SimulateOutputs<'_>) -> Result<usize> {
    let (frames, truth) = generate(spec, seed)?;
    let w = BufWriter::new(File::create(out.stream).with_context(|| format!("creating {}", out.stream.display()))?);
    write_stream(w, &frames)?;
    std::fs::write(out.truth, truth_to_string(&truth))?;
    if let Some(p) = out.config {
        std::fs::write(p, config_to_text(&spec.config()))?;
    }
    Ok(frames.len())
}

/// Scores a session document against a truth document. Writes the JSON
/// report to `json_out` when given and returns the text report.
pub fn evaluate(session: &Path, truth: &Path, json_out: Option<&Path>) -> Result<String> {
    let s = session_from_str(&std::fs::read_to_string(session).with_context(|| format!("reading {}", session.display()))?)?;
    let t = truth_from_str(&std::fs::read_to_string(truth).with_context(|| format!("reading {}", truth.display()))?)?;
    let matching = eval_matching(&s.observations, &t)?;
    let seats = eval_seats(&s.observations, &t, None)?;
    let counts = eval_counts(&s, &t);
    let text = format!("{}\n{}\n{}", matching_table(&matching), seat_table(&seats), count_table(&counts));
    if let Some(p) = json_out {
        let doc = EvaluationDocument::new(matching, seats, counts);
        std::fs::write(p, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    Ok(text)
}

pub struct LiveOptions {
    pub input: PathBuf,
    pub config: PathBuf,
    pub id: String,
}

/// Serves the store until the process is stopped.
pub async fn serve(store_dir: &Path, addr: SocketAddr, live: Option<LiveOptions>) -> Result<()> {
    let store = Arc::new(
        SessionStore::open_dir(store_dir).with_context(|| format!("opening store {}", store_dir.display()))?,
    );
    if let Some(live) = live {
        let cfg = read_config(&live.config)?;
        let feed = LiveFeed::new(&live.id, cfg, store.clone())?;
        let stop = Arc::new(AtomicBool::new(false));
        std::thread::spawn(move || {
            if let Err(e) = follow(&live.input, feed, Duration::from_millis(200), stop) {
                eprintln!("live input stopped: {e}");
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, crate::api::router(store)).await?;
    Ok(())
}
