//! Live mode: consume a growing stream and publish snapshots on the sample
//! clock of the stream.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use seatrack_core::{ClassroomConfig, FrameRecord, Pipeline};

use crate::format::{parse_line, FormatError};
use crate::store::SessionStore;

pub struct LiveFeed {
    id: String,
    pipeline: Pipeline,
    store: Arc<SessionStore>,
    interval: f64,
    next_tick: Option<f64>,
}

impl LiveFeed {
    pub fn new(id: &str, cfg: ClassroomConfig, store: Arc<SessionStore>) -> Result<Self, FormatError> {
        let interval = cfg.sample_interval_s;
        let pipeline = Pipeline::new(cfg, id)?.without_observations();
        Ok(Self { id: id.to_string(), pipeline, store, interval, next_tick: None })
    }

    /// Feeds one frame. Publishes a snapshot whenever the stream clock
    /// reaches the next sample boundary; returns the new version if so.
    pub fn push(&mut self, rec: FrameRecord) -> Result<Option<u64>, FormatError> {
        let t = rec.t;
        self.pipeline.push_frame(rec)?;
        if self.next_tick.is_some_and(|tick| t < tick) {
            return Ok(None);
        }
        self.next_tick = Some(((t / self.interval + 1e-9).floor() + 1.0) * self.interval);
        Ok(Some(self.store.publish(&self.id, self.pipeline.session().clone())))
    }

    /// Closes open tracks and publishes the final snapshot.
    pub fn finish(self) -> Result<u64, FormatError> {
        let session = self.pipeline.finish()?;
        Ok(self.store.publish(&self.id, session))
    }
}

/// Follows `path` like `tail -f`, feeding complete lines to `feed`. Waits
/// for the file to appear. Returns after reaching end of file once `stop`
/// is set, finishing the feed.
pub fn follow(path: &Path, mut feed: LiveFeed, poll: Duration, stop: Arc<AtomicBool>) -> Result<u64, FormatError> {
    let file = loop {
        match File::open(path) {
            Ok(f) => break f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if stop.load(Ordering::Acquire) {
                    return feed.finish();
                }
                std::thread::sleep(poll);
            }
            Err(e) => return Err(e.into()),
        }
    };
    let mut reader = BufReader::new(file);
    let mut pending = String::new();
    let mut line_no = 0;
    loop {
        let n = reader.read_line(&mut pending)?;
        if n > 0 && pending.ends_with('\n') {
            line_no += 1;
            let text = pending.trim();
            if !text.is_empty() {
                feed.push(parse_line(text, line_no)?)?;
            }
            pending.clear();
            continue;
        }
        // at end of file, possibly mid-line
        if stop.load(Ordering::Acquire) {
            let text = pending.trim();
            if !text.is_empty() {
                feed.push(parse_line(text, line_no + 1)?)?;
            }
            return feed.finish();
        }
        std::thread::sleep(poll);
    }
}
