//! Trace recording: a shared [`Tracer`] that numbers events and an optional
//! flush-on-write JSONL sink.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use infoflow_core::trace::{EventKind, Mode, Payload, TraceEvent};

#[derive(Debug, thiserror::Error)]
pub enum SinkError {
    #[error("trace sink is closed")]
    Closed,
    #[error("event seq {got} does not follow {last}")]
    NonIncreasingSeq { last: u64, got: u64 },
    #[error("trace io: {0}")]
    Io(#[from] io::Error),
    #[error("trace encoding: {0}")]
    Encode(#[from] serde_json::Error),
}

/// Appends events to a JSONL file, one object per line, flushing each one.
pub struct JsonlSink {
    path: PathBuf,
    file: Option<File>,
    last_seq: Option<u64>,
}

impl JsonlSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, SinkError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = File::create(&path)?;
        Ok(Self { path, file: Some(file), last_seq: None })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&mut self, event: &TraceEvent) -> Result<(), SinkError> {
        let file = self.file.as_mut().ok_or(SinkError::Closed)?;
        if let Some(last) = self.last_seq {
            if event.seq <= last {
                return Err(SinkError::NonIncreasingSeq { last, got: event.seq });
            }
        }
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.flush()?;
        self.last_seq = Some(event.seq);
        Ok(())
    }

    pub fn close(&mut self) -> Result<(), SinkError> {
        if let Some(f) = self.file.take() {
            f.sync_all()?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: String, line: usize, source: serde_json::Error },
    #[error("{path}:{line}: seq {seq} is not increasing")]
    Sequence { path: String, line: usize, seq: u64 },
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceEvent>, TraceReadError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| TraceReadError::Io { path: shown.clone(), source })?;
    let mut events: Vec<TraceEvent> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TraceReadError::Io { path: shown.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let e: TraceEvent = serde_json::from_str(&line)
            .map_err(|source| TraceReadError::Parse { path: shown.clone(), line: i + 1, source })?;
        if events.last().is_some_and(|l| e.seq <= l.seq) {
            return Err(TraceReadError::Sequence { path: shown, line: i + 1, seq: e.seq });
        }
        events.push(e);
    }
    Ok(events)
}

/// Serializes events exactly as the sink writes them.
pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace events always serialize"));
        out.push('\n');
    }
    out
}

struct TracerInner {
    session: String,
    mode: Mode,
    next_seq: u64,
    events: Vec<TraceEvent>,
    sink: Option<JsonlSink>,
    clock: Option<Instant>,
    failure: Option<String>,
}

/// Shared, thread-safe event recorder for one session.
///
/// Sequence numbers start at 1. Wall-clock offsets are only attached when the
/// tracer is created with [`Tracer::live`]; scripted traces carry logical
/// sequence numbers alone so that replays compare byte for byte. A sink
/// failure is kept and reported by [`Tracer::failure`]; the runner turns it
/// into a session error.
#[derive(Clone)]
pub struct Tracer {
    inner: Arc<Mutex<TracerInner>>,
}

impl Tracer {
    pub fn new(session: impl Into<String>, mode: Mode) -> Self {
        Self {
            inner: Arc::new(Mutex::new(TracerInner {
                session: session.into(),
                mode,
                next_seq: 1,
                events: Vec::new(),
                sink: None,
                clock: None,
                failure: None,
            })),
        }
    }

    pub fn with_sink(self, sink: JsonlSink) -> Self {
        self.lock().sink = Some(sink);
        self
    }

    pub fn live(self) -> Self {
        self.lock().clock = Some(Instant::now());
        self
    }

    fn lock(&self) -> MutexGuard<'_, TracerInner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn emit(&self, kind: EventKind, payload: Payload, tokens: u64) -> u64 {
        let mut g = self.lock();
        let seq = g.next_seq;
        g.next_seq += 1;
        let event = TraceEvent {
            seq,
            session: g.session.clone(),
            mode: g.mode,
            kind,
            payload,
            tokens,
            wall_ms: g.clock.map(|c| c.elapsed().as_millis() as u64),
        };
        if let Some(sink) = g.sink.as_mut() {
            if let Err(e) = sink.record(&event) {
                g.failure.get_or_insert_with(|| e.to_string());
            }
        }
        g.events.push(event);
        seq
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.lock().events.clone()
    }

    pub fn failure(&self) -> Option<String> {
        self.lock().failure.clone()
    }

    pub fn close(&self) -> Result<(), SinkError> {
        match self.lock().sink.as_mut() {
            Some(s) => s.close(),
            None => Ok(()),
        }
    }
}
