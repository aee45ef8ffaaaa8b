//! Append-only event log: one JSON record per line, one file per study at
//! `<data_dir>/<study_id>/events.jsonl`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use vu_core::events::{EventError, EventPayload, EventRecord, StudySnapshot};

pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: corrupted record: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: {source}")]
    Invalid { path: PathBuf, line: usize, source: EventError },
    #[error("event rejected: {0}")]
    Rejected(#[from] EventError),
    #[error("study id `{0}` must be non-empty ASCII letters, digits, `-` or `_`")]
    InvalidStudyId(String),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io { path: path.to_path_buf(), source }
    }
}

pub fn valid_study_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn study_log_path(data_dir: &Path, study_id: &str) -> Result<PathBuf, StoreError> {
    if !valid_study_id(study_id) {
        return Err(StoreError::InvalidStudyId(study_id.into()));
    }
    Ok(data_dir.join(study_id).join(LOG_FILE))
}

/// Study ids with a log under `data_dir`, sorted.
pub fn discover(data_dir: &Path) -> Result<Vec<String>, StoreError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(data_dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(StoreError::io(data_dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| StoreError::io(data_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if valid_study_id(&name) && entry.path().join(LOG_FILE).is_file() {
            out.push(name);
        }
    }
    out.sort();
    Ok(out)
}

struct Parsed {
    events: Vec<EventRecord>,
    /// Byte offset and line number of an unterminated, unparsable last line.
    torn: Option<(u64, usize)>,
    /// The last line parsed but lacks its newline.
    unterminated: bool,
}

fn parse(path: &Path, text: &str) -> Result<Parsed, StoreError> {
    let mut events = Vec::new();
    let mut offset = 0u64;
    let chunks: Vec<&str> = text.split_inclusive('\n').collect();
    let mut torn = None;
    for (i, chunk) in chunks.iter().enumerate() {
        let line = chunk.trim_end_matches(['\n', '\r']);
        let terminated = chunk.ends_with('\n');
        if !line.trim().is_empty() {
            match serde_json::from_str::<EventRecord>(line) {
                Ok(e) => events.push(e),
                Err(_) if !terminated && i + 1 == chunks.len() => torn = Some((offset, i + 1)),
                Err(e) => {
                    return Err(StoreError::Corrupt { path: path.into(), line: i + 1, message: e.to_string() })
                }
            }
        }
        offset += chunk.len() as u64;
    }
    let unterminated = torn.is_none() && chunks.last().is_some_and(|c| !c.ends_with('\n'));
    Ok(Parsed { events, torn, unterminated })
}

fn fold(path: &Path, events: &[EventRecord]) -> Result<StudySnapshot, StoreError> {
    let mut snap = StudySnapshot::new();
    for (i, e) in events.iter().enumerate() {
        // event ids are 1-based and contiguous, so they double as record numbers
        snap.apply(e).map_err(|source| StoreError::Invalid { path: path.into(), line: i + 1, source })?;
    }
    Ok(snap)
}

fn torn_warning(path: &Path, line: usize) -> String {
    format!("{}:{line}: ignoring torn final record", path.display())
}

/// Reads a log without modifying it. A torn final line is skipped with a
/// warning.
pub fn read_log(path: &Path) -> Result<(Vec<EventRecord>, Vec<String>), StoreError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    let parsed = parse(path, &text)?;
    let warnings = parsed.torn.map(|(_, line)| torn_warning(path, line)).into_iter().collect();
    Ok((parsed.events, warnings))
}

/// Snapshot of a log file, read-only.
pub fn load_snapshot(path: &Path) -> Result<(StudySnapshot, Vec<String>), StoreError> {
    let (events, warnings) = read_log(path)?;
    Ok((fold(path, &events)?, warnings))
}

/// A study's log with its folded snapshot. Writes are fsynced before
/// `append` returns.
pub struct EventLog {
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<EventRecord>,
    snapshot: StudySnapshot,
}

impl EventLog {
    pub fn memory() -> Self {
        Self { path: None, file: None, events: Vec::new(), snapshot: StudySnapshot::new() }
    }

    /// Opens (creating if needed) a log for appending. A torn final line is
    /// truncated away and reported as a warning.
    pub fn open(path: &Path) -> Result<(Self, Vec<String>), StoreError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| StoreError::io(path, e))?;
        let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
        let parsed = parse(path, &text)?;
        let snapshot = fold(path, &parsed.events)?;
        let mut warnings = Vec::new();
        if let Some((offset, line)) = parsed.torn {
            file.set_len(offset).map_err(|e| StoreError::io(path, e))?;
            file.sync_all().map_err(|e| StoreError::io(path, e))?;
            warnings.push(torn_warning(path, line));
        } else if parsed.unterminated {
            file.write_all(b"\n").map_err(|e| StoreError::io(path, e))?;
            file.sync_data().map_err(|e| StoreError::io(path, e))?;
        }
        Ok((Self { path: Some(path.into()), file: Some(file), events: parsed.events, snapshot }, warnings))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn snapshot(&self) -> &StudySnapshot {
        &self.snapshot
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Appends `payload` as the next event.
    pub fn append(&mut self, payload: EventPayload, recorded_at: u64) -> Result<u64, StoreError> {
        let record = EventRecord { event_id: self.snapshot.next_event_id(), recorded_at, payload };
        self.append_record(record)
    }

    /// Appends a fully formed record; its id must be the next in sequence.
    pub fn append_record(&mut self, record: EventRecord) -> Result<u64, StoreError> {
        let line = serde_json::to_string(&record).expect("events serialize");
        let before = self.snapshot.clone();
        self.snapshot.apply(&record)?;
        if let (Some(file), Some(path)) = (self.file.as_mut(), self.path.as_ref()) {
            let written = file
                .write_all(format!("{line}\n").as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| StoreError::io(path, e));
            if let Err(e) = written {
                self.snapshot = before;
                return Err(e);
            }
        }
        let id = record.event_id;
        self.events.push(record);
        Ok(id)
    }
}
