//! Bulk import and export of responses and participants, as CSV with a
//! header row or as one JSON object per line.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vu_core::events::{EventPayload, EventRecord, Registration, StudySnapshot};
use vu_core::model::{
    AreaId, FamiliarityLevel, Guess, ParticipantGroup, ParticipantRecord, ResidenceBucket, SequenceResponse,
};

use crate::store::{EventLog, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportFormat {
    Csv,
    Jsonl,
}

impl ImportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" | "csv-like" | "delimited" | "delimited-table" => Some(ImportFormat::Csv),
            "jsonl" | "ndjson" | "json-lines" | "record-per-line" => Some(ImportFormat::Jsonl),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        Self::parse(&path.extension()?.to_string_lossy())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    Io(#[from] std::io::Error),
    #[error("unreadable header: {0}")]
    Header(csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    /// Participants registered implicitly from response rows.
    pub registered: usize,
}

impl ImportReport {
    fn reject(&mut self, row: usize, code: &str, reason: impl Into<String>) {
        self.rejected.push(Rejection { row, code: code.into(), reason: reason.into() });
    }
}

/// One response in interchange form. Column order is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub participant_id: String,
    #[serde(default)]
    pub group: String,
    pub sequence_id: String,
    #[serde(default)]
    pub guessed_area_id: String,
    #[serde(default)]
    pub q2: String,
    #[serde(default)]
    pub q3: String,
    #[serde(default)]
    pub q4: String,
    #[serde(default)]
    pub q5: String,
    #[serde(default)]
    pub loops_viewed: u32,
}

const RESPONSE_COLUMNS: [&str; 2] = ["participant_id", "sequence_id"];

fn rows<T: serde::de::DeserializeOwned>(
    input: impl Read,
    format: ImportFormat,
    required: &[&'static str],
) -> Result<Vec<(usize, Result<T, String>)>, IngestError> {
    let mut out = Vec::new();
    match format {
        ImportFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(false).trim(csv::Trim::Headers).from_reader(input);
            let headers = rdr.headers().map_err(IngestError::Header)?.clone();
            if headers.is_empty() {
                return Ok(out);
            }
            for col in required {
                if !headers.iter().any(|h| h == *col) {
                    return Err(IngestError::MissingColumn(col));
                }
            }
            for (i, rec) in rdr.records().enumerate() {
                let parsed = rec.map_err(|e| e.to_string()).and_then(|r| r.deserialize(Some(&headers)).map_err(|e| e.to_string()));
                out.push((i + 1, parsed));
            }
        }
        ImportFormat::Jsonl => {
            let reader = std::io::BufReader::new(input);
            let mut row = 0;
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                row += 1;
                out.push((row, serde_json::from_str(&line).map_err(|e| e.to_string())));
            }
        }
    }
    Ok(out)
}

fn to_response(row: &ResponseRow, now: u64) -> SequenceResponse {
    let guess = match row.guessed_area_id.trim() {
        "" => Guess::Blank,
        a => Guess::Area(AreaId::new(a)),
    };
    let mut r = SequenceResponse::new(row.participant_id.trim(), row.sequence_id.trim(), guess);
    r.q2_text = row.q2.clone();
    r.q3_text = row.q3.clone();
    r.q4_text = row.q4.clone();
    r.q5_text = row.q5.clone();
    r.loops_viewed = row.loops_viewed;
    r.submitted_at = now;
    r
}

/// Applies both events to a scratch copy first so a row is all or nothing.
fn append_atomic(log: &mut EventLog, payloads: Vec<EventPayload>, now: u64) -> Result<(), StoreError> {
    let mut scratch: StudySnapshot = log.snapshot().clone();
    for p in &payloads {
        let e = EventRecord { event_id: scratch.next_event_id(), recorded_at: now, payload: p.clone() };
        scratch.apply(&e)?;
    }
    for p in payloads {
        log.append(p, now)?;
    }
    Ok(())
}

/// Imports responses. Unknown participants are registered from the row's
/// `group` column; each row is accepted or rejected as a whole.
pub fn import_responses(
    log: &mut EventLog,
    input: impl Read,
    format: ImportFormat,
    now: u64,
) -> Result<ImportReport, IngestError> {
    let mut report = ImportReport::default();
    for (row, parsed) in rows::<ResponseRow>(input, format, &RESPONSE_COLUMNS)? {
        let r = match parsed {
            Ok(r) => r,
            Err(e) => {
                report.reject(row, "malformed_row", e);
                continue;
            }
        };
        let response = to_response(&r, now);
        let pid = response.participant_id.clone();
        let mut payloads = Vec::new();
        match log.snapshot().participant(&pid) {
            Some(p) => {
                if !r.group.trim().is_empty() && ParticipantGroup::parse(&r.group) != Some(p.group) {
                    report.reject(row, "group_mismatch", format!("participant `{pid}` is registered as {}", p.group.as_str()));
                    continue;
                }
            }
            None => match ParticipantGroup::parse(&r.group) {
                Some(g) => payloads.push(EventPayload::ParticipantRegistered(Registration {
                    participant: ParticipantRecord::new(pid.clone(), g),
                    token: None,
                })),
                None => {
                    report.reject(row, "unknown_participant", format!("unknown participant `{pid}` and no valid group to register it"));
                    continue;
                }
            },
        }
        let registers = !payloads.is_empty();
        payloads.push(EventPayload::ResponseSubmitted(response));
        match append_atomic(log, payloads, now) {
            Ok(()) => {
                report.accepted += 1;
                report.registered += usize::from(registers);
            }
            Err(StoreError::Rejected(e)) => report.reject(row, e.code(), e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}

pub fn response_rows(snapshot: &StudySnapshot) -> Vec<ResponseRow> {
    snapshot
        .responses_in_order()
        .into_iter()
        .map(|r| ResponseRow {
            group: snapshot.participant(&r.participant_id).map(|p| p.group.as_str().to_string()).unwrap_or_default(),
            participant_id: r.participant_id.to_string(),
            sequence_id: r.sequence_id.to_string(),
            guessed_area_id: r.guessed_area_id.area().map(|a| a.to_string()).unwrap_or_default(),
            q2: r.q2_text,
            q3: r.q3_text,
            q4: r.q4_text,
            q5: r.q5_text,
            loops_viewed: r.loops_viewed,
        })
        .collect()
}

pub fn write_rows<T: Serialize>(rows: &[T], format: ImportFormat, mut out: impl Write) -> std::io::Result<()> {
    match format {
        ImportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(std::io::Error::other)?;
            }
            w.flush()
        }
        ImportFormat::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

/// Exports final responses in registration, then sequence, order.
pub fn export_responses(snapshot: &StudySnapshot, format: ImportFormat, out: impl Write) -> std::io::Result<()> {
    write_rows(&response_rows(snapshot), format, out)
}

const FAMILIARITY_PREFIX: &str = "familiarity.";

/// Builds a participant from named CSV fields. Familiarity levels live in
/// `familiarity.<area_id>` columns.
fn participant_from_fields(f: &BTreeMap<String, String>) -> Result<ParticipantRecord, (String, String)> {
    let bad = |code: &str, msg: String| (code.to_string(), msg);
    let get = |k: &str| f.get(k).map(|v| v.trim()).filter(|v| !v.is_empty());
    let pid = get("participant_id").ok_or_else(|| bad("malformed_row", "participant_id is empty".into()))?;
    let g = get("group").unwrap_or("");
    let group = ParticipantGroup::parse(g).ok_or_else(|| bad("invalid_group", format!("unknown group `{g}`")))?;
    let mut p = ParticipantRecord::new(pid, group);
    p.age = match get("age") {
        None => None,
        Some(a) => Some(a.parse().map_err(|_| bad("malformed_row", format!("age `{a}` is not a whole number")))?),
    };
    p.residence = match get("residence") {
        None => None,
        Some(s) => Some(ResidenceBucket::parse(s).ok_or_else(|| bad("invalid_residence", format!("unknown residence bucket `{s}`")))?),
    };
    p.profession = get("profession").map(String::from);
    p.ai_familiarity = get("ai_familiarity").map(String::from);
    for (k, v) in f {
        if let Some(area) = k.strip_prefix(FAMILIARITY_PREFIX) {
            if v.trim().is_empty() {
                continue;
            }
            let level = FamiliarityLevel::parse(v).ok_or_else(|| bad("invalid_familiarity", format!("unknown familiarity level `{v}`")))?;
            p.familiarity_profile.insert(AreaId::new(area), level);
        }
    }
    Ok(p)
}

/// Imports participant records (demographics and familiarity profiles).
pub fn import_participants(
    log: &mut EventLog,
    input: impl Read,
    format: ImportFormat,
    now: u64,
) -> Result<ImportReport, IngestError> {
    let mut report = ImportReport::default();
    let parsed: Vec<(usize, Result<ParticipantRecord, (String, String)>)> = match format {
        ImportFormat::Csv => rows::<BTreeMap<String, String>>(input, format, &["participant_id", "group"])?
            .into_iter()
            .map(|(i, r)| (i, r.map_err(|e| ("malformed_row".into(), e)).and_then(|f| participant_from_fields(&f))))
            .collect(),
        ImportFormat::Jsonl => rows::<ParticipantRecord>(input, format, &[])?
            .into_iter()
            .map(|(i, r)| (i, r.map_err(|e| ("malformed_row".into(), e))))
            .collect(),
    };
    for (row, p) in parsed {
        match p {
            Err((code, reason)) => report.reject(row, &code, reason),
            Ok(participant) => {
                let payload = EventPayload::ParticipantRegistered(Registration { participant, token: None });
                match log.append(payload, now) {
                    Ok(_) => report.accepted += 1,
                    Err(StoreError::Rejected(e)) => report.reject(row, e.code(), e.to_string()),
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(report)
}

/// Writes participants; CSV gets one `familiarity.<area>` column per study
/// area.
pub fn export_participants(snapshot: &StudySnapshot, format: ImportFormat, mut out: impl Write) -> std::io::Result<()> {
    match format {
        ImportFormat::Jsonl => {
            for p in &snapshot.participants {
                serde_json::to_writer(&mut out, p)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
        ImportFormat::Csv => {
            let areas: Vec<AreaId> = snapshot.study.as_ref().map(|s| s.area_ids()).unwrap_or_default();
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<String> =
                ["participant_id", "group", "age", "residence", "profession", "ai_familiarity"].map(String::from).into();
            header.extend(areas.iter().map(|a| format!("{FAMILIARITY_PREFIX}{a}")));
            w.write_record(&header).map_err(std::io::Error::other)?;
            for p in &snapshot.participants {
                let mut rec = vec![
                    p.participant_id.to_string(),
                    p.group.as_str().to_string(),
                    p.age.map(|a| a.to_string()).unwrap_or_default(),
                    p.residence.map(|r| r.as_str().to_string()).unwrap_or_default(),
                    p.profession.clone().unwrap_or_default(),
                    p.ai_familiarity.clone().unwrap_or_default(),
                ];
                rec.extend(areas.iter().map(|a| p.familiarity_profile.get(a).map(|l| l.as_str().to_string()).unwrap_or_default()));
                w.write_record(&rec).map_err(std::io::Error::other)?;
            }
            w.flush()
        }
    }
}
