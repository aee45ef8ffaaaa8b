//! Study operations behind the HTTP service: one event log per study,
//! participants addressed by their session token.
//!
//! Mutations hold the study's lock for the whole validate-append step, so
//! calls for one participant (indeed one study) never interleave. Reports
//! are computed from a cloned snapshot outside the lock.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use vu_core::design::{validate_study, PhaseSchedule, StimulusManifest, StudyDefinition, ValidationReport};
use vu_core::events::{EventError, EventPayload, Registration, StudySnapshot};
use vu_core::model::{
    AreaId, FamiliarityLevel, Guess, GroupView, ParticipantGroup, ParticipantId, ParticipantRecord, ResidenceBucket,
    SequenceId, SequenceResponse,
};
use vu_core::semantic::SemanticLexicon;
use vu_core::session::{presentation_order, LoopAdvisory, Phase, SessionError, SessionState};

use crate::formats::{load_lexicon, starter_lexicon};
use crate::report::{build_report, ReportDocument, ReportError, ReportKind, ReportOptions};
use crate::store::{discover, study_log_path, valid_study_id, EventLog, StoreError};

/// Milliseconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

/// Wall clock, unless `SOURCE_DATE_EPOCH` (seconds) pins every timestamp
/// for reproducible output.
pub fn system_clock() -> Clock {
    if let Some(secs) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse::<u64>().ok()) {
        return Arc::new(move || secs * 1000);
    }
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("unknown study `{0}`")]
    UnknownStudy(String),
    #[error("unknown session token")]
    UnknownToken,
    #[error("unknown sequence `{0}`")]
    UnknownSequence(String),
    #[error("study `{0}` already exists")]
    StudyExists(String),
    #[error("study definition failed validation")]
    InvalidStudy(ValidationReport),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for PlatformError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Rejected(e) => PlatformError::Event(e),
            StoreError::InvalidStudyId(id) => PlatformError::BadRequest(format!("invalid study id `{id}`")),
            other => PlatformError::Store(other),
        }
    }
}

impl PlatformError {
    pub fn code(&self) -> &'static str {
        match self {
            PlatformError::UnknownStudy(_) => "unknown_study",
            PlatformError::UnknownToken => "unknown_token",
            PlatformError::UnknownSequence(_) => "unknown_sequence",
            PlatformError::StudyExists(_) => "study_exists",
            PlatformError::InvalidStudy(_) => "invalid_study",
            PlatformError::BadRequest(_) => "invalid_request",
            PlatformError::Event(e) => e.code(),
            PlatformError::Report(e) => e.code(),
            PlatformError::Store(_) => "storage_error",
        }
    }

    /// HTTP status for the error.
    pub fn status(&self) -> u16 {
        match self {
            PlatformError::UnknownStudy(_) | PlatformError::UnknownToken | PlatformError::UnknownSequence(_) => 404,
            PlatformError::StudyExists(_) => 409,
            PlatformError::InvalidStudy(_) => 422,
            PlatformError::BadRequest(_) | PlatformError::Report(_) => 400,
            PlatformError::Store(_) => 500,
            PlatformError::Event(e) => match e {
                EventError::UnknownArea(_)
                | EventError::UnknownSequence(_)
                | EventError::InvalidOrder
                | EventError::Session(
                    SessionError::IncompleteProfile(_)
                    | SessionError::UnknownAreas(_)
                    | SessionError::UnknownSequence(_),
                ) => 422,
                EventError::NotCreated | EventError::UnknownParticipant(_) | EventError::NoSession(_) => 404,
                _ => 409,
            },
        }
    }

    /// Structured context for the error body.
    pub fn details(&self) -> Option<Value> {
        match self {
            PlatformError::InvalidStudy(r) => serde_json::to_value(r).ok(),
            PlatformError::Event(EventError::Session(e)) => match e {
                SessionError::WrongPhase { actual } | SessionError::PhaseAlreadyPassed { actual } => {
                    Some(json!({ "phase": actual }))
                }
                SessionError::IncompleteProfile(a) => Some(json!({ "missing_areas": a })),
                SessionError::UnknownAreas(a) => Some(json!({ "unknown_areas": a })),
                SessionError::FamiliarizationIncomplete(r) => Some(json!({
                    "remaining_loops": r.iter().map(|(s, n)| (s.to_string(), *n)).collect::<BTreeMap<_, _>>()
                })),
                SessionError::ResponsesMissing(m) => Some(json!({ "missing_responses": m })),
                SessionError::ProfileNotSubmitted => Some(json!({ "phase": Phase::PreViewing })),
                _ => None,
            },
            PlatformError::Event(EventError::UnknownArea(a)) => Some(json!({ "area_id": a })),
            PlatformError::Event(EventError::UnknownSequence(s)) => Some(json!({ "sequence_id": s })),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCreated {
    pub study_id: String,
    pub findings: ValidationReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegisterRequest {
    pub participant_id: Option<String>,
    pub group: Option<ParticipantGroup>,
    pub age: Option<u32>,
    pub residence: Option<ResidenceBucket>,
    pub profession: Option<String>,
    pub ai_familiarity: Option<String>,
    /// Optional; otherwise collected in the pre-viewing phase.
    pub familiarity_profile: BTreeMap<AreaId, FamiliarityLevel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registered {
    pub participant_id: ParticipantId,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamiliarityRequest {
    pub profile: BTreeMap<AreaId, FamiliarityLevel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopRequest {
    pub sequence_id: SequenceId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseRequest {
    pub sequence_id: SequenceId,
    pub guessed_area_id: Option<AreaId>,
    pub q2_text: String,
    pub q3_text: String,
    pub q4_text: String,
    pub q5_text: String,
    pub loops_viewed: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Submitted,
    Amended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advisory {
    pub sequence_id: SequenceId,
    pub loops_viewed: u32,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub study_id: String,
    pub participant_id: ParticipantId,
    pub started: bool,
    pub phase: Phase,
    pub phase_started_at: Option<u64>,
    /// Recommended phase lengths; recorded, not enforced.
    pub schedule: PhaseSchedule,
    pub presentation_order: Vec<SequenceId>,
    pub current_sequence: Option<SequenceId>,
    pub familiarization_target: u32,
    pub familiarization_views: BTreeMap<SequenceId, u32>,
    pub familiarization_remaining: BTreeMap<SequenceId, u32>,
    pub in_depth_target: u32,
    pub in_depth_loops: BTreeMap<SequenceId, u32>,
    pub missing_responses: Vec<SequenceId>,
    pub responses: Vec<SequenceResponse>,
    pub advisories: Vec<Advisory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseReceipt {
    pub status: ResponseStatus,
    pub advisory: Option<Advisory>,
    pub completed: bool,
    pub session: SessionView,
}

struct StudyHandle {
    log: EventLog,
    lexicon: SemanticLexicon,
}

/// Registry of open studies.
pub struct Platform {
    data_dir: Option<PathBuf>,
    studies: RwLock<BTreeMap<String, Arc<Mutex<StudyHandle>>>>,
    tokens: RwLock<BTreeMap<String, (String, ParticipantId)>>,
    clock: Clock,
}

fn study_lexicon(dir: Option<&Path>) -> SemanticLexicon {
    let path = dir.map(|d| d.join("lexicon.tsv"));
    match path.filter(|p| p.is_file()) {
        Some(p) => match load_lexicon(&p) {
            Ok(l) => l,
            Err(e) => {
                log::warn!("{e}; using the starter lexicon");
                starter_lexicon()
            }
        },
        None => starter_lexicon(),
    }
}

impl Platform {
    /// In-memory platform; nothing is persisted.
    pub fn in_memory(clock: Clock) -> Self {
        Self { data_dir: None, studies: RwLock::default(), tokens: RwLock::default(), clock }
    }

    /// Opens every study log under `data_dir`.
    pub fn open(data_dir: &Path, clock: Clock) -> Result<Self, PlatformError> {
        let p = Self { data_dir: Some(data_dir.to_path_buf()), ..Self::in_memory(clock) };
        for id in discover(data_dir)? {
            let path = study_log_path(data_dir, &id)?;
            let (log, warnings) = EventLog::open(&path)?;
            for w in warnings {
                log::warn!("{w}");
            }
            p.index_tokens(&id, log.snapshot());
            let lexicon = study_lexicon(path.parent());
            p.studies.write().expect("lock").insert(id, Arc::new(Mutex::new(StudyHandle { log, lexicon })));
        }
        Ok(p)
    }

    fn now(&self) -> u64 {
        (self.clock)()
    }

    fn index_tokens(&self, study: &str, snap: &StudySnapshot) {
        let mut t = self.tokens.write().expect("lock");
        for (token, pid) in &snap.tokens {
            t.insert(token.clone(), (study.to_string(), pid.clone()));
        }
    }

    fn study(&self, id: &str) -> Result<Arc<Mutex<StudyHandle>>, PlatformError> {
        self.studies.read().expect("lock").get(id).cloned().ok_or_else(|| PlatformError::UnknownStudy(id.into()))
    }

    fn by_token(&self, token: &str) -> Result<(String, ParticipantId, Arc<Mutex<StudyHandle>>), PlatformError> {
        let (study, pid) = self.tokens.read().expect("lock").get(token).cloned().ok_or(PlatformError::UnknownToken)?;
        let h = self.study(&study)?;
        Ok((study, pid, h))
    }

    pub fn study_ids(&self) -> Vec<String> {
        self.studies.read().expect("lock").keys().cloned().collect()
    }

    /// Copy of a study's current state.
    pub fn snapshot(&self, study_id: &str) -> Result<StudySnapshot, PlatformError> {
        Ok(self.study(study_id)?.lock().expect("lock").log.snapshot().clone())
    }

    /// Creates a study. With `strict`, stimulus manifest findings reject the
    /// study instead of being reported as warnings.
    pub fn create_study(&self, def: StudyDefinition, strict: bool) -> Result<StudyCreated, PlatformError> {
        if !valid_study_id(&def.study_id) {
            return Err(PlatformError::BadRequest(format!("invalid study id `{}`", def.study_id)));
        }
        let findings = validate_study(&def, strict);
        if !findings.passed() {
            return Err(PlatformError::InvalidStudy(findings));
        }
        let mut studies = self.studies.write().expect("lock");
        if studies.contains_key(&def.study_id) {
            return Err(PlatformError::StudyExists(def.study_id.clone()));
        }
        let (mut log, dir) = match &self.data_dir {
            Some(d) => {
                let path = study_log_path(d, &def.study_id)?;
                if path.exists() {
                    return Err(PlatformError::StudyExists(def.study_id.clone()));
                }
                (EventLog::open(&path)?.0, path.parent().map(Path::to_path_buf))
            }
            None => (EventLog::memory(), None),
        };
        let id = def.study_id.clone();
        log.append(EventPayload::StudyCreated(def), self.now())?;
        let lexicon = study_lexicon(dir.as_deref());
        studies.insert(id.clone(), Arc::new(Mutex::new(StudyHandle { log, lexicon })));
        Ok(StudyCreated { study_id: id, findings })
    }

    pub fn register(&self, study_id: &str, req: RegisterRequest) -> Result<Registered, PlatformError> {
        let h = self.study(study_id)?;
        let mut h = h.lock().expect("lock");
        let group = req.group.ok_or_else(|| PlatformError::BadRequest("group is required".into()))?;
        let snap = h.log.snapshot();
        let pid = match req.participant_id.filter(|s| !s.trim().is_empty()) {
            Some(p) => ParticipantId::new(p.trim()),
            None => (snap.participants.len() + 1..)
                .map(|n| ParticipantId::new(format!("P{n}")))
                .find(|p| snap.participant(p).is_none())
                .expect("unbounded range"),
        };
        let token = uuid::Uuid::new_v4().simple().to_string();
        let mut participant = ParticipantRecord::new(pid.clone(), group);
        participant.age = req.age;
        participant.residence = req.residence;
        participant.profession = req.profession;
        participant.ai_familiarity = req.ai_familiarity;
        participant.familiarity_profile = req.familiarity_profile;
        let payload = EventPayload::ParticipantRegistered(Registration { participant, token: Some(token.clone()) });
        let now = self.now();
        h.log.append(payload, now)?;
        self.tokens.write().expect("lock").insert(token.clone(), (study_id.to_string(), pid.clone()));
        Ok(Registered { participant_id: pid, token })
    }

    fn ensure_session(&self, h: &mut StudyHandle, pid: &ParticipantId) -> Result<(), PlatformError> {
        if h.log.snapshot().sessions.contains_key(pid) {
            return Ok(());
        }
        let snap = h.log.snapshot();
        let study = snap.study.as_ref().ok_or(EventError::NotCreated)?;
        let order = presentation_order(study.presentation_seed, pid, &study.sequence_ids());
        let now = self.now();
        h.log.append(EventPayload::SessionStarted { participant_id: pid.clone(), presentation_order: order }, now)?;
        Ok(())
    }

    /// Starts the participant's session; starting again is a no-op.
    pub fn start_session(&self, token: &str) -> Result<SessionView, PlatformError> {
        let (study, pid, h) = self.by_token(token)?;
        let mut h = h.lock().expect("lock");
        self.ensure_session(&mut h, &pid)?;
        Ok(session_view(&study, &pid, h.log.snapshot()))
    }

    pub fn submit_familiarity(&self, token: &str, req: FamiliarityRequest) -> Result<SessionView, PlatformError> {
        self.mutate(token, |pid| EventPayload::FamiliaritySubmitted { participant_id: pid, profile: req.profile })
    }

    pub fn record_loop(&self, token: &str, req: LoopRequest) -> Result<SessionView, PlatformError> {
        self.mutate(token, |pid| EventPayload::LoopRecorded { participant_id: pid, sequence_id: req.sequence_id })
    }

    pub fn advance(&self, token: &str) -> Result<SessionView, PlatformError> {
        let (study, pid, h) = self.by_token(token)?;
        let mut h = h.lock().expect("lock");
        self.ensure_session(&mut h, &pid)?;
        let snap = h.log.snapshot();
        let rules = snap.rules().ok_or(EventError::NotCreated)?;
        let mut s = snap.sessions[&pid].clone();
        let to = s.advance(rules, 0).map_err(EventError::from)?;
        let now = self.now();
        h.log.append(EventPayload::PhaseAdvanced { participant_id: pid.clone(), to }, now)?;
        Ok(session_view(&study, &pid, h.log.snapshot()))
    }

    fn mutate(
        &self,
        token: &str,
        payload: impl FnOnce(ParticipantId) -> EventPayload,
    ) -> Result<SessionView, PlatformError> {
        let (study, pid, h) = self.by_token(token)?;
        let mut h = h.lock().expect("lock");
        self.ensure_session(&mut h, &pid)?;
        let now = self.now();
        h.log.append(payload(pid.clone()), now)?;
        Ok(session_view(&study, &pid, h.log.snapshot()))
    }

    /// Submits a final answer for a sequence, or amends an earlier one.
    pub fn submit_response(&self, token: &str, req: ResponseRequest) -> Result<ResponseReceipt, PlatformError> {
        let (study, pid, h) = self.by_token(token)?;
        let mut h = h.lock().expect("lock");
        self.ensure_session(&mut h, &pid)?;
        let now = self.now();
        let snap = h.log.snapshot();
        let rules = snap.rules().ok_or(EventError::NotCreated)?;
        let advisory = snap.sessions[&pid].loop_advisory(rules, &req.sequence_id, req.loops_viewed);
        let amend = snap.response(&pid, &req.sequence_id).is_some();
        let mut r = SequenceResponse::new(pid.clone(), req.sequence_id.clone(), Guess::from(req.guessed_area_id));
        r.q2_text = req.q2_text;
        r.q3_text = req.q3_text;
        r.q4_text = req.q4_text;
        r.q5_text = req.q5_text;
        r.loops_viewed = req.loops_viewed;
        r.submitted_at = now;
        let payload = if amend { EventPayload::ResponseAmended(r) } else { EventPayload::ResponseSubmitted(r) };
        h.log.append(payload, now)?;
        let session = session_view(&study, &pid, h.log.snapshot());
        Ok(ResponseReceipt {
            status: if amend { ResponseStatus::Amended } else { ResponseStatus::Submitted },
            advisory: advisory.map(|a| advice(&req.sequence_id, a)),
            completed: session.phase == Phase::Complete,
            session,
        })
    }

    pub fn get_session(&self, token: &str) -> Result<SessionView, PlatformError> {
        let (study, pid, h) = self.by_token(token)?;
        let h = h.lock().expect("lock");
        Ok(session_view(&study, &pid, h.log.snapshot()))
    }

    pub fn get_report(
        &self,
        study_id: &str,
        kind: ReportKind,
        group: GroupView,
        options: &ReportOptions,
    ) -> Result<ReportDocument, PlatformError> {
        let (snapshot, lexicon) = {
            let h = self.study(study_id)?;
            let h = h.lock().expect("lock");
            (h.log.snapshot().clone(), h.lexicon.clone())
        };
        Ok(build_report(&snapshot, &lexicon, kind, group, options)?)
    }

    pub fn get_stimulus(&self, study_id: &str, sequence_id: &str) -> Result<StimulusManifest, PlatformError> {
        let h = self.study(study_id)?;
        let h = h.lock().expect("lock");
        h.log
            .snapshot()
            .study
            .as_ref()
            .and_then(|s| s.stimulus(&SequenceId::new(sequence_id)).cloned())
            .ok_or_else(|| PlatformError::UnknownSequence(sequence_id.into()))
    }

    /// Safety checks over every session of a study.
    pub fn invariant_violations(&self, study_id: &str) -> Result<Vec<String>, PlatformError> {
        let snap = self.snapshot(study_id)?;
        let Some(rules) = snap.rules() else { return Ok(Vec::new()) };
        Ok(snap
            .sessions
            .iter()
            .flat_map(|(pid, s)| {
                let mut v: Vec<String> =
                    s.invariant_violations(rules).into_iter().map(|m| format!("{pid}: {m}")).collect();
                if s.phase == Phase::Complete && rules.sequences.iter().any(|q| snap.response(pid, q).is_none()) {
                    v.push(format!("{pid}: complete without a stored response for every sequence"));
                }
                v
            })
            .collect())
    }
}

fn advice(seq: &SequenceId, a: LoopAdvisory) -> Advisory {
    Advisory { sequence_id: seq.clone(), loops_viewed: a.loops_viewed, target: a.target }
}

fn session_view(study_id: &str, pid: &ParticipantId, snap: &StudySnapshot) -> SessionView {
    let rules = snap.rules().expect("participants exist only in created studies");
    let study = snap.study.as_ref().expect("created");
    let session = snap.sessions.get(pid);
    let unstarted;
    let s: &SessionState = match session {
        Some(s) => s,
        None => {
            unstarted = SessionState::start(pid.clone(), Vec::new(), 0);
            &unstarted
        }
    };
    let responses: Vec<SequenceResponse> =
        rules.sequences.iter().filter_map(|q| snap.response(pid, q).cloned()).collect();
    let advisories = responses
        .iter()
        .filter_map(|r| s.loop_advisory(rules, &r.sequence_id, r.loops_viewed).map(|a| advice(&r.sequence_id, a)))
        .collect();
    SessionView {
        study_id: study_id.to_string(),
        participant_id: pid.clone(),
        started: session.is_some(),
        phase: s.phase,
        phase_started_at: session.map(|s| s.phase_started_at),
        schedule: study.schedule,
        presentation_order: s.presentation_order.clone(),
        current_sequence: s.current_sequence.clone(),
        familiarization_target: rules.familiarization_loops,
        familiarization_views: s.familiarization_views.clone(),
        familiarization_remaining: s.familiarization_remaining(rules).into_iter().collect(),
        in_depth_target: rules.in_depth_loops,
        in_depth_loops: s.in_depth_loops.clone(),
        missing_responses: s.missing_responses(rules),
        responses,
        advisories,
    }
}
