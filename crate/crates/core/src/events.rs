//! Append-only study events and the snapshot they fold into.
//!
//! `StudySnapshot::apply` validates an event completely before touching any
//! state, so a rejected event leaves the snapshot exactly as it was.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{validate_study, StudyDefinition};
use crate::model::{AreaId, FamiliarityLevel, ParticipantId, ParticipantRecord, SequenceId, SequenceResponse};
use crate::session::{check_profile, Phase, SessionError, SessionRules, SessionState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    #[serde(flatten)]
    pub participant: ParticipantRecord,
    /// Opaque session token handed to the participant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventPayload {
    StudyCreated(StudyDefinition),
    ParticipantRegistered(Registration),
    SessionStarted { participant_id: ParticipantId, presentation_order: Vec<SequenceId> },
    FamiliaritySubmitted { participant_id: ParticipantId, profile: BTreeMap<AreaId, FamiliarityLevel> },
    LoopRecorded { participant_id: ParticipantId, sequence_id: SequenceId },
    PhaseAdvanced { participant_id: ParticipantId, to: Phase },
    ResponseSubmitted(SequenceResponse),
    ResponseAmended(SequenceResponse),
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::StudyCreated(_) => "StudyCreated",
            EventPayload::ParticipantRegistered(_) => "ParticipantRegistered",
            EventPayload::SessionStarted { .. } => "SessionStarted",
            EventPayload::FamiliaritySubmitted { .. } => "FamiliaritySubmitted",
            EventPayload::LoopRecorded { .. } => "LoopRecorded",
            EventPayload::PhaseAdvanced { .. } => "PhaseAdvanced",
            EventPayload::ResponseSubmitted(_) => "ResponseSubmitted",
            EventPayload::ResponseAmended(_) => "ResponseAmended",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: u64,
    /// Milliseconds since the Unix epoch.
    pub recorded_at: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("study has not been created")]
    NotCreated,
    #[error("study already created")]
    AlreadyCreated,
    #[error("study definition is invalid: {0}")]
    InvalidStudy(String),
    #[error("event id {got} out of sequence (expected {expected})")]
    OutOfSequence { expected: u64, got: u64 },
    #[error("unknown participant `{0}`")]
    UnknownParticipant(ParticipantId),
    #[error("participant `{0}` already registered")]
    DuplicateParticipant(ParticipantId),
    #[error("session token already in use")]
    DuplicateToken,
    #[error("unknown sequence `{0}`")]
    UnknownSequence(SequenceId),
    #[error("guessed area `{0}` is not declared in the study")]
    UnknownArea(AreaId),
    #[error("response for `{0}`/`{1}` already exists")]
    DuplicateResponse(ParticipantId, SequenceId),
    #[error("no response for `{0}`/`{1}` to amend")]
    NothingToAmend(ParticipantId, SequenceId),
    #[error("participant `{0}` has no session")]
    NoSession(ParticipantId),
    #[error("participant `{0}` already has a session")]
    SessionExists(ParticipantId),
    #[error("presentation order is not a permutation of the study's sequences")]
    InvalidOrder,
    #[error("phase advanced to {got:?}, but the gate allows {allowed:?}")]
    PhaseMismatch { allowed: Phase, got: Phase },
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl EventError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            EventError::NotCreated => "study_not_created",
            EventError::AlreadyCreated => "study_exists",
            EventError::InvalidStudy(_) => "invalid_study",
            EventError::OutOfSequence { .. } => "event_out_of_sequence",
            EventError::UnknownParticipant(_) => "unknown_participant",
            EventError::DuplicateParticipant(_) => "duplicate_participant",
            EventError::DuplicateToken => "duplicate_token",
            EventError::UnknownSequence(_) => "unknown_sequence",
            EventError::UnknownArea(_) => "unknown_area",
            EventError::DuplicateResponse(..) => "duplicate_response",
            EventError::NothingToAmend(..) => "no_response",
            EventError::NoSession(_) => "no_session",
            EventError::SessionExists(_) => "session_exists",
            EventError::InvalidOrder => "invalid_order",
            EventError::PhaseMismatch { .. } => "gate_unmet",
            EventError::Session(e) => e.code(),
        }
    }
}

/// Current study state folded from its event log.
#[derive(Debug, Clone, Default)]
pub struct StudySnapshot {
    pub study: Option<StudyDefinition>,
    pub participants: Vec<ParticipantRecord>,
    index: BTreeMap<ParticipantId, usize>,
    pub tokens: BTreeMap<String, ParticipantId>,
    pub responses: BTreeMap<(ParticipantId, SequenceId), SequenceResponse>,
    pub sessions: BTreeMap<ParticipantId, SessionState>,
    pub last_event_id: u64,
    pub last_recorded_at: u64,
    rules: Option<SessionRules>,
}

/// Equality of content; timestamps are ignored.
impl PartialEq for StudySnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.study == other.study
            && self.participants == other.participants
            && self.tokens == other.tokens
            && self.last_event_id == other.last_event_id
            && self.responses.len() == other.responses.len()
            && self.responses.iter().zip(&other.responses).all(|((k1, a), (k2, b))| k1 == k2 && a.same_content(b))
            && self.sessions.len() == other.sessions.len()
            && self.sessions.iter().zip(&other.sessions).all(|((k1, a), (k2, b))| k1 == k2 && a.same_state(b))
    }
}

impl StudySnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds a whole log; stops at the first invalid event.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> Result<Self, (u64, EventError)> {
        let mut s = Self::new();
        for e in events {
            s.apply(e).map_err(|err| (e.event_id, err))?;
        }
        Ok(s)
    }

    pub fn rules(&self) -> Option<&SessionRules> {
        self.rules.as_ref()
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&ParticipantRecord> {
        self.index.get(id).map(|&i| &self.participants[i])
    }

    pub fn participant_by_token(&self, token: &str) -> Option<&ParticipantRecord> {
        self.tokens.get(token).and_then(|id| self.participant(id))
    }

    pub fn response(&self, pid: &ParticipantId, seq: &SequenceId) -> Option<&SequenceResponse> {
        self.responses.get(&(pid.clone(), seq.clone()))
    }

    /// Responses in participant registration order, then sequence order.
    pub fn responses_in_order(&self) -> Vec<SequenceResponse> {
        let Some(study) = &self.study else { return Vec::new() };
        let mut out = Vec::with_capacity(self.responses.len());
        for p in &self.participants {
            for seq in study.sequence_ids() {
                if let Some(r) = self.response(&p.participant_id, &seq) {
                    out.push(r.clone());
                }
            }
        }
        out
    }

    pub fn next_event_id(&self) -> u64 {
        self.last_event_id + 1
    }

    fn require_study(&self) -> Result<(&StudyDefinition, &SessionRules), EventError> {
        match (&self.study, &self.rules) {
            (Some(s), Some(r)) => Ok((s, r)),
            _ => Err(EventError::NotCreated),
        }
    }

    fn require_participant(&self, id: &ParticipantId) -> Result<&ParticipantRecord, EventError> {
        self.participant(id).ok_or_else(|| EventError::UnknownParticipant(id.clone()))
    }

    fn check_response(&self, r: &SequenceResponse) -> Result<(), EventError> {
        let (study, _) = self.require_study()?;
        self.require_participant(&r.participant_id)?;
        if study.stimulus(&r.sequence_id).is_none() {
            return Err(EventError::UnknownSequence(r.sequence_id.clone()));
        }
        if let Some(a) = r.guessed_area_id.area() {
            if study.area(a).is_none() {
                return Err(EventError::UnknownArea(a.clone()));
            }
        }
        Ok(())
    }

    /// Session after a response, or `None` when the participant was imported
    /// without a live session.
    fn session_after_response(&self, r: &SequenceResponse, at: u64) -> Result<Option<SessionState>, EventError> {
        let (_, rules) = self.require_study()?;
        match self.sessions.get(&r.participant_id) {
            None => Ok(None),
            Some(s) => {
                let mut next = s.clone();
                next.submit_response(rules, &r.sequence_id, r.loops_viewed, at)?;
                Ok(Some(next))
            }
        }
    }

    fn session_of(&self, pid: &ParticipantId) -> Result<&SessionState, EventError> {
        self.require_participant(pid)?;
        self.sessions.get(pid).ok_or_else(|| EventError::NoSession(pid.clone()))
    }

    /// Validates and applies one event. On error nothing changes.
    pub fn apply(&mut self, e: &EventRecord) -> Result<(), EventError> {
        if e.event_id != self.next_event_id() {
            return Err(EventError::OutOfSequence { expected: self.next_event_id(), got: e.event_id });
        }
        let at = e.recorded_at;
        match &e.payload {
            EventPayload::StudyCreated(def) => {
                if self.study.is_some() {
                    return Err(EventError::AlreadyCreated);
                }
                let report = validate_study(def, false);
                if let Some(f) = report.errors().next() {
                    return Err(EventError::InvalidStudy(alloc::format!("{}: {}", f.code, f.message)));
                }
                self.rules = Some(SessionRules::from_study(def));
                self.study = Some(def.clone());
            }
            EventPayload::ParticipantRegistered(reg) => {
                let (_, rules) = self.require_study()?;
                let p = &reg.participant;
                if self.index.contains_key(&p.participant_id) {
                    return Err(EventError::DuplicateParticipant(p.participant_id.clone()));
                }
                if !p.familiarity_profile.is_empty() {
                    check_profile(rules, &p.familiarity_profile)?;
                }
                if let Some(t) = &reg.token {
                    if self.tokens.contains_key(t) {
                        return Err(EventError::DuplicateToken);
                    }
                    self.tokens.insert(t.clone(), p.participant_id.clone());
                }
                self.index.insert(p.participant_id.clone(), self.participants.len());
                self.participants.push(p.clone());
            }
            EventPayload::SessionStarted { participant_id, presentation_order } => {
                let (_, rules) = self.require_study()?;
                let p = self.require_participant(participant_id)?;
                if self.sessions.contains_key(participant_id) {
                    return Err(EventError::SessionExists(participant_id.clone()));
                }
                let mut sorted = presentation_order.clone();
                sorted.sort();
                let mut expected = rules.sequences.clone();
                expected.sort();
                if sorted != expected {
                    return Err(EventError::InvalidOrder);
                }
                let mut s = SessionState::start(participant_id.clone(), presentation_order.clone(), at);
                // A profile collected at registration skips the pre-viewing step.
                if !p.familiarity_profile.is_empty() {
                    s.submit_familiarity(rules, &p.familiarity_profile, at)?;
                }
                self.sessions.insert(participant_id.clone(), s);
            }
            EventPayload::FamiliaritySubmitted { participant_id, profile } => {
                let (_, rules) = self.require_study()?;
                self.require_participant(participant_id)?;
                let next = match self.sessions.get(participant_id) {
                    Some(s) => {
                        let mut next = s.clone();
                        next.submit_familiarity(rules, profile, at)?;
                        Some(next)
                    }
                    None => {
                        check_profile(rules, profile)?;
                        None
                    }
                };
                if let Some(n) = next {
                    self.sessions.insert(participant_id.clone(), n);
                }
                let i = self.index[participant_id];
                self.participants[i].familiarity_profile = profile.clone();
            }
            EventPayload::LoopRecorded { participant_id, sequence_id } => {
                let (_, rules) = self.require_study()?;
                let mut next = self.session_of(participant_id)?.clone();
                next.record_loop(rules, sequence_id)?;
                self.sessions.insert(participant_id.clone(), next);
            }
            EventPayload::PhaseAdvanced { participant_id, to } => {
                let (_, rules) = self.require_study()?;
                let mut next = self.session_of(participant_id)?.clone();
                let reached = next.advance(rules, at)?;
                if reached != *to {
                    return Err(EventError::PhaseMismatch { allowed: reached, got: *to });
                }
                self.sessions.insert(participant_id.clone(), next);
            }
            EventPayload::ResponseSubmitted(r) => {
                self.check_response(r)?;
                let key = (r.participant_id.clone(), r.sequence_id.clone());
                if self.responses.contains_key(&key) {
                    return Err(EventError::DuplicateResponse(key.0, key.1));
                }
                let next = self.session_after_response(r, at)?;
                if let Some(n) = next {
                    self.sessions.insert(r.participant_id.clone(), n);
                }
                self.responses.insert(key, r.clone());
            }
            EventPayload::ResponseAmended(r) => {
                self.check_response(r)?;
                let key = (r.participant_id.clone(), r.sequence_id.clone());
                if !self.responses.contains_key(&key) {
                    return Err(EventError::NothingToAmend(key.0, key.1));
                }
                let next = self.session_after_response(r, at)?;
                if let Some(n) = next {
                    self.sessions.insert(r.participant_id.clone(), n);
                }
                self.responses.insert(key, r.clone());
            }
        }
        self.last_event_id = e.event_id;
        self.last_recorded_at = at;
        Ok(())
    }
}
