//! Three-phase participant session: pre-viewing familiarity profiling,
//! looped familiarization over all sequences, then in-depth answering.
//!
//! Every transition validates before it mutates, so a rejected call leaves
//! the state untouched. Phases only move forward.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::design::StudyDefinition;
use crate::model::{AreaId, FamiliarityLevel, ParticipantId, SequenceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreViewing,
    Familiarization,
    InDepth,
    Complete,
}

impl Phase {
    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::PreViewing => Some(Phase::Familiarization),
            Phase::Familiarization => Some(Phase::InDepth),
            Phase::InDepth => Some(Phase::Complete),
            Phase::Complete => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("operation not allowed in phase {actual:?}")]
    WrongPhase { actual: Phase },
    #[error("phase already passed (session is in {actual:?})")]
    PhaseAlreadyPassed { actual: Phase },
    #[error("familiarity profile is missing areas {0:?}")]
    IncompleteProfile(Vec<AreaId>),
    #[error("familiarity profile names undeclared areas {0:?}")]
    UnknownAreas(Vec<AreaId>),
    #[error("unknown sequence `{0}`")]
    UnknownSequence(SequenceId),
    #[error("familiarization incomplete; remaining loops {0:?}")]
    FamiliarizationIncomplete(Vec<(SequenceId, u32)>),
    #[error("familiarity profile not yet submitted")]
    ProfileNotSubmitted,
    #[error("final responses missing for {0:?}")]
    ResponsesMissing(Vec<SequenceId>),
    #[error("session is already complete")]
    AlreadyComplete,
}

impl SessionError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::WrongPhase { .. } => "wrong_phase",
            SessionError::PhaseAlreadyPassed { .. } => "phase_already_passed",
            SessionError::IncompleteProfile(_) => "incomplete_profile",
            SessionError::UnknownAreas(_) => "unknown_area",
            SessionError::UnknownSequence(_) => "unknown_sequence",
            SessionError::FamiliarizationIncomplete(_) => "gate_unmet",
            SessionError::ProfileNotSubmitted => "gate_unmet",
            SessionError::ResponsesMissing(_) => "gate_unmet",
            SessionError::AlreadyComplete => "already_complete",
        }
    }
}

/// Study parameters the state machine enforces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRules {
    pub sequences: Vec<SequenceId>,
    pub areas: Vec<AreaId>,
    pub familiarization_loops: u32,
    pub in_depth_loops: u32,
}

impl SessionRules {
    pub fn from_study(study: &StudyDefinition) -> Self {
        Self {
            sequences: study.sequence_ids(),
            areas: study.area_ids(),
            familiarization_loops: study.schedule.familiarization_loops,
            in_depth_loops: study.schedule.in_depth_loops_per_sequence,
        }
    }

    fn knows(&self, seq: &SequenceId) -> bool {
        self.sequences.contains(seq)
    }
}

/// Per-participant shuffle of the study's sequences, keyed by
/// `(seed, participant_id)`.
pub fn presentation_order(seed: u64, participant: &ParticipantId, sequences: &[SequenceId]) -> Vec<SequenceId> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(participant.as_str().as_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    let mut order = sequences.to_vec();
    order.shuffle(&mut rng);
    order
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopAdvisory {
    pub loops_viewed: u32,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseOutcome {
    pub amended: bool,
    /// Set when fewer in-depth loops than the target were viewed.
    pub advisory: Option<LoopAdvisory>,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub participant_id: ParticipantId,
    pub phase: Phase,
    /// Milliseconds since the Unix epoch.
    pub phase_started_at: u64,
    pub presentation_order: Vec<SequenceId>,
    pub familiarization_views: BTreeMap<SequenceId, u32>,
    /// Completed full passes over all sequences.
    pub familiarization_loops_completed: u32,
    pub in_depth_loops: BTreeMap<SequenceId, u32>,
    pub responded: BTreeSet<SequenceId>,
    pub current_sequence: Option<SequenceId>,
}

impl SessionState {
    pub fn start(participant_id: ParticipantId, presentation_order: Vec<SequenceId>, now: u64) -> Self {
        Self {
            participant_id,
            phase: Phase::PreViewing,
            phase_started_at: now,
            presentation_order,
            familiarization_views: BTreeMap::new(),
            familiarization_loops_completed: 0,
            in_depth_loops: BTreeMap::new(),
            responded: BTreeSet::new(),
            current_sequence: None,
        }
    }

    /// Equality ignoring timestamps.
    pub fn same_state(&self, other: &Self) -> bool {
        Self { phase_started_at: 0, ..self.clone() } == Self { phase_started_at: 0, ..other.clone() }
    }

    fn enter(&mut self, phase: Phase, now: u64) {
        self.phase = phase;
        self.phase_started_at = now;
        self.refresh_current();
    }

    fn refresh_current(&mut self) {
        self.current_sequence = match self.phase {
            Phase::InDepth => self.presentation_order.iter().find(|s| !self.responded.contains(*s)).cloned(),
            _ => None,
        };
    }

    pub fn familiarization_remaining(&self, rules: &SessionRules) -> Vec<(SequenceId, u32)> {
        rules
            .sequences
            .iter()
            .filter_map(|s| {
                let seen = self.familiarization_views.get(s).copied().unwrap_or(0);
                (seen < rules.familiarization_loops).then(|| (s.clone(), rules.familiarization_loops - seen))
            })
            .collect()
    }

    pub fn missing_responses(&self, rules: &SessionRules) -> Vec<SequenceId> {
        rules.sequences.iter().filter(|s| !self.responded.contains(*s)).cloned().collect()
    }

    pub fn submit_familiarity(
        &mut self,
        rules: &SessionRules,
        profile: &BTreeMap<AreaId, FamiliarityLevel>,
        now: u64,
    ) -> Result<(), SessionError> {
        if self.phase != Phase::PreViewing {
            return Err(SessionError::PhaseAlreadyPassed { actual: self.phase });
        }
        check_profile(rules, profile)?;
        self.enter(Phase::Familiarization, now);
        Ok(())
    }

    pub fn record_loop(&mut self, rules: &SessionRules, seq: &SequenceId) -> Result<(), SessionError> {
        if !rules.knows(seq) {
            return Err(SessionError::UnknownSequence(seq.clone()));
        }
        match self.phase {
            Phase::Familiarization => {
                *self.familiarization_views.entry(seq.clone()).or_default() += 1;
                self.familiarization_loops_completed = rules
                    .sequences
                    .iter()
                    .map(|s| self.familiarization_views.get(s).copied().unwrap_or(0))
                    .min()
                    .unwrap_or(0);
            }
            Phase::InDepth => *self.in_depth_loops.entry(seq.clone()).or_default() += 1,
            actual => return Err(SessionError::WrongPhase { actual }),
        }
        Ok(())
    }

    /// Moves to the next phase if its gate is met; returns the new phase.
    pub fn advance(&mut self, rules: &SessionRules, now: u64) -> Result<Phase, SessionError> {
        let next = match self.phase {
            Phase::PreViewing => return Err(SessionError::ProfileNotSubmitted),
            Phase::Familiarization => {
                let remaining = self.familiarization_remaining(rules);
                if !remaining.is_empty() {
                    return Err(SessionError::FamiliarizationIncomplete(remaining));
                }
                Phase::InDepth
            }
            Phase::InDepth => {
                let missing = self.missing_responses(rules);
                if !missing.is_empty() {
                    return Err(SessionError::ResponsesMissing(missing));
                }
                Phase::Complete
            }
            Phase::Complete => return Err(SessionError::AlreadyComplete),
        };
        self.enter(next, now);
        Ok(next)
    }

    /// Records a final (or amended) response. The session completes as soon
    /// as every sequence has one. Fewer loops than the target only yield an
    /// advisory.
    pub fn submit_response(
        &mut self,
        rules: &SessionRules,
        seq: &SequenceId,
        loops_viewed: u32,
        now: u64,
    ) -> Result<ResponseOutcome, SessionError> {
        if self.phase != Phase::InDepth {
            return Err(SessionError::WrongPhase { actual: self.phase });
        }
        if !rules.knows(seq) {
            return Err(SessionError::UnknownSequence(seq.clone()));
        }
        let advisory = self.loop_advisory(rules, seq, loops_viewed);
        let amended = !self.responded.insert(seq.clone());
        let completed = self.missing_responses(rules).is_empty();
        if completed {
            self.enter(Phase::Complete, now);
        } else {
            self.refresh_current();
        }
        Ok(ResponseOutcome {
            amended,
            advisory,
            completed,
        })
    }

    /// Advisory for a response reporting `loops_viewed` in-depth loops; the
    /// larger of the reported and the recorded count is used.
    pub fn loop_advisory(&self, rules: &SessionRules, seq: &SequenceId, loops_viewed: u32) -> Option<LoopAdvisory> {
        let viewed = loops_viewed.max(self.in_depth_loops.get(seq).copied().unwrap_or(0));
        (viewed < rules.in_depth_loops).then_some(LoopAdvisory { loops_viewed: viewed, target: rules.in_depth_loops })
    }

    /// Phase-independent safety properties.
    pub fn invariant_violations(&self, rules: &SessionRules) -> Vec<String> {
        let mut v = Vec::new();
        if self.phase == Phase::Complete && !self.missing_responses(rules).is_empty() {
            v.push("complete session lacks final responses".into());
        }
        if self.phase >= Phase::InDepth && !self.familiarization_remaining(rules).is_empty() {
            v.push("in-depth phase reached before familiarization gate".into());
        }
        if self.phase < Phase::InDepth && !self.responded.is_empty() {
            v.push("responses recorded before in-depth phase".into());
        }
        if self.phase != Phase::InDepth && self.current_sequence.is_some() {
            v.push("current sequence set outside in-depth phase".into());
        }
        v
    }
}

/// Completeness and area checks shared by sessions and bulk imports.
pub fn check_profile(rules: &SessionRules, profile: &BTreeMap<AreaId, FamiliarityLevel>) -> Result<(), SessionError> {
    let unknown: Vec<AreaId> = profile.keys().filter(|a| !rules.areas.contains(a)).cloned().collect();
    if !unknown.is_empty() {
        return Err(SessionError::UnknownAreas(unknown));
    }
    let missing: Vec<AreaId> = rules.areas.iter().filter(|a| !profile.contains_key(*a)).cloned().collect();
    if !missing.is_empty() {
        return Err(SessionError::IncompleteProfile(missing));
    }
    Ok(())
}
