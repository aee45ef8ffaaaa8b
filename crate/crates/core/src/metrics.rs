//! Familiarity Rate, Accuracy Rate (per participant and per sequence, the
//! latter being the Urban Identity Level), cohort aggregates, rankings and
//! rank-divergence markers.
//!
//! Every value is carried as an exact rational. Rounding to an integer
//! percent (half away from zero) happens only in [`RatePercent::display`];
//! rankings and identities compare the exact values.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::StudyDefinition;
use crate::model::{
    AreaId, FamiliarityLevel, FamiliarityPooling, GroupView, Guess, ParticipantGroup, ParticipantId, ParticipantRecord, SequenceId,
    SequenceResponse, StudyArea,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("familiarity rate is undefined for zero respondents")]
    NoRespondents,
    #[error("accuracy rate needs at least one considered assignment")]
    NothingConsidered,
    #[error("invalid accuracy inputs: {correct} correct of {considered} considered")]
    InvalidInputs { correct: u64, considered: u64 },
    #[error("unknown participant `{0}`")]
    UnknownParticipant(ParticipantId),
    #[error("unknown sequence `{0}`")]
    UnknownSequence(SequenceId),
    #[error("tables cover different areas: only in first {only_first:?}, only in second {only_second:?}")]
    MismatchedAreas { only_first: Vec<AreaId>, only_second: Vec<AreaId> },
    #[error("tables belong to different groups")]
    MismatchedGroup,
    #[error("divergence threshold must be at least 1")]
    InvalidThreshold,
}

/// A rate in [0, 1], kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatePercent {
    exact: Ratio<u64>,
}

impl RatePercent {
    /// `numerator / denominator`; `None` if the denominator is zero or the
    /// value exceeds one.
    pub fn new(numerator: u64, denominator: u64) -> Option<Self> {
        (denominator > 0 && numerator <= denominator).then(|| Self { exact: Ratio::new(numerator, denominator) })
    }

    pub fn exact(&self) -> Ratio<u64> {
        self.exact
    }

    /// Integer percent, rounded half away from zero.
    pub fn display(&self) -> u32 {
        let (n, d) = (*self.exact.numer() as u128, *self.exact.denom() as u128);
        ((200 * n + d) / (2 * d)) as u32
    }

    /// `None` unless the value lies in [0, 1].
    pub fn from_ratio(r: Ratio<u64>) -> Option<Self> {
        Self::new(*r.numer(), *r.denom())
    }

    pub fn as_f64(&self) -> f64 {
        *self.exact.numer() as f64 / *self.exact.denom() as f64
    }
}

#[derive(Serialize, Deserialize)]
struct RateRepr {
    numerator: u64,
    denominator: u64,
    display: u32,
}

impl Serialize for RatePercent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RateRepr { numerator: *self.exact.numer(), denominator: *self.exact.denom(), display: self.display() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RatePercent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RateRepr::deserialize(d)?;
        RatePercent::new(r.numerator, r.denominator)
            .ok_or_else(|| serde::de::Error::custom("rate must lie in [0, 1] with a positive denominator"))
    }
}

/// `correct` of `considered` assignments, the C and T of the accuracy rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyInputs {
    pub correct: u64,
    pub considered: u64,
}

impl AccuracyInputs {
    pub fn new(correct: u64, considered: u64) -> Result<Self, MetricsError> {
        if considered == 0 {
            return Err(MetricsError::NothingConsidered);
        }
        if correct > considered {
            return Err(MetricsError::InvalidInputs { correct, considered });
        }
        Ok(Self { correct, considered })
    }
}

/// How blank area guesses enter the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlankPolicy {
    /// Blanks are left out of T and reported separately.
    #[default]
    #[serde(alias = "exclude")]
    ExcludeFromT,
    /// Blanks count as incorrect assignments.
    #[serde(alias = "incorrect")]
    BlanksCountIncorrect,
}

impl BlankPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exclude" | "exclude_from_t" => Some(BlankPolicy::ExcludeFromT),
            "incorrect" | "blanks_count_incorrect" => Some(BlankPolicy::BlanksCountIncorrect),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BlankPolicy::ExcludeFromT => "exclude",
            BlankPolicy::BlanksCountIncorrect => "incorrect",
        }
    }
}

/// Raw outcome counts before a blank policy is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyTally {
    pub correct: u64,
    pub incorrect: u64,
    pub blank: u64,
}

impl AccuracyTally {
    pub fn considered(&self, policy: BlankPolicy) -> u64 {
        match policy {
            BlankPolicy::ExcludeFromT => self.correct + self.incorrect,
            BlankPolicy::BlanksCountIncorrect => self.correct + self.incorrect + self.blank,
        }
    }

    pub fn inputs(&self, policy: BlankPolicy) -> Result<AccuracyInputs, MetricsError> {
        AccuracyInputs::new(self.correct, self.considered(policy))
    }

    fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Correct => self.correct += 1,
            Outcome::Incorrect => self.incorrect += 1,
            Outcome::Blank => self.blank += 1,
        }
    }
}

impl core::ops::Add for AccuracyTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { correct: self.correct + o.correct, incorrect: self.incorrect + o.incorrect, blank: self.blank + o.blank }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Correct,
    Incorrect,
    Blank,
}

/// A rate together with the counts it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub rate: RatePercent,
    pub inputs: AccuracyInputs,
    pub tally: AccuracyTally,
}

impl AccuracyResult {
    fn from_tally(tally: AccuracyTally, policy: BlankPolicy) -> Result<Self, MetricsError> {
        let inputs = tally.inputs(policy)?;
        Ok(Self { rate: accuracy_rate(inputs), inputs, tally })
    }
}

/// Mean exposure weight over respondents.
pub fn familiarity_rate(levels: &[FamiliarityLevel]) -> Result<RatePercent, MetricsError> {
    if levels.is_empty() {
        return Err(MetricsError::NoRespondents);
    }
    let tenths: u64 = levels.iter().map(|l| l.weight_tenths()).sum();
    Ok(RatePercent::new(tenths, 10 * levels.len() as u64).expect("weights lie in [0, 1]"))
}

pub fn accuracy_rate(inputs: AccuracyInputs) -> RatePercent {
    RatePercent::new(inputs.correct, inputs.considered).expect("AccuracyInputs upholds C <= T, T >= 1")
}

/// Read-only view joining a study definition, its participants and their
/// final responses.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation<'a> {
    pub study: &'a StudyDefinition,
    pub participants: &'a [ParticipantRecord],
    pub responses: &'a [SequenceResponse],
}

impl<'a> Evaluation<'a> {
    pub fn new(
        study: &'a StudyDefinition,
        participants: &'a [ParticipantRecord],
        responses: &'a [SequenceResponse],
    ) -> Self {
        Self { study, participants, responses }
    }

    fn group_of(&self, pid: &ParticipantId) -> Option<ParticipantGroup> {
        self.participants.iter().find(|p| &p.participant_id == pid).map(|p| p.group)
    }

    fn groups(&self) -> BTreeMap<&'a ParticipantId, ParticipantGroup> {
        self.participants.iter().map(|p| (&p.participant_id, p.group)).collect()
    }

    fn outcome(&self, r: &SequenceResponse) -> Option<Outcome> {
        let truth = self.study.sequence_area(&r.sequence_id)?;
        Some(match &r.guessed_area_id {
            Guess::Blank => Outcome::Blank,
            Guess::Area(a) if a == truth => Outcome::Correct,
            Guess::Area(_) => Outcome::Incorrect,
        })
    }

    /// Whether the response names the area its sequence depicts.
    pub fn is_correct(&self, r: &SequenceResponse) -> bool {
        self.outcome(r) == Some(Outcome::Correct)
    }

    pub fn participant_tally(&self, pid: &ParticipantId) -> AccuracyTally {
        let mut t = AccuracyTally::default();
        for r in self.responses.iter().filter(|r| &r.participant_id == pid) {
            if let Some(o) = self.outcome(r) {
                t.add(o);
            }
        }
        t
    }

    pub fn sequence_tally(&self, seq: &SequenceId, group: GroupView) -> AccuracyTally {
        let groups = self.groups();
        let mut t = AccuracyTally::default();
        for r in self.responses.iter().filter(|r| &r.sequence_id == seq) {
            if groups.get(&r.participant_id).is_some_and(|g| group.contains(*g)) {
                if let Some(o) = self.outcome(r) {
                    t.add(o);
                }
            }
        }
        t
    }

    pub fn accuracy_per_participant(
        &self,
        pid: &ParticipantId,
        policy: BlankPolicy,
    ) -> Result<AccuracyResult, MetricsError> {
        if self.group_of(pid).is_none() {
            return Err(MetricsError::UnknownParticipant(pid.clone()));
        }
        AccuracyResult::from_tally(self.participant_tally(pid), policy)
    }

    /// Per-sequence accuracy within a group: the Urban Identity Level.
    pub fn uil_per_sequence(
        &self,
        seq: &SequenceId,
        group: GroupView,
        policy: BlankPolicy,
    ) -> Result<AccuracyResult, MetricsError> {
        if self.study.stimulus(seq).is_none() {
            return Err(MetricsError::UnknownSequence(seq.clone()));
        }
        AccuracyResult::from_tally(self.sequence_tally(seq, group), policy)
    }

    /// UIL for every area whose sequence has at least one considered response.
    pub fn uil_by_area(&self, group: GroupView, policy: BlankPolicy) -> BTreeMap<AreaId, AccuracyResult> {
        self.study
            .stimuli
            .iter()
            .filter_map(|s| {
                self.uil_per_sequence(&s.sequence_id, group, policy).ok().map(|r| (s.area_id.clone(), r))
            })
            .collect()
    }

    /// Total correct over total considered within the group.
    pub fn cohort_mean_accuracy(&self, group: GroupView, policy: BlankPolicy) -> Result<AccuracyResult, MetricsError> {
        let groups = self.groups();
        let mut t = AccuracyTally::default();
        for r in self.responses {
            if groups.get(&r.participant_id).is_some_and(|g| group.contains(*g)) {
                if let Some(o) = self.outcome(r) {
                    t.add(o);
                }
            }
        }
        AccuracyResult::from_tally(t, policy)
    }

    /// Participants (in cohort order) with at least one considered response.
    pub fn participant_accuracies(
        &self,
        group: GroupView,
        policy: BlankPolicy,
    ) -> Vec<(ParticipantId, AccuracyResult)> {
        self.participants
            .iter()
            .filter(|p| group.contains(p.group))
            .filter_map(|p| {
                AccuracyResult::from_tally(self.participant_tally(&p.participant_id), policy)
                    .ok()
                    .map(|r| (p.participant_id.clone(), r))
            })
            .collect()
    }

    /// Participant count per displayed per-participant accuracy.
    pub fn accuracy_histogram(&self, group: GroupView, policy: BlankPolicy) -> BTreeMap<u32, usize> {
        let mut bins = BTreeMap::new();
        for (_, r) in self.participant_accuracies(group, policy) {
            *bins.entry(r.rate.display()).or_default() += 1;
        }
        bins
    }

    /// Familiarity rates under the given pooling. Only the General view
    /// differs: with [`FamiliarityPooling::GroupMean`] it is the mean of the
    /// Local and Foreign rates (or the one that exists), and its respondent
    /// count is still the whole cohort.
    pub fn familiarity_table(
        &self,
        group: GroupView,
        pooling: FamiliarityPooling,
    ) -> BTreeMap<AreaId, (RatePercent, usize)> {
        if group != GroupView::General || pooling == FamiliarityPooling::Respondents {
            return self.familiarity_rates(group);
        }
        let local = self.familiarity_rates(GroupView::Local);
        let foreign = self.familiarity_rates(GroupView::Foreign);
        self.study
            .areas
            .iter()
            .filter_map(|a| {
                let v = match (local.get(&a.area_id), foreign.get(&a.area_id)) {
                    (Some((l, nl)), Some((f, nf))) => {
                        let mean = (l.exact() + f.exact()) / Ratio::from_integer(2);
                        (RatePercent::from_ratio(mean).expect("mean of rates is a rate"), nl + nf)
                    }
                    (Some(x), None) | (None, Some(x)) => *x,
                    (None, None) => return None,
                };
                Some((a.area_id.clone(), v))
            })
            .collect()
    }

    /// Familiarity rate for each area with at least one respondent in the group.
    pub fn familiarity_rates(&self, group: GroupView) -> BTreeMap<AreaId, (RatePercent, usize)> {
        self.study
            .areas
            .iter()
            .filter_map(|a| {
                let levels: Vec<FamiliarityLevel> = self
                    .participants
                    .iter()
                    .filter(|p| group.contains(p.group))
                    .filter_map(|p| p.familiarity_profile.get(&a.area_id).copied())
                    .collect();
                familiarity_rate(&levels).ok().map(|r| (a.area_id.clone(), (r, levels.len())))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Uil,
    FamiliarityRate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedRow {
    pub area_id: AreaId,
    pub metric: RatePercent,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedTable {
    pub group: GroupView,
    pub metric_kind: MetricKind,
    pub rows: Vec<RankedRow>,
}

impl RankedTable {
    pub fn rank_of(&self, area: &AreaId) -> Option<u32> {
        self.rows.iter().find(|r| &r.area_id == area).map(|r| r.rank)
    }
}

/// Descending by exact value; ties go to the lower origin rank, then to the
/// lexicographically smaller area id.
pub fn rank_table(
    values: &BTreeMap<AreaId, RatePercent>,
    metric_kind: MetricKind,
    group: GroupView,
    areas: &[StudyArea],
) -> RankedTable {
    let origin = |id: &AreaId| areas.iter().find(|a| &a.area_id == id).map_or(u32::MAX, |a| a.origin_rank);
    let mut rows: Vec<(&AreaId, RatePercent)> = values.iter().map(|(a, v)| (a, *v)).collect();
    rows.sort_by(|(a, va), (b, vb)| {
        vb.cmp(va).then_with(|| origin(a).cmp(&origin(b))).then_with(|| a.cmp(b))
    });
    RankedTable {
        group,
        metric_kind,
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, (a, v))| RankedRow { area_id: a.clone(), metric: v, rank: i as u32 + 1 })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    Up,
    Down,
    Aligned,
    None,
}

impl Marker {
    pub fn symbol(self) -> &'static str {
        match self {
            Marker::Up => "▲",
            Marker::Down => "▼",
            Marker::Aligned => "◀→",
            Marker::None => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceMarker {
    pub area_id: AreaId,
    pub marker: Marker,
    /// Familiarity rank minus UIL rank; positive when an area is identified
    /// better than its familiarity would suggest.
    pub rank_delta: i64,
}

pub const DEFAULT_DIVERGENCE_THRESHOLD: u32 = 2;

/// Markers in the order of `uil`'s rows. Aligned is only emitted for
/// `highlighted` areas; other aligned rows get [`Marker::None`].
pub fn divergence_markers(
    uil: &RankedTable,
    fr: &RankedTable,
    threshold: u32,
    highlighted: &BTreeSet<AreaId>,
) -> Result<Vec<DivergenceMarker>, MetricsError> {
    if threshold == 0 {
        return Err(MetricsError::InvalidThreshold);
    }
    if uil.group != fr.group {
        return Err(MetricsError::MismatchedGroup);
    }
    let a: BTreeSet<&AreaId> = uil.rows.iter().map(|r| &r.area_id).collect();
    let b: BTreeSet<&AreaId> = fr.rows.iter().map(|r| &r.area_id).collect();
    if a != b {
        return Err(MetricsError::MismatchedAreas {
            only_first: a.difference(&b).map(|x| (*x).clone()).collect(),
            only_second: b.difference(&a).map(|x| (*x).clone()).collect(),
        });
    }
    let t = threshold as i64;
    Ok(uil
        .rows
        .iter()
        .map(|row| {
            let fr_rank = fr.rank_of(&row.area_id).expect("area sets are equal");
            let delta = fr_rank as i64 - row.rank as i64;
            let marker = if delta >= t {
                Marker::Up
            } else if delta <= -t {
                Marker::Down
            } else if highlighted.contains(&row.area_id) {
                Marker::Aligned
            } else {
                Marker::None
            };
            DivergenceMarker { area_id: row.area_id.clone(), marker, rank_delta: delta }
        })
        .collect())
}
