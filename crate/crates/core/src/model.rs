//! Shared domain types: areas, participants, familiarity levels, responses,
//! and the cohort partition used by every analysis.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.into())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl core::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Short stable identifier of a study area, e.g. `asakusa`.
    AreaId
);
id_newtype!(
    /// Participant label, e.g. `P12`.
    ParticipantId
);
id_newtype!(
    /// Identifier of one stimulus sequence.
    SequenceId
);

/// One case-study area. `origin_rank` orders areas from most organic (1) to
/// most corporate (N).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyArea {
    pub area_id: AreaId,
    pub display_name: String,
    pub origin_rank: u32,
}

/// Four-level exposure scale answered per area before viewing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamiliarityLevel {
    NotFamiliar,
    QuickVisits,
    RegularAttendance,
    ContinuousResidence,
}

impl FamiliarityLevel {
    pub const ALL: [FamiliarityLevel; 4] = [
        FamiliarityLevel::NotFamiliar,
        FamiliarityLevel::QuickVisits,
        FamiliarityLevel::RegularAttendance,
        FamiliarityLevel::ContinuousResidence,
    ];

    /// Exposure weight in tenths: 0, 4, 7, 10.
    pub const fn weight_tenths(self) -> u64 {
        match self {
            FamiliarityLevel::NotFamiliar => 0,
            FamiliarityLevel::QuickVisits => 4,
            FamiliarityLevel::RegularAttendance => 7,
            FamiliarityLevel::ContinuousResidence => 10,
        }
    }

    /// Exact exposure weight.
    pub fn weight(self) -> Ratio<u64> {
        Ratio::new(self.weight_tenths(), 10)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FamiliarityLevel::NotFamiliar => "not_familiar",
            FamiliarityLevel::QuickVisits => "quick_visits",
            FamiliarityLevel::RegularAttendance => "regular_attendance",
            FamiliarityLevel::ContinuousResidence => "continuous_residence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

/// Stored group tag. `General` is a view over both and never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantGroup {
    Local,
    Foreign,
}

impl ParticipantGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            ParticipantGroup::Local => "local",
            ParticipantGroup::Foreign => "foreign",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "local" => Some(ParticipantGroup::Local),
            "foreign" => Some(ParticipantGroup::Foreign),
            _ => None,
        }
    }
}

/// A stored group or the derived `General` union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupView {
    General,
    Local,
    Foreign,
}

impl GroupView {
    pub const ALL: [GroupView; 3] = [GroupView::General, GroupView::Local, GroupView::Foreign];

    pub fn contains(self, group: ParticipantGroup) -> bool {
        match self {
            GroupView::General => true,
            GroupView::Local => group == ParticipantGroup::Local,
            GroupView::Foreign => group == ParticipantGroup::Foreign,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupView::General => "general",
            GroupView::Local => "local",
            GroupView::Foreign => "foreign",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

impl From<ParticipantGroup> for GroupView {
    fn from(g: ParticipantGroup) -> Self {
        match g {
            ParticipantGroup::Local => GroupView::Local,
            ParticipantGroup::Foreign => GroupView::Foreign,
        }
    }
}

/// How the General familiarity rate combines the two groups: over all
/// respondents, or as the unweighted mean of the Local and Foreign rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamiliarityPooling {
    #[default]
    Respondents,
    GroupMean,
}

impl FamiliarityPooling {
    pub fn as_str(self) -> &'static str {
        match self {
            FamiliarityPooling::Respondents => "respondents",
            FamiliarityPooling::GroupMean => "group_mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "respondents" | "pooled" => Some(FamiliarityPooling::Respondents),
            "group_mean" | "mean" => Some(FamiliarityPooling::GroupMean),
            _ => None,
        }
    }
}

/// Length of residence in the city.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResidenceBucket {
    #[serde(rename = "le1y")]
    UpToOneYear,
    #[serde(rename = "1-3y")]
    OneToThreeYears,
    #[serde(rename = "3-5y")]
    ThreeToFiveYears,
    #[serde(rename = "ge5y")]
    FiveYearsOrMore,
}

impl ResidenceBucket {
    pub const ALL: [ResidenceBucket; 4] = [
        ResidenceBucket::UpToOneYear,
        ResidenceBucket::OneToThreeYears,
        ResidenceBucket::ThreeToFiveYears,
        ResidenceBucket::FiveYearsOrMore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResidenceBucket::UpToOneYear => "le1y",
            ResidenceBucket::OneToThreeYears => "1-3y",
            ResidenceBucket::ThreeToFiveYears => "3-5y",
            ResidenceBucket::FiveYearsOrMore => "ge5y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: ParticipantId,
    pub group: ParticipantGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residence: Option<ResidenceBucket>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profession: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ai_familiarity: Option<String>,
    /// Empty until the pre-viewing profile is submitted, then complete over
    /// the study areas.
    #[serde(default)]
    pub familiarity_profile: BTreeMap<AreaId, FamiliarityLevel>,
}

impl ParticipantRecord {
    pub fn new(participant_id: impl Into<ParticipantId>, group: ParticipantGroup) -> Self {
        Self {
            participant_id: participant_id.into(),
            group,
            age: None,
            residence: None,
            profession: None,
            ai_familiarity: None,
            familiarity_profile: BTreeMap::new(),
        }
    }
}

/// The Q1 answer: a declared area, or left blank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Option<AreaId>", into = "Option<AreaId>")]
pub enum Guess {
    Area(AreaId),
    Blank,
}

impl Guess {
    pub fn area(&self) -> Option<&AreaId> {
        match self {
            Guess::Area(a) => Some(a),
            Guess::Blank => None,
        }
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Guess::Blank)
    }
}

impl From<Option<AreaId>> for Guess {
    fn from(v: Option<AreaId>) -> Self {
        match v {
            Some(a) if !a.0.is_empty() => Guess::Area(a),
            _ => Guess::Blank,
        }
    }
}

impl From<Guess> for Option<AreaId> {
    fn from(g: Guess) -> Self {
        match g {
            Guess::Area(a) => Some(a),
            Guess::Blank => None,
        }
    }
}

/// Free-text questionnaire items feeding the semantic analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FreeTextItem {
    Q2,
    Q3,
    Q4,
    Q5,
}

impl FreeTextItem {
    pub const ALL: [FreeTextItem; 4] = [FreeTextItem::Q2, FreeTextItem::Q3, FreeTextItem::Q4, FreeTextItem::Q5];

    pub fn as_str(self) -> &'static str {
        match self {
            FreeTextItem::Q2 => "Q2",
            FreeTextItem::Q3 => "Q3",
            FreeTextItem::Q4 => "Q4",
            FreeTextItem::Q5 => "Q5",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

/// One participant's final answers for one sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceResponse {
    pub participant_id: ParticipantId,
    pub sequence_id: SequenceId,
    pub guessed_area_id: Guess,
    #[serde(default)]
    pub q2_text: String,
    #[serde(default)]
    pub q3_text: String,
    #[serde(default)]
    pub q4_text: String,
    #[serde(default)]
    pub q5_text: String,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub submitted_at: u64,
    #[serde(default)]
    pub loops_viewed: u32,
}

impl SequenceResponse {
    pub fn new(participant_id: impl Into<ParticipantId>, sequence_id: impl Into<SequenceId>, guess: Guess) -> Self {
        Self {
            participant_id: participant_id.into(),
            sequence_id: sequence_id.into(),
            guessed_area_id: guess,
            q2_text: String::new(),
            q3_text: String::new(),
            q4_text: String::new(),
            q5_text: String::new(),
            submitted_at: 0,
            loops_viewed: 0,
        }
    }

    pub fn text(&self, item: FreeTextItem) -> &str {
        match item {
            FreeTextItem::Q2 => &self.q2_text,
            FreeTextItem::Q3 => &self.q3_text,
            FreeTextItem::Q4 => &self.q4_text,
            FreeTextItem::Q5 => &self.q5_text,
        }
    }

    /// Equality on answer content, ignoring `submitted_at`.
    pub fn same_content(&self, other: &Self) -> bool {
        self.participant_id == other.participant_id
            && self.sequence_id == other.sequence_id
            && self.guessed_area_id == other.guessed_area_id
            && self.q2_text == other.q2_text
            && self.q3_text == other.q3_text
            && self.q4_text == other.q4_text
            && self.q5_text == other.q5_text
            && self.loops_viewed == other.loops_viewed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CohortError {
    #[error("duplicate participant_id `{0}`")]
    DuplicateParticipant(ParticipantId),
}

/// Participant ids per group, input order preserved.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortPartition {
    pub general: Vec<ParticipantId>,
    pub local: Vec<ParticipantId>,
    pub foreign: Vec<ParticipantId>,
}

impl CohortPartition {
    pub fn get(&self, view: GroupView) -> &[ParticipantId] {
        match view {
            GroupView::General => &self.general,
            GroupView::Local => &self.local,
            GroupView::Foreign => &self.foreign,
        }
    }
}

pub fn partition_cohort(participants: &[ParticipantRecord]) -> Result<CohortPartition, CohortError> {
    let mut seen = BTreeSet::new();
    let mut out = CohortPartition::default();
    for p in participants {
        if !seen.insert(&p.participant_id) {
            return Err(CohortError::DuplicateParticipant(p.participant_id.clone()));
        }
        out.general.push(p.participant_id.clone());
        match p.group {
            ParticipantGroup::Local => out.local.push(p.participant_id.clone()),
            ParticipantGroup::Foreign => out.foreign.push(p.participant_id.clone()),
        }
    }
    Ok(out)
}

/// Demographic counts for a cohort. Missing optional fields land in the
/// `unspecified` counters so every tally sums to `total`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub total: usize,
    pub local: usize,
    pub foreign: usize,
    pub residence: BTreeMap<ResidenceBucket, usize>,
    pub residence_unspecified: usize,
    pub age_min: Option<u32>,
    pub age_max: Option<u32>,
    pub age_unspecified: usize,
}

pub fn summarize_cohort(participants: &[ParticipantRecord]) -> CohortSummary {
    let mut s = CohortSummary {
        residence: ResidenceBucket::ALL.into_iter().map(|b| (b, 0)).collect(),
        ..CohortSummary::default()
    };
    for p in participants {
        s.total += 1;
        match p.group {
            ParticipantGroup::Local => s.local += 1,
            ParticipantGroup::Foreign => s.foreign += 1,
        }
        match p.residence {
            Some(b) => *s.residence.entry(b).or_default() += 1,
            None => s.residence_unspecified += 1,
        }
        match p.age {
            Some(a) => {
                s.age_min = Some(s.age_min.map_or(a, |m| m.min(a)));
                s.age_max = Some(s.age_max.map_or(a, |m| m.max(a)));
            }
            None => s.age_unspecified += 1,
        }
    }
    s
}
