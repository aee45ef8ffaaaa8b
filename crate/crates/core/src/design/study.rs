use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::grid::{assign_heights, build_sector_grid, GridError, HeightRange};
use super::manifest::*;
use super::report::{Severity, ValidationReport};
use crate::model::{AreaId, FamiliarityPooling, SequenceId, StudyArea};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorAssignment {
    pub row: u32,
    pub col: u32,
    pub area_id: AreaId,
}

/// Base-map subdivision as declared in a study file. `expected_sectors` is
/// kept independent of the extent so inconsistent figures can be flagged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorGridSpec {
    pub extent_m: u32,
    pub sector_size_m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_sectors: Option<u32>,
    #[serde(default)]
    pub assignments: Vec<SectorAssignment>,
}

impl SectorGridSpec {
    pub fn assignment_map(&self) -> BTreeMap<(u32, u32), AreaId> {
        self.assignments.iter().map(|a| ((a.row, a.col), a.area_id.clone())).collect()
    }
}

fn default_fps_tolerance() -> f64 {
    DEFAULT_FPS_TOLERANCE
}

fn default_composition_tolerance() -> f64 {
    DEFAULT_COMPOSITION_TOLERANCE_PP
}

/// Root configuration of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDefinition {
    pub study_id: String,
    #[serde(default)]
    pub title: String,
    pub areas: Vec<StudyArea>,
    #[serde(default)]
    pub stimuli: Vec<StimulusManifest>,
    #[serde(default)]
    pub schedule: PhaseSchedule,
    #[serde(default)]
    pub instrument: QuestionnaireInstrument,
    /// Seeds the per-participant presentation order.
    #[serde(default)]
    pub presentation_seed: u64,
    #[serde(default = "default_fps_tolerance")]
    pub fps_tolerance: f64,
    #[serde(default = "default_composition_tolerance")]
    pub composition_tolerance_pp: f64,
    /// Areas whose aligned rows are marked in comparative tables.
    #[serde(default)]
    pub highlighted_areas: Vec<AreaId>,
    #[serde(default)]
    pub datasets: Vec<DatasetManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lora: Option<LoraTrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_grid: Option<SectorGridSpec>,
    #[serde(default)]
    pub zone_limits: BTreeMap<AreaId, HeightRange>,
    #[serde(default)]
    pub height_seed: u64,
    #[serde(default)]
    pub familiarity_pooling: FamiliarityPooling,
}

impl StudyDefinition {
    pub fn new(study_id: impl Into<String>, areas: Vec<StudyArea>, stimuli: Vec<StimulusManifest>) -> Self {
        Self {
            study_id: study_id.into(),
            title: String::new(),
            areas,
            stimuli,
            schedule: PhaseSchedule::default(),
            instrument: QuestionnaireInstrument::default(),
            presentation_seed: 0,
            fps_tolerance: DEFAULT_FPS_TOLERANCE,
            composition_tolerance_pp: DEFAULT_COMPOSITION_TOLERANCE_PP,
            highlighted_areas: Vec::new(),
            datasets: Vec::new(),
            lora: None,
            sector_grid: None,
            zone_limits: BTreeMap::new(),
            height_seed: 0,
            familiarity_pooling: FamiliarityPooling::default(),
        }
    }

    pub fn area(&self, id: &AreaId) -> Option<&StudyArea> {
        self.areas.iter().find(|a| &a.area_id == id)
    }

    pub fn stimulus(&self, id: &SequenceId) -> Option<&StimulusManifest> {
        self.stimuli.iter().find(|s| &s.sequence_id == id)
    }

    /// True area depicted by a sequence.
    pub fn sequence_area(&self, id: &SequenceId) -> Option<&AreaId> {
        self.stimulus(id).map(|s| &s.area_id)
    }

    pub fn sequence_for_area(&self, area: &AreaId) -> Option<&SequenceId> {
        self.stimuli.iter().find(|s| &s.area_id == area).map(|s| &s.sequence_id)
    }

    pub fn sequence_ids(&self) -> Vec<SequenceId> {
        self.stimuli.iter().map(|s| s.sequence_id.clone()).collect()
    }

    pub fn area_ids(&self) -> Vec<AreaId> {
        self.areas.iter().map(|a| a.area_id.clone()).collect()
    }

    pub fn origin_rank(&self, id: &AreaId) -> u32 {
        self.area(id).map_or(u32::MAX, |a| a.origin_rank)
    }
}

/// Validates the whole study definition. Sequence-manifest failures are
/// reported as warnings unless `strict`.
pub fn validate_study(def: &StudyDefinition, strict: bool) -> ValidationReport {
    let mut r = ValidationReport::default();
    if def.study_id.trim().is_empty() {
        r.error("study_id_empty", "study_id", "study_id must not be empty");
    }

    if def.areas.is_empty() {
        r.error("no_areas", "areas", "study declares no areas");
    }
    let mut area_ids = BTreeSet::new();
    for a in &def.areas {
        if a.area_id.as_str().is_empty() {
            r.error("area_id_empty", "areas", "area_id must not be empty");
        }
        if !area_ids.insert(&a.area_id) {
            r.error("duplicate_area", a.area_id.to_string(), format!("area_id `{}` declared twice", a.area_id));
        }
    }
    let mut ranks: Vec<u32> = def.areas.iter().map(|a| a.origin_rank).collect();
    ranks.sort_unstable();
    let expected: Vec<u32> = (1..=def.areas.len() as u32).collect();
    if ranks != expected {
        r.push(
            Severity::Error,
            "origin_rank_not_permutation",
            "areas",
            "origin_rank values must be a permutation of 1..N",
            Some(format!("{ranks:?}")),
            Some(format!("1..={}", def.areas.len())),
        );
    }

    let mut seq_ids = BTreeSet::new();
    let mut per_area: BTreeMap<&AreaId, usize> = BTreeMap::new();
    for m in &def.stimuli {
        if !seq_ids.insert(&m.sequence_id) {
            r.error(
                "duplicate_sequence",
                m.sequence_id.to_string(),
                format!("sequence_id `{}` declared twice", m.sequence_id),
            );
        }
        if !area_ids.contains(&m.area_id) {
            r.error(
                "unknown_area",
                m.sequence_id.to_string(),
                format!("stimulus references undeclared area `{}`", m.area_id),
            );
        }
        *per_area.entry(&m.area_id).or_default() += 1;
        let mut mr = validate_sequence_manifest(m, def.fps_tolerance);
        let derived = core::mem::take(&mut mr.derived);
        r.merge(mr, if strict { None } else { Some(Severity::Warning) });
        for (k, v) in derived {
            r.derived.insert(format!("{}.{k}", m.sequence_id), v);
        }
    }
    for a in &def.areas {
        let n = per_area.get(&a.area_id).copied().unwrap_or(0);
        if n != 1 {
            r.push(
                Severity::Error,
                "stimulus_count",
                a.area_id.to_string(),
                "each area needs exactly one stimulus sequence",
                Some(n.to_string()),
                Some("1".into()),
            );
        }
    }

    r.merge(validate_schedule(&def.schedule), None);
    r.merge(validate_instrument(&def.instrument), None);

    for h in &def.highlighted_areas {
        if !area_ids.contains(h) {
            r.error("unknown_area", format!("highlighted_areas.{h}"), format!("undeclared area `{h}`"));
        }
    }

    for d in &def.datasets {
        if !area_ids.contains(&d.area_id) {
            r.error("unknown_area", format!("datasets.{}", d.area_id), format!("undeclared area `{}`", d.area_id));
        }
        let mut dr = validate_dataset_composition(d, def.composition_tolerance_pp);
        let derived = core::mem::take(&mut dr.derived);
        r.merge(dr, None);
        for (k, v) in derived {
            r.derived.insert(format!("datasets.{}.{k}", d.area_id), v);
        }
    }

    if let Some(c) = &def.lora {
        r.merge(validate_lora_config(c), None);
    }

    for (zone, range) in &def.zone_limits {
        if !area_ids.contains(zone) {
            r.error("unknown_area", format!("zone_limits.{zone}"), format!("undeclared area `{zone}`"));
        }
        if !(range.min_m > 0.0 && range.min_m <= range.max_m) {
            r.push(
                Severity::Error,
                "invalid_height_range",
                format!("zone_limits.{zone}"),
                "height limits need 0 < min_m <= max_m",
                Some(format!("[{}, {}]", range.min_m, range.max_m)),
                None,
            );
        }
    }

    if let Some(g) = &def.sector_grid {
        validate_grid_spec(def, g, &area_ids, &mut r);
    }
    r
}

fn validate_grid_spec(def: &StudyDefinition, g: &SectorGridSpec, areas: &BTreeSet<&AreaId>, r: &mut ValidationReport) {
    if g.sector_size_m > 0 {
        let ratio = g.extent_m as f64 / g.sector_size_m as f64;
        r.derived.insert("sector_grid.sectors_per_side".into(), ratio);
        if let Some(expected) = g.expected_sectors {
            let exact = g.extent_m.is_multiple_of(g.sector_size_m) && (g.extent_m / g.sector_size_m).pow(2) == expected;
            if !exact {
                r.push(
                    Severity::Warning,
                    "grid_figures_inconsistent",
                    "sector_grid",
                    format!(
                        "{} m extent with {} m sectors does not give {} sectors",
                        g.extent_m, g.sector_size_m, expected
                    ),
                    Some(format!("{ratio} per side")),
                    Some(format!("{expected} sectors")),
                );
            }
        }
    }
    for a in &g.assignments {
        if !areas.contains(&a.area_id) {
            r.error(
                "unknown_area",
                format!("sector_grid.r{}c{}", a.row, a.col),
                format!("undeclared area `{}`", a.area_id),
            );
        }
    }
    match build_sector_grid(g.extent_m, g.sector_size_m, &g.assignment_map()) {
        Ok(grid) => {
            if g.assignments.len() != grid.sectors.len() {
                r.error("duplicate_sector", "sector_grid", "a sector is assigned more than once");
            }
            if !def.zone_limits.is_empty() {
                if let Err(e) = assign_heights(&grid, &def.zone_limits, def.height_seed) {
                    r.error("height_limits", "zone_limits", e.to_string());
                }
            }
        }
        Err(e) => {
            let code = match e {
                GridError::NonPositive => "grid_not_positive",
                GridError::NonIntegerRatio { .. } => "grid_non_integer_ratio",
                GridError::Coverage { .. } => "grid_coverage",
            };
            r.error(code, "sector_grid", e.to_string());
        }
    }
}
