//! Stimulus, dataset, training-config, schedule and instrument validators.
//! All validators are pure and report rather than fail.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::report::{Severity, ValidationReport};
use crate::model::{AreaId, SequenceId};

pub const MAX_DENOISING_STRENGTH: f64 = 0.68;
pub const DEFAULT_FPS_TOLERANCE: f64 = 0.5;
pub const DEFAULT_COMPOSITION_TOLERANCE_PP: f64 = 3.0;

/// An externally produced video stimulus for one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusManifest {
    pub sequence_id: SequenceId,
    pub area_id: AreaId,
    pub media_uri: String,
    pub duration_s: f64,
    pub frame_count: u32,
    pub nominal_fps: f64,
    pub denoising_strength: f64,
}

// `!(x > 0.0)` also rejects NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_sequence_manifest(m: &StimulusManifest, fps_tolerance: f64) -> ValidationReport {
    let mut r = ValidationReport::default();
    let subject = m.sequence_id.to_string();
    if !(m.duration_s > 0.0) {
        r.push(
            Severity::Error,
            "duration_not_positive",
            subject.clone(),
            "duration_s must be positive",
            Some(format!("{}", m.duration_s)),
            Some("> 0".into()),
        );
    }
    if m.frame_count == 0 {
        r.push(
            Severity::Error,
            "frame_count_not_positive",
            subject.clone(),
            "frame_count must be positive",
            Some("0".into()),
            Some("> 0".into()),
        );
    }
    if m.duration_s > 0.0 && m.frame_count > 0 {
        let fps = m.frame_count as f64 / m.duration_s;
        r.derived.insert("fps".into(), fps);
        if (fps - m.nominal_fps).abs() > fps_tolerance {
            r.push(
                Severity::Error,
                "fps_mismatch",
                subject.clone(),
                format!("frame_count / duration_s deviates from nominal_fps by more than {fps_tolerance}"),
                Some(format!("{fps:.2}")),
                Some(format!("{} ± {}", m.nominal_fps, fps_tolerance)),
            );
        }
    }
    if !(0.0..=1.0).contains(&m.denoising_strength) {
        r.push(
            Severity::Error,
            "denoising_out_of_range",
            subject.clone(),
            "denoising_strength must be a fraction in [0, 1]",
            Some(format!("{}", m.denoising_strength)),
            Some("[0, 1]".into()),
        );
    } else if m.denoising_strength > MAX_DENOISING_STRENGTH {
        r.push(
            Severity::Error,
            "denoising_exceeds_bound",
            subject.clone(),
            format!("denoising_strength exceeds {MAX_DENOISING_STRENGTH}"),
            Some(format!("{}", m.denoising_strength)),
            Some(format!("<= {MAX_DENOISING_STRENGTH}")),
        );
    }
    if m.media_uri.trim().is_empty() {
        r.push(Severity::Warning, "media_uri_missing", subject, "media_uri is empty", None, None);
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Typology {
    StreetView,
    Facade,
    Detail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub typology: Typology,
    #[serde(default)]
    pub width_px: u32,
    #[serde(default)]
    pub height_px: u32,
}

/// Target typology shares in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub street: f64,
    pub facade: f64,
    pub detail: f64,
}

impl Default for Composition {
    fn default() -> Self {
        Self { street: 63.0, facade: 35.0, detail: 2.0 }
    }
}

impl Composition {
    fn target(&self, t: Typology) -> f64 {
        match t {
            Typology::StreetView => self.street,
            Typology::Facade => self.facade,
            Typology::Detail => self.detail,
        }
    }
}

fn default_size_range() -> [u32; 2] {
    [60, 66]
}

/// One area's curated training image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub area_id: AreaId,
    #[serde(default)]
    pub image_records: Vec<ImageRecord>,
    #[serde(default)]
    pub target_composition: Composition,
    #[serde(default = "default_size_range")]
    pub size_range: [u32; 2],
}

impl DatasetManifest {
    pub fn new(area_id: impl Into<AreaId>, image_records: Vec<ImageRecord>) -> Self {
        Self {
            area_id: area_id.into(),
            image_records,
            target_composition: Composition::default(),
            size_range: default_size_range(),
        }
    }

    pub fn count(&self, t: Typology) -> usize {
        self.image_records.iter().filter(|r| r.typology == t).count()
    }
}

pub fn validate_dataset_composition(d: &DatasetManifest, tolerance_pp: f64) -> ValidationReport {
    let mut r = ValidationReport::default();
    let subject = d.area_id.to_string();
    let c = d.target_composition;
    let total = c.street + c.facade + c.detail;
    if (total - 100.0).abs() > 1e-9 {
        r.push(
            Severity::Error,
            "composition_not_100",
            subject.clone(),
            "target composition percentages must sum to 100",
            Some(format!("{total}")),
            Some("100".into()),
        );
    }
    let n = d.image_records.len();
    if n == 0 {
        r.error("empty_dataset", subject, "dataset has no images");
        return r;
    }
    let [lo, hi] = d.size_range;
    if (n as u32) < lo || (n as u32) > hi {
        r.push(
            Severity::Error,
            if (n as u32) < lo { "size_below_range" } else { "size_above_range" },
            subject.clone(),
            format!("dataset size must lie within [{lo}, {hi}]"),
            Some(n.to_string()),
            Some(format!("[{lo}, {hi}]")),
        );
    }
    for t in [Typology::StreetView, Typology::Facade, Typology::Detail] {
        let share = d.count(t) as f64 * 100.0 / n as f64;
        let key = match t {
            Typology::StreetView => "share_street",
            Typology::Facade => "share_facade",
            Typology::Detail => "share_detail",
        };
        r.derived.insert(key.into(), share);
        let target = c.target(t);
        if (share - target).abs() > tolerance_pp {
            r.push(
                Severity::Error,
                "composition_out_of_tolerance",
                format!("{subject}.{key}"),
                format!("{t:?} share deviates from target by more than {tolerance_pp} pp"),
                Some(format!("{share:.1}%")),
                Some(format!("{target}% ± {tolerance_pp}")),
            );
        }
    }
    r
}

/// Fine-tuning configuration, represented and validated only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraTrainConfig {
    pub max_resolution_px: u32,
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
}

impl LoraTrainConfig {
    pub const REFERENCE: LoraTrainConfig = LoraTrainConfig {
        max_resolution_px: 768,
        epochs: 12,
        batch_size: 2,
        learning_rate: 0.00002,
    };
}

// `!(x > 0.0)` also rejects NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_lora_config(c: &LoraTrainConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let reference = LoraTrainConfig::REFERENCE;
    let int_fields = [
        ("max_resolution_px", c.max_resolution_px, reference.max_resolution_px),
        ("epochs", c.epochs, reference.epochs),
        ("batch_size", c.batch_size, reference.batch_size),
    ];
    for (name, value, refv) in int_fields {
        if value == 0 {
            r.push(
                Severity::Error,
                "not_positive",
                name,
                format!("{name} must be positive"),
                Some("0".into()),
                Some("> 0".into()),
            );
        } else if value != refv {
            r.push(
                Severity::Info,
                "differs_from_reference",
                name,
                format!("{name} differs from the reference configuration"),
                Some(value.to_string()),
                Some(refv.to_string()),
            );
        }
    }
    if !(c.learning_rate > 0.0) {
        r.push(
            Severity::Error,
            "not_positive",
            "learning_rate",
            "learning_rate must be positive",
            Some(format!("{}", c.learning_rate)),
            Some("> 0".into()),
        );
    } else if c.learning_rate != reference.learning_rate {
        r.push(
            Severity::Info,
            "differs_from_reference",
            "learning_rate",
            "learning_rate differs from the reference configuration",
            Some(format!("{}", c.learning_rate)),
            Some(format!("{}", reference.learning_rate)),
        );
    }
    r
}

/// Durations in minutes; loop counts per viewing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseSchedule {
    pub pre_viewing_min: u32,
    pub familiarization_min: u32,
    pub familiarization_loops: u32,
    pub in_depth_min: u32,
    pub in_depth_loops_per_sequence: u32,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            pre_viewing_min: 5,
            familiarization_min: 15,
            familiarization_loops: 2,
            in_depth_min: 60,
            in_depth_loops_per_sequence: 5,
        }
    }
}

pub fn validate_schedule(s: &PhaseSchedule) -> ValidationReport {
    let mut r = ValidationReport::default();
    let fields = [
        ("pre_viewing_min", s.pre_viewing_min),
        ("familiarization_min", s.familiarization_min),
        ("familiarization_loops", s.familiarization_loops),
        ("in_depth_min", s.in_depth_min),
        ("in_depth_loops_per_sequence", s.in_depth_loops_per_sequence),
    ];
    for (name, v) in fields {
        if v == 0 {
            r.error("not_positive", format!("schedule.{name}"), format!("{name} must be positive"));
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticalRole {
    FamiliarityRate,
    AccuracyRate,
    SemanticAnalysis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentItem {
    pub item_no: u8,
    pub analytical_role: AnalyticalRole,
    pub prompt_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireInstrument {
    pub items: Vec<InstrumentItem>,
}

impl Default for QuestionnaireInstrument {
    fn default() -> Self {
        use AnalyticalRole::*;
        let items = [
            (FamiliarityRate, "Please indicate your familiarity with each of the areas listed below by underlining the option that best applies to you. (Not Familiar, Quick Visits, Regular Attendance, and Continuous Residence)"),
            (AccuracyRate, "What district do you think the current film is depicting?"),
            (SemanticAnalysis, "What made you think it was this particular district, what made it feel familiar to you?"),
            (SemanticAnalysis, "Are there any specific visual elements or features that led you to this conclusion?"),
            (SemanticAnalysis, "Are there any elements that feel 'wrong' or out of place?"),
            (SemanticAnalysis, "What features could be adjusted or added to make the location more recognizable in the video?"),
        ];
        Self {
            items: items
                .into_iter()
                .enumerate()
                .map(|(i, (role, text))| InstrumentItem {
                    item_no: i as u8,
                    analytical_role: role,
                    prompt_text: text.into(),
                })
                .collect(),
        }
    }
}

pub fn validate_instrument(q: &QuestionnaireInstrument) -> ValidationReport {
    let mut r = ValidationReport::default();
    let numbers: Vec<u8> = q.items.iter().map(|i| i.item_no).collect();
    if numbers != [0, 1, 2, 3, 4, 5] {
        r.push(
            Severity::Error,
            "instrument_items",
            "instrument",
            "instrument must list items 0..5 in order",
            Some(format!("{numbers:?}")),
            Some("[0, 1, 2, 3, 4, 5]".into()),
        );
    }
    for item in &q.items {
        let expected = match item.item_no {
            0 => AnalyticalRole::FamiliarityRate,
            1 => AnalyticalRole::AccuracyRate,
            _ => AnalyticalRole::SemanticAnalysis,
        };
        if item.analytical_role != expected {
            r.push(
                Severity::Error,
                "instrument_role",
                format!("instrument.item{}", item.item_no),
                "item has the wrong analytical role",
                Some(format!("{:?}", item.analytical_role)),
                Some(format!("{expected:?}")),
            );
        }
    }
    r
}
