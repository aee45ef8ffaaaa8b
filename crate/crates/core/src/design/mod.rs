//! Study configuration and the quantitative constraints of the stimulus
//! production pipeline.

mod captions;
mod grid;
mod manifest;
mod report;
mod study;

pub use captions::{caption_token_stats, EmptyCaptions, TokenFrequencyReport, TokenStat};
pub use grid::{assign_heights, build_sector_grid, sector_id, GridError, HeightError, HeightRange, Sector, SectorGrid};
pub use manifest::{
    validate_dataset_composition, validate_instrument, validate_lora_config, validate_schedule,
    validate_sequence_manifest, AnalyticalRole, Composition, DatasetManifest, ImageRecord, InstrumentItem,
    LoraTrainConfig, PhaseSchedule, QuestionnaireInstrument, StimulusManifest, Typology,
    DEFAULT_COMPOSITION_TOLERANCE_PP, DEFAULT_FPS_TOLERANCE, MAX_DENOISING_STRENGTH,
};
pub use report::{Finding, Severity, ValidationReport};
pub use study::{validate_study, SectorAssignment, SectorGridSpec, StudyDefinition};
