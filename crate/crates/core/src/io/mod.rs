//! Annotation ingestion, configuration files and report emission.

pub mod config;
pub mod dota;
pub mod report;

pub use config::EngineConfig;
pub use dota::{
    parse_dota_annotation, parse_dota_reader, record_to_gt, AnnotationRecord, ClassMap,
};
pub use report::{
    emit_assignment, emit_imbalance, emit_sweep, ReportFormat, ASSIGNMENT_CSV_HEADER,
    IMBALANCE_CSV_HEADER,
};
