//! Data-layer types: patients, visits, medical events, clinical variables
//! and the time model attached to events.
//!
//! Everything here is a plain value object. Validation against the
//! metadata layer lives in [`crate::registry`], storage in [`crate::store`].

mod level;
mod record;
mod time;
mod variable;

pub use level::VerticalLevel;
pub use record::{EventKind, MedicalEvent, PatientRecord, Pseudonym, Sex, Visit, VisitPurpose};
pub use time::{resolve_time, DateRange, Resolution, ResolvedInterval, TemporalRelation, TimeRef};
pub use variable::{Category, ClinicalVariable, DicomTag, DicomTagValue, Payload};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("pseudonym must be a non-empty opaque token, got {0:?}")]
    InvalidPseudonym(String),
    #[error("interval start {start} is after end {end}")]
    IntervalOrder {
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },
    #[error("malformed DICOM tag {0:?} (expected 8 hex digits)")]
    MalformedTag(String),
    #[error("relative time cycle through event {0}")]
    RelativeTimeCycle(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::InvalidPseudonym(_) => "InvalidPseudonym",
            ModelError::IntervalOrder { .. } => "IntervalOrder",
            ModelError::MalformedTag(_) => "MalformedTag",
            ModelError::RelativeTimeCycle(_) => "RelativeTimeCycle",
        }
    }
}
