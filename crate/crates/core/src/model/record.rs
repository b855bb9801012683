use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ClinicalVariable, ModelError, TimeRef};

/// Opaque patient identifier, consistent across nodes.
///
/// Restricted to ASCII letters, digits and `-_.:` so that no free-text
/// (names, addresses) can end up in the key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Pseudonym(String);

impl Pseudonym {
    pub fn new(s: impl Into<String>) -> Result<Self, ModelError> {
        let s = s.into();
        let ok = !s.is_empty()
            && s.len() <= 128
            && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | ':'));
        if ok {
            Ok(Self(s))
        } else {
            Err(ModelError::InvalidPseudonym(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Pseudonym {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Pseudonym::new(s)
    }
}

impl From<Pseudonym> for String {
    fn from(p: Pseudonym) -> Self {
        p.0
    }
}

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub pseudonym: Pseudonym,
    pub sex: Sex,
    pub birth_date: NaiveDate,
    #[serde(default)]
    pub demographics: Vec<(String, String)>,
    #[serde(default)]
    pub family_history: String,
}

impl PatientRecord {
    pub fn new(pseudonym: Pseudonym, sex: Sex, birth_date: NaiveDate) -> Self {
        Self {
            pseudonym,
            sex,
            birth_date,
            demographics: Vec::new(),
            family_history: String::new(),
        }
    }

    /// Completed years of age on `date`.
    pub fn age_on(&self, date: NaiveDate) -> Option<u32> {
        date.years_since(self.birth_date)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VisitPurpose {
    Baseline,
    FollowUp,
    Emergency,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub visit_id: String,
    pub patient: Pseudonym,
    pub purpose: VisitPurpose,
    pub date: NaiveDate,
    /// Filled in by the store as events are recorded.
    #[serde(default)]
    pub events: Vec<String>,
}

impl Visit {
    pub fn new(visit_id: impl Into<String>, patient: Pseudonym, purpose: VisitPurpose, date: NaiveDate) -> Self {
        Self {
            visit_id: visit_id.into(),
            patient,
            purpose,
            date,
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Examination,
    Diagnosis,
    Treatment,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalEvent {
    pub event_id: String,
    pub event_type: String,
    pub visit: String,
    pub time: TimeRef,
    pub variables: Vec<ClinicalVariable>,
    pub kind: EventKind,
}

impl MedicalEvent {
    pub fn new(
        event_id: impl Into<String>,
        event_type: impl Into<String>,
        visit: impl Into<String>,
        time: TimeRef,
    ) -> Self {
        Self {
            event_id: event_id.into(),
            event_type: event_type.into(),
            visit: visit.into(),
            time,
            variables: Vec::new(),
            kind: EventKind::Examination,
        }
    }

    pub fn with_variable(mut self, cv: ClinicalVariable) -> Self {
        self.variables.push(cv);
        self
    }

    pub fn with_kind(mut self, kind: EventKind) -> Self {
        self.kind = kind;
        self
    }
}
