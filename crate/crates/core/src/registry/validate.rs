use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Registry;
use crate::model::{ClinicalVariable, Payload};

/// Something that can say whether a concept URI is known.
pub trait ConceptVocabulary {
    fn knows_concept(&self, uri: &str) -> bool;
}

impl ConceptVocabulary for BTreeSet<String> {
    fn knows_concept(&self, uri: &str) -> bool {
        self.contains(uri)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    UnknownType,
    CategoryMismatch,
    UnitMismatch,
    ValueNotInClassification,
    MissingClassification,
    #[serde(rename = "UnknownConceptURI")]
    UnknownConceptUri,
    EventTypeMismatch,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 7] = [
        ViolationCode::UnknownType,
        ViolationCode::CategoryMismatch,
        ViolationCode::UnitMismatch,
        ViolationCode::ValueNotInClassification,
        ViolationCode::MissingClassification,
        ViolationCode::UnknownConceptUri,
        ViolationCode::EventTypeMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnknownType => "UnknownType",
            ViolationCode::CategoryMismatch => "CategoryMismatch",
            ViolationCode::UnitMismatch => "UnitMismatch",
            ViolationCode::ValueNotInClassification => "ValueNotInClassification",
            ViolationCode::MissingClassification => "MissingClassification",
            ViolationCode::UnknownConceptUri => "UnknownConceptURI",
            ViolationCode::EventTypeMismatch => "EventTypeMismatch",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

/// Outcome of checking variables against the registry. `valid` is true
/// exactly when `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok() -> Self {
        Self {
            valid: true,
            violations: Vec::new(),
        }
    }

    fn push(&mut self, code: ViolationCode, detail: String) {
        self.violations.push(Violation { code, detail });
        self.valid = false;
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.valid &= other.valid;
        self.violations.extend(other.violations);
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.code, v.detail))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// `scheme:localname`, both parts non-empty, no whitespace.
pub(crate) fn well_formed_uri(uri: &str) -> bool {
    match uri.split_once(':') {
        Some((scheme, local)) => {
            !scheme.is_empty() && !local.is_empty() && !uri.chars().any(char::is_whitespace)
        }
        None => false,
    }
}

impl Registry {
    /// Checks one variable for storage inside an event of type `met_id`.
    ///
    /// Every applicable check runs; the report lists all violations found.
    /// Concept URIs are checked against `vocabulary` when one is given and
    /// only for well-formedness otherwise.
    pub fn validate_variable(
        &self,
        cv: &ClinicalVariable,
        met_id: &str,
        vocabulary: Option<&dyn ConceptVocabulary>,
    ) -> ValidationReport {
        let mut report = ValidationReport::ok();

        match self.met(met_id) {
            None => report.push(
                ViolationCode::EventTypeMismatch,
                format!("event type {met_id:?} is not defined"),
            ),
            Some(met) if !met.member_cvts.contains(&cv.cvt_id) => report.push(
                ViolationCode::EventTypeMismatch,
                format!("CVT {:?} is not a member of event type {met_id:?}", cv.cvt_id),
            ),
            Some(_) => {}
        }

        let Some(cvt) = self.cvt(&cv.cvt_id) else {
            report.push(ViolationCode::UnknownType, format!("CVT {:?} is not defined", cv.cvt_id));
            return report;
        };

        if cv.category() != cvt.category {
            report.push(
                ViolationCode::CategoryMismatch,
                format!("CVT {:?} expects {}, got {}", cvt.id, cvt.category, cv.category()),
            );
            return report;
        }

        match &cv.payload {
            Payload::Measurement { unit, .. } => {
                if cvt.unit.as_deref() != Some(unit.as_str()) {
                    report.push(
                        ViolationCode::UnitMismatch,
                        format!(
                            "CVT {:?} expects unit {:?}, got {unit:?}",
                            cvt.id,
                            cvt.unit.as_deref().unwrap_or("")
                        ),
                    );
                }
            }
            Payload::ObservationByClassification { item } => {
                match cvt.classification.as_deref().and_then(|c| self.classification(c)) {
                    None => report.push(
                        ViolationCode::MissingClassification,
                        format!("CVT {:?} has no registered classification", cvt.id),
                    ),
                    Some(class) if !class.contains(item) => report.push(
                        ViolationCode::ValueNotInClassification,
                        format!("{item:?} is not an item of {:?}", class.name),
                    ),
                    Some(_) => {}
                }
            }
            Payload::MedicalConceptInstance { concept_uri } => {
                let known = match vocabulary {
                    Some(v) => v.knows_concept(concept_uri),
                    None => well_formed_uri(concept_uri),
                };
                if !known {
                    report.push(
                        ViolationCode::UnknownConceptUri,
                        format!("concept {concept_uri:?} is not known"),
                    );
                }
            }
            _ => {}
        }
        report
    }
}
