//! The metadata layer: units, classifications, clinical variable types
//! (CVTs) and medical event types (METs).
//!
//! Nothing can be stored until its CVT has been defined here. The registry
//! only ever grows: ids are never removed, classifications may gain items
//! and METs may gain members.

mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Category, VerticalLevel};

pub use validate::{ConceptVocabulary, ValidationReport, Violation, ViolationCode};
pub(crate) use validate::well_formed_uri;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub symbol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Unit {
    pub fn new(symbol: impl Into<String>) -> Self {
        Self {
            symbol: symbol.into(),
            description: None,
        }
    }
}

/// A closed list of allowed values for an observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub name: String,
    pub items: Vec<String>,
}

impl Classification {
    pub fn new<I, S>(name: impl Into<String>, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            items: items.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, item: &str) -> bool {
        self.items.iter().any(|i| i == item)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalVariableType {
    pub id: String,
    pub name: String,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<String>,
    pub vertical_level: VerticalLevel,
}

impl ClinicalVariableType {
    pub fn new(id: impl Into<String>, name: impl Into<String>, category: Category, level: VerticalLevel) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            category,
            unit: None,
            classification: None,
            vertical_level: level,
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    pub fn with_classification(mut self, classification: impl Into<String>) -> Self {
        self.classification = Some(classification.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalEventType {
    pub id: String,
    pub name: String,
    pub member_cvts: BTreeSet<String>,
    pub vertical_level: VerticalLevel,
}

impl MedicalEventType {
    pub fn new<I, S>(id: impl Into<String>, name: impl Into<String>, members: I, level: VerticalLevel) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            name: name.into(),
            member_cvts: members.into_iter().map(Into::into).collect(),
            vertical_level: level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("{kind} {id:?} is already defined")]
    DuplicateId { kind: &'static str, id: String },
    #[error("CVT name {0:?} is already used by another CVT")]
    DuplicateName(String),
    #[error("CVT {0:?} has category Measurement but no unit")]
    MissingUnit(String),
    #[error("CVT {0:?} has category ObservationByClassification but no classification")]
    MissingClassification(String),
    #[error("CVT {id:?} sets {attribute} which its category does not use")]
    UnexpectedAttribute { id: String, attribute: &'static str },
    #[error("{id:?} refers to unknown {kind} {reference:?}")]
    DanglingReference {
        id: String,
        kind: &'static str,
        reference: String,
    },
    #[error("MET {met:?} refers to unknown CVT {cvt:?}")]
    UnknownCvt { met: String, cvt: String },
    #[error("MET {0:?} must have at least one member CVT")]
    EmptyMemberSet(String),
    #[error("redefinition of MET {0:?} must strictly extend its member set")]
    ShrinkingMemberSet(String),
    #[error("redefinition of classification {0:?} must keep all existing items")]
    ShrinkingClassification(String),
    #[error("invalid definition: {0}")]
    InvalidDefinition(String),
    #[error("registry file: {0}")]
    Format(String),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::DuplicateId { .. } => "DuplicateId",
            RegistryError::DuplicateName(_) => "DuplicateName",
            RegistryError::MissingUnit(_) => "MissingUnit",
            RegistryError::MissingClassification(_) => "MissingClassification",
            RegistryError::UnexpectedAttribute { .. } => "UnexpectedAttribute",
            RegistryError::DanglingReference { .. } => "DanglingReference",
            RegistryError::UnknownCvt { .. } => "UnknownCVT",
            RegistryError::EmptyMemberSet(_) => "EmptyMemberSet",
            RegistryError::ShrinkingMemberSet(_) => "ShrinkingMemberSet",
            RegistryError::ShrinkingClassification(_) => "ShrinkingClassification",
            RegistryError::InvalidDefinition(_) => "InvalidDefinition",
            RegistryError::Format(_) => "RegistryFormat",
        }
    }
}

/// On-disk layout of the registry (JSON).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryFile {
    #[serde(default)]
    pub units: Vec<Unit>,
    #[serde(default)]
    pub classifications: Vec<Classification>,
    #[serde(default)]
    pub cvts: Vec<ClinicalVariableType>,
    #[serde(default)]
    pub mets: Vec<MedicalEventType>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    units: BTreeMap<String, Unit>,
    classifications: BTreeMap<String, Classification>,
    cvts: BTreeMap<String, ClinicalVariableType>,
    cvt_names: BTreeMap<String, String>,
    mets: BTreeMap<String, MedicalEventType>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define_unit(&mut self, unit: Unit) -> Result<String, RegistryError> {
        if unit.symbol.trim().is_empty() {
            return Err(RegistryError::InvalidDefinition("unit symbol is empty".into()));
        }
        if self.units.contains_key(&unit.symbol) {
            return Err(RegistryError::DuplicateId {
                kind: "unit",
                id: unit.symbol,
            });
        }
        let id = unit.symbol.clone();
        self.units.insert(id.clone(), unit);
        Ok(id)
    }

    /// Defines a classification, or extends an existing one with new items.
    pub fn define_classification(&mut self, classification: Classification) -> Result<String, RegistryError> {
        let name = classification.name.clone();
        if name.trim().is_empty() {
            return Err(RegistryError::InvalidDefinition("classification name is empty".into()));
        }
        if classification.items.len() < 2 {
            return Err(RegistryError::InvalidDefinition(format!(
                "classification {name:?} needs at least two items"
            )));
        }
        let mut seen = BTreeSet::new();
        for item in &classification.items {
            if item.is_empty() || !seen.insert(item.as_str()) {
                return Err(RegistryError::InvalidDefinition(format!(
                    "classification {name:?} has an empty or repeated item {item:?}"
                )));
            }
        }
        if let Some(existing) = self.classifications.get(&name) {
            if existing.items.iter().any(|i| !seen.contains(i.as_str())) {
                return Err(RegistryError::ShrinkingClassification(name));
            }
            if existing.items.len() == classification.items.len() {
                return Err(RegistryError::DuplicateId {
                    kind: "classification",
                    id: name,
                });
            }
        }
        self.classifications.insert(name.clone(), classification);
        Ok(name)
    }

    pub fn define_cvt(&mut self, cvt: ClinicalVariableType) -> Result<String, RegistryError> {
        if cvt.id.trim().is_empty() || cvt.name.trim().is_empty() {
            return Err(RegistryError::InvalidDefinition(
                "CVT id and name must be non-empty".into(),
            ));
        }
        if self.cvts.contains_key(&cvt.id) {
            return Err(RegistryError::DuplicateId {
                kind: "CVT",
                id: cvt.id,
            });
        }
        if self.cvt_names.contains_key(&cvt.name) {
            return Err(RegistryError::DuplicateName(cvt.name));
        }
        match (cvt.category, &cvt.unit) {
            (Category::Measurement, None) => return Err(RegistryError::MissingUnit(cvt.id)),
            (Category::Measurement, Some(u)) if !self.units.contains_key(u) => {
                return Err(RegistryError::DanglingReference {
                    id: cvt.id.clone(),
                    kind: "unit",
                    reference: u.clone(),
                })
            }
            (Category::Measurement, Some(_)) | (_, None) => {}
            (_, Some(_)) => {
                return Err(RegistryError::UnexpectedAttribute {
                    id: cvt.id,
                    attribute: "unit",
                })
            }
        }
        match (cvt.category, &cvt.classification) {
            (Category::ObservationByClassification, None) => {
                return Err(RegistryError::MissingClassification(cvt.id))
            }
            (Category::ObservationByClassification, Some(c)) if !self.classifications.contains_key(c) => {
                return Err(RegistryError::DanglingReference {
                    id: cvt.id.clone(),
                    kind: "classification",
                    reference: c.clone(),
                })
            }
            (Category::ObservationByClassification, Some(_)) | (_, None) => {}
            (_, Some(_)) => {
                return Err(RegistryError::UnexpectedAttribute {
                    id: cvt.id,
                    attribute: "classification",
                })
            }
        }
        let id = cvt.id.clone();
        self.cvt_names.insert(cvt.name.clone(), id.clone());
        self.cvts.insert(id.clone(), cvt);
        Ok(id)
    }

    /// Defines a MET, or extends an existing one with a strictly larger member set.
    pub fn define_met(&mut self, met: MedicalEventType) -> Result<String, RegistryError> {
        if met.id.trim().is_empty() {
            return Err(RegistryError::InvalidDefinition("MET id is empty".into()));
        }
        if met.member_cvts.is_empty() {
            return Err(RegistryError::EmptyMemberSet(met.id));
        }
        if let Some(missing) = met.member_cvts.iter().find(|c| !self.cvts.contains_key(*c)) {
            return Err(RegistryError::UnknownCvt {
                met: met.id.clone(),
                cvt: missing.clone(),
            });
        }
        if let Some(existing) = self.mets.get(&met.id) {
            if existing.vertical_level != met.vertical_level {
                return Err(RegistryError::InvalidDefinition(format!(
                    "MET {:?} cannot change its vertical level",
                    met.id
                )));
            }
            if !existing.member_cvts.is_subset(&met.member_cvts) {
                return Err(RegistryError::ShrinkingMemberSet(met.id));
            }
            if existing.member_cvts.len() == met.member_cvts.len() {
                return Err(RegistryError::DuplicateId {
                    kind: "MET",
                    id: met.id,
                });
            }
        }
        let id = met.id.clone();
        self.mets.insert(id.clone(), met);
        Ok(id)
    }

    pub fn unit(&self, symbol: &str) -> Option<&Unit> {
        self.units.get(symbol)
    }

    pub fn classification(&self, name: &str) -> Option<&Classification> {
        self.classifications.get(name)
    }

    pub fn cvt(&self, id: &str) -> Option<&ClinicalVariableType> {
        self.cvts.get(id)
    }

    pub fn cvt_by_name(&self, name: &str) -> Option<&ClinicalVariableType> {
        self.cvt_names.get(name).and_then(|id| self.cvts.get(id))
    }

    pub fn met(&self, id: &str) -> Option<&MedicalEventType> {
        self.mets.get(id)
    }

    pub fn units(&self) -> impl Iterator<Item = &Unit> {
        self.units.values()
    }

    pub fn classifications(&self) -> impl Iterator<Item = &Classification> {
        self.classifications.values()
    }

    pub fn cvts(&self) -> impl Iterator<Item = &ClinicalVariableType> {
        self.cvts.values()
    }

    pub fn mets(&self) -> impl Iterator<Item = &MedicalEventType> {
        self.mets.values()
    }

    /// True when `self` can be reached from `older` by monotone evolution.
    pub fn extends(&self, older: &Registry) -> bool {
        older.units.keys().all(|k| self.units.contains_key(k))
            && older.cvts.iter().all(|(k, v)| self.cvts.get(k) == Some(v))
            && older.classifications.iter().all(|(k, v)| {
                self.classifications
                    .get(k)
                    .is_some_and(|n| v.items.iter().all(|i| n.contains(i)))
            })
            && older.mets.iter().all(|(k, v)| {
                self.mets
                    .get(k)
                    .is_some_and(|n| v.member_cvts.is_subset(&n.member_cvts))
            })
    }

    pub fn to_file(&self) -> RegistryFile {
        RegistryFile {
            units: self.units.values().cloned().collect(),
            classifications: self.classifications.values().cloned().collect(),
            cvts: self.cvts.values().cloned().collect(),
            mets: self.mets.values().cloned().collect(),
        }
    }

    /// Builds a registry by replaying every definition in the file.
    pub fn from_file(file: RegistryFile) -> Result<Self, RegistryError> {
        let mut reg = Registry::new();
        reg.merge(file, false)?;
        Ok(reg)
    }

    /// Applies the definitions in `file` on top of this registry.
    ///
    /// With `skip_identical`, entries equal to what is already registered
    /// are ignored, so re-applying the same file is a no-op. Anything else
    /// goes through the normal `define_*` checks.
    /// The merge is all-or-nothing.
    pub fn merge(&mut self, file: RegistryFile, skip_identical: bool) -> Result<usize, RegistryError> {
        let mut next = self.clone();
        let applied = next.merge_in_place(file, skip_identical)?;
        *self = next;
        Ok(applied)
    }

    fn merge_in_place(&mut self, file: RegistryFile, skip_identical: bool) -> Result<usize, RegistryError> {
        let mut applied = 0;
        for u in file.units {
            if skip_identical && self.units.get(&u.symbol) == Some(&u) {
                continue;
            }
            self.define_unit(u)?;
            applied += 1;
        }
        for c in file.classifications {
            if skip_identical && self.classifications.get(&c.name) == Some(&c) {
                continue;
            }
            self.define_classification(c)?;
            applied += 1;
        }
        for c in file.cvts {
            if skip_identical && self.cvts.get(&c.id) == Some(&c) {
                continue;
            }
            self.define_cvt(c)?;
            applied += 1;
        }
        for m in file.mets {
            if skip_identical && self.mets.get(&m.id) == Some(&m) {
                continue;
            }
            self.define_met(m)?;
            applied += 1;
        }
        Ok(applied)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("registry serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = serde_json::from_str(text).map_err(|e| RegistryError::Format(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|e| RegistryError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
