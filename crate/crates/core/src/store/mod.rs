//! Validated record store for a single node (hospital).
//!
//! Patients, visits and events live in insertion-ordered maps so that
//! persisting, reloading and persisting again produces identical bytes.
//! Every event is checked against the registry before it is stored, and
//! a failed check leaves the store untouched.

mod csv_ingest;
mod dicom;
mod persist;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    resolve_time, MedicalEvent, ModelError, PatientRecord, Payload, Resolution, VerticalLevel, Visit,
};
use crate::registry::{ConceptVocabulary, Registry, RegistryError, ValidationReport, ViolationCode};

pub use csv_ingest::{ColumnMapping, IngestMapping, IngestReport, ParseRule, RejectedRow};
pub use dicom::{assemble_series, parse_dicom_sidecar, to_sidecar};
pub use persist::{StoreSnapshot, EVENTS_FILE, PATIENTS_FILE, REGISTRY_FILE, VISITS_FILE};
pub use stats::{CvtStats, StoreStats};

use stats::StatsTracker;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("validation failed: {0}")]
    ValidationFailed(ValidationReport),
    #[error("unknown patient {0:?}")]
    UnknownPatient(String),
    #[error("unknown visit {0:?}")]
    UnknownVisit(String),
    #[error("{kind} {id:?} already exists")]
    Duplicate { kind: &'static str, id: String },
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error("ingest mapping: {0}")]
    Mapping(String),
    #[error("malformed DICOM tag at line {0}")]
    MalformedTag(usize),
    #[error("DICOM sidecar lacks tag {0}")]
    MissingDicomTag(String),
    #[error("no DICOM instances for study {study:?} series {series:?}")]
    EmptySeries { study: String, series: String },
    #[error("I/O: {0}")]
    Io(String),
    #[error("corrupt store data: {0}")]
    Corrupt(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::ValidationFailed(_) => "ValidationFailed",
            StoreError::UnknownPatient(_) => "UnknownPatient",
            StoreError::UnknownVisit(_) => "UnknownVisit",
            StoreError::Duplicate { .. } => "DuplicateId",
            StoreError::Inconsistent(_) => "Inconsistent",
            StoreError::Model(e) => e.code(),
            StoreError::Registry(e) => e.code(),
            StoreError::MalformedCsv { .. } => "MalformedCSV",
            StoreError::Mapping(_) => "MappingError",
            StoreError::MalformedTag(_) => "MalformedTag",
            StoreError::MissingDicomTag(_) => "MissingDicomTag",
            StoreError::EmptySeries { .. } => "EmptySeries",
            StoreError::Io(_) => "Io",
            StoreError::Corrupt(_) => "Corrupt",
        }
    }
}

/// One event placed on a patient's timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub event_id: String,
    pub event_type: String,
    pub time: Resolution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelGroup {
    pub level: VerticalLevel,
    pub entries: Vec<TimelineEntry>,
}

/// Events of one patient grouped by vertical level, each group in time order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub patient: String,
    pub groups: Vec<LevelGroup>,
}

impl Timeline {
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Secondary lookups from ids to the events mentioning them.
#[derive(Debug, Clone, Default)]
pub(crate) struct EventIndex {
    pub(crate) by_event_type: BTreeMap<String, BTreeSet<String>>,
    pub(crate) by_cvt: BTreeMap<String, BTreeSet<String>>,
    pub(crate) by_concept: BTreeMap<String, BTreeSet<String>>,
}

impl EventIndex {
    fn add(&mut self, event: &MedicalEvent) {
        let id = &event.event_id;
        self.by_event_type
            .entry(event.event_type.clone())
            .or_default()
            .insert(id.clone());
        for cv in &event.variables {
            self.by_cvt.entry(cv.cvt_id.clone()).or_default().insert(id.clone());
            if let Payload::MedicalConceptInstance { concept_uri } = &cv.payload {
                self.by_concept
                    .entry(concept_uri.clone())
                    .or_default()
                    .insert(id.clone());
            }
        }
    }
}

#[derive(Clone)]
pub struct NodeStore {
    node_id: String,
    registry: Registry,
    vocabulary: Option<Arc<dyn ConceptVocabulary + Send + Sync>>,
    patients: IndexMap<String, PatientRecord>,
    visits: IndexMap<String, Visit>,
    events: IndexMap<String, MedicalEvent>,
    tracker: StatsTracker,
    index: EventIndex,
}

impl std::fmt::Debug for NodeStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeStore")
            .field("node_id", &self.node_id)
            .field("patients", &self.patients.len())
            .field("visits", &self.visits.len())
            .field("events", &self.events.len())
            .finish()
    }
}

impl NodeStore {
    pub fn new(node_id: impl Into<String>, registry: Registry) -> Self {
        Self {
            node_id: node_id.into(),
            registry,
            vocabulary: None,
            patients: IndexMap::new(),
            visits: IndexMap::new(),
            events: IndexMap::new(),
            tracker: StatsTracker::default(),
            index: EventIndex::default(),
        }
    }

    /// Checks concept instances against `vocabulary` instead of only
    /// checking that their URIs are well formed.
    pub fn with_vocabulary(mut self, vocabulary: Arc<dyn ConceptVocabulary + Send + Sync>) -> Self {
        self.vocabulary = Some(vocabulary);
        self
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Evolves the registry. Only monotone changes are accepted, so data
    /// already stored stays valid.
    pub fn evolve_registry<F>(&mut self, change: F) -> Result<(), RegistryError>
    where
        F: FnOnce(&mut Registry) -> Result<(), RegistryError>,
    {
        let mut next = self.registry.clone();
        change(&mut next)?;
        if !next.extends(&self.registry) {
            return Err(RegistryError::InvalidDefinition(
                "registry changes must be additive".into(),
            ));
        }
        self.registry = next;
        Ok(())
    }

    pub fn stats(&self) -> &StoreStats {
        &self.tracker.stats
    }

    pub(crate) fn index(&self) -> &EventIndex {
        &self.index
    }

    pub fn patient(&self, pseudonym: &str) -> Option<&PatientRecord> {
        self.patients.get(pseudonym)
    }

    pub fn visit(&self, visit_id: &str) -> Option<&Visit> {
        self.visits.get(visit_id)
    }

    pub fn event(&self, event_id: &str) -> Option<&MedicalEvent> {
        self.events.get(event_id)
    }

    pub fn patients(&self) -> impl Iterator<Item = &PatientRecord> {
        self.patients.values()
    }

    pub fn visits(&self) -> impl Iterator<Item = &Visit> {
        self.visits.values()
    }

    /// Events in insertion order.
    pub fn events(&self) -> impl Iterator<Item = &MedicalEvent> {
        self.events.values()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// The patient an event belongs to, through its visit.
    pub fn patient_of(&self, event: &MedicalEvent) -> Option<&PatientRecord> {
        let visit = self.visits.get(&event.visit)?;
        self.patients.get(visit.patient.as_str())
    }

    pub fn resolve(&self, event: &MedicalEvent) -> Result<Resolution, ModelError> {
        resolve_time(event, |id| self.events.get(id))
    }

    pub fn add_patient(&mut self, patient: PatientRecord) -> Result<(), StoreError> {
        let key = patient.pseudonym.as_str().to_string();
        if self.patients.contains_key(&key) {
            return Err(StoreError::Duplicate { kind: "patient", id: key });
        }
        self.patients.insert(key, patient);
        Ok(())
    }

    pub fn add_visit(&mut self, visit: Visit) -> Result<(), StoreError> {
        self.check_visit(&visit, self.patients.get(visit.patient.as_str()))?;
        let mut visit = visit;
        visit.events.clear();
        self.visits.insert(visit.visit_id.clone(), visit);
        Ok(())
    }

    fn check_visit(&self, visit: &Visit, patient: Option<&PatientRecord>) -> Result<(), StoreError> {
        if self.visits.contains_key(&visit.visit_id) {
            return Err(StoreError::Duplicate {
                kind: "visit",
                id: visit.visit_id.clone(),
            });
        }
        let patient = patient.ok_or_else(|| StoreError::UnknownPatient(visit.patient.to_string()))?;
        if patient.pseudonym != visit.patient {
            return Err(StoreError::Inconsistent(format!(
                "visit {} belongs to {}, not {}",
                visit.visit_id, visit.patient, patient.pseudonym
            )));
        }
        if visit.date < patient.birth_date {
            return Err(StoreError::Inconsistent(format!(
                "visit {} on {} precedes birth date {}",
                visit.visit_id, visit.date, patient.birth_date
            )));
        }
        Ok(())
    }

    /// Full validation report for an event, without storing it.
    pub fn validate_event(&self, event: &MedicalEvent) -> ValidationReport {
        let vocab = self.vocabulary.as_deref().map(|v| v as &dyn ConceptVocabulary);
        let mut report = ValidationReport::ok();
        if event.variables.is_empty() && self.registry.met(&event.event_type).is_none() {
            report.merge(ValidationReport {
                valid: false,
                violations: vec![crate::registry::Violation {
                    code: ViolationCode::EventTypeMismatch,
                    detail: format!("event type {:?} is not defined", event.event_type),
                }],
            });
        }
        for cv in &event.variables {
            report.merge(self.registry.validate_variable(cv, &event.event_type, vocab));
        }
        report
    }

    /// Stores `event`, creating `patient` and `visit` first if they are not
    /// stored yet. Either everything is stored or nothing is.
    pub fn record_event(
        &mut self,
        patient: &PatientRecord,
        visit: &Visit,
        event: MedicalEvent,
    ) -> Result<String, StoreError> {
        let new_patient = !self.patients.contains_key(patient.pseudonym.as_str());
        let stored_patient = if new_patient {
            patient
        } else {
            &self.patients[patient.pseudonym.as_str()]
        };
        let new_visit = match self.visits.get(&visit.visit_id) {
            Some(existing) => {
                if existing.patient != patient.pseudonym {
                    return Err(StoreError::Inconsistent(format!(
                        "visit {} belongs to {}",
                        visit.visit_id, existing.patient
                    )));
                }
                false
            }
            None => {
                self.check_visit(visit, Some(stored_patient))?;
                true
            }
        };
        if event.visit != visit.visit_id {
            return Err(StoreError::Inconsistent(format!(
                "event {} cites visit {}, not {}",
                event.event_id, event.visit, visit.visit_id
            )));
        }
        self.check_event(&event)?;

        if new_patient {
            self.patients
                .insert(patient.pseudonym.as_str().to_string(), patient.clone());
        }
        if new_visit {
            let mut v = visit.clone();
            v.events.clear();
            self.visits.insert(v.visit_id.clone(), v);
        }
        Ok(self.commit_event(event))
    }

    /// Stores an event under a visit that already exists.
    pub fn append_event(&mut self, event: MedicalEvent) -> Result<String, StoreError> {
        if !self.visits.contains_key(&event.visit) {
            return Err(StoreError::UnknownVisit(event.visit.clone()));
        }
        self.check_event(&event)?;
        Ok(self.commit_event(event))
    }

    fn check_event(&self, event: &MedicalEvent) -> Result<(), StoreError> {
        if event.event_id.is_empty() {
            return Err(StoreError::Inconsistent("event id is empty".into()));
        }
        if self.events.contains_key(&event.event_id) {
            return Err(StoreError::Duplicate {
                kind: "event",
                id: event.event_id.clone(),
            });
        }
        let report = self.validate_event(event);
        if !report.valid {
            return Err(StoreError::ValidationFailed(report));
        }
        resolve_time(event, |id| {
            if id == event.event_id {
                Some(event)
            } else {
                self.events.get(id)
            }
        })?;
        Ok(())
    }

    fn commit_event(&mut self, event: MedicalEvent) -> String {
        let id = event.event_id.clone();
        let level = self.registry.met(&event.event_type).map(|m| m.vertical_level);
        self.tracker.record(&event, level);
        self.index.add(&event);
        if let Some(visit) = self.visits.get_mut(&event.visit) {
            visit.events.push(id.clone());
        }
        self.events.insert(id.clone(), event);
        id
    }

    /// An event id not used in this store yet.
    pub fn fresh_event_id(&self) -> String {
        let mut n = self.events.len() + 1;
        loop {
            let id = format!("{}-E{n:06}", self.node_id);
            if !self.events.contains_key(&id) {
                return id;
            }
            n += 1;
        }
    }

    /// Re-checks every stored variable against the current registry.
    pub fn revalidate(&self) -> ValidationReport {
        let mut report = ValidationReport::ok();
        for event in self.events.values() {
            report.merge(self.validate_event(event));
        }
        report
    }

    /// The patient's events at the requested levels, each level ordered by
    /// resolved start time. Unresolvable times come last, ties keep
    /// insertion order.
    pub fn longitudinal_view(
        &self,
        pseudonym: &str,
        levels: &BTreeSet<VerticalLevel>,
    ) -> Result<Timeline, StoreError> {
        if !self.patients.contains_key(pseudonym) {
            return Err(StoreError::UnknownPatient(pseudonym.to_string()));
        }
        let mut groups: BTreeMap<VerticalLevel, Vec<TimelineEntry>> =
            levels.iter().map(|l| (*l, Vec::new())).collect();
        for event in self.events.values() {
            let Some(patient) = self.patient_of(event) else { continue };
            if patient.pseudonym.as_str() != pseudonym {
                continue;
            }
            let Some(level) = self.registry.met(&event.event_type).map(|m| m.vertical_level) else {
                continue;
            };
            if let Some(group) = groups.get_mut(&level) {
                group.push(TimelineEntry {
                    event_id: event.event_id.clone(),
                    event_type: event.event_type.clone(),
                    time: self.resolve(event).unwrap_or(Resolution::Unresolvable),
                });
            }
        }
        let groups = groups
            .into_iter()
            .map(|(level, mut entries)| {
                entries.sort_by(|a, b| a.time.timeline_cmp(&b.time));
                LevelGroup { level, entries }
            })
            .collect();
        Ok(Timeline {
            patient: pseudonym.to_string(),
            groups,
        })
    }
}

/// A store shared between one writer and many readers. Readers only ever
/// observe fully committed events.
#[derive(Debug, Clone)]
pub struct SharedStore(Arc<RwLock<NodeStore>>);

impl SharedStore {
    pub fn new(store: NodeStore) -> Self {
        Self(Arc::new(RwLock::new(store)))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, NodeStore> {
        self.0.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, NodeStore> {
        self.0.write().unwrap_or_else(|e| e.into_inner())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::model::{Category, ClinicalVariable, Pseudonym, Sex, TimeRef, VisitPurpose};
    use crate::registry::{Classification, ClinicalVariableType, MedicalEventType, Unit};
    use rust_decimal::Decimal;
    use std::str::FromStr;

    pub fn registry() -> Registry {
        let mut r = Registry::new();
        r.define_unit(Unit::new("mL/m²")).unwrap();
        r.define_classification(Classification::new("Severity", ["No", "Mild", "Moderate", "Severe"]))
            .unwrap();
        r.define_cvt(
            ClinicalVariableType::new("SysLVol", "Systolic LV volume", Category::Measurement, VerticalLevel::Organ)
                .with_unit("mL/m²"),
        )
        .unwrap();
        r.define_cvt(
            ClinicalVariableType::new(
                "RVDilation",
                "RV dilation",
                Category::ObservationByClassification,
                VerticalLevel::Organ,
            )
            .with_classification("Severity"),
        )
        .unwrap();
        r.define_cvt(ClinicalVariableType::new(
            "Gene",
            "Gene finding",
            Category::MedicalConceptInstance,
            VerticalLevel::Molecular,
        ))
        .unwrap();
        r.define_met(MedicalEventType::new(
            "CardiacMRI",
            "Cardiac MRI",
            ["SysLVol", "RVDilation"],
            VerticalLevel::Organ,
        ))
        .unwrap();
        r.define_met(MedicalEventType::new("Genomics", "Genomics", ["Gene"], VerticalLevel::Molecular))
            .unwrap();
        r
    }

    pub fn patient(p: &str) -> PatientRecord {
        PatientRecord::new(Pseudonym::new(p).unwrap(), Sex::Male, "2000-01-01".parse().unwrap())
    }

    pub fn visit(id: &str, p: &str, date: &str) -> Visit {
        Visit::new(id, Pseudonym::new(p).unwrap(), VisitPurpose::Baseline, date.parse().unwrap())
    }

    pub fn mri(id: &str, visit: &str, date: &str, severity: &str) -> MedicalEvent {
        MedicalEvent::new(id, "CardiacMRI", visit, TimeRef::Instant(date.parse().unwrap()))
            .with_variable(ClinicalVariable::measurement(
                "SysLVol",
                Decimal::from_str("30.5").unwrap(),
                "mL/m²",
            ))
            .with_variable(ClinicalVariable::classified("RVDilation", severity))
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::model::{ClinicalVariable, TemporalRelation, TimeRef};

    #[test]
    fn records_mri_event() {
        let mut s = NodeStore::new("A", registry());
        let id = s
            .record_event(&patient("P1"), &visit("V1", "P1", "2008-03-01"), mri("E1", "V1", "2008-03-01", "Severe"))
            .unwrap();
        assert_eq!(id, "E1");
        assert_eq!(s.event("E1").unwrap().variables.len(), 2);
        assert_eq!(s.visit("V1").unwrap().events, vec!["E1".to_string()]);
        assert_eq!(s.stats().per_cvt["RVDilation"].distinct, 1);
    }

    #[test]
    fn invalid_event_leaves_store_untouched() {
        let mut s = NodeStore::new("A", registry());
        let err = s
            .record_event(
                &patient("P1"),
                &visit("V1", "P1", "2008-03-01"),
                mri("E1", "V1", "2008-03-01", "Catastrophic"),
            )
            .unwrap_err();
        match err {
            StoreError::ValidationFailed(r) => {
                assert_eq!(r.codes(), vec![ViolationCode::ValueNotInClassification])
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.event_count(), 0);
        assert!(s.patient("P1").is_none());
        assert!(s.visit("V1").is_none());
    }

    #[test]
    fn cvt_outside_event_type_rejected() {
        let mut s = NodeStore::new("A", registry());
        let ev = MedicalEvent::new("E1", "Genomics", "V1", TimeRef::Instant("2008-03-01".parse().unwrap()))
            .with_variable(ClinicalVariable::classified("RVDilation", "Mild"));
        let err = s
            .record_event(&patient("P1"), &visit("V1", "P1", "2008-03-01"), ev)
            .unwrap_err();
        let StoreError::ValidationFailed(r) = err else { panic!() };
        assert!(r.has(ViolationCode::EventTypeMismatch));
    }

    #[test]
    fn append_needs_existing_visit() {
        let mut s = NodeStore::new("A", registry());
        assert_eq!(
            s.append_event(mri("E1", "V9", "2008-03-01", "Mild")),
            Err(StoreError::UnknownVisit("V9".into()))
        );
    }

    #[test]
    fn relative_time_cycle_rejected() {
        let mut s = NodeStore::new("A", registry());
        let mut e1 = mri("E1", "V1", "2008-03-01", "Mild");
        e1.time = TimeRef::relative("E2", TemporalRelation::After, None);
        s.record_event(&patient("P1"), &visit("V1", "P1", "2008-03-01"), e1)
            .unwrap();
        let mut e2 = mri("E2", "V1", "2008-03-01", "Mild");
        e2.time = TimeRef::relative("E1", TemporalRelation::Before, None);
        assert!(matches!(
            s.append_event(e2),
            Err(StoreError::Model(ModelError::RelativeTimeCycle(_)))
        ));
        assert_eq!(s.event_count(), 1);
    }

    #[test]
    fn visit_before_birth_rejected() {
        let mut s = NodeStore::new("A", registry());
        s.add_patient(patient("P1")).unwrap();
        assert!(matches!(
            s.add_visit(visit("V0", "P1", "1999-12-31")),
            Err(StoreError::Inconsistent(_))
        ));
    }

    #[test]
    fn longitudinal_view_filters_and_sorts() {
        let mut s = NodeStore::new("A", registry());
        let p = patient("P1");
        s.record_event(&p, &visit("V1", "P1", "2008-05-01"), mri("E1", "V1", "2008-05-01", "Mild"))
            .unwrap();
        s.record_event(&p, &visit("V2", "P1", "2008-03-01"), mri("E2", "V2", "2008-03-01", "Severe"))
            .unwrap();
        let gene = MedicalEvent::new("E3", "Genomics", "V2", TimeRef::Instant("2008-03-01".parse().unwrap()))
            .with_variable(ClinicalVariable::concept("Gene", "hgnc:TTN"));
        s.append_event(gene).unwrap();

        let organ = s
            .longitudinal_view("P1", &[VerticalLevel::Organ].into())
            .unwrap();
        let ids: Vec<_> = organ.groups[0].entries.iter().map(|e| e.event_id.as_str()).collect();
        assert_eq!(ids, vec!["E2", "E1"]);
        assert_eq!(organ.len(), 2);

        let all = s
            .longitudinal_view("P1", &VerticalLevel::ALL.into_iter().collect())
            .unwrap();
        assert_eq!(all.len(), 3);
        assert!(matches!(
            s.longitudinal_view("P404", &BTreeSet::new()),
            Err(StoreError::UnknownPatient(_))
        ));
    }

    #[test]
    fn registry_evolution_keeps_data_valid() {
        let mut s = NodeStore::new("A", registry());
        s.record_event(&patient("P1"), &visit("V1", "P1", "2008-03-01"), mri("E1", "V1", "2008-03-01", "Mild"))
            .unwrap();
        s.evolve_registry(|r| {
            r.define_classification(crate::registry::Classification::new(
                "Severity",
                ["No", "Mild", "Moderate", "Severe", "Extreme"],
            ))?;
            Ok(())
        })
        .unwrap();
        assert!(s.revalidate().valid);
    }
}
