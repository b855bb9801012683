//! Defines the cardiac and brain MRI metadata, stores one event of each,
//! then saves, reloads and revalidates the store.
//!
//!     cargo run --example mri_metadata_roundtrip

use std::sync::Arc;

use clinfed::model::{
    Category, ClinicalVariable, MedicalEvent, PatientRecord, Pseudonym, Sex, TimeRef, VerticalLevel, Visit,
    VisitPurpose,
};
use clinfed::ontology::{ConceptGroup, ConceptRelation, MedicalConcept, Ontology, Predicate};
use clinfed::registry::{Classification, ClinicalVariableType, MedicalEventType, Registry, Unit};
use clinfed::store::NodeStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut registry = Registry::new();
    registry.define_unit(Unit::new("mL/m²"))?;
    registry.define_classification(Classification::new("Severity", ["No", "Mild", "Moderate", "Severe"]))?;
    registry.define_cvt(
        ClinicalVariableType::new("SysLVol", "Systolic LV volume", Category::Measurement, VerticalLevel::Organ)
            .with_unit("mL/m²"),
    )?;
    registry.define_cvt(
        ClinicalVariableType::new("RVDilation", "RV dilation", Category::ObservationByClassification, VerticalLevel::Organ)
            .with_classification("Severity"),
    )?;
    registry.define_cvt(ClinicalVariableType::new(
        "TumourLoc",
        "Tumour location",
        Category::MedicalConceptInstance,
        VerticalLevel::Organ,
    ))?;
    registry.define_met(MedicalEventType::new("CardiacMRI", "Cardiac MRI", ["SysLVol", "RVDilation"], VerticalLevel::Organ))?;
    registry.define_met(MedicalEventType::new("BrainMRI", "Brain MRI", ["TumourLoc"], VerticalLevel::Organ))?;

    let mut anatomy = Ontology::new();
    anatomy.add_concept(MedicalConcept::new("fma:Brain", "Brain", ConceptGroup::Anatomical))?;
    anatomy.add_concept(MedicalConcept::new("fma:Cerebellum", "Cerebellum", ConceptGroup::Anatomical))?;
    anatomy.add_relation(ConceptRelation::new("fma:Cerebellum", Predicate::RegionalPartOf, "fma:Brain"))?;
    anatomy.bind("TumourLoc", "fma:Brain")?;
    let anatomy = Arc::new(anatomy);

    let mut store = NodeStore::new("hospital", registry).with_vocabulary(anatomy.clone());
    let day = "2008-01-10".parse()?;
    let x = PatientRecord::new(Pseudonym::new("X")?, Sex::Female, "1961-04-02".parse()?);
    let y = PatientRecord::new(Pseudonym::new("Y")?, Sex::Male, "1955-09-17".parse()?);
    let vx = Visit::new("X@2008-01-10", x.pseudonym.clone(), VisitPurpose::Baseline, day);
    let vy = Visit::new("Y@2008-01-10", y.pseudonym.clone(), VisitPurpose::Baseline, day);
    store.record_event(
        &x,
        &vx,
        MedicalEvent::new("cmr-1", "CardiacMRI", "X@2008-01-10", TimeRef::Instant(day))
            .with_variable(ClinicalVariable::measurement("SysLVol", "30.5".parse()?, "mL/m²"))
            .with_variable(ClinicalVariable::classified("RVDilation", "Severe")),
    )?;
    store.record_event(
        &y,
        &vy,
        MedicalEvent::new("bmr-1", "BrainMRI", "Y@2008-01-10", TimeRef::Instant(day))
            .with_variable(ClinicalVariable::concept("TumourLoc", "fma:Cerebellum")),
    )?;

    let dir = std::env::temp_dir().join("clinfed-mri-roundtrip");
    store.save(&dir)?;
    let reloaded = NodeStore::load("hospital", &dir)?.with_vocabulary(anatomy);
    println!("saved to {}", dir.display());
    println!("events after reload: {}", reloaded.event_count());
    println!("revalidation: {}", reloaded.revalidate());
    println!("identical: {}", reloaded.to_snapshot() == store.to_snapshot());
    Ok(())
}
