//! A patient's history across vertical levels: organ-level imaging next to
//! tissue-level lab results, each in time order. One result is anchored
//! to the scan it followed rather than to a calendar date.
//!
//!     cargo run --example longitudinal_view

use std::collections::BTreeSet;

use clinfed::model::{
    Category, ClinicalVariable, MedicalEvent, PatientRecord, Pseudonym, Sex, TemporalRelation, TimeRef, VerticalLevel,
    Visit, VisitPurpose,
};
use clinfed::registry::{ClinicalVariableType, MedicalEventType, Registry, Unit};
use clinfed::store::NodeStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut registry = Registry::new();
    registry.define_unit(Unit::new("mL/m²"))?;
    registry.define_unit(Unit::new("%"))?;
    registry.define_cvt(
        ClinicalVariableType::new("SysLVol", "Systolic LV volume", Category::Measurement, VerticalLevel::Organ)
            .with_unit("mL/m²"),
    )?;
    registry.define_cvt(
        ClinicalVariableType::new("Fibrosis", "Myocardial fibrosis", Category::Measurement, VerticalLevel::Tissue)
            .with_unit("%"),
    )?;
    registry.define_met(MedicalEventType::new("CardiacMRI", "Cardiac MRI", ["SysLVol"], VerticalLevel::Organ))?;
    registry.define_met(MedicalEventType::new("Biopsy", "Endomyocardial biopsy", ["Fibrosis"], VerticalLevel::Tissue))?;

    let mut store = NodeStore::new("cardiology", registry);
    let p = PatientRecord::new(Pseudonym::new("P7")?, Sex::Male, "1970-02-11".parse()?);
    let visit = |date: &str| -> Result<Visit, chrono::ParseError> {
        Ok(Visit::new(format!("P7@{date}"), p.pseudonym.clone(), VisitPurpose::FollowUp, date.parse()?))
    };
    let (v1, v2) = (visit("2008-01-10")?, visit("2009-03-02")?);
    store.record_event(
        &p,
        &v1,
        MedicalEvent::new("mri-1", "CardiacMRI", &v1.visit_id, TimeRef::Instant(v1.date))
            .with_variable(ClinicalVariable::measurement("SysLVol", "30.5".parse()?, "mL/m²")),
    )?;
    store.record_event(
        &p,
        &v2,
        MedicalEvent::new("mri-2", "CardiacMRI", &v2.visit_id, TimeRef::Instant(v2.date))
            .with_variable(ClinicalVariable::measurement("SysLVol", "34.0".parse()?, "mL/m²")),
    )?;
    store.record_event(
        &p,
        &v1,
        MedicalEvent::new("biopsy-1", "Biopsy", &v1.visit_id, TimeRef::relative("mri-1", TemporalRelation::After, Some(14)))
            .with_variable(ClinicalVariable::measurement("Fibrosis", "12".parse()?, "%")),
    )?;

    let levels: BTreeSet<VerticalLevel> = [VerticalLevel::Organ, VerticalLevel::Tissue].into();
    let timeline = store.longitudinal_view("P7", &levels)?;
    for group in &timeline.groups {
        println!("{}:", group.level);
        for e in &group.entries {
            let when = e.time.interval().map(|i| i.to_string()).unwrap_or_else(|| "unresolved".into());
            println!("  {when}  {} {}", e.event_type, e.event_id);
        }
    }
    Ok(())
}
