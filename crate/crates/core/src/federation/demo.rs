//! A three-node federation seeded with the worked examples used throughout
//! the documentation: a cardiac MRI with a left-ventricle volume and an RV
//! dilation grade, a brain MRI locating a tumour in the cerebellum, and
//! dental X-rays annotated with jaw or tooth concepts.
//!
//! `node-a` uses the global vocabulary directly, `node-b` has its own
//! dental terms mapped onto it, and `node-c` only knows brain anatomy.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rust_decimal::Decimal;

use super::{FederationError, FederationNode, Gateway, NodeConfig};
use crate::model::{Category, ClinicalVariable, MedicalEvent, PatientRecord, Pseudonym, Sex, TimeRef, VerticalLevel, Visit, VisitPurpose};
use crate::ontology::{ConceptGroup, ConceptMapping, ConceptRelation, MappingMethod, MappingSet, MedicalConcept, Ontology, Predicate};
use crate::registry::{Classification, ClinicalVariableType, MedicalEventType, Registry, Unit};
use crate::store::NodeStore;

/// X-rays of the jaw for children aged 5 to 10.
pub const JAW_QUERY: &str = r#"FIND events WHERE concept = "hec:Jaw" AND event_type = "XRayImaging" AND age IN [5, 10]"#;

/// The registry shared by all demo nodes.
pub fn registry() -> Registry {
    let mut r = Registry::new();
    r.define_unit(Unit::new("mL/m²")).expect("fresh registry");
    r.define_classification(Classification::new("Severity", ["No", "Mild", "Moderate", "Severe"]))
        .expect("fresh registry");
    for cvt in [
        ClinicalVariableType::new("SysLVol", "Systolic LV volume", Category::Measurement, VerticalLevel::Organ)
            .with_unit("mL/m²"),
        ClinicalVariableType::new(
            "RVDilation",
            "RV dilation",
            Category::ObservationByClassification,
            VerticalLevel::Organ,
        )
        .with_classification("Severity"),
        ClinicalVariableType::new("TumourLoc", "Tumour Location", Category::MedicalConceptInstance, VerticalLevel::Organ),
        ClinicalVariableType::new("ImagedAnatomy", "Imaged anatomy", Category::MedicalConceptInstance, VerticalLevel::Organ),
    ] {
        r.define_cvt(cvt).expect("demo CVTs are consistent");
    }
    for met in [
        MedicalEventType::new("CardiacMRI", "Cardiac MRI", ["SysLVol", "RVDilation"], VerticalLevel::Organ),
        MedicalEventType::new("BrainMRI", "Brain MRI", ["TumourLoc"], VerticalLevel::Organ),
        MedicalEventType::new("XRayImaging", "X-ray imaging", ["ImagedAnatomy"], VerticalLevel::Organ),
    ] {
        r.define_met(met).expect("demo METs are consistent");
    }
    r
}

fn ontology(concepts: &[(&str, &str, ConceptGroup)], relations: &[(&str, Predicate, &str)]) -> Ontology {
    let mut o = Ontology::new();
    for (uri, label, group) in concepts {
        o.add_concept(MedicalConcept::new(*uri, *label, *group))
            .expect("demo concepts are distinct");
    }
    for (s, p, ob) in relations {
        o.add_relation(ConceptRelation::new(*s, *p, *ob))
            .expect("demo relations are acyclic");
    }
    o
}

pub fn global_ontology() -> Ontology {
    use ConceptGroup::*;
    let mut o = ontology(
        &[
            ("hec:BodyPart", "Body part", Anatomical),
            ("hec:Jaw", "Jaw", Anatomical),
            ("hec:Tooth", "Tooth", Anatomical),
            ("hec:Molar", "Molar", Anatomical),
            ("hec:Heart", "Heart", Anatomical),
            ("fma:Brain", "Brain", Anatomical),
            ("fma:Cerebellum", "Cerebellum", Anatomical),
            ("hec:Caries", "Dental caries", Disease),
        ],
        &[
            ("hec:Jaw", Predicate::IsA, "hec:BodyPart"),
            ("hec:Heart", Predicate::IsA, "hec:BodyPart"),
            ("fma:Brain", Predicate::IsA, "hec:BodyPart"),
            ("hec:Tooth", Predicate::PartOf, "hec:Jaw"),
            ("hec:Molar", Predicate::IsA, "hec:Tooth"),
            ("fma:Cerebellum", Predicate::RegionalPartOf, "fma:Brain"),
            ("hec:Caries", Predicate::AssociatedWith, "hec:Tooth"),
        ],
    );
    o.bind("TumourLoc", "fma:Brain").expect("fresh binding");
    o.bind("ImagedAnatomy", "hec:BodyPart").expect("fresh binding");
    o
}

fn node_b_ontology() -> Ontology {
    ontology(
        &[
            ("locb:Mandible", "Mandible", ConceptGroup::Anatomical),
            ("locb:Dens", "Tooth", ConceptGroup::Anatomical),
        ],
        &[("locb:Dens", Predicate::PartOf, "locb:Mandible")],
    )
}

fn node_c_ontology() -> Ontology {
    ontology(
        &[
            ("locc:Encephalon", "Brain", ConceptGroup::Anatomical),
            ("locc:Cerebellum", "Cerebellum", ConceptGroup::Anatomical),
        ],
        &[("locc:Cerebellum", Predicate::RegionalPartOf, "locc:Encephalon")],
    )
}

fn manual(pairs: &[(&str, &str)]) -> MappingSet {
    MappingSet::from_mappings(pairs.iter().map(|(l, g)| ConceptMapping {
        local_uri: l.to_string(),
        global_uri: g.to_string(),
        confidence: 1.0,
        method: MappingMethod::Manual,
    }))
    .expect("demo mappings are one-to-one")
}

struct Seeder {
    store: NodeStore,
}

impl Seeder {
    fn new(node_id: &str, vocabulary: Arc<Ontology>) -> Self {
        Self {
            store: NodeStore::new(node_id, registry()).with_vocabulary(vocabulary),
        }
    }

    fn event(&mut self, patient: (&str, Sex, &str), date: &str, event_type: &str, variables: Vec<ClinicalVariable>) {
        let pseudonym = Pseudonym::new(patient.0).expect("demo pseudonyms are valid");
        let birth = patient.2.parse().expect("demo dates are valid");
        let day = date.parse().expect("demo dates are valid");
        let p = PatientRecord::new(pseudonym.clone(), patient.1, birth);
        let v = Visit::new(format!("{}@{date}", patient.0), pseudonym, VisitPurpose::FollowUp, day);
        let mut e = MedicalEvent::new(self.store.fresh_event_id(), event_type, &v.visit_id, TimeRef::Instant(day));
        for cv in variables {
            e = e.with_variable(cv);
        }
        self.store.record_event(&p, &v, e).expect("demo events are valid");
    }
}

const P1: (&str, Sex, &str) = ("P1", Sex::Female, "2000-03-14");
const P2: (&str, Sex, &str) = ("P2", Sex::Male, "1995-07-02");
const P3: (&str, Sex, &str) = ("P3", Sex::Male, "2001-11-20");
const P4: (&str, Sex, &str) = ("P4", Sex::Female, "1990-01-05");

fn xray(concept: &str) -> Vec<ClinicalVariable> {
    vec![ClinicalVariable::concept("ImagedAnatomy", concept)]
}

fn cardiac(volume: &str, dilation: &str) -> Vec<ClinicalVariable> {
    vec![
        ClinicalVariable::measurement("SysLVol", volume.parse::<Decimal>().expect("demo decimals"), "mL/m²"),
        ClinicalVariable::classified("RVDilation", dilation),
    ]
}

/// The three demo nodes, ready to register with a gateway built on
/// [`global_ontology`].
pub fn nodes() -> Vec<FederationNode> {
    let global = Arc::new(global_ontology());

    let mut a = Seeder::new("node-a", global.clone());
    a.event(P1, "2007-05-02", "XRayImaging", xray("hec:Jaw"));
    a.event(P2, "2008-01-10", "CardiacMRI", cardiac("30.5", "Severe"));
    a.event(P4, "1998-06-30", "XRayImaging", xray("hec:Molar"));

    let b_onto = Arc::new(node_b_ontology());
    let mut b = Seeder::new("node-b", b_onto.clone());
    b.event(P1, "2008-09-20", "XRayImaging", xray("locb:Dens"));
    b.event(P4, "2009-03-11", "XRayImaging", xray("locb:Mandible"));

    let c_onto = Arc::new(node_c_ontology());
    let mut c = Seeder::new("node-c", c_onto.clone());
    c.event(P3, "2009-11-03", "BrainMRI", vec![ClinicalVariable::concept("TumourLoc", "locc:Cerebellum")]);
    c.event(P1, "2009-02-01", "CardiacMRI", cardiac("28.0", "Mild"));

    vec![
        FederationNode::with_global_ontology(a.store, global),
        FederationNode::new(
            b.store,
            b_onto,
            manual(&[("locb:Mandible", "hec:Jaw"), ("locb:Dens", "hec:Tooth")]),
        ),
        FederationNode::new(
            c.store,
            c_onto,
            manual(&[("locc:Encephalon", "fma:Brain"), ("locc:Cerebellum", "fma:Cerebellum")]),
        ),
    ]
}

/// A gateway with all three demo nodes registered.
pub fn gateway() -> Gateway {
    let g = Gateway::new(Arc::new(global_ontology()));
    for n in nodes() {
        g.register_node(n).expect("demo nodes are distinct");
    }
    g
}

/// Writes the demo federation under `dir`: `global.ont`, one directory per
/// node and `federation.json`. Returns the path of the config file.
pub fn write(dir: &Path) -> Result<PathBuf, FederationError> {
    let io = |e: std::io::Error| FederationError::Config(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("global.ont"), global_ontology().to_text()).map_err(io)?;
    let mut entries = Vec::new();
    for node in nodes() {
        let id = node.node_id().to_string();
        let node_dir = dir.join(&id);
        node.store()
            .read()
            .save(&node_dir.join("data"))
            .map_err(|source| FederationError::Store {
                node: id.clone(),
                source,
            })?;
        std::fs::write(node_dir.join("local.ont"), node.ontology().to_text()).map_err(io)?;
        std::fs::write(node_dir.join("mapping.txt"), node.mapping().to_text()).map_err(io)?;
        entries.push(NodeConfig {
            node_id: id.clone(),
            data_dir: PathBuf::from(&id).join("data"),
            ontology_file: PathBuf::from(&id).join("local.ont"),
            mapping_file: Some(PathBuf::from(&id).join("mapping.txt")),
        });
    }
    let config = dir.join("federation.json");
    let json = serde_json::to_string_pretty(&entries).expect("config serializes");
    std::fs::write(&config, json + "\n").map_err(io)?;
    Ok(config)
}
