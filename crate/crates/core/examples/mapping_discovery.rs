//! Proposes mappings from a site's local vocabulary onto the global
//! anatomy, first by label, then with shared annotated instances.
//!
//!     cargo run --example mapping_discovery

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use clinfed::ontology::{discover_mappings, token_jaccard, MappingSet, Ontology, OntologyError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let global = Ontology::load(&data.join("anatomy.ont"))?;
    let local = Ontology::load(&data.join("dental_local.ont"))?;

    println!("jaccard(\"RV dilation\", \"Right ventricle dilation\") = {}", token_jaccard("RV dilation", "Right ventricle dilation"));

    let by_label = discover_mappings(&local, &global, None, 0.5)?;
    println!("by label:");
    for m in &by_label {
        println!("  {} -> {} {:.2} {}", m.local_uri, m.global_uri, m.confidence, m.method);
    }

    // The same images annotated at both sites.
    let shared: BTreeMap<String, BTreeSet<String>> = [
        ("site:Hemisphere", ["img1", "img2", "img3"]),
        ("fma:Cerebellum", ["img1", "img2", "img3"]),
        ("fma:Brain", ["img1", "img9", "img8"]),
    ]
    .into_iter()
    .map(|(c, ids)| (c.to_string(), ids.map(String::from).into()))
    .collect();
    let with_instances = discover_mappings(&local, &global, Some(&shared), 0.5)?;
    println!("with shared instances:");
    for m in &with_instances {
        println!("  {} -> {} {:.2} {}", m.local_uri, m.global_uri, m.confidence, m.method);
    }
    let set = MappingSet::from_mappings(with_instances)?;
    set.check(&local, &global)?;
    print!("{}", set.to_text());

    let mut tied = Ontology::new();
    tied.add_concept(clinfed::ontology::MedicalConcept::new(
        "site:HeartValve",
        "heart valve",
        clinfed::ontology::ConceptGroup::Anatomical,
    ))?;
    let mut valves = global.clone();
    valves.add_concept(clinfed::ontology::MedicalConcept::new(
        "hec:Valve",
        "Valve",
        clinfed::ontology::ConceptGroup::Anatomical,
    ))?;
    match discover_mappings(&tied, &valves, None, 0.5) {
        Err(OntologyError::AmbiguousMapping(uri)) => println!("{uri} ties between Heart and Valve: left for review"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
