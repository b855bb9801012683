//! Information-content similarity between anatomy concepts, from the
//! sample annotation counts.
//!
//!     cargo run --example resnik_similarity

use std::path::Path;

use clinfed::ontology::{AnnotationCounts, InformationContent, Ontology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let ontology = Ontology::load(&data.join("anatomy.ont"))?;
    let counts: AnnotationCounts = serde_json::from_str(&std::fs::read_to_string(data.join("annotation_counts.json"))?)?;
    let ic = InformationContent::new(&ontology, &counts)?;

    let concepts = ["hec:Jaw", "hec:Heart", "fma:Brain", "fma:Cerebellum"];
    for c in concepts {
        println!("IC({c}) = {:.4}", ic.ic(c)?.unwrap_or(f64::NAN));
    }
    for (i, a) in concepts.iter().enumerate() {
        for b in &concepts[i..] {
            println!("sim({a}, {b}) = {:.4}", ic.similarity(a, b)?);
        }
    }
    Ok(())
}
