//! The same query with and without ontology enhancement. Asking for jaw
//! X-rays also finds the teeth once `part_of` and `is_a` are followed.
//!
//!     cargo run --example jaw_query_enhancement

use clinfed::federation::demo;
use clinfed::query::{enhance, execute, optimize, parse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ontology = demo::global_ontology();
    let gateway = demo::gateway();
    let node = gateway.node("node-a").expect("demo node");
    let store = node.store().read();

    let query = parse(r#"FIND events WHERE concept = "hec:Jaw" AND event_type = "XRayImaging""#)?;
    let enhanced = enhance(&query, &ontology)?;
    for (label, q) in [("as written", &query), ("enhanced", &enhanced)] {
        let rows = execute(&optimize(q, store.stats()), &store)?;
        println!("{label}: {q}");
        for row in &rows.rows {
            let variables: Vec<String> =
                row.variables.iter().map(|v| format!("{}={}", v.cvt_id, v.payload.value_key())).collect();
            println!("  {} {} {}", row.pseudonym, row.event_id.as_deref().unwrap_or("-"), variables.join(" "));
        }
    }
    Ok(())
}
