//! Shows how a query is normalized and how its conjuncts are ordered by
//! estimated selectivity against one store's statistics.
//!
//!     cargo run --example query_optimizer_explain

use clinfed::federation::demo;
use clinfed::query::{enhance, evaluate, execute, normalize, optimize, parse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = demo::gateway();
    let node = gateway.node("node-a").expect("demo node");
    let store = node.store().read();
    let stats = store.stats();
    println!("{} events; per type {:?}", stats.events, stats.per_event_type);

    let query = parse(
        r#"FIND events WHERE NOT (event_type = "CardiacMRI" OR level = tissue)
           AND age IN [5, 10] AND concept = "hec:Jaw" AND TRUE"#,
    )?;
    let query = enhance(&query, gateway.global_ontology())?;
    println!("query:      {query}");
    println!("normalized: {}", normalize(&query.predicate));
    let plan = optimize(&query, stats);
    println!("{plan}");
    let planned = execute(&plan, &store)?;
    println!("{} rows; same as naive evaluation: {}", planned.len(), planned == evaluate(&query, &store));
    Ok(())
}
