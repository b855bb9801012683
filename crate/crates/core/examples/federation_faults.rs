//! A three-node federation answering one query, then the same query with
//! one node slow and another unreachable.
//!
//!     cargo run --example federation_faults

use std::time::Instant;

use clinfed::federation::{demo, Fault, FederatedResult};
use clinfed::query::parse;

fn show(label: &str, r: &FederatedResult) {
    println!("{label}: {} rows, partial={}, unreachable={:?}", r.rows.len(), r.partial, r.unreachable);
    for row in &r.rows {
        println!("  {} {} {}", row.node_id, row.row.pseudonym, row.row.event_id.as_deref().unwrap_or("-"));
    }
    for (node, uri) in &r.dropped_predicates {
        println!("  {node} has no mapping for {uri}");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = demo::gateway();
    let query = parse(demo::JAW_QUERY)?;
    println!("{query}");
    show("all nodes up", &gateway.execute(&query)?);

    gateway.inject_fault("node-a", Fault::SlowBy(200))?;
    gateway.inject_fault("node-b", Fault::Unreachable)?;
    let start = Instant::now();
    let degraded = gateway.execute(&query)?;
    show(&format!("node-a slow, node-b down ({:.0?})", start.elapsed()), &degraded);
    Ok(())
}
