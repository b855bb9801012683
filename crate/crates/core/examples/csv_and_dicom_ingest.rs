//! Loads the sample registry, ingests a CSV export and a DICOM header
//! sidecar, and reports what was stored or rejected.
//!
//!     cargo run --example csv_and_dicom_ingest

use std::fs;
use std::path::Path;

use clinfed::registry::Registry;
use clinfed::store::{IngestMapping, NodeStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let mut store = NodeStore::new("ingest", Registry::load(&data.join("registry.json"))?);

    for (csv, mapping) in [("cardiac.csv", "cardiac_mapping.json"), ("xray.csv", "xray_mapping.json")] {
        let mapping: IngestMapping = serde_json::from_str(&fs::read_to_string(data.join(mapping))?)?;
        let report = store.ingest_csv(fs::File::open(data.join(csv))?, &mapping)?;
        println!("{csv}: {} stored, {} rejected", report.rows_ok, report.rows_rejected);
        for r in &report.rejected {
            println!("  line {}: {}", r.line, r.reason);
        }
    }

    let sidecar = fs::read_to_string(data.join("xray_p1.dcm.txt"))?;
    let id = store.ingest_dicom(&sidecar, "XRayHeader", "XRayImaging")?;
    let event = store.event(&id).expect("just stored");
    let when = store.resolve(event)?.interval().map(|i| i.to_string()).unwrap_or_default();
    println!("DICOM header stored as {id} ({} at {when})", event.event_type);
    for cv in &event.variables {
        println!("  {} = {}", cv.cvt_id, cv.payload.value_key());
    }
    println!("{} events for {} patients", store.event_count(), store.patients().count());
    Ok(())
}
