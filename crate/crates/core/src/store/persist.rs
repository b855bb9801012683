use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{NodeStore, StoreError};
use crate::model::{MedicalEvent, PatientRecord, Visit};
use crate::registry::Registry;

pub const REGISTRY_FILE: &str = "registry.json";
pub const PATIENTS_FILE: &str = "patients.jsonl";
pub const VISITS_FILE: &str = "visits.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";

/// The four files making up a persisted store, as text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreSnapshot {
    pub registry: String,
    pub patients: String,
    pub visits: String,
    pub events: String,
}

fn to_lines<'a, T: Serialize + 'a>(items: impl Iterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn from_lines<T: DeserializeOwned>(text: &str, file: &str) -> Result<Vec<T>, StoreError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt(format!("{file} line {}: {e}", i + 1)))
        })
        .collect()
}

impl NodeStore {
    pub fn to_snapshot(&self) -> StoreSnapshot {
        StoreSnapshot {
            registry: self.registry.to_json(),
            patients: to_lines(self.patients.values()),
            visits: to_lines(self.visits.values()),
            events: to_lines(self.events.values()),
        }
    }

    /// Rebuilds a store by replaying the snapshot through the normal
    /// write path, so every record is re-validated on the way in.
    pub fn from_snapshot(node_id: impl Into<String>, snapshot: &StoreSnapshot) -> Result<Self, StoreError> {
        let registry = Registry::from_json(&snapshot.registry)?;
        let mut store = NodeStore::new(node_id, registry);
        for p in from_lines::<PatientRecord>(&snapshot.patients, PATIENTS_FILE)? {
            store.add_patient(p)?;
        }
        let visits = from_lines::<Visit>(&snapshot.visits, VISITS_FILE)?;
        for v in &visits {
            store.add_visit(v.clone())?;
        }
        for e in from_lines::<MedicalEvent>(&snapshot.events, EVENTS_FILE)? {
            store.append_event(e)?;
        }
        for v in &visits {
            if store.visits[&v.visit_id].events != v.events {
                return Err(StoreError::Corrupt(format!(
                    "visit {} lists events that do not match the events file",
                    v.visit_id
                )));
            }
        }
        Ok(store)
    }

    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        let io = |e: std::io::Error| StoreError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let snap = self.to_snapshot();
        for (name, body) in [
            (REGISTRY_FILE, &snap.registry),
            (PATIENTS_FILE, &snap.patients),
            (VISITS_FILE, &snap.visits),
            (EVENTS_FILE, &snap.events),
        ] {
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, body).map_err(io)?;
            fs::rename(&tmp, dir.join(name)).map_err(io)?;
        }
        Ok(())
    }

    /// Loads a store directory. Missing data files count as empty; the
    /// registry file must exist.
    pub fn load(node_id: impl Into<String>, dir: &Path) -> Result<Self, StoreError> {
        let read = |name: &str, required: bool| -> Result<String, StoreError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
                Err(e) => Err(StoreError::Io(format!("{}: {e}", path.display()))),
            }
        };
        let snapshot = StoreSnapshot {
            registry: read(REGISTRY_FILE, true)?,
            patients: read(PATIENTS_FILE, false)?,
            visits: read(VISITS_FILE, false)?,
            events: read(EVENTS_FILE, false)?,
        };
        Self::from_snapshot(node_id, &snapshot)
    }
}
