use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{MedicalEvent, Payload, VerticalLevel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvtStats {
    /// Number of stored variables of this type.
    pub rows: usize,
    /// Number of events holding at least one variable of this type.
    pub events: usize,
    /// Number of distinct values among those variables.
    pub distinct: usize,
}

/// Count statistics for one store, maintained on every write. The query
/// planner reads these to estimate selectivities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub events: usize,
    pub per_cvt: BTreeMap<String, CvtStats>,
    pub per_event_type: BTreeMap<String, usize>,
    pub per_level: BTreeMap<VerticalLevel, usize>,
    /// Events holding a concept instance with the given URI.
    pub per_concept: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct StatsTracker {
    pub(crate) stats: StoreStats,
    distinct_values: BTreeMap<String, BTreeSet<String>>,
}

impl StatsTracker {
    pub(crate) fn record(&mut self, event: &MedicalEvent, level: Option<VerticalLevel>) {
        let stats = &mut self.stats;
        stats.events += 1;
        *stats.per_event_type.entry(event.event_type.clone()).or_default() += 1;
        if let Some(level) = level {
            *stats.per_level.entry(level).or_default() += 1;
        }

        let mut cvts_seen = BTreeSet::new();
        let mut concepts_seen = BTreeSet::new();
        for cv in &event.variables {
            let entry = stats.per_cvt.entry(cv.cvt_id.clone()).or_default();
            entry.rows += 1;
            if cvts_seen.insert(cv.cvt_id.as_str()) {
                entry.events += 1;
            }
            let values = self.distinct_values.entry(cv.cvt_id.clone()).or_default();
            values.insert(cv.payload.value_key());
            entry.distinct = values.len();
            if let Payload::MedicalConceptInstance { concept_uri } = &cv.payload {
                if concepts_seen.insert(concept_uri.as_str()) {
                    *stats.per_concept.entry(concept_uri.clone()).or_default() += 1;
                }
            }
        }
    }
}
