use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{NodeStore, StoreError};
use crate::model::{
    Category, ClinicalVariable, MedicalEvent, PatientRecord, Payload, Pseudonym, Sex, TimeRef, Visit, VisitPurpose,
};
use crate::registry::ViolationCode;

/// How to turn one CSV cell into a variable payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ParseRule {
    /// Decimal value; the unit defaults to the CVT's unit.
    Measurement {
        #[serde(default)]
        unit: Option<String>,
    },
    Classification,
    Annotation,
    ExternalResource,
    ConceptInstance,
}

impl ParseRule {
    fn category(&self) -> Category {
        match self {
            ParseRule::Measurement { .. } => Category::Measurement,
            ParseRule::Classification => Category::ObservationByClassification,
            ParseRule::Annotation => Category::Annotation,
            ParseRule::ExternalResource => Category::ExternalResource,
            ParseRule::ConceptInstance => Category::MedicalConceptInstance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub column: String,
    pub cvt_id: String,
    pub rule: ParseRule,
}

/// Describes how rows of a CSV file become medical events: one event of
/// type `event_type` per row, one variable per mapped non-empty cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestMapping {
    pub event_type: String,
    pub patient_column: String,
    pub visit_date_column: String,
    /// Needed to create patients that are not stored yet.
    #[serde(default)]
    pub birth_date_column: Option<String>,
    #[serde(default)]
    pub sex_column: Option<String>,
    pub columns: Vec<ColumnMapping>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_ok: usize,
    pub rows_rejected: usize,
    pub violations: BTreeMap<ViolationCode, usize>,
    pub rejected: Vec<RejectedRow>,
    pub event_ids: Vec<String>,
}

struct Columns {
    patient: usize,
    visit_date: usize,
    birth_date: Option<usize>,
    sex: Option<usize>,
    mapped: Vec<(usize, ColumnMapping)>,
}

fn parse_sex(s: &str) -> Sex {
    match s.trim().to_ascii_lowercase().as_str() {
        "m" | "male" => Sex::Male,
        "f" | "female" => Sex::Female,
        _ => Sex::Unknown,
    }
}

impl NodeStore {
    fn resolve_columns(&self, headers: &csv::StringRecord, mapping: &IngestMapping) -> Result<Columns, StoreError> {
        let find = |name: &str| -> Result<usize, StoreError> {
            let hits: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| h.trim() == name)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => Ok(*i),
                [] => Err(StoreError::Mapping(format!("column {name:?} not in header"))),
                _ => Err(StoreError::Mapping(format!("column {name:?} appears more than once"))),
            }
        };
        if self.registry.met(&mapping.event_type).is_none() {
            return Err(StoreError::Mapping(format!(
                "event type {:?} is not defined",
                mapping.event_type
            )));
        }
        let mut mapped = Vec::new();
        for col in &mapping.columns {
            let Some(cvt) = self.registry.cvt(&col.cvt_id) else {
                return Err(StoreError::Mapping(format!("CVT {:?} is not defined", col.cvt_id)));
            };
            if cvt.category != col.rule.category() {
                return Err(StoreError::Mapping(format!(
                    "column {:?} parses as {} but CVT {:?} is {}",
                    col.column,
                    col.rule.category(),
                    cvt.id,
                    cvt.category
                )));
            }
            mapped.push((find(&col.column)?, col.clone()));
        }
        Ok(Columns {
            patient: find(&mapping.patient_column)?,
            visit_date: find(&mapping.visit_date_column)?,
            birth_date: mapping.birth_date_column.as_deref().map(find).transpose()?,
            sex: mapping.sex_column.as_deref().map(find).transpose()?,
            mapped,
        })
    }

    fn cell_payload(&self, col: &ColumnMapping, cell: &str) -> Result<Payload, String> {
        Ok(match &col.rule {
            ParseRule::Measurement { unit } => {
                let value = Decimal::from_str(cell).map_err(|e| format!("{:?}: {e}", col.column))?;
                let unit = unit
                    .clone()
                    .or_else(|| self.registry.cvt(&col.cvt_id).and_then(|c| c.unit.clone()))
                    .ok_or_else(|| format!("no unit for {:?}", col.column))?;
                Payload::Measurement { value, unit }
            }
            ParseRule::Classification => Payload::ObservationByClassification { item: cell.into() },
            ParseRule::Annotation => Payload::Annotation {
                text: cell.into(),
                attached_to: None,
            },
            ParseRule::ExternalResource => Payload::ExternalResource { uri: cell.into() },
            ParseRule::ConceptInstance => Payload::MedicalConceptInstance {
                concept_uri: cell.into(),
            },
        })
    }

    /// Builds the patient, visit and event for one CSV row.
    fn row_event(
        &self,
        cols: &Columns,
        mapping: &IngestMapping,
        row: &csv::StringRecord,
    ) -> Result<(PatientRecord, Visit, MedicalEvent), String> {
        let cell = |i: usize| row.get(i).unwrap_or("").trim();
        let pseudonym = Pseudonym::new(cell(cols.patient)).map_err(|e| e.to_string())?;
        let date = NaiveDate::from_str(cell(cols.visit_date)).map_err(|e| format!("visit date: {e}"))?;
        let patient = match self.patients.get(pseudonym.as_str()) {
            Some(p) => p.clone(),
            None => {
                let Some(bcol) = cols.birth_date else {
                    return Err(format!("unknown patient {pseudonym} and no birth date column"));
                };
                let birth = NaiveDate::from_str(cell(bcol)).map_err(|e| format!("birth date: {e}"))?;
                let sex = cols.sex.map_or(Sex::Unknown, |i| parse_sex(cell(i)));
                PatientRecord::new(pseudonym.clone(), sex, birth)
            }
        };
        let visit_id = format!("{pseudonym}@{date}");
        let visit = self
            .visits
            .get(&visit_id)
            .cloned()
            .unwrap_or_else(|| Visit::new(visit_id.clone(), pseudonym, VisitPurpose::FollowUp, date));
        let mut event = MedicalEvent::new(self.fresh_event_id(), &mapping.event_type, visit_id, TimeRef::Instant(date));
        for (i, col) in &cols.mapped {
            let raw = cell(*i);
            if raw.is_empty() {
                continue;
            }
            let payload = self.cell_payload(col, raw)?;
            event.variables.push(ClinicalVariable::new(&col.cvt_id, payload));
        }
        Ok((patient, visit, event))
    }

    /// Ingests a CSV file with a header row, one event per row.
    ///
    /// Rows are atomic: a row that fails to parse or validate is reported
    /// with its line number and skipped, the others are stored. A
    /// structurally broken file stops ingestion at the offending line.
    pub fn ingest_csv<R: Read>(&mut self, input: R, mapping: &IngestMapping) -> Result<IngestReport, StoreError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| StoreError::MalformedCsv {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let cols = self.resolve_columns(&headers, mapping)?;

        let mut report = IngestReport::default();
        for result in reader.records() {
            let row = result.map_err(|e| StoreError::MalformedCsv {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let outcome = self
                .row_event(&cols, mapping, &row)
                .map_err(|reason| (reason, None))
                .and_then(|(p, v, e)| self.record_event(&p, &v, e).map_err(|err| (err.to_string(), Some(err))));
            match outcome {
                Ok(id) => {
                    report.rows_ok += 1;
                    report.event_ids.push(id);
                }
                Err((reason, err)) => {
                    report.rows_rejected += 1;
                    if let Some(StoreError::ValidationFailed(r)) = err {
                        for v in &r.violations {
                            *report.violations.entry(v.code).or_default() += 1;
                        }
                    }
                    report.rejected.push(RejectedRow { line, reason });
                }
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::registry;
    use super::*;

    fn mapping() -> IngestMapping {
        IngestMapping {
            event_type: "CardiacMRI".into(),
            patient_column: "patient".into(),
            visit_date_column: "date".into(),
            birth_date_column: Some("born".into()),
            sex_column: Some("sex".into()),
            columns: vec![
                ColumnMapping {
                    column: "syslvol".into(),
                    cvt_id: "SysLVol".into(),
                    rule: ParseRule::Measurement { unit: None },
                },
                ColumnMapping {
                    column: "rv".into(),
                    cvt_id: "RVDilation".into(),
                    rule: ParseRule::Classification,
                },
            ],
        }
    }

    const HEADER: &str = "patient,born,sex,date,syslvol,rv\n";

    #[test]
    fn all_rows_valid() {
        let mut s = NodeStore::new("A", registry());
        let csv = format!(
            "{HEADER}P1,2000-01-01,F,2008-03-01,30.5,Severe\nP2,2001-02-02,M,2008-03-02,28,Mild\nP1,2000-01-01,F,2008-06-01,31.0,\"Moderate\"\n"
        );
        let r = s.ingest_csv(csv.as_bytes(), &mapping()).unwrap();
        assert_eq!((r.rows_ok, r.rows_rejected), (3, 0));
        assert_eq!(s.event_count(), 3);
        assert_eq!(s.patients().count(), 2);
    }

    #[test]
    fn one_row_out_of_classification() {
        let mut s = NodeStore::new("A", registry());
        let csv = format!(
            "{HEADER}P1,2000-01-01,F,2008-03-01,30.5,Severe\nP2,2001-02-02,M,2008-03-02,28,Catastrophic\nP3,2001-02-02,M,2008-03-02,29,No\n"
        );
        let r = s.ingest_csv(csv.as_bytes(), &mapping()).unwrap();
        assert_eq!((r.rows_ok, r.rows_rejected), (2, 1));
        assert_eq!(r.violations.get(&ViolationCode::ValueNotInClassification), Some(&1));
        assert_eq!(r.rejected[0].line, 3);
        assert!(s.patient("P2").is_none());
    }

    #[test]
    fn header_only_is_empty_ingest() {
        let mut s = NodeStore::new("A", registry());
        let r = s.ingest_csv(HEADER.as_bytes(), &mapping()).unwrap();
        assert_eq!((r.rows_ok, r.rows_rejected), (0, 0));
    }

    #[test]
    fn unparseable_cell_rejects_row_only() {
        let mut s = NodeStore::new("A", registry());
        let csv = format!("{HEADER}P1,2000-01-01,F,2008-03-01,thirty,Severe\nP2,2000-01-01,F,2008-03-01,30,Mild\n");
        let r = s.ingest_csv(csv.as_bytes(), &mapping()).unwrap();
        assert_eq!((r.rows_ok, r.rows_rejected), (1, 1));
    }

    #[test]
    fn ragged_row_is_malformed() {
        let mut s = NodeStore::new("A", registry());
        let csv = format!("{HEADER}P1,2000-01-01,F,2008-03-01,30.5,Severe\nP2,2000-01-01\n");
        assert!(matches!(
            s.ingest_csv(csv.as_bytes(), &mapping()),
            Err(StoreError::MalformedCsv { line: 3, .. })
        ));
        // the good row before it stays
        assert_eq!(s.event_count(), 1);
    }

    #[test]
    fn mapping_errors() {
        let mut s = NodeStore::new("A", registry());
        let mut m = mapping();
        m.columns[0].cvt_id = "Ghost".into();
        assert!(matches!(s.ingest_csv(HEADER.as_bytes(), &m), Err(StoreError::Mapping(_))));
        let mut m = mapping();
        m.patient_column = "pid".into();
        assert!(matches!(s.ingest_csv(HEADER.as_bytes(), &m), Err(StoreError::Mapping(_))));
        let mut m = mapping();
        m.columns[1].rule = ParseRule::Annotation;
        assert!(matches!(s.ingest_csv(HEADER.as_bytes(), &m), Err(StoreError::Mapping(_))));
    }
}
