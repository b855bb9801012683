//! DICOM metadata sidecars: `GGGGEEEE=value` text files holding the tags
//! extracted from an image. Only the metadata is kept, so queries never
//! need the image itself.

use std::str::FromStr;

use chrono::NaiveDate;

use super::{NodeStore, StoreError};
use crate::model::{
    ClinicalVariable, DicomTag, DicomTagValue, MedicalEvent, Payload, TimeRef, Visit, VisitPurpose,
};

/// Parses a sidecar into a DICOMData variable of type `cvt_id`.
///
/// Tags are kept verbatim and in file order. The variable id is the SOP
/// instance UID when present, otherwise `study/series/instance`.
pub fn parse_dicom_sidecar(text: &str, cvt_id: &str) -> Result<ClinicalVariable, StoreError> {
    let mut tags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(StoreError::MalformedTag(i + 1))?;
        let tag = DicomTag::from_str(key.trim()).map_err(|_| StoreError::MalformedTag(i + 1))?;
        tags.push(DicomTagValue {
            tag,
            value: value.to_string(),
        });
    }
    let mut cv = ClinicalVariable::new(cvt_id, Payload::DicomData { tags });
    cv.id = instance_id(&cv);
    Ok(cv)
}

fn instance_id(cv: &ClinicalVariable) -> Option<String> {
    if let Some(uid) = cv.dicom_tag(DicomTag::SOP_INSTANCE_UID) {
        return Some(uid.to_string());
    }
    let study = cv.dicom_tag(DicomTag::STUDY_INSTANCE_UID)?;
    let series = cv.dicom_tag(DicomTag::SERIES_INSTANCE_UID)?;
    let instance = cv.dicom_tag(DicomTag::INSTANCE_NUMBER)?;
    Some(format!("{study}/{series}/{}", instance.trim()))
}

/// Writes a DICOMData variable back out in sidecar form.
pub fn to_sidecar(cv: &ClinicalVariable) -> Option<String> {
    let Payload::DicomData { tags } = &cv.payload else {
        return None;
    };
    Some(tags.iter().map(|t| format!("{}={}\n", t.tag, t.value)).collect())
}

/// Groups the DICOMData variables sharing `(study_id, series_id)` into a
/// series, ordered by instance number. Instances without a numeric
/// instance number go last in their original order.
pub fn assemble_series<'a, I>(
    items: I,
    study_id: &str,
    series_id: &str,
    cvt_id: &str,
) -> Result<ClinicalVariable, StoreError>
where
    I: IntoIterator<Item = &'a ClinicalVariable>,
{
    let mut members: Vec<(Option<i64>, String)> = items
        .into_iter()
        .filter(|cv| {
            cv.dicom_tag(DicomTag::STUDY_INSTANCE_UID) == Some(study_id)
                && cv.dicom_tag(DicomTag::SERIES_INSTANCE_UID) == Some(series_id)
        })
        .enumerate()
        .map(|(pos, cv)| {
            let number = cv
                .dicom_tag(DicomTag::INSTANCE_NUMBER)
                .and_then(|n| n.trim().parse::<i64>().ok());
            let id = cv
                .id
                .clone()
                .unwrap_or_else(|| format!("{study_id}/{series_id}/#{pos}"));
            (number, id)
        })
        .collect();
    if members.is_empty() {
        return Err(StoreError::EmptySeries {
            study: study_id.to_string(),
            series: series_id.to_string(),
        });
    }
    members.sort_by_key(|(n, _)| (n.is_none(), *n));
    Ok(ClinicalVariable::new(
        cvt_id,
        Payload::DicomSeries {
            members: members.into_iter().map(|(_, id)| id).collect(),
            study_id: study_id.to_string(),
            series_id: series_id.to_string(),
        },
    ))
}

fn study_date(value: &str) -> Option<NaiveDate> {
    let v = value.trim();
    NaiveDate::parse_from_str(v, "%Y%m%d")
        .or_else(|_| NaiveDate::from_str(v))
        .ok()
}

impl NodeStore {
    /// Stores a sidecar as a one-variable event of type `met_id`. The
    /// patient (0010,0020) must already be stored; the visit is keyed by
    /// patient and study date (0008,0020) and created when missing.
    pub fn ingest_dicom(&mut self, text: &str, cvt_id: &str, met_id: &str) -> Result<String, StoreError> {
        let cv = parse_dicom_sidecar(text, cvt_id)?;
        let pid = cv
            .dicom_tag(DicomTag::PATIENT_ID)
            .ok_or_else(|| StoreError::MissingDicomTag(DicomTag::PATIENT_ID.to_string()))?
            .trim()
            .to_string();
        let date = cv
            .dicom_tag(DicomTag::STUDY_DATE)
            .and_then(study_date)
            .ok_or_else(|| StoreError::MissingDicomTag(DicomTag::STUDY_DATE.to_string()))?;
        let patient = self
            .patient(&pid)
            .cloned()
            .ok_or_else(|| StoreError::UnknownPatient(pid.clone()))?;
        let visit_id = format!("{pid}@{date}");
        let visit = self.visit(&visit_id).cloned().unwrap_or_else(|| {
            Visit::new(
                visit_id.clone(),
                patient.pseudonym.clone(),
                VisitPurpose::Other("imaging".into()),
                date,
            )
        });
        let event = MedicalEvent::new(self.fresh_event_id(), met_id, visit_id, TimeRef::Instant(date)).with_variable(cv);
        self.record_event(&patient, &visit, event)
    }

    /// Assembles a series from all DICOMData variables in the store.
    pub fn assemble_series(&self, study_id: &str, series_id: &str, cvt_id: &str) -> Result<ClinicalVariable, StoreError> {
        assemble_series(
            self.events().flat_map(|e| e.variables.iter()),
            study_id,
            series_id,
            cvt_id,
        )
    }
}
