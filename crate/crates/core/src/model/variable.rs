use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// The seven clinical-variable categories. A CVT fixes the category of
/// every variable created from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Measurement,
    Annotation,
    ObservationByClassification,
    #[serde(rename = "DICOMData")]
    DicomData,
    #[serde(rename = "DICOMSeries")]
    DicomSeries,
    ExternalResource,
    MedicalConceptInstance,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Measurement,
        Category::Annotation,
        Category::ObservationByClassification,
        Category::DicomData,
        Category::DicomSeries,
        Category::ExternalResource,
        Category::MedicalConceptInstance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Measurement => "Measurement",
            Category::Annotation => "Annotation",
            Category::ObservationByClassification => "ObservationByClassification",
            Category::DicomData => "DICOMData",
            Category::DicomSeries => "DICOMSeries",
            Category::ExternalResource => "ExternalResource",
            Category::MedicalConceptInstance => "MedicalConceptInstance",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A DICOM attribute tag, printed as `GGGGEEEE` (group then element, hex).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DicomTag {
    pub group: u16,
    pub element: u16,
}

impl DicomTag {
    pub const PATIENT_ID: DicomTag = DicomTag::new(0x0010, 0x0020);
    pub const STUDY_DATE: DicomTag = DicomTag::new(0x0008, 0x0020);
    pub const SOP_INSTANCE_UID: DicomTag = DicomTag::new(0x0008, 0x0018);
    pub const STUDY_INSTANCE_UID: DicomTag = DicomTag::new(0x0020, 0x000D);
    pub const SERIES_INSTANCE_UID: DicomTag = DicomTag::new(0x0020, 0x000E);
    pub const INSTANCE_NUMBER: DicomTag = DicomTag::new(0x0020, 0x0013);

    pub const fn new(group: u16, element: u16) -> Self {
        Self { group, element }
    }
}

impl fmt::Display for DicomTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}{:04X}", self.group, self.element)
    }
}

impl FromStr for DicomTag {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::MalformedTag(s.to_string());
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(bad());
        }
        let group = u16::from_str_radix(&s[..4], 16).map_err(|_| bad())?;
        let element = u16::from_str_radix(&s[4..], 16).map_err(|_| bad())?;
        Ok(DicomTag { group, element })
    }
}

impl Serialize for DicomTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DicomTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DicomTagValue {
    pub tag: DicomTag,
    pub value: String,
}

/// Category-specific content of a clinical variable.
///
/// Each variant is one of the seven categories; there is no way to build
/// a variable outside them, and a measurement cannot be built without a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "category")]
pub enum Payload {
    Measurement {
        value: Decimal,
        unit: String,
    },
    Annotation {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        attached_to: Option<String>,
    },
    ObservationByClassification {
        item: String,
    },
    #[serde(rename = "DICOMData")]
    DicomData {
        tags: Vec<DicomTagValue>,
    },
    #[serde(rename = "DICOMSeries")]
    DicomSeries {
        members: Vec<String>,
        study_id: String,
        series_id: String,
    },
    ExternalResource {
        uri: String,
    },
    MedicalConceptInstance {
        concept_uri: String,
    },
}

impl Payload {
    pub fn category(&self) -> Category {
        match self {
            Payload::Measurement { .. } => Category::Measurement,
            Payload::Annotation { .. } => Category::Annotation,
            Payload::ObservationByClassification { .. } => Category::ObservationByClassification,
            Payload::DicomData { .. } => Category::DicomData,
            Payload::DicomSeries { .. } => Category::DicomSeries,
            Payload::ExternalResource { .. } => Category::ExternalResource,
            Payload::MedicalConceptInstance { .. } => Category::MedicalConceptInstance,
        }
    }

    /// Textual value used by string comparisons in queries.
    pub fn text_value(&self) -> Option<&str> {
        match self {
            Payload::Annotation { text, .. } => Some(text),
            Payload::ObservationByClassification { item } => Some(item),
            Payload::ExternalResource { uri } => Some(uri),
            Payload::MedicalConceptInstance { concept_uri } => Some(concept_uri),
            _ => None,
        }
    }

    /// A canonical rendering of the value, used for distinct-value statistics.
    pub fn value_key(&self) -> String {
        match self {
            Payload::Measurement { value, unit } => format!("{} {unit}", value.normalize()),
            Payload::DicomData { tags } => tags
                .iter()
                .map(|t| format!("{}={}", t.tag, t.value))
                .collect::<Vec<_>>()
                .join(";"),
            Payload::DicomSeries {
                study_id,
                series_id,
                ..
            } => format!("{study_id}/{series_id}"),
            other => other.text_value().unwrap_or_default().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalVariable {
    /// Optional identifier, needed when other variables refer to this one
    /// (annotations, DICOM series members).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub cvt_id: String,
    pub payload: Payload,
}

impl ClinicalVariable {
    pub fn new(cvt_id: impl Into<String>, payload: Payload) -> Self {
        Self {
            id: None,
            cvt_id: cvt_id.into(),
            payload,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn measurement(cvt_id: impl Into<String>, value: Decimal, unit: impl Into<String>) -> Self {
        Self::new(
            cvt_id,
            Payload::Measurement {
                value,
                unit: unit.into(),
            },
        )
    }

    pub fn classified(cvt_id: impl Into<String>, item: impl Into<String>) -> Self {
        Self::new(cvt_id, Payload::ObservationByClassification { item: item.into() })
    }

    pub fn concept(cvt_id: impl Into<String>, concept_uri: impl Into<String>) -> Self {
        Self::new(
            cvt_id,
            Payload::MedicalConceptInstance {
                concept_uri: concept_uri.into(),
            },
        )
    }

    pub fn category(&self) -> Category {
        self.payload.category()
    }

    /// Value of a DICOM tag, when this is a DICOMData variable.
    pub fn dicom_tag(&self, tag: DicomTag) -> Option<&str> {
        match &self.payload {
            Payload::DicomData { tags } => tags
                .iter()
                .find(|t| t.tag == tag)
                .map(|t| t.value.as_str()),
            _ => None,
        }
    }
}
