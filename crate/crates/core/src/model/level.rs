use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Granularity at which a piece of data describes the patient.
///
/// Variants are declared in ascending order so the derived `Ord` gives
/// Molecular < Cellular < Tissue < Organ < Body < Population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerticalLevel {
    Molecular,
    Cellular,
    Tissue,
    Organ,
    Body,
    Population,
}

impl VerticalLevel {
    pub const ALL: [VerticalLevel; 6] = [
        VerticalLevel::Molecular,
        VerticalLevel::Cellular,
        VerticalLevel::Tissue,
        VerticalLevel::Organ,
        VerticalLevel::Body,
        VerticalLevel::Population,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerticalLevel::Molecular => "molecular",
            VerticalLevel::Cellular => "cellular",
            VerticalLevel::Tissue => "tissue",
            VerticalLevel::Organ => "organ",
            VerticalLevel::Body => "body",
            VerticalLevel::Population => "population",
        }
    }
}

impl fmt::Display for VerticalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerticalLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerticalLevel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown vertical level {s:?}"))
    }
}
