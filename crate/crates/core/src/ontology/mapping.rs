//! Local-to-global concept alignment.
//!
//! Each node keeps its own local ontology and maps it onto the shared
//! global one; mappings between local ontologies are never needed.
//! Candidate alignments come from label comparison and, when available,
//! from instance overlap.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::text::tokenize;
use super::{Ontology, OntologyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MappingMethod {
    ExactLabel,
    TokenOverlap,
    SharedInstances,
    Manual,
}

impl MappingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MappingMethod::ExactLabel => "ExactLabel",
            MappingMethod::TokenOverlap => "TokenOverlap",
            MappingMethod::SharedInstances => "SharedInstances",
            MappingMethod::Manual => "Manual",
        }
    }
}

impl fmt::Display for MappingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MappingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            MappingMethod::ExactLabel,
            MappingMethod::TokenOverlap,
            MappingMethod::SharedInstances,
            MappingMethod::Manual,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown mapping method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMapping {
    pub local_uri: String,
    pub global_uri: String,
    pub confidence: f64,
    pub method: MappingMethod,
}

/// Lowercases, drops punctuation and returns the sorted word tokens.
pub fn normalize_label(label: &str) -> Vec<String> {
    let cleaned: String = label
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    let mut tokens: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
    tokens.sort();
    tokens
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Jaccard index of the normalized label token sets.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = normalize_label(a).into_iter().collect();
    let tb: BTreeSet<String> = normalize_label(b).into_iter().collect();
    jaccard(&ta, &tb)
}

/// Best score for one (local, global) pair and the signal that produced it.
/// On equal scores the label signals win over instance overlap.
fn score_pair(
    local: &super::MedicalConcept,
    global: &super::MedicalConcept,
    instances: Option<&BTreeMap<String, BTreeSet<String>>>,
) -> (f64, MappingMethod) {
    let nl = normalize_label(&local.label);
    let mut best = if !nl.is_empty() && nl == normalize_label(&global.label) {
        (1.0, MappingMethod::ExactLabel)
    } else {
        (token_jaccard(&local.label, &global.label), MappingMethod::TokenOverlap)
    };
    if let Some(inst) = instances {
        if let (Some(a), Some(b)) = (inst.get(&local.uri), inst.get(&global.uri)) {
            let s = jaccard(a, b);
            if s > best.0 {
                best = (s, MappingMethod::SharedInstances);
            }
        }
    }
    best
}

/// Proposes a global concept for each local concept.
///
/// The score of a pair is the best of: 1.0 for equal normalized labels,
/// the Jaccard index of label tokens, and the Jaccard index of shared
/// instance sets. The best global candidate is emitted when it reaches
/// `threshold`; two candidates tied for the top score are reported as
/// [`OntologyError::AmbiguousMapping`] for a human to settle.
pub fn discover_mappings(
    local: &Ontology,
    global: &Ontology,
    shared_instances: Option<&BTreeMap<String, BTreeSet<String>>>,
    threshold: f64,
) -> Result<Vec<ConceptMapping>, OntologyError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(OntologyError::InvalidThreshold(threshold));
    }
    let mut out = Vec::new();
    for lc in local.concepts() {
        let mut best: Option<(f64, MappingMethod, &str)> = None;
        let mut tied = false;
        for gc in global.concepts() {
            let (score, method) = score_pair(lc, gc, shared_instances);
            match best {
                Some((top, ..)) if score < top => {}
                Some((top, ..)) if score == top => tied = true,
                _ => {
                    best = Some((score, method, gc.uri.as_str()));
                    tied = false;
                }
            }
        }
        let Some((score, method, global_uri)) = best else { continue };
        if score < threshold {
            continue;
        }
        if tied {
            return Err(OntologyError::AmbiguousMapping(lc.uri.clone()));
        }
        out.push(ConceptMapping {
            local_uri: lc.uri.clone(),
            global_uri: global_uri.to_string(),
            confidence: score,
            method,
        });
    }
    Ok(out)
}

/// A node's mapping table: each local concept maps to at most one global one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MappingSet {
    by_local: BTreeMap<String, ConceptMapping>,
}

impl MappingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Maps every concept of `ontology` onto itself.
    pub fn identity(ontology: &Ontology) -> Self {
        let mut set = Self::new();
        for c in ontology.concepts() {
            set.by_local.insert(
                c.uri.clone(),
                ConceptMapping {
                    local_uri: c.uri.clone(),
                    global_uri: c.uri.clone(),
                    confidence: 1.0,
                    method: MappingMethod::Manual,
                },
            );
        }
        set
    }

    pub fn from_mappings(mappings: impl IntoIterator<Item = ConceptMapping>) -> Result<Self, OntologyError> {
        let mut set = Self::new();
        for m in mappings {
            set.insert(m)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, m: ConceptMapping) -> Result<(), OntologyError> {
        if !(0.0..=1.0).contains(&m.confidence) {
            return Err(OntologyError::InvalidMapping(format!(
                "confidence {} of {} is outside [0, 1]",
                m.confidence, m.local_uri
            )));
        }
        if self.by_local.contains_key(&m.local_uri) {
            return Err(OntologyError::InvalidMapping(format!(
                "{} is mapped more than once",
                m.local_uri
            )));
        }
        self.by_local.insert(m.local_uri.clone(), m);
        Ok(())
    }

    pub fn global_for(&self, local_uri: &str) -> Option<&str> {
        self.by_local.get(local_uri).map(|m| m.global_uri.as_str())
    }

    /// Local concepts mapped onto `global_uri`, sorted.
    pub fn locals_for(&self, global_uri: &str) -> Vec<&str> {
        self.by_local
            .values()
            .filter(|m| m.global_uri == global_uri)
            .map(|m| m.local_uri.as_str())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConceptMapping> {
        self.by_local.values()
    }

    pub fn len(&self) -> usize {
        self.by_local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_local.is_empty()
    }

    /// Checks every endpoint against the local and global ontologies.
    pub fn check(&self, local: &Ontology, global: &Ontology) -> Result<(), OntologyError> {
        for m in self.by_local.values() {
            if !local.contains(&m.local_uri) {
                return Err(OntologyError::InvalidMapping(format!(
                    "{} is not in the local ontology",
                    m.local_uri
                )));
            }
            if !global.contains(&m.global_uri) {
                return Err(OntologyError::InvalidMapping(format!(
                    "{} is not in the global ontology",
                    m.global_uri
                )));
            }
        }
        Ok(())
    }

    /// Parses `map <local> <global> <confidence> <method>` lines.
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let mut set = Self::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| OntologyError::Parse { line: i + 1, message };
            let tokens = tokenize(line).map_err(err)?;
            match tokens.as_slice() {
                [] => {}
                [head, local, global, conf, method] if head == "map" => {
                    let confidence: f64 = conf.parse().map_err(|e| err(format!("confidence: {e}")))?;
                    let method = method.parse().map_err(err)?;
                    set.insert(ConceptMapping {
                        local_uri: local.clone(),
                        global_uri: global.clone(),
                        confidence,
                        method,
                    })
                    .map_err(|e| err(e.to_string()))?;
                }
                _ => return Err(err(format!("expected `map <local> <global> <confidence> <method>`, got {line:?}"))),
            }
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in self.by_local.values() {
            let _ = writeln!(out, "map {} {} {} {}", m.local_uri, m.global_uri, m.confidence, m.method);
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, OntologyError> {
        let text = std::fs::read_to_string(path).map_err(|e| OntologyError::Parse {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }
}
