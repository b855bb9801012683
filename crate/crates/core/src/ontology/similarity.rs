//! Resnik similarity: the information content of the most informative
//! common `is_a` ancestor of two concepts.
//!
//! Annotation counts are propagated upwards, so a concept's effective
//! count is its own count plus the counts of all its `is_a` descendants.
//! Probabilities are taken relative to the total count of the connected
//! `is_a` component the concepts live in, which for a single-rooted
//! hierarchy is the root's effective count. IC(c) = -ln p(c).

use std::collections::{BTreeMap, BTreeSet};

use super::{Ontology, OntologyError, Predicate};

/// Own (unpropagated) annotation count per concept URI.
pub type AnnotationCounts = BTreeMap<String, u64>;

/// Precomputed effective counts for one ontology and one corpus.
#[derive(Debug, Clone)]
pub struct InformationContent<'a> {
    ontology: &'a Ontology,
    effective: BTreeMap<&'a str, u64>,
    component: BTreeMap<&'a str, usize>,
    component_total: Vec<u64>,
}

impl<'a> InformationContent<'a> {
    pub fn new(ontology: &'a Ontology, counts: &AnnotationCounts) -> Result<Self, OntologyError> {
        if let Some(unknown) = counts.keys().find(|u| !ontology.contains(u)) {
            return Err(OntologyError::UnknownConcept(unknown.clone()));
        }
        let own = |u: &str| counts.get(u).copied().unwrap_or(0);
        let is_a: BTreeSet<Predicate> = [Predicate::IsA].into();

        let mut effective = BTreeMap::new();
        for c in ontology.concepts() {
            let below = ontology.descendants(&c.uri, &is_a, None)?;
            let total = own(&c.uri) + below.iter().map(|d| own(d)).sum::<u64>();
            effective.insert(c.uri.as_str(), total);
        }

        // connected components of the is_a graph, by label propagation
        let mut component: BTreeMap<&str, usize> = BTreeMap::new();
        let mut component_total = Vec::new();
        for c in ontology.concepts() {
            if component.contains_key(c.uri.as_str()) {
                continue;
            }
            let id = component_total.len();
            let mut total = 0;
            let mut stack = vec![c.uri.as_str()];
            while let Some(u) = stack.pop() {
                if component.contains_key(u) {
                    continue;
                }
                component.insert(u, id);
                total += own(u);
                stack.extend(ontology.parents(u, Predicate::IsA));
                stack.extend(
                    ontology
                        .incoming
                        .get(u)
                        .into_iter()
                        .flatten()
                        .filter(|(p, _)| *p == Predicate::IsA)
                        .map(|(_, s)| s.as_str()),
                );
            }
            component_total.push(total);
        }

        Ok(Self {
            ontology,
            effective,
            component,
            component_total,
        })
    }

    pub fn effective_count(&self, uri: &str) -> Option<u64> {
        self.effective.get(uri).copied()
    }

    /// Information content of a concept; `None` when its effective count
    /// is zero (the value would be infinite).
    pub fn ic(&self, uri: &str) -> Result<Option<f64>, OntologyError> {
        let eff = self
            .effective_count(uri)
            .ok_or_else(|| OntologyError::UnknownConcept(uri.to_string()))?;
        let total = self.component_total[self.component[uri]];
        if total == 0 {
            return Err(OntologyError::ZeroCorpus);
        }
        Ok((eff > 0).then(|| -(eff as f64 / total as f64).ln()))
    }

    /// Largest IC over the common `is_a` ancestors of `a` and `b`
    /// (each counts as its own ancestor). Ancestors with no annotations
    /// below them are skipped.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, OntologyError> {
        let up_a = self.ontology.ancestors_or_self(a, Predicate::IsA)?;
        let up_b = self.ontology.ancestors_or_self(b, Predicate::IsA)?;
        let common: Vec<&String> = up_a.intersection(&up_b).collect();
        if common.is_empty() {
            return Err(OntologyError::NoCommonAncestor(a.to_string(), b.to_string()));
        }
        let mut best = 0.0f64;
        for c in common {
            if let Some(ic) = self.ic(c)? {
                best = best.max(ic);
            }
        }
        // -ln(1) comes out as -0.0
        Ok(best.max(0.0))
    }
}

/// One-shot Resnik similarity; see [`InformationContent`] for batches.
pub fn resnik_similarity(ontology: &Ontology, a: &str, b: &str, counts: &AnnotationCounts) -> Result<f64, OntologyError> {
    InformationContent::new(ontology, counts)?.similarity(a, b)
}

#[cfg(test)]
mod tests {
    use super::super::{ConceptGroup, ConceptRelation, MedicalConcept};
    use super::*;

    fn tree() -> Ontology {
        let mut o = Ontology::new();
        for u in ["t:root", "t:x", "t:y"] {
            o.add_concept(MedicalConcept::new(u, u, ConceptGroup::Disease)).unwrap();
        }
        o.add_relation(ConceptRelation::new("t:x", Predicate::IsA, "t:root")).unwrap();
        o.add_relation(ConceptRelation::new("t:y", Predicate::IsA, "t:root")).unwrap();
        o
    }

    fn counts(pairs: &[(&str, u64)]) -> AnnotationCounts {
        pairs.iter().map(|(u, n)| (u.to_string(), *n)).collect()
    }

    #[test]
    fn three_node_tree() {
        let o = tree();
        let c = counts(&[("t:root", 0), ("t:x", 1), ("t:y", 1)]);
        assert_eq!(resnik_similarity(&o, "t:x", "t:y", &c).unwrap(), 0.0);
        let self_sim = resnik_similarity(&o, "t:x", "t:x", &c).unwrap();
        assert!((self_sim - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_is_ic() {
        let o = tree();
        let c = counts(&[("t:x", 3), ("t:y", 1)]);
        let ic = InformationContent::new(&o, &c).unwrap();
        assert_eq!(ic.similarity("t:y", "t:y").unwrap(), ic.ic("t:y").unwrap().unwrap());
        assert!((ic.ic("t:y").unwrap().unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(ic.effective_count("t:root"), Some(4));
    }

    #[test]
    fn disjoint_roots_have_no_common_ancestor() {
        let mut o = tree();
        o.add_concept(MedicalConcept::new("t:z", "z", ConceptGroup::Disease)).unwrap();
        let c = counts(&[("t:x", 1), ("t:z", 1)]);
        assert!(matches!(
            resnik_similarity(&o, "t:x", "t:z", &c),
            Err(OntologyError::NoCommonAncestor(..))
        ));
    }

    #[test]
    fn corpus_errors() {
        let o = tree();
        assert_eq!(
            resnik_similarity(&o, "t:x", "t:y", &counts(&[])),
            Err(OntologyError::ZeroCorpus)
        );
        assert!(matches!(
            resnik_similarity(&o, "t:x", "t:q", &counts(&[("t:x", 1)])),
            Err(OntologyError::UnknownConcept(_))
        ));
        assert!(matches!(
            InformationContent::new(&o, &counts(&[("t:nope", 1)])),
            Err(OntologyError::UnknownConcept(_))
        ));
    }

    #[test]
    fn diamond_counts_each_descendant_once() {
        let mut o = tree();
        o.add_concept(MedicalConcept::new("t:w", "w", ConceptGroup::Disease)).unwrap();
        o.add_relation(ConceptRelation::new("t:w", Predicate::IsA, "t:x")).unwrap();
        o.add_relation(ConceptRelation::new("t:w", Predicate::IsA, "t:y")).unwrap();
        let ic = InformationContent::new(&o, &counts(&[("t:w", 2)])).unwrap();
        assert_eq!(ic.effective_count("t:root"), Some(2));
        assert_eq!(ic.similarity("t:x", "t:y").unwrap(), 0.0);
    }
}
