use std::collections::BTreeSet;

use super::ast::{Atom, Expr, Query};
use super::QueryError;
use crate::ontology::{Ontology, Predicate};

/// [`enhance_with`] using the default expansion predicates
/// (`is_a`, `part_of`, `regional_part_of`).
pub fn enhance(query: &Query, ontology: &Ontology) -> Result<Query, QueryError> {
    enhance_with(query, ontology, &Predicate::expansion_default())
}

/// Replaces every `concept = c` with `concept IN [c, ...]` listing `c`
/// and all its descendants along `predicates`.
///
/// Only conditions under an even number of `NOT`s are expanded, so the
/// enhanced query matches everything the original did. Negated concept
/// conditions are checked against the ontology but kept literal. Other
/// atoms, including existing concept sets, are left alone, so enhancing
/// twice changes nothing.
pub fn enhance_with(query: &Query, ontology: &Ontology, predicates: &BTreeSet<Predicate>) -> Result<Query, QueryError> {
    let predicate = rewrite(&query.predicate, true, ontology, predicates)?;
    Ok(Query::new(query.target, predicate))
}

fn rewrite(e: &Expr, positive: bool, ontology: &Ontology, predicates: &BTreeSet<Predicate>) -> Result<Expr, QueryError> {
    let all = |cs: &[Expr]| -> Result<Vec<Expr>, QueryError> {
        cs.iter().map(|c| rewrite(c, positive, ontology, predicates)).collect()
    };
    Ok(match e {
        Expr::Atom(Atom::ConceptIs(uri)) => {
            let mut set = ontology
                .descendants(uri, predicates, None)
                .map_err(|_| QueryError::UnknownConcept(uri.clone()))?;
            if positive {
                set.insert(uri.clone());
                Expr::Atom(Atom::ConceptIsAnyOf(set))
            } else {
                e.clone()
            }
        }
        Expr::Not(inner) => Expr::Not(Box::new(rewrite(inner, !positive, ontology, predicates)?)),
        Expr::And(cs) => Expr::And(all(cs)?),
        Expr::Or(cs) => Expr::Or(all(cs)?),
        other => other.clone(),
    })
}
#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::fixtures::anatomy;
    use crate::query::parse;

    fn concept_set(q: &Query) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        q.predicate.for_each_atom(&mut |a| {
            if let Atom::ConceptIsAnyOf(s) = a {
                out.extend(s.iter().cloned());
            }
        });
        out
    }

    #[test]
    fn jaw_expands_to_teeth() {
        let q = parse(r#"FIND events WHERE concept = "hec:Jaw""#).unwrap();
        let e = enhance(&q, &anatomy()).unwrap();
        assert!(concept_set(&e).contains("hec:Tooth"));
        assert!(concept_set(&e).contains("hec:Jaw"));
        assert_eq!(enhance(&e, &anatomy()).unwrap(), e);
    }

    #[test]
    fn brain_reaches_cerebellum() {
        let q = parse(r#"FIND events WHERE NOT NOT concept = "fma:Brain" OR level = organ"#);
        assert!(q.is_err());
        let q = parse(r#"FIND events WHERE NOT (NOT concept = "fma:Brain") OR level = organ"#).unwrap();
        let e = enhance(&q, &anatomy()).unwrap();
        assert!(concept_set(&e).contains("fma:Cerebellum"));
    }

    #[test]
    fn negated_concepts_stay_literal() {
        let q = parse(r#"FIND events WHERE NOT concept = "hec:Jaw" AND concept = "hec:Tooth""#).unwrap();
        let e = enhance(&q, &anatomy()).unwrap();
        assert_eq!(
            e.to_string(),
            r#"FIND events WHERE NOT concept = "hec:Jaw" AND concept IN ["hec:Molar", "hec:Tooth"]"#
        );
        let bad = parse(r#"FIND events WHERE NOT concept = "hec:Nope""#).unwrap();
        assert!(enhance(&bad, &anatomy()).is_err());
    }

    #[test]
    fn identity_without_concepts() {
        let q = parse(r#"FIND events WHERE RVDilation = "Severe" AND age IN [5, 10]"#).unwrap();
        assert_eq!(enhance(&q, &anatomy()).unwrap(), q);
    }

    #[test]
    fn unknown_concept() {
        let q = parse(r#"FIND events WHERE concept = "hec:Nope""#).unwrap();
        assert_eq!(
            enhance(&q, &anatomy()).unwrap_err(),
            QueryError::UnknownConcept("hec:Nope".into())
        );
    }

    #[test]
    fn predicate_subset_limits_expansion() {
        let q = parse(r#"FIND events WHERE concept = "hec:Jaw""#).unwrap();
        let only_is_a: BTreeSet<_> = [Predicate::IsA].into();
        let e = enhance_with(&q, &anatomy(), &only_is_a).unwrap();
        assert!(!concept_set(&e).contains("hec:Tooth"));
    }
}
