mod common;

use std::collections::{BTreeSet, VecDeque};

use clinfed::ontology::{
    discover_mappings, normalize_label, token_jaccard, MappingSet, Ontology, OntologyError, Predicate,
};
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Concepts within `depth` undirected hops of `root`, by brute force.
fn neighbourhood(o: &Ontology, root: &str, depth: usize) -> BTreeSet<String> {
    let rels: Vec<_> = o.relations().cloned().collect();
    let mut seen = BTreeSet::from([root.to_string()]);
    let mut frontier = VecDeque::from([(root.to_string(), 0)]);
    while let Some((c, d)) = frontier.pop_front() {
        if d == depth {
            continue;
        }
        for r in &rels {
            let next = if r.subject == c {
                &r.object
            } else if r.object == c {
                &r.subject
            } else {
                continue;
            };
            if seen.insert(next.clone()) {
                frontier.push_back((next.clone(), d + 1));
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn text_form_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(0..40);
        let o = ontology(&mut r, n);
        let text = o.to_text();
        let back = Ontology::parse(&text).unwrap();
        prop_assert_eq!(&back, &o);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn fragments_are_neighbourhoods(seed in any::<u64>(), depth in 0usize..4) {
        let mut r = rng(seed);
        let n = r.gen_range(1..40);
        let o = ontology(&mut r, n);
        let root = concept_uri(r.gen_range(0..n));
        let f = o.extract_fragment(&[&root], depth).unwrap();
        let got: BTreeSet<String> = f.concepts().map(|c| c.uri.clone()).collect();
        prop_assert_eq!(&got, &neighbourhood(&o, &root, depth));
        for rel in o.relations() {
            let inside = got.contains(&rel.subject) && got.contains(&rel.object);
            prop_assert_eq!(f.relations().any(|x| x == rel), inside);
        }
    }

    #[test]
    fn depth_limited_descendants_grow_with_depth(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..40);
        let o = ontology(&mut r, n);
        let root = concept_uri(r.gen_range(0..n));
        let ps = Predicate::expansion_default();
        let full = o.descendants(&root, &ps, None).unwrap();
        let mut previous = BTreeSet::new();
        for d in 0..n {
            let limited = o.descendants(&root, &ps, Some(d)).unwrap();
            prop_assert!(previous.is_subset(&limited) && limited.is_subset(&full));
            previous = limited;
        }
        prop_assert_eq!(previous, full);
    }

    #[test]
    fn jaccard_is_a_symmetric_fraction(a in "[a-zA-Z ,.-]{0,30}", b in "[a-zA-Z ,.-]{0,30}") {
        let j = token_jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, token_jaccard(&b, &a));
        let tokens = normalize_label(&a);
        if !tokens.is_empty() {
            prop_assert_eq!(token_jaccard(&a, &a), 1.0);
        }
        // Independent count over the deduplicated token sets.
        let sa: BTreeSet<String> = tokens.into_iter().collect();
        let sb: BTreeSet<String> = normalize_label(&b).into_iter().collect();
        let union = sa.union(&sb).count();
        if union > 0 {
            prop_assert_eq!(j, sa.intersection(&sb).count() as f64 / union as f64);
        }
    }
}

#[test]
fn sample_files_parse_and_map() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let global = Ontology::load(&dir.join("anatomy.ont")).unwrap();
    let local = Ontology::load(&dir.join("dental_local.ont")).unwrap();
    assert!(global.contains("hec:Jaw") && global.contains("hec:Molar"));
    let found = discover_mappings(&local, &global, None, 0.5).unwrap();
    let pairs: Vec<(&str, &str)> = found.iter().map(|m| (m.local_uri.as_str(), m.global_uri.as_str())).collect();
    assert!(pairs.contains(&("site:LowerJaw", "hec:Jaw")));
    assert!(pairs.contains(&("site:Tooth", "hec:Tooth")));
    let set = MappingSet::from_mappings(found).unwrap();
    set.check(&local, &global).unwrap();
    assert_eq!(MappingSet::parse(&set.to_text()).unwrap(), set);
}

#[test]
fn threshold_must_be_a_fraction() {
    let o = Ontology::new();
    for t in [0.0, -1.0, 1.5, f64::NAN] {
        assert!(matches!(discover_mappings(&o, &o, None, t), Err(OntologyError::InvalidThreshold(_))));
    }
}
