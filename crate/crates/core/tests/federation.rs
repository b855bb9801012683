mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clinfed::federation::{demo, gateway_from_config, translate, Fault, FederationError, FederationNode, Gateway};
use clinfed::model::Payload;
use clinfed::ontology::{ConceptMapping, MappingMethod, MappingSet, Ontology};
use clinfed::query::{enhance, execute, optimize, parse, Expr};
use clinfed::store::NodeStore;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn jaw() -> clinfed::query::Query {
    parse(demo::JAW_QUERY).unwrap()
}

fn node_rows(r: &clinfed::federation::FederatedResult) -> Vec<(String, String)> {
    r.rows.iter().map(|x| (x.node_id.clone(), x.row.pseudonym.clone())).collect()
}

#[test]
fn demo_jaw_query_spans_two_nodes() {
    let result = demo::gateway().execute(&jaw()).unwrap();
    assert_eq!(
        node_rows(&result),
        [("node-a", "P1"), ("node-b", "P1"), ("node-a", "P4")].map(|(n, p)| (n.to_string(), p.to_string()))
    );
    assert!(!result.partial);
    assert!(result.dropped_predicates.iter().any(|(n, _)| n == "node-c"));
}

#[test]
fn without_expansion_only_exact_concepts_match() {
    let result = demo::gateway().execute_enhanced(&jaw()).unwrap();
    assert!(result.rows.len() < 3);
    for row in &result.rows {
        assert_ne!(row.node_id, "node-c");
    }
}

#[test]
fn slow_nodes_run_concurrently_and_still_answer() {
    let g = demo::gateway();
    let baseline = g.execute(&jaw()).unwrap();
    for id in g.node_ids() {
        g.inject_fault(&id, Fault::SlowBy(300)).unwrap();
    }
    let start = Instant::now();
    let slow = g.execute(&jaw()).unwrap();
    let took = start.elapsed();
    assert_eq!(slow, baseline);
    assert!(took >= Duration::from_millis(300));
    assert!(took < Duration::from_millis(850), "nodes ran one after another: {took:?}");
}

#[test]
fn unreachable_node_makes_the_answer_partial() {
    let g = demo::gateway();
    g.inject_fault("node-b", Fault::Unreachable).unwrap();
    let r = g.execute(&jaw()).unwrap();
    assert!(r.partial);
    assert_eq!(r.unreachable, ["node-b"]);
    assert!(r.rows.iter().all(|x| x.node_id != "node-b"));
    g.clear_fault("node-b").unwrap();
    assert!(!g.execute(&jaw()).unwrap().partial);
}

#[test]
fn registration_errors() {
    let g = demo::gateway();
    let again = demo::nodes().into_iter().next().unwrap();
    assert!(matches!(g.register_node(again), Err(FederationError::DuplicateNode(_))));
    assert!(matches!(g.inject_fault("nowhere", Fault::Unreachable), Err(FederationError::UnknownNode(_))));
    assert!(matches!(g.remove_node("nowhere"), Err(FederationError::UnknownNode(_))));
    for id in g.node_ids() {
        g.remove_node(&id).unwrap();
    }
    assert!(matches!(g.execute(&jaw()), Err(FederationError::NoNodes)));

    let mut bad = MappingSet::new();
    bad.insert(ConceptMapping {
        local_uri: "locb:Nowhere".into(),
        global_uri: "hec:Jaw".into(),
        confidence: 1.0,
        method: MappingMethod::Manual,
    })
    .unwrap();
    let node = FederationNode::new(NodeStore::new("x", demo::registry()), Arc::new(Ontology::new()), bad);
    assert!(matches!(g.register_node(node), Err(FederationError::Mapping { .. })));
}

#[test]
fn written_demo_config_reloads_to_the_same_answer() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo::write(dir.path()).unwrap();
    let g = gateway_from_config(&config, Arc::new(demo::global_ontology())).unwrap();
    assert_eq!(g.node_ids(), ["node-a", "node-b", "node-c"]);
    assert_eq!(g.execute(&jaw()).unwrap(), demo::gateway().execute(&jaw()).unwrap());
}

#[test]
fn unmapped_concepts_translate_to_false() {
    let node = demo::nodes().into_iter().find(|n| n.node_id() == "node-c").unwrap();
    let t = translate(&parse(r#"FIND events WHERE NOT concept = "hec:Jaw""#).unwrap(), &node);
    assert_eq!(t.query.predicate, Expr::not(Expr::False));
    assert_eq!(t.dropped, ["hec:Jaw"]);
}

/// Renames `c:i` to `<prefix>:i` in every concept payload.
fn rename(store: &NodeStore, node: &str, f: impl Fn(&str) -> String) -> NodeStore {
    let mut out = NodeStore::new(node, store.registry().clone());
    for e in store.events() {
        let v = store.visit(&e.visit).unwrap();
        let p = store.patient(v.patient.as_str()).unwrap();
        let mut e = e.clone();
        for cv in &mut e.variables {
            if let Payload::MedicalConceptInstance { concept_uri } = &mut cv.payload {
                *concept_uri = f(concept_uri);
            }
        }
        out.record_event(p, v, e).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Nodes with their own URIs and partial mappings answer like one
    /// store holding the mapped data.
    #[test]
    fn partial_mappings_match_a_central_store(seed in any::<u64>()) {
        let mut r = rng(seed);
        let concepts = r.gen_range(1..=20);
        let global = Arc::new(ontology(&mut r, concepts));
        let pts = patients(&mut r, 5);
        let gateway = Gateway::new(global.clone());
        let mut central = NodeStore::new("central", registry());
        for k in 0..r.gen_range(1..=3) {
            let node = format!("n{k}");
            let mut raw = NodeStore::new(node.clone(), registry());
            let events = r.gen_range(0..=40);
            fill_store(&mut r, &mut raw, &pts, events, concepts);
            let mapped: BTreeSet<usize> = (0..concepts).filter(|_| r.gen_bool(0.7)).collect();
            let index = |uri: &str| uri.trim_start_matches("c:").parse::<usize>().unwrap();
            let local_store = rename(&raw, &node, |u| format!("l{k}:{}", index(u)));
            let central_part = rename(&raw, &node, |u| {
                if mapped.contains(&index(u)) { u.to_string() } else { format!("unmapped{k}:{}", index(u)) }
            });
            for e in central_part.events() {
                let v = central_part.visit(&e.visit).unwrap();
                central.record_event(central_part.patient(v.patient.as_str()).unwrap(), v, e.clone()).unwrap();
            }
            let local = Ontology::parse(&global.to_text().replace("c:", &format!("l{k}:"))).unwrap();
            let mapping = MappingSet::from_mappings(mapped.iter().map(|i| ConceptMapping {
                local_uri: format!("l{k}:{i}"),
                global_uri: concept_uri(*i),
                confidence: 1.0,
                method: MappingMethod::Manual,
            }))
            .unwrap();
            gateway.register_node(FederationNode::new(local_store, Arc::new(local), mapping)).unwrap();
        }
        let q = query(&mut r, 4, concepts);
        let fed = gateway.execute(&q).unwrap();
        let e = enhance(&q, &global).unwrap();
        let cen = execute(&optimize(&e, central.stats()), &central).unwrap();
        prop_assert_eq!(fed.keys(), cen.keys(), "{}", q);
    }
}
