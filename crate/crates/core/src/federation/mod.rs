//! Horizontal integration across several nodes.
//!
//! Each [`FederationNode`] holds its own store, local ontology and a
//! mapping from local concepts onto the gateway's global ontology. The
//! [`Gateway`] enhances a query once against the global ontology,
//! [translates](translate) it for every node, runs the node queries
//! concurrently and merges the answers person by person.
//!
//! Nodes are simulated in process; [`Fault`]s make a node unreachable or
//! slow so partial answers can be exercised.

mod config;
pub mod demo;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{MappingSet, Ontology, OntologyError, Predicate};
use crate::query::{enhance_with, execute_unchecked, optimize, Atom, Expr, Query, QueryError, ResultRow, ResultSet, Target};
use crate::store::{NodeStore, SharedStore, StoreError};

pub use config::{load_config, NodeConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FederationError {
    #[error("no nodes are registered")]
    NoNodes,
    #[error("node {0:?} is already registered")]
    DuplicateNode(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {node:?}: {source}")]
    Mapping { node: String, source: OntologyError },
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("node {node:?}: {source}")]
    Store { node: String, source: StoreError },
    #[error("federation config: {0}")]
    Config(String),
}

impl FederationError {
    pub fn code(&self) -> &'static str {
        match self {
            FederationError::NoNodes => "NoNodes",
            FederationError::DuplicateNode(_) => "DuplicateNode",
            FederationError::UnknownNode(_) => "UnknownNode",
            FederationError::Mapping { source, .. } => source.code(),
            FederationError::Query(e) => e.code(),
            FederationError::Store { source, .. } => source.code(),
            FederationError::Config(_) => "FederationConfig",
        }
    }
}

/// One participating site.
#[derive(Debug, Clone)]
pub struct FederationNode {
    node_id: String,
    store: SharedStore,
    ontology: Arc<Ontology>,
    mapping: MappingSet,
}

impl FederationNode {
    /// The node takes its id from the store.
    pub fn new(store: NodeStore, ontology: Arc<Ontology>, mapping: MappingSet) -> Self {
        Self {
            node_id: store.node_id().to_string(),
            store: SharedStore::new(store),
            ontology,
            mapping,
        }
    }

    /// A node whose local ontology is the global one, mapped onto itself.
    pub fn with_global_ontology(store: NodeStore, global: Arc<Ontology>) -> Self {
        let mapping = MappingSet::identity(&global);
        Self::new(store, global, mapping)
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn mapping(&self) -> &MappingSet {
        &self.mapping
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    Unreachable,
    /// Delays the node's reply by this many milliseconds.
    SlowBy(u64),
}

/// A global query rewritten for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub query: Query,
    /// Global concept URIs the node has no mapping for, sorted.
    pub dropped: Vec<String>,
}

/// Replaces every global concept URI by the local URIs mapped onto it.
/// URIs without a local counterpart are dropped; a concept condition left
/// with no URIs becomes `FALSE`.
pub fn translate(global_query: &Query, node: &FederationNode) -> Translation {
    let mut dropped = BTreeSet::new();
    let mut local_set = |globals: &mut dyn Iterator<Item = &String>| {
        let mut out = BTreeSet::new();
        for g in globals {
            let locals = node.mapping.locals_for(g);
            if locals.is_empty() {
                dropped.insert(g.clone());
            }
            out.extend(locals.into_iter().map(str::to_string));
        }
        if out.is_empty() {
            Expr::False
        } else {
            Expr::Atom(Atom::ConceptIsAnyOf(out))
        }
    };
    let predicate = global_query
        .predicate
        .try_map_atoms(&mut |atom| {
            Ok::<_, std::convert::Infallible>(match atom {
                Atom::ConceptIs(uri) => local_set(&mut std::iter::once(uri)),
                Atom::ConceptIsAnyOf(uris) => local_set(&mut uris.iter()),
                other => Expr::Atom(other.clone()),
            })
        })
        .unwrap_or_else(|never| match never {});
    Translation {
        query: Query::new(global_query.target, predicate),
        dropped: dropped.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederatedRow {
    pub node_id: String,
    #[serde(flatten)]
    pub row: ResultRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedResult {
    pub target: Target,
    /// The global query after enhancement.
    pub query: String,
    /// Grouped by pseudonym, then ordered by resolved time.
    pub rows: Vec<FederatedRow>,
    pub partial: bool,
    pub unreachable: Vec<String>,
    /// (node, global concept URI) pairs that had no local mapping.
    pub dropped_predicates: Vec<(String, String)>,
}

impl FederatedResult {
    pub fn keys(&self) -> BTreeSet<(String, Option<String>)> {
        self.rows
            .iter()
            .map(|r| (r.row.pseudonym.clone(), r.row.event_id.clone()))
            .collect()
    }
}

/// Entry point for federated queries.
#[derive(Debug)]
pub struct Gateway {
    global: Arc<Ontology>,
    predicates: BTreeSet<Predicate>,
    nodes: RwLock<BTreeMap<String, Arc<FederationNode>>>,
    faults: RwLock<BTreeMap<String, Fault>>,
}

impl Gateway {
    pub fn new(global: Arc<Ontology>) -> Self {
        Self {
            global,
            predicates: Predicate::expansion_default(),
            nodes: RwLock::new(BTreeMap::new()),
            faults: RwLock::new(BTreeMap::new()),
        }
    }

    /// Predicates followed when enhancing queries.
    pub fn with_expansion(mut self, predicates: BTreeSet<Predicate>) -> Self {
        self.predicates = predicates;
        self
    }

    pub fn global_ontology(&self) -> &Ontology {
        &self.global
    }

    /// Adds a node after checking its mapping against both ontologies.
    pub fn register_node(&self, node: FederationNode) -> Result<(), FederationError> {
        node.mapping
            .check(&node.ontology, &self.global)
            .map_err(|source| FederationError::Mapping {
                node: node.node_id.clone(),
                source,
            })?;
        let mut nodes = self.nodes.write().expect("node table poisoned");
        if nodes.contains_key(&node.node_id) {
            return Err(FederationError::DuplicateNode(node.node_id));
        }
        nodes.insert(node.node_id.clone(), Arc::new(node));
        Ok(())
    }

    pub fn remove_node(&self, node_id: &str) -> Result<Arc<FederationNode>, FederationError> {
        let node = self
            .nodes
            .write()
            .expect("node table poisoned")
            .remove(node_id)
            .ok_or_else(|| FederationError::UnknownNode(node_id.to_string()))?;
        self.faults.write().expect("fault table poisoned").remove(node_id);
        Ok(node)
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.nodes.read().expect("node table poisoned").keys().cloned().collect()
    }

    pub fn node(&self, node_id: &str) -> Option<Arc<FederationNode>> {
        self.nodes.read().expect("node table poisoned").get(node_id).cloned()
    }

    pub fn inject_fault(&self, node_id: &str, fault: Fault) -> Result<(), FederationError> {
        if !self.nodes.read().expect("node table poisoned").contains_key(node_id) {
            return Err(FederationError::UnknownNode(node_id.to_string()));
        }
        self.faults
            .write()
            .expect("fault table poisoned")
            .insert(node_id.to_string(), fault);
        Ok(())
    }

    pub fn clear_fault(&self, node_id: &str) -> Result<(), FederationError> {
        if !self.nodes.read().expect("node table poisoned").contains_key(node_id) {
            return Err(FederationError::UnknownNode(node_id.to_string()));
        }
        self.faults.write().expect("fault table poisoned").remove(node_id);
        Ok(())
    }

    /// Enhances `query` against the global ontology, then runs it on every
    /// node.
    pub fn execute(&self, query: &Query) -> Result<FederatedResult, FederationError> {
        let enhanced = enhance_with(query, &self.global, &self.predicates)?;
        self.execute_enhanced(&enhanced)
    }

    /// Runs `query` on every node as given, without enhancement.
    pub fn execute_enhanced(&self, query: &Query) -> Result<FederatedResult, FederationError> {
        let nodes: Vec<Arc<FederationNode>> = self.nodes.read().expect("node table poisoned").values().cloned().collect();
        let faults = self.faults.read().expect("fault table poisoned").clone();
        if nodes.is_empty() {
            return Err(FederationError::NoNodes);
        }

        let mut unreachable = Vec::new();
        let mut dropped_predicates = Vec::new();
        let mut work = Vec::new();
        for node in &nodes {
            if faults.get(&node.node_id) == Some(&Fault::Unreachable) {
                unreachable.push(node.node_id.clone());
                continue;
            }
            let t = translate(query, node);
            dropped_predicates.extend(t.dropped.into_iter().map(|uri| (node.node_id.clone(), uri)));
            let delay = match faults.get(&node.node_id) {
                Some(Fault::SlowBy(ms)) => Some(Duration::from_millis(*ms)),
                _ => None,
            };
            work.push((node.clone(), t.query, delay));
        }

        let answers: BTreeMap<String, ResultSet> = std::thread::scope(|scope| {
            let handles: Vec<_> = work
                .iter()
                .map(|(node, local, delay)| {
                    scope.spawn(move || {
                        if let Some(d) = delay {
                            std::thread::sleep(*d);
                        }
                        let store = node.store.read();
                        let plan = optimize(local, store.stats());
                        (node.node_id.clone(), execute_unchecked(&plan, &store))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("node query panicked"))
                .collect()
        });

        Ok(FederatedResult {
            target: query.target,
            query: query.to_string(),
            rows: merge(answers),
            partial: !unreachable.is_empty(),
            unreachable,
            dropped_predicates,
        })
    }
}

/// Deduplicates by (pseudonym, event id), preferring the node that sorts
/// first, and orders rows by pseudonym, time, event id and node.
fn merge(answers: BTreeMap<String, ResultSet>) -> Vec<FederatedRow> {
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for (node_id, rs) in answers {
        for row in rs.rows {
            if seen.insert((row.pseudonym.clone(), row.event_id.clone())) {
                rows.push(FederatedRow {
                    node_id: node_id.clone(),
                    row,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.row
            .pseudonym
            .cmp(&b.row.pseudonym)
            .then_with(|| match (&a.row.time, &b.row.time) {
                (Some(x), Some(y)) => x.timeline_cmp(y),
                (x, y) => x.is_some().cmp(&y.is_some()),
            })
            .then_with(|| a.row.event_id.cmp(&b.row.event_id))
            .then_with(|| a.node_id.cmp(&b.node_id))
    });
    rows
}

/// Loads every node listed in a federation config file.
pub fn gateway_from_config(path: &std::path::Path, global: Arc<Ontology>) -> Result<Gateway, FederationError> {
    let gateway = Gateway::new(global);
    for entry in load_config(path)? {
        gateway.register_node(entry.load()?)?;
    }
    Ok(gateway)
}
