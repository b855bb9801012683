//! Federated clinical data integration.
//!
//! The crate is organised along the three layers of the data model plus
//! the machinery that works on top of them:
//!
//! - [`model`]: patients, visits, medical events, clinical variables and time.
//! - [`registry`]: the metadata layer that every stored variable is checked against.
//! - [`store`]: a validated, line-delimited JSON record store for one node.
//! - [`ontology`]: medical concepts, typed relations, mappings and similarity.
//! - [`query`]: query language, ontology-driven enhancement, planning and execution.
//! - [`federation`]: a gateway fanning queries out to several simulated nodes.
//! - [`cli`]: the command-line surface used by the `clinfed` binary.

pub mod model;
pub mod registry;
pub mod store;
pub mod ontology;
pub mod query;
pub mod federation;
pub mod cli;
