//! Query language over a single store.
//!
//! A query is parsed into a [`Query`], optionally [enhanced](enhance)
//! against an ontology so that concept predicates also match the parts and
//! subtypes of the queried concept, [optimized](optimize) into a
//! [`QueryPlan`] using store statistics, and then [executed](execute).
//!
//! ```
//! use clinfed::query::parse;
//!
//! let q = parse(r#"FIND events WHERE concept = "hec:Jaw" AND age IN [5, 10]"#).unwrap();
//! assert_eq!(q.to_string(), r#"FIND events WHERE concept = "hec:Jaw" AND age IN [5, 10]"#);
//! ```

mod ast;
mod enhance;
mod exec;
mod parser;
mod plan;
mod print;

use thiserror::Error;

pub use ast::{Atom, CmpOp, Expr, Literal, Query, Target};
pub use enhance::{enhance, enhance_with};
pub use exec::{evaluate, execute, execute_unchecked, matches_event, ResultRow, ResultSet};
pub use parser::{parse, SyntaxError};
pub use plan::{normalize, optimize, selectivity, PlannedConjunct, QueryPlan, RANGE_SELECTIVITY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("{kind} {id:?} is not defined in this store's registry")]
    StaleMetadata { kind: &'static str, id: String },
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::Syntax(_) => "SyntaxError",
            QueryError::UnknownConcept(_) => "UnknownConcept",
            QueryError::StaleMetadata { .. } => "StaleMetadata",
        }
    }
}
