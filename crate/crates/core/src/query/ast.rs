use std::collections::BTreeSet;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::VerticalLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Patients,
    Events,
    Variables,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Patients => "patients",
            Target::Events => "events",
            Target::Variables => "variables",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Literal {
    Number(Decimal),
    Text(String),
    Date(NaiveDate),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    VariableCmp { cvt_id: String, op: CmpOp, value: Literal },
    ConceptIs(String),
    ConceptIsAnyOf(BTreeSet<String>),
    ClassificationIs { cvt_id: String, item: String },
    EventTypeIs(String),
    LevelIs(VerticalLevel),
    AgeAtEventIn { min_years: u32, max_years: u32 },
    TimeWindow { start: NaiveDate, end: NaiveDate },
}

impl Atom {
    /// `cvt op value`, in canonical form: string equality is a
    /// [`Atom::ClassificationIs`], which is what the parser produces.
    pub fn compare(cvt_id: impl Into<String>, op: CmpOp, value: Literal) -> Atom {
        match (op, value) {
            (CmpOp::Eq, Literal::Text(item)) => Atom::ClassificationIs {
                cvt_id: cvt_id.into(),
                item,
            },
            (op, value) => Atom::VariableCmp {
                cvt_id: cvt_id.into(),
                op,
                value,
            },
        }
    }

    /// CVT id this atom reads, if any.
    pub fn cvt_id(&self) -> Option<&str> {
        match self {
            Atom::VariableCmp { cvt_id, .. } | Atom::ClassificationIs { cvt_id, .. } => Some(cvt_id),
            _ => None,
        }
    }
}

/// Boolean predicate tree. `And`/`Or` built by the parser always have at
/// least two children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    True,
    False,
    Atom(Atom),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn atom(a: Atom) -> Expr {
        Expr::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Visits every atom, depth first, left to right.
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Expr::True | Expr::False => {}
            Expr::Atom(a) => f(a),
            Expr::Not(e) => e.for_each_atom(f),
            Expr::And(cs) | Expr::Or(cs) => cs.iter().for_each(|c| c.for_each_atom(f)),
        }
    }

    /// Rebuilds the tree with every atom replaced by `f(atom)`.
    pub fn try_map_atoms<E>(&self, f: &mut impl FnMut(&Atom) -> Result<Expr, E>) -> Result<Expr, E> {
        Ok(match self {
            Expr::True => Expr::True,
            Expr::False => Expr::False,
            Expr::Atom(a) => f(a)?,
            Expr::Not(e) => Expr::Not(Box::new(e.try_map_atoms(f)?)),
            Expr::And(cs) => Expr::And(cs.iter().map(|c| c.try_map_atoms(f)).collect::<Result<_, _>>()?),
            Expr::Or(cs) => Expr::Or(cs.iter().map(|c| c.try_map_atoms(f)).collect::<Result<_, _>>()?),
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::True | Expr::False | Expr::Atom(_) => 1,
            Expr::Not(e) => 1 + e.depth(),
            Expr::And(cs) | Expr::Or(cs) => 1 + cs.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub target: Target,
    pub predicate: Expr,
}

impl Query {
    pub fn new(target: Target, predicate: Expr) -> Self {
        Self { target, predicate }
    }
}
