use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::ast::{Atom, CmpOp, Expr, Query, Target};
use crate::store::StoreStats;

/// Estimated matching fraction for range conditions (`<`, `>`, age bands,
/// time windows). Only counts are tracked, so there is nothing better to
/// go on.
pub const RANGE_SELECTIVITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedConjunct {
    /// An atom or a negated atom.
    pub expr: Expr,
    pub selectivity: f64,
}

/// An executable plan: the top-level conjuncts in evaluation order plus
/// whatever could not be split off.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPlan {
    pub target: Target,
    pub conjuncts: Vec<PlannedConjunct>,
    pub residual: Expr,
    /// Estimated selectivity of the residual tree.
    pub residual_selectivity: f64,
    /// CVTs the query as written refers to. Variables rows keep only these.
    pub projection: BTreeSet<String>,
}

impl QueryPlan {
    /// The predicate the plan evaluates, as one tree.
    pub fn predicate(&self) -> Expr {
        let mut parts: Vec<Expr> = self.conjuncts.iter().map(|c| c.expr.clone()).collect();
        if self.residual != Expr::True || parts.is_empty() {
            parts.push(self.residual.clone());
        }
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Expr::And(parts)
        }
    }

    pub fn query(&self) -> Query {
        Query::new(self.target, self.predicate())
    }
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "plan for FIND {}", self.target.as_str())?;
        for (i, c) in self.conjuncts.iter().enumerate() {
            writeln!(f, "  {}. [{:.4}] {}", i + 1, c.selectivity, c.expr)?;
        }
        write!(f, "  residual [{:.4}]: {}", self.residual_selectivity, self.residual)
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    (count as f64 / total as f64).min(1.0)
}

fn atom_selectivity(atom: &Atom, stats: &StoreStats) -> f64 {
    let n = stats.events;
    if n == 0 {
        return 1.0;
    }
    let concept = |uri: &str| fraction(stats.per_concept.get(uri).copied().unwrap_or(0), n);
    match atom {
        Atom::ConceptIs(uri) => concept(uri),
        Atom::ConceptIsAnyOf(uris) => uris.iter().map(|u| concept(u)).sum::<f64>().min(1.0),
        Atom::EventTypeIs(met) => fraction(stats.per_event_type.get(met).copied().unwrap_or(0), n),
        Atom::LevelIs(level) => fraction(stats.per_level.get(level).copied().unwrap_or(0), n),
        Atom::AgeAtEventIn { .. } | Atom::TimeWindow { .. } => RANGE_SELECTIVITY,
        Atom::ClassificationIs { cvt_id, .. } | Atom::VariableCmp { cvt_id, .. } => {
            let Some(cvt) = stats.per_cvt.get(cvt_id.as_str()).filter(|c| c.distinct > 0) else {
                return 1.0;
            };
            let present = fraction(cvt.events, n);
            let one_value = 1.0 / cvt.distinct as f64;
            let op = match atom {
                Atom::VariableCmp { op, .. } => *op,
                _ => CmpOp::Eq,
            };
            present
                * match op {
                    CmpOp::Eq => one_value,
                    CmpOp::Ne => 1.0 - one_value,
                    _ => RANGE_SELECTIVITY,
                }
        }
    }
}

/// Estimated fraction of the store's events satisfying `expr`.
pub fn selectivity(expr: &Expr, stats: &StoreStats) -> f64 {
    match expr {
        Expr::True => 1.0,
        Expr::False => 0.0,
        Expr::Atom(a) => atom_selectivity(a, stats),
        Expr::Not(e) => 1.0 - selectivity(e, stats),
        Expr::And(cs) => cs.iter().map(|c| selectivity(c, stats)).product(),
        Expr::Or(cs) => cs.iter().map(|c| selectivity(c, stats)).sum::<f64>().min(1.0),
    }
}

fn push_not(e: &Expr, negate: bool) -> Expr {
    match (e, negate) {
        (Expr::Not(inner), _) => push_not(inner, !negate),
        (Expr::True, true) => Expr::False,
        (Expr::False, true) => Expr::True,
        (Expr::Atom(_), true) => Expr::Not(Box::new(e.clone())),
        (Expr::And(cs), true) => Expr::Or(cs.iter().map(|c| push_not(c, true)).collect()),
        (Expr::Or(cs), true) => Expr::And(cs.iter().map(|c| push_not(c, true)).collect()),
        (Expr::And(cs), false) => Expr::And(cs.iter().map(|c| push_not(c, false)).collect()),
        (Expr::Or(cs), false) => Expr::Or(cs.iter().map(|c| push_not(c, false)).collect()),
        (_, false) => e.clone(),
    }
}

fn simplify(e: Expr) -> Expr {
    let (children, is_and) = match e {
        Expr::And(cs) => (cs, true),
        Expr::Or(cs) => (cs, false),
        other => return other,
    };
    let (unit, zero) = if is_and {
        (Expr::True, Expr::False)
    } else {
        (Expr::False, Expr::True)
    };
    let mut out: Vec<Expr> = Vec::new();
    for c in children.into_iter().map(simplify) {
        let flat = match c {
            Expr::And(gs) if is_and => gs,
            Expr::Or(gs) if !is_and => gs,
            other => vec![other],
        };
        for g in flat {
            if g == zero {
                return zero;
            }
            if g != unit && !out.contains(&g) {
                out.push(g);
            }
        }
    }
    match out.len() {
        0 => unit,
        1 => out.pop().unwrap(),
        _ if is_and => Expr::And(out),
        _ => Expr::Or(out),
    }
}

/// Negation normal form with nested connectives flattened, duplicate
/// children removed and constants folded. Logically equivalent to `e`.
pub fn normalize(e: &Expr) -> Expr {
    simplify(push_not(e, false))
}

fn is_literal(e: &Expr) -> bool {
    match e {
        Expr::Atom(_) => true,
        Expr::Not(inner) => matches!(**inner, Expr::Atom(_)),
        _ => false,
    }
}

/// Builds a plan whose top-level atomic conjuncts are ordered by ascending
/// estimated selectivity. Everything else stays in the residual tree.
pub fn optimize(query: &Query, stats: &StoreStats) -> QueryPlan {
    let mut projection = BTreeSet::new();
    query.predicate.for_each_atom(&mut |a| projection.extend(a.cvt_id().map(str::to_string)));
    let normal = normalize(&query.predicate);
    let parts = match normal {
        Expr::And(cs) => cs,
        Expr::True => Vec::new(),
        other => vec![other],
    };
    let (literals, rest): (Vec<Expr>, Vec<Expr>) = parts.into_iter().partition(is_literal);
    let mut conjuncts: Vec<PlannedConjunct> = literals
        .into_iter()
        .map(|expr| PlannedConjunct {
            selectivity: selectivity(&expr, stats),
            expr,
        })
        .collect();
    conjuncts.sort_by(|a, b| a.selectivity.total_cmp(&b.selectivity));
    let residual = match rest.len() {
        0 => Expr::True,
        1 => rest.into_iter().next().unwrap(),
        _ => Expr::And(rest),
    };
    QueryPlan {
        target: query.target,
        conjuncts,
        residual_selectivity: selectivity(&residual, stats),
        residual,
        projection,
    }
}
