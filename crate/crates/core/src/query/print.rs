//! Pretty-printer producing text the parser reads back into the same AST.

use std::fmt;

use super::ast::{Atom, Expr, Literal, Query};
use crate::ontology::text_quote as quote;

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Text(s) => f.write_str(&quote(s)),
            Literal::Date(d) => write!(f, "{d}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::VariableCmp { cvt_id, op, value } => write!(f, "{cvt_id} {} {value}", op.as_str()),
            Atom::ConceptIs(uri) => write!(f, "concept = {}", quote(uri)),
            Atom::ConceptIsAnyOf(uris) => {
                let items: Vec<String> = uris.iter().map(|u| quote(u)).collect();
                write!(f, "concept IN [{}]", items.join(", "))
            }
            Atom::ClassificationIs { cvt_id, item } => write!(f, "{cvt_id} = {}", quote(item)),
            Atom::EventTypeIs(met) => write!(f, "event_type = {}", quote(met)),
            Atom::LevelIs(level) => write!(f, "level = {level}"),
            Atom::AgeAtEventIn { min_years, max_years } => write!(f, "age IN [{min_years}, {max_years}]"),
            Atom::TimeWindow { start, end } => write!(f, "time IN [{start}, {end}]"),
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::True => f.write_str("TRUE"),
            Expr::False => f.write_str("FALSE"),
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                let simple = matches!(**e, Expr::Atom(_) | Expr::True | Expr::False);
                write_child(f, e, !simple)
            }
            Expr::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" AND ")?;
                    }
                    write_child(f, c, matches!(c, Expr::And(_) | Expr::Or(_)))?;
                }
                Ok(())
            }
            Expr::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" OR ")?;
                    }
                    write_child(f, c, matches!(c, Expr::Or(_)))?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FIND {}", self.target.as_str())?;
        if self.predicate != Expr::True {
            write!(f, " WHERE {}", self.predicate)?;
        }
        Ok(())
    }
}
