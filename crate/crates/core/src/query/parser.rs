//! Recursive-descent parser for the query language:
//!
//! ```text
//! query  := "FIND" target ["WHERE" expr]
//! target := "patients" | "events" | "variables"
//! expr   := term {"OR" term}
//! term   := factor {"AND" factor}
//! factor := ["NOT"] (atom | "(" expr ")" | "TRUE" | "FALSE")
//! atom   := "concept" "=" string
//!         | "concept" "IN" "[" string {"," string} "]"
//!         | "event_type" "=" string
//!         | "level" "=" level
//!         | ident cmp literal
//!         | "age" "IN" "[" number "," number "]"
//!         | "time" "IN" "[" date "," date "]"
//! cmp    := "=" | "!=" | "<" | "<=" | ">" | ">="
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::ast::{Atom, CmpOp, Expr, Literal, Query, Target};
use crate::model::VerticalLevel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: expected {}, found {}",
            self.line, self.column, self.expected, self.found
        )
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Number(Decimal),
    Date(NaiveDate),
    Op(CmpOp),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Date(d) => write!(f, "date {d}"),
            Tok::Op(op) => write!(f, "`{}`", op.as_str()),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, expected: &str, found: String| SyntaxError {
        line,
        column,
        expected: expected.to_string(),
        found,
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (start_line, start_col, start) = (line, col, i);
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '=' => Tok::Op(CmpOp::Eq),
            '!' if chars.get(i + 1) == Some(&'=') => {
                i += 1;
                Tok::Op(CmpOp::Ne)
            }
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                if eq {
                    i += 1;
                }
                Tok::Op(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                })
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(err(start_line, start_col, "closing `\"`", "end of line".into()))
                        }
                        Some('\\') => match chars.get(i + 1) {
                            Some(&e @ ('"' | '\\')) => {
                                s.push(e);
                                i += 2;
                            }
                            other => {
                                return Err(err(
                                    start_line,
                                    start_col + (i - start),
                                    "escape `\\\"` or `\\\\`",
                                    format!("{other:?}"),
                                ))
                            }
                        },
                        Some('"') => break,
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_digit() || matches!(chars[j], '.' | '-')) {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                let is_date = word.len() == 10 && word.as_bytes()[4] == b'-' && word.as_bytes()[7] == b'-';
                let tok = if is_date {
                    NaiveDate::from_str(&word).map(Tok::Date).ok()
                } else if word[1..].contains('-') {
                    None
                } else {
                    Decimal::from_str(&word).map(Tok::Number).ok()
                };
                i = j - 1;
                tok.ok_or_else(|| err(start_line, start_col, "number or date", format!("`{word}`")))?
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || matches!(chars[j], '_' | '.')) {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                i = j - 1;
                Tok::Word(word)
            }
            other => return Err(err(line, col, "token", format!("`{other}`"))),
        };
        i += 1;
        col += i - start;
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "FIND", "WHERE", "AND", "OR", "NOT", "IN", "TRUE", "FALSE", "concept", "event_type", "level", "age", "time",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> SyntaxError {
        let s = &self.toks[self.pos];
        SyntaxError {
            line: s.line,
            column: s.column,
            expected: expected.to_string(),
            found: s.tok.to_string(),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn expect_word(&mut self, w: &str) -> Result<(), SyntaxError> {
        if self.is_word(w) {
            self.next();
            Ok(())
        } else {
            Err(self.error(&format!("`{w}`")))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(&tok.to_string()))
        }
    }

    fn string(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Str(_) => match self.next() {
                Tok::Str(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.error("string")),
        }
    }

    fn date(&mut self) -> Result<NaiveDate, SyntaxError> {
        match *self.peek() {
            Tok::Date(d) => {
                self.next();
                Ok(d)
            }
            _ => Err(self.error("date")),
        }
    }

    fn years(&mut self) -> Result<u32, SyntaxError> {
        match self.peek() {
            Tok::Number(n) if n.fract().is_zero() && !n.is_sign_negative() => {
                let v = u32::try_from(n.mantissa() / 10i128.pow(n.scale())).map_err(|_| self.error("age in years"))?;
                self.next();
                Ok(v)
            }
            _ => Err(self.error("non-negative whole number of years")),
        }
    }

    fn query(&mut self) -> Result<Query, SyntaxError> {
        self.expect_word("FIND")?;
        let target = match self.peek() {
            Tok::Word(w) if w == "patients" => Target::Patients,
            Tok::Word(w) if w == "events" => Target::Events,
            Tok::Word(w) if w == "variables" => Target::Variables,
            _ => return Err(self.error("`patients`, `events` or `variables`")),
        };
        self.next();
        let predicate = if self.is_word("WHERE") {
            self.next();
            self.expr()?
        } else {
            Expr::True
        };
        if *self.peek() != Tok::End {
            return Err(self.error(if predicate == Expr::True && self.pos == 2 {
                "`WHERE` or end of input"
            } else {
                "`AND`, `OR` or end of input"
            }));
        }
        Ok(Query { target, predicate })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut terms = vec![self.term()?];
        while self.is_word("OR") {
            self.next();
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Or(terms) })
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut factors = vec![self.factor()?];
        while self.is_word("AND") {
            self.next();
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::And(factors)
        })
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        let negated = self.is_word("NOT");
        if negated {
            self.next();
        }
        let inner = if *self.peek() == Tok::LParen {
            self.next();
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            e
        } else if self.is_word("TRUE") {
            self.next();
            Expr::True
        } else if self.is_word("FALSE") {
            self.next();
            Expr::False
        } else {
            Expr::Atom(self.atom()?)
        };
        Ok(if negated { Expr::Not(Box::new(inner)) } else { inner })
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        let Tok::Word(head) = self.peek().clone() else {
            return Err(self.error("condition"));
        };
        match head.as_str() {
            "concept" => {
                self.next();
                if self.is_word("IN") {
                    self.next();
                    self.expect(Tok::LBracket)?;
                    let mut set = BTreeSet::new();
                    set.insert(self.string()?);
                    while *self.peek() == Tok::Comma {
                        self.next();
                        set.insert(self.string()?);
                    }
                    self.expect(Tok::RBracket)?;
                    Ok(Atom::ConceptIsAnyOf(set))
                } else {
                    self.expect(Tok::Op(CmpOp::Eq))?;
                    Ok(Atom::ConceptIs(self.string()?))
                }
            }
            "event_type" => {
                self.next();
                self.expect(Tok::Op(CmpOp::Eq))?;
                Ok(Atom::EventTypeIs(self.string()?))
            }
            "level" => {
                self.next();
                self.expect(Tok::Op(CmpOp::Eq))?;
                let level = match self.peek() {
                    Tok::Word(w) => VerticalLevel::from_str(w).ok(),
                    _ => None,
                }
                .ok_or_else(|| self.error("vertical level"))?;
                self.next();
                Ok(Atom::LevelIs(level))
            }
            "age" => {
                self.next();
                self.expect_word("IN")?;
                self.expect(Tok::LBracket)?;
                let min_years = self.years()?;
                self.expect(Tok::Comma)?;
                let max_years = self.years()?;
                self.expect(Tok::RBracket)?;
                Ok(Atom::AgeAtEventIn { min_years, max_years })
            }
            "time" => {
                self.next();
                self.expect_word("IN")?;
                self.expect(Tok::LBracket)?;
                let start = self.date()?;
                self.expect(Tok::Comma)?;
                let end = self.date()?;
                self.expect(Tok::RBracket)?;
                Ok(Atom::TimeWindow { start, end })
            }
            w if KEYWORDS.contains(&w) => Err(self.error("condition")),
            _ => {
                self.next();
                let Tok::Op(op) = self.peek().clone() else {
                    return Err(self.error("comparison operator"));
                };
                self.next();
                let value = match self.next() {
                    Tok::Number(n) => Literal::Number(n),
                    Tok::Str(s) => Literal::Text(s),
                    Tok::Date(d) => Literal::Date(d),
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("literal"));
                    }
                };
                Ok(Atom::compare(head, op, value))
            }
        }
    }
}

/// Parses query text into an AST.
pub fn parse(text: &str) -> Result<Query, SyntaxError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaw_query_shape() {
        let q = parse(r#"FIND events WHERE concept = "hec:Jaw" AND event_type = "XRayImaging" AND age IN [5, 10]"#)
            .unwrap();
        assert_eq!(q.target, Target::Events);
        assert_eq!(
            q.predicate,
            Expr::And(vec![
                Expr::Atom(Atom::ConceptIs("hec:Jaw".into())),
                Expr::Atom(Atom::EventTypeIs("XRayImaging".into())),
                Expr::Atom(Atom::AgeAtEventIn {
                    min_years: 5,
                    max_years: 10
                }),
            ])
        );
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn no_predicate() {
        let q = parse("FIND events").unwrap();
        assert_eq!(q.predicate, Expr::True);
        assert_eq!(q.to_string(), "FIND events");
    }

    #[test]
    fn dangling_connective() {
        let e = parse("FIND events WHERE AND").unwrap_err();
        assert_eq!((e.line, e.column), (1, 19));
        assert_eq!(e.expected, "condition");
        let e = parse("FIND events WHERE").unwrap_err();
        assert_eq!(e.found, "end of input");
        let e = parse("FIND events WHERE level = organ AND").unwrap_err();
        assert_eq!(e.column, 36);
    }

    #[test]
    fn precedence_and_parentheses() {
        let q = parse("FIND patients WHERE a > 1 OR b < 2 AND NOT (c = \"x\" OR level = body)").unwrap();
        let Expr::Or(terms) = &q.predicate else { panic!() };
        assert_eq!(terms.len(), 2);
        assert!(matches!(&terms[1], Expr::And(fs) if matches!(fs[1], Expr::Not(_))));
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn literals() {
        let q = parse("FIND variables WHERE SysLVol >= 30.5 AND Born < 2008-03-01 AND Delta != -2").unwrap();
        let Expr::And(fs) = &q.predicate else { panic!() };
        assert_eq!(
            fs[1],
            Expr::Atom(Atom::VariableCmp {
                cvt_id: "Born".into(),
                op: CmpOp::Lt,
                value: Literal::Date("2008-03-01".parse().unwrap())
            })
        );
        assert!(matches!(&fs[0], Expr::Atom(Atom::VariableCmp { op: CmpOp::Ge, .. })));
        let q = parse(r#"FIND events WHERE RVDilation = "Severe""#).unwrap();
        assert_eq!(
            q.predicate,
            Expr::Atom(Atom::ClassificationIs {
                cvt_id: "RVDilation".into(),
                item: "Severe".into()
            })
        );
    }

    #[test]
    fn concept_sets_and_escapes() {
        let q = parse(r#"FIND events WHERE concept IN ["hec:Tooth", "hec:Jaw", "hec:Jaw"]"#).unwrap();
        assert_eq!(
            q.predicate,
            Expr::Atom(Atom::ConceptIsAnyOf(
                ["hec:Jaw".to_string(), "hec:Tooth".to_string()].into()
            ))
        );
        let q = parse(r#"FIND events WHERE Note = "say \"hi\"""#).unwrap();
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "",
            "find events",
            "FIND things",
            "FIND events extra",
            "FIND events WHERE concept \"x\"",
            "FIND events WHERE age IN [5]",
            "FIND events WHERE age IN [5.5, 7]",
            "FIND events WHERE level = kidney",
            "FIND events WHERE (level = organ",
            "FIND events WHERE x = ",
            "FIND events WHERE x = \"open",
            "FIND events WHERE time IN [2008-13-01, 2009-01-01]",
            "FIND events WHERE NOT NOT level = organ",
            "FIND events WHERE x ~ 3",
        ] {
            assert!(parse(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn multiline_positions() {
        let e = parse("FIND events\nWHERE level = organ\n  AND )").unwrap_err();
        assert_eq!((e.line, e.column), (3, 7));
    }
}
