//! Line-oriented ontology file:
//!
//! ```text
//! # comment
//! concept hec:Jaw Anatomical "Jaw"
//! rel hec:Tooth part_of hec:Jaw
//! bind XRayRegion hec:Jaw
//! ```
//!
//! Declarations may appear in any order; concepts are added before
//! relations and bindings.

use std::fmt::Write as _;
use std::path::Path;

use super::{ConceptRelation, MedicalConcept, Ontology, OntologyError};

/// Splits a line into whitespace-separated tokens; a token starting with
/// `"` runs to the closing quote, with `\"` and `\\` escapes.
pub(crate) fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '#' {
            break;
        }
        let mut tok = String::new();
        if c == '"' {
            chars.next();
            let mut closed = false;
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some(e @ ('"' | '\\')) => tok.push(e),
                        _ => return Err("bad escape in quoted label".into()),
                    },
                    '"' => {
                        closed = true;
                        break;
                    }
                    c => tok.push(c),
                }
            }
            if !closed {
                return Err("unterminated quoted label".into());
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                tok.push(c);
                chars.next();
            }
        }
        tokens.push(tok);
    }
    Ok(tokens)
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl Ontology {
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let mut concepts = Vec::new();
        let mut relations = Vec::new();
        let mut bindings = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |message: String| OntologyError::Parse { line: lineno, message };
            let tokens = tokenize(line).map_err(err)?;
            let Some(head) = tokens.first() else { continue };
            match (head.as_str(), tokens.len()) {
                ("concept", 4) => {
                    let group = tokens[2].parse().map_err(err)?;
                    concepts.push((lineno, MedicalConcept::new(&tokens[1], &tokens[3], group)));
                }
                ("rel", 4) => {
                    let predicate = tokens[2].parse().map_err(err)?;
                    relations.push((lineno, ConceptRelation::new(&tokens[1], predicate, &tokens[3])));
                }
                ("bind", 3) => bindings.push((lineno, tokens[1].clone(), tokens[2].clone())),
                ("concept" | "rel" | "bind", n) => {
                    return Err(err(format!("{head} declaration has {} fields", n - 1)))
                }
                (other, _) => return Err(err(format!("unknown declaration {other:?}"))),
            }
        }
        let mut o = Ontology::new();
        let at = |line: usize| {
            move |e: OntologyError| OntologyError::Parse {
                line,
                message: e.to_string(),
            }
        };
        for (line, c) in concepts {
            o.add_concept(c).map_err(at(line))?;
        }
        for (line, r) in relations {
            o.add_relation(r).map_err(at(line))?;
        }
        for (line, cvt, uri) in bindings {
            o.bind(cvt, uri).map_err(at(line))?;
        }
        Ok(o)
    }

    /// Canonical text form: concepts, then relations, then bindings, each sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in self.concepts() {
            let _ = writeln!(out, "concept {} {} {}", c.uri, c.group.as_str(), quote(&c.label));
        }
        for r in self.relations() {
            let _ = writeln!(out, "rel {} {} {}", r.subject, r.predicate, r.object);
        }
        for b in self.bindings() {
            let _ = writeln!(out, "bind {} {}", b.cvt_id, b.concept_uri);
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, OntologyError> {
        let text = std::fs::read_to_string(path).map_err(|e| OntologyError::Parse {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }
}
