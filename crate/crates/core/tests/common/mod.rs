//! Seeded random corpora and independent oracles shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use clinfed::model::{
    Category, ClinicalVariable, MedicalEvent, PatientRecord, Pseudonym, Sex, TemporalRelation, TimeRef, VerticalLevel,
    Visit, VisitPurpose,
};
use clinfed::ontology::{AnnotationCounts, ConceptGroup, ConceptRelation, MedicalConcept, Ontology, Predicate};
use clinfed::query::{Atom, CmpOp, Expr, Literal, Query, Target};
use clinfed::registry::{Classification, ClinicalVariableType, MedicalEventType, Registry, Unit};
use clinfed::store::NodeStore;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const SEVERITY: [&str; 4] = ["No", "Mild", "Moderate", "Severe"];
pub const METS: [(&str, VerticalLevel); 3] = [
    ("Imaging", VerticalLevel::Organ),
    ("Lab", VerticalLevel::Tissue),
    ("Genomics", VerticalLevel::Molecular),
];

/// Registry shared by every random store.
pub fn registry() -> Registry {
    let mut r = Registry::new();
    r.define_unit(Unit::new("mL")).unwrap();
    r.define_classification(Classification::new("Severity", SEVERITY)).unwrap();
    r.define_cvt(ClinicalVariableType::new("Anat", "Anatomy", Category::MedicalConceptInstance, VerticalLevel::Organ))
        .unwrap();
    r.define_cvt(
        ClinicalVariableType::new("Sev", "Severity grade", Category::ObservationByClassification, VerticalLevel::Organ)
            .with_classification("Severity"),
    )
    .unwrap();
    r.define_cvt(ClinicalVariableType::new("Vol", "Volume", Category::Measurement, VerticalLevel::Organ).with_unit("mL"))
        .unwrap();
    r.define_cvt(ClinicalVariableType::new("Note", "Note", Category::Annotation, VerticalLevel::Organ))
        .unwrap();
    r.define_met(MedicalEventType::new("Imaging", "Imaging", ["Anat", "Note", "Vol"], VerticalLevel::Organ))
        .unwrap();
    r.define_met(MedicalEventType::new("Lab", "Lab", ["Sev", "Vol"], VerticalLevel::Tissue))
        .unwrap();
    r.define_met(MedicalEventType::new("Genomics", "Genomics", ["Anat", "Sev"], VerticalLevel::Molecular))
        .unwrap();
    r
}

pub fn concept_uri(i: usize) -> String {
    format!("c:{i}")
}

/// A random ontology with `n` concepts. Relations only point from a
/// higher-numbered concept to a lower-numbered one, so every predicate
/// graph is acyclic.
pub fn ontology(rng: &mut Rng8, n: usize) -> Ontology {
    let mut o = Ontology::new();
    for i in 0..n {
        o.add_concept(MedicalConcept::new(concept_uri(i), format!("concept {i}"), ConceptGroup::Anatomical))
            .unwrap();
    }
    for i in 1..n {
        for _ in 0..rng.gen_range(0..=2) {
            let j = rng.gen_range(0..i);
            let p = *Predicate::ALL.choose(rng).unwrap();
            o.add_relation(ConceptRelation::new(concept_uri(i), p, concept_uri(j)))
                .unwrap();
        }
    }
    o
}

/// A random `is_a` forest of `n` concepts (each concept has at most one
/// parent) with random annotation counts.
pub fn is_a_tree(rng: &mut Rng8, n: usize) -> (Ontology, AnnotationCounts) {
    let mut o = Ontology::new();
    let mut counts = AnnotationCounts::new();
    for i in 0..n {
        o.add_concept(MedicalConcept::new(concept_uri(i), format!("t{i}"), ConceptGroup::Anatomical))
            .unwrap();
        if i > 0 && rng.gen_bool(0.9) {
            let parent = rng.gen_range(0..i);
            o.add_relation(ConceptRelation::new(concept_uri(i), Predicate::IsA, concept_uri(parent)))
                .unwrap();
        }
        let c = rng.gen_range(0..4u64);
        if c > 0 {
            counts.insert(concept_uri(i), c);
        }
    }
    (o, counts)
}

fn date(rng: &mut Rng8, from_year: i32, to_year: i32) -> NaiveDate {
    let start = NaiveDate::from_ymd_opt(from_year, 1, 1).unwrap();
    let days = (NaiveDate::from_ymd_opt(to_year, 12, 31).unwrap() - start).num_days();
    start + Duration::days(rng.gen_range(0..=days))
}

/// Patients shared across the nodes of a random federation.
pub fn patients(rng: &mut Rng8, n: usize) -> Vec<PatientRecord> {
    (0..n)
        .map(|i| {
            let sex = *[Sex::Female, Sex::Male].choose(rng).unwrap();
            PatientRecord::new(Pseudonym::new(format!("P{i}")).unwrap(), sex, date(rng, 1990, 2010))
        })
        .collect()
}

fn variable(rng: &mut Rng8, cvt: &str, concepts: usize) -> ClinicalVariable {
    match cvt {
        "Anat" => ClinicalVariable::concept("Anat", concept_uri(rng.gen_range(0..concepts.max(1)))),
        "Sev" => ClinicalVariable::classified("Sev", *SEVERITY.choose(rng).unwrap()),
        "Vol" => ClinicalVariable::measurement("Vol", Decimal::new(rng.gen_range(100..400), 1), "mL"),
        _ => ClinicalVariable::new(
            "Note",
            clinfed::model::Payload::Annotation {
                text: ["normal", "follow up", "artefact"].choose(rng).unwrap().to_string(),
                attached_to: None,
            },
        ),
    }
}

/// A random event for `patient`. `existing` lists events it may anchor to.
pub fn event(
    rng: &mut Rng8,
    id: String,
    patient: &PatientRecord,
    existing: &[String],
    concepts: usize,
) -> (Visit, MedicalEvent) {
    let registry_members: BTreeMap<&str, &[&str]> =
        [("Imaging", &["Anat", "Note", "Vol"][..]), ("Lab", &["Sev", "Vol"][..]), ("Genomics", &["Anat", "Sev"][..])]
            .into();
    let (met, _) = *METS.choose(rng).unwrap();
    let day = patient.birth_date + Duration::days(rng.gen_range(0..=25 * 365));
    let visit = Visit::new(
        format!("{}@{day}", patient.pseudonym),
        patient.pseudonym.clone(),
        VisitPurpose::FollowUp,
        day,
    );
    let time = match rng.gen_range(0..10) {
        0..=5 => TimeRef::Instant(day),
        6 | 7 => TimeRef::interval(day, day + Duration::days(rng.gen_range(0..60))).unwrap(),
        _ => {
            let anchor = if !existing.is_empty() && rng.gen_bool(0.8) {
                existing.choose(rng).unwrap().clone()
            } else {
                "missing-anchor".to_string()
            };
            let relation = *[TemporalRelation::Before, TemporalRelation::After, TemporalRelation::During]
                .choose(rng)
                .unwrap();
            TimeRef::relative(anchor, relation, Some(rng.gen_range(-30..30)))
        }
    };
    let mut e = MedicalEvent::new(id, met, &visit.visit_id, time);
    for cvt in registry_members[met] {
        for _ in 0..rng.gen_range(0..=1usize) + usize::from(rng.gen_bool(0.2)) {
            e = e.with_variable(variable(rng, cvt, concepts));
        }
    }
    (visit, e)
}

/// Fills `store` with `n` random events over `patients`.
pub fn fill_store(rng: &mut Rng8, store: &mut NodeStore, patients: &[PatientRecord], n: usize, concepts: usize) {
    let prefix = store.node_id().to_string();
    let mut ids: Vec<String> = Vec::new();
    for i in 0..n {
        let p = patients.choose(rng).unwrap();
        let id = format!("{prefix}-{i:04}");
        let (v, e) = event(rng, id.clone(), p, &ids, concepts);
        store.record_event(p, &v, e).unwrap();
        ids.push(id);
    }
}

pub fn store(rng: &mut Rng8, node: &str, n: usize, concepts: usize) -> NodeStore {
    let ps = patients(rng, 8);
    let mut s = NodeStore::new(node, registry());
    fill_store(rng, &mut s, &ps, n, concepts);
    s
}

fn atom(rng: &mut Rng8, concepts: usize) -> Atom {
    let concept = |rng: &mut Rng8| concept_uri(rng.gen_range(0..concepts.max(1)));
    match rng.gen_range(0..11) {
        0 | 1 => Atom::ConceptIs(concept(rng)),
        2 => Atom::ConceptIsAnyOf((0..rng.gen_range(1..4)).map(|_| concept(rng)).collect()),
        3 => Atom::ClassificationIs {
            cvt_id: "Sev".into(),
            item: SEVERITY.choose(rng).unwrap().to_string(),
        },
        4 => Atom::compare(
            "Vol",
            *CmpOp::ALL.choose(rng).unwrap(),
            Literal::Number(Decimal::new(rng.gen_range(100..400), 1)),
        ),
        5 => Atom::compare(
            *["Sev", "Note"].choose(rng).unwrap(),
            *CmpOp::ALL.choose(rng).unwrap(),
            Literal::Text(["Mild", "Severe", "normal", "zzz"].choose(rng).unwrap().to_string()),
        ),
        6 => Atom::EventTypeIs(METS.choose(rng).unwrap().0.to_string()),
        7 => Atom::LevelIs(*VerticalLevel::ALL.choose(rng).unwrap()),
        8 => {
            let a = rng.gen_range(0..25);
            Atom::AgeAtEventIn {
                min_years: a,
                max_years: a + rng.gen_range(0..10),
            }
        }
        _ => {
            let start = date(rng, 1995, 2020);
            Atom::TimeWindow {
                start,
                end: start + Duration::days(rng.gen_range(0..2000)),
            }
        }
    }
}

/// A random predicate tree of depth at most `depth` over the random
/// registry and an ontology of `concepts` concepts.
pub fn expr(rng: &mut Rng8, depth: usize, concepts: usize) -> Expr {
    if depth <= 1 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..20) {
            0 => Expr::True,
            1 => Expr::False,
            _ => Expr::Atom(atom(rng, concepts)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Expr::not(expr(rng, depth - 1, concepts)),
        1 => Expr::And((0..rng.gen_range(2..4)).map(|_| expr(rng, depth - 1, concepts)).collect()),
        _ => Expr::Or((0..rng.gen_range(2..4)).map(|_| expr(rng, depth - 1, concepts)).collect()),
    }
}

pub fn query(rng: &mut Rng8, depth: usize, concepts: usize) -> Query {
    let target = *[Target::Events, Target::Events, Target::Patients, Target::Variables]
        .choose(rng)
        .unwrap();
    Query::new(target, expr(rng, depth, concepts))
}

/// Descendants by plain breadth-first search over the relation list.
pub fn bfs_descendants(o: &Ontology, root: &str, predicates: &BTreeSet<Predicate>) -> BTreeSet<String> {
    let rels: Vec<ConceptRelation> = o.relations().cloned().collect();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([root.to_string()]);
    while let Some(c) = queue.pop_front() {
        for r in &rels {
            if r.object == c && predicates.contains(&r.predicate) && r.subject != root && seen.insert(r.subject.clone()) {
                queue.push_back(r.subject.clone());
            }
        }
    }
    seen
}

/// Resnik similarity computed from scratch: effective counts by summing
/// over every concept that has the candidate among its `is_a` ancestors,
/// normalized by the total count of the candidate's `is_a` tree.
pub fn resnik_oracle(o: &Ontology, counts: &AnnotationCounts, a: &str, b: &str) -> Option<f64> {
    let parent: BTreeMap<String, Vec<String>> = o.concepts().map(|c| (c.uri.clone(), Vec::new())).collect();
    let mut parent = parent;
    for r in o.relations().filter(|r| r.predicate == Predicate::IsA) {
        parent.get_mut(&r.subject).unwrap().push(r.object.clone());
    }
    let ancestors = |c: &str| {
        let mut out = BTreeSet::from([c.to_string()]);
        let mut stack = vec![c.to_string()];
        while let Some(x) = stack.pop() {
            for p in &parent[&x] {
                if out.insert(p.clone()) {
                    stack.push(p.clone());
                }
            }
        }
        out
    };
    let all: Vec<String> = parent.keys().cloned().collect();
    let up: BTreeMap<&str, BTreeSet<String>> = all.iter().map(|c| (c.as_str(), ancestors(c))).collect();
    let own = |c: &str| counts.get(c).copied().unwrap_or(0) as f64;
    let effective = |c: &str| all.iter().filter(|d| up[d.as_str()].contains(c)).map(|d| own(d)).sum::<f64>();
    let root_total = |c: &str| {
        let roots: BTreeSet<&String> = up[c].iter().filter(|x| parent[*x].is_empty()).collect();
        all.iter()
            .filter(|d| up[d.as_str()].iter().any(|x| roots.contains(x)))
            .map(|d| own(d))
            .sum::<f64>()
    };
    let common: Vec<&String> = up[a].intersection(&up[b]).collect();
    if common.is_empty() {
        return None;
    }
    let mut best = 0.0f64;
    for c in common {
        let e = effective(c);
        if e > 0.0 {
            best = best.max(-(e / root_total(c)).ln());
        }
    }
    Some(best.max(0.0))
}

/// Serialized rows without provenance, sorted, for comparing answers.
pub fn row_multiset<T: serde::Serialize>(rows: &[T]) -> Vec<String> {
    let mut out: Vec<String> = rows
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).unwrap();
            if let Some(obj) = v.as_object_mut() {
                obj.remove("node_id");
            }
            v.to_string()
        })
        .collect();
    out.sort();
    out
}

pub fn decimal(s: &str) -> Decimal {
    Decimal::from_str(s).unwrap()
}

const KEYWORDS: [&str; 13] = [
    "FIND", "WHERE", "AND", "OR", "NOT", "IN", "TRUE", "FALSE", "concept", "event_type", "level", "age", "time",
];

fn ident(rng: &mut Rng8) -> String {
    const HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789.";
    loop {
        let mut s = String::new();
        s.push(*HEAD.choose(rng).unwrap() as char);
        for _ in 0..rng.gen_range(0..8) {
            s.push(*TAIL.choose(rng).unwrap() as char);
        }
        if !KEYWORDS.contains(&s.as_str()) {
            return s;
        }
    }
}

fn text(rng: &mut Rng8) -> String {
    const PIECES: [&str; 12] = ["a", "Z", " ", "\"", "\\", "é", "²", "hec:Jaw", "-", "0", "(", "AND"];
    (0..rng.gen_range(0..6)).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn literal(rng: &mut Rng8) -> Literal {
    match rng.gen_range(0..3) {
        0 => Literal::Number(Decimal::new(rng.gen_range(-100_000..100_000), rng.gen_range(0..4))),
        1 => Literal::Text(text(rng)),
        _ => Literal::Date(date(rng, 1900, 2100)),
    }
}

fn grammar_atom(rng: &mut Rng8) -> Atom {
    match rng.gen_range(0..8) {
        0 => Atom::compare(ident(rng), *CmpOp::ALL.choose(rng).unwrap(), literal(rng)),
        1 => Atom::ConceptIs(text(rng)),
        2 => Atom::ConceptIsAnyOf((0..rng.gen_range(1..4)).map(|_| text(rng)).collect()),
        3 => Atom::ClassificationIs {
            cvt_id: ident(rng),
            item: text(rng),
        },
        4 => Atom::EventTypeIs(text(rng)),
        5 => Atom::LevelIs(*VerticalLevel::ALL.choose(rng).unwrap()),
        6 => Atom::AgeAtEventIn {
            min_years: rng.gen_range(0..200),
            max_years: rng.gen(),
        },
        _ => Atom::TimeWindow {
            start: date(rng, 1900, 2100),
            end: date(rng, 1900, 2100),
        },
    }
}

fn grammar_expr(rng: &mut Rng8, depth: usize) -> Expr {
    if depth <= 1 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..12) {
            0 => Expr::True,
            1 => Expr::False,
            _ => Expr::Atom(grammar_atom(rng)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Expr::not(grammar_expr(rng, depth - 1)),
        1 => Expr::And((0..rng.gen_range(2..4)).map(|_| grammar_expr(rng, depth - 1)).collect()),
        _ => Expr::Or((0..rng.gen_range(2..4)).map(|_| grammar_expr(rng, depth - 1)).collect()),
    }
}

/// Any AST the parser can produce, with awkward identifiers, strings and
/// literals.
pub fn grammar_query(rng: &mut Rng8) -> Query {
    let target = *[Target::Events, Target::Patients, Target::Variables].choose(rng).unwrap();
    let predicate = if rng.gen_bool(0.05) {
        Expr::True
    } else {
        grammar_expr(rng, 6)
    };
    Query::new(target, predicate)
}
