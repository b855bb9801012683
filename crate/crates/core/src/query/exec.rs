use std::cell::OnceCell;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{Atom, CmpOp, Expr, Literal, Query, Target};
use super::plan::QueryPlan;
use super::QueryError;
use crate::model::{ClinicalVariable, MedicalEvent, Payload, Resolution, ResolvedInterval};
use crate::store::NodeStore;

/// One answer row. Event and variable queries yield one row per matching
/// event; patient queries one row per patient with `event_id` unset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pseudonym: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Resolution>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<ClinicalVariable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSet {
    pub target: Target,
    /// Ordered by event id, or by pseudonym for patient queries.
    pub rows: Vec<ResultRow>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row keys (`pseudonym`, `event_id`) as a set.
    pub fn keys(&self) -> BTreeSet<(String, Option<String>)> {
        self.rows
            .iter()
            .map(|r| (r.pseudonym.clone(), r.event_id.clone()))
            .collect()
    }
}

struct EventView<'a> {
    store: &'a NodeStore,
    event: &'a MedicalEvent,
    interval: OnceCell<Option<ResolvedInterval>>,
}

impl<'a> EventView<'a> {
    fn new(store: &'a NodeStore, event: &'a MedicalEvent) -> Self {
        Self {
            store,
            event,
            interval: OnceCell::new(),
        }
    }

    fn interval(&self) -> Option<ResolvedInterval> {
        *self
            .interval
            .get_or_init(|| self.store.resolve(self.event).ok().and_then(|r| r.interval()))
    }

    fn variables<'b>(&'b self, cvt_id: &'b str) -> impl Iterator<Item = &'a Payload> + 'b {
        self.event
            .variables
            .iter()
            .filter(move |cv| cv.cvt_id == cvt_id)
            .map(|cv| &cv.payload)
    }

    fn has_concept(&self, pred: impl Fn(&str) -> bool) -> bool {
        self.event.variables.iter().any(|cv| match &cv.payload {
            Payload::MedicalConceptInstance { concept_uri } => pred(concept_uri),
            _ => false,
        })
    }
}

fn compare(payload: &Payload, op: CmpOp, value: &Literal) -> bool {
    let ord = match (payload, value) {
        (Payload::Measurement { value: v, .. }, Literal::Number(n)) => v.cmp(n),
        (p, Literal::Text(s)) => match p.text_value() {
            Some(t) => t.cmp(s.as_str()),
            None => return false,
        },
        (p, Literal::Date(d)) => match p.text_value().and_then(|t| t.parse::<chrono::NaiveDate>().ok()) {
            Some(t) => t.cmp(d),
            None => return false,
        },
        _ => return false,
    };
    op.holds(ord)
}

fn atom_holds(atom: &Atom, view: &EventView<'_>) -> bool {
    match atom {
        Atom::VariableCmp { cvt_id, op, value } => view.variables(cvt_id).any(|p| compare(p, *op, value)),
        Atom::ClassificationIs { cvt_id, item } => view.variables(cvt_id).any(|p| p.text_value() == Some(item)),
        Atom::ConceptIs(uri) => view.has_concept(|c| c == uri),
        Atom::ConceptIsAnyOf(uris) => view.has_concept(|c| uris.contains(c)),
        Atom::EventTypeIs(met) => view.event.event_type == *met,
        Atom::LevelIs(level) => view
            .store
            .registry()
            .met(&view.event.event_type)
            .is_some_and(|m| m.vertical_level == *level),
        Atom::AgeAtEventIn { min_years, max_years } => {
            let Some(start) = view.interval().and_then(|i| i.start) else {
                return false;
            };
            view.store
                .patient_of(view.event)
                .and_then(|p| p.age_on(start))
                .is_some_and(|age| (*min_years..=*max_years).contains(&age))
        }
        Atom::TimeWindow { start, end } => view.interval().is_some_and(|i| i.overlaps(*start, *end)),
    }
}

fn holds(expr: &Expr, view: &EventView<'_>) -> bool {
    match expr {
        Expr::True => true,
        Expr::False => false,
        Expr::Atom(a) => atom_holds(a, view),
        Expr::Not(e) => !holds(e, view),
        Expr::And(cs) => cs.iter().all(|c| holds(c, view)),
        Expr::Or(cs) => cs.iter().any(|c| holds(c, view)),
    }
}

/// Whether `event` in `store` satisfies `expr`.
pub fn matches_event(expr: &Expr, store: &NodeStore, event: &MedicalEvent) -> bool {
    holds(expr, &EventView::new(store, event))
}

fn referenced_cvts(expr: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    expr.for_each_atom(&mut |a| out.extend(a.cvt_id().map(str::to_string)));
    out
}

fn build_rows<'a>(
    target: Target,
    projection: &BTreeSet<String>,
    store: &'a NodeStore,
    mut matched: Vec<&'a MedicalEvent>,
) -> ResultSet {
    matched.sort_by(|a, b| a.event_id.cmp(&b.event_id));
    let pseudonym = |e: &MedicalEvent| {
        store
            .visit(&e.visit)
            .map(|v| v.patient.as_str().to_string())
            .unwrap_or_default()
    };
    let rows = match target {
        Target::Patients => matched
            .iter()
            .map(|e| pseudonym(e))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|p| ResultRow {
                pseudonym: p,
                event_id: None,
                event_type: None,
                time: None,
                variables: Vec::new(),
            })
            .collect(),
        Target::Events | Target::Variables => {
            matched
                .into_iter()
                .map(|e| {
                    let variables = e
                        .variables
                        .iter()
                        .filter(|cv| {
                            target == Target::Events || projection.is_empty() || projection.contains(&cv.cvt_id)
                        })
                        .cloned()
                        .collect();
                    ResultRow {
                        pseudonym: pseudonym(e),
                        event_id: Some(e.event_id.clone()),
                        event_type: Some(e.event_type.clone()),
                        time: Some(store.resolve(e).unwrap_or(Resolution::Unresolvable)),
                        variables,
                    }
                })
                .collect()
        }
    };
    ResultSet { target, rows }
}

/// Reference evaluation: walks the whole predicate tree for every event.
pub fn evaluate(query: &Query, store: &NodeStore) -> ResultSet {
    let matched = store
        .events()
        .filter(|e| matches_event(&query.predicate, store, e))
        .collect();
    build_rows(query.target, &referenced_cvts(&query.predicate), store, matched)
}

fn check_metadata(expr: &Expr, store: &NodeStore) -> Result<(), QueryError> {
    let registry = store.registry();
    let mut stale = None;
    expr.for_each_atom(&mut |a| {
        if stale.is_some() {
            return;
        }
        if let Some(cvt) = a.cvt_id().filter(|c| registry.cvt(c).is_none()) {
            stale = Some(("CVT", cvt.to_string()));
        } else if let Atom::EventTypeIs(met) = a {
            if registry.met(met).is_none() {
                stale = Some(("MET", met.clone()));
            }
        }
    });
    match stale {
        Some((kind, id)) => Err(QueryError::StaleMetadata { kind, id }),
        None => Ok(()),
    }
}

/// Executes a plan, refusing plans that name CVTs or METs this store's
/// registry does not define.
pub fn execute(plan: &QueryPlan, store: &NodeStore) -> Result<ResultSet, QueryError> {
    check_metadata(&plan.predicate(), store)?;
    Ok(execute_unchecked(plan, store))
}

fn candidate_ids(atom: &Atom, store: &NodeStore) -> Option<BTreeSet<String>> {
    let index = store.index();
    let union = |map: &std::collections::BTreeMap<String, BTreeSet<String>>, keys: &mut dyn Iterator<Item = &str>| {
        keys.filter_map(|k| map.get(k)).flatten().cloned().collect()
    };
    match atom {
        Atom::ConceptIs(uri) => Some(union(&index.by_concept, &mut std::iter::once(uri.as_str()))),
        Atom::ConceptIsAnyOf(uris) => Some(union(&index.by_concept, &mut uris.iter().map(String::as_str))),
        Atom::EventTypeIs(met) => Some(union(&index.by_event_type, &mut std::iter::once(met.as_str()))),
        Atom::ClassificationIs { cvt_id, .. } | Atom::VariableCmp { cvt_id, .. } => {
            Some(union(&index.by_cvt, &mut std::iter::once(cvt_id.as_str())))
        }
        Atom::LevelIs(level) => Some(union(
            &index.by_event_type,
            &mut store
                .registry()
                .mets()
                .filter(|m| m.vertical_level == *level)
                .map(|m| m.id.as_str()),
        )),
        Atom::AgeAtEventIn { .. } | Atom::TimeWindow { .. } => None,
    }
}

/// Executes a plan without the registry check. Identifiers unknown to
/// the store simply match nothing.
pub fn execute_unchecked(plan: &QueryPlan, store: &NodeStore) -> ResultSet {
    let candidates = match plan.conjuncts.first().map(|c| &c.expr) {
        Some(Expr::Atom(a)) => candidate_ids(a, store),
        _ => None,
    };
    let passes = |e: &MedicalEvent| {
        let view = EventView::new(store, e);
        plan.conjuncts.iter().all(|c| holds(&c.expr, &view)) && holds(&plan.residual, &view)
    };
    let matched: Vec<&MedicalEvent> = match candidates {
        Some(ids) => ids.iter().filter_map(|id| store.event(id)).filter(|e| passes(e)).collect(),
        None => store.events().filter(|e| passes(e)).collect(),
    };
    build_rows(plan.target, &plan.projection, store, matched)
}
