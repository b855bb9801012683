use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{MedicalEvent, ModelError};

/// A closed date range with `start <= end`, checked on construction and
/// on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRange")]
pub struct DateRange {
    start: NaiveDate,
    end: NaiveDate,
}

#[derive(Deserialize)]
struct RawRange {
    start: NaiveDate,
    end: NaiveDate,
}

impl TryFrom<RawRange> for DateRange {
    type Error = ModelError;

    fn try_from(raw: RawRange) -> Result<Self, Self::Error> {
        DateRange::new(raw.start, raw.end)
    }
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::IntervalOrder { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemporalRelation {
    Before,
    After,
    During,
}

/// When an event happened: a day, a range of days, or relative to another event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeRef {
    Instant(NaiveDate),
    Interval(DateRange),
    RelativeTo {
        anchor_event: String,
        relation: TemporalRelation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset_days: Option<i64>,
    },
}

impl TimeRef {
    pub fn interval(start: NaiveDate, end: NaiveDate) -> Result<Self, ModelError> {
        DateRange::new(start, end).map(TimeRef::Interval)
    }

    pub fn relative(anchor: impl Into<String>, relation: TemporalRelation, offset_days: Option<i64>) -> Self {
        TimeRef::RelativeTo {
            anchor_event: anchor.into(),
            relation,
            offset_days,
        }
    }

    pub fn anchor(&self) -> Option<&str> {
        match self {
            TimeRef::RelativeTo { anchor_event, .. } => Some(anchor_event),
            _ => None,
        }
    }
}

/// A possibly half-open date interval; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResolvedInterval {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl ResolvedInterval {
    pub fn day(d: NaiveDate) -> Self {
        Self {
            start: Some(d),
            end: Some(d),
        }
    }

    /// True when this interval shares at least one day with `[from, to]`.
    pub fn overlaps(&self, from: NaiveDate, to: NaiveDate) -> bool {
        self.start.is_none_or(|s| s <= to) && self.end.is_none_or(|e| e >= from)
    }
}

impl fmt::Display for ResolvedInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.start {
            Some(s) => write!(f, "[{s}, ")?,
            None => f.write_str("(-inf, ")?,
        }
        match self.end {
            Some(e) => write!(f, "{e}]"),
            None => f.write_str("+inf)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    Resolved(ResolvedInterval),
    Unresolvable,
}

impl Resolution {
    pub fn interval(&self) -> Option<ResolvedInterval> {
        match self {
            Resolution::Resolved(i) => Some(*i),
            Resolution::Unresolvable => None,
        }
    }

    /// Timeline order: by interval start (unbounded-below first), with
    /// unresolvable times after everything else.
    pub fn timeline_cmp(&self, other: &Resolution) -> Ordering {
        match (self, other) {
            (Resolution::Resolved(a), Resolution::Resolved(b)) => a.start.cmp(&b.start),
            (Resolution::Resolved(_), Resolution::Unresolvable) => Ordering::Less,
            (Resolution::Unresolvable, Resolution::Resolved(_)) => Ordering::Greater,
            (Resolution::Unresolvable, Resolution::Unresolvable) => Ordering::Equal,
        }
    }
}

fn shift(d: Option<NaiveDate>, days: i64) -> Option<Option<NaiveDate>> {
    match d {
        None => Some(None),
        Some(d) => d.checked_add_signed(Duration::try_days(days)?).map(Some),
    }
}

/// Resolves an event's time reference to a concrete interval.
///
/// Relative references are followed through `lookup` until an absolute
/// time is reached. A missing anchor, or a bound that would have to be
/// derived from an unbounded side, yields [`Resolution::Unresolvable`].
/// Revisiting an event along the chain is a [`ModelError::RelativeTimeCycle`].
pub fn resolve_time<'a, F>(event: &'a MedicalEvent, mut lookup: F) -> Result<Resolution, ModelError>
where
    F: FnMut(&str) -> Option<&'a MedicalEvent>,
{
    let mut seen: HashSet<&str> = HashSet::new();
    seen.insert(&event.event_id);
    let mut links: Vec<(TemporalRelation, i64)> = Vec::new();
    let mut current = event;

    let base = loop {
        match &current.time {
            TimeRef::Instant(d) => break ResolvedInterval::day(*d),
            TimeRef::Interval(r) => {
                break ResolvedInterval {
                    start: Some(r.start()),
                    end: Some(r.end()),
                }
            }
            TimeRef::RelativeTo {
                anchor_event,
                relation,
                offset_days,
            } => {
                if !seen.insert(anchor_event.as_str()) {
                    return Err(ModelError::RelativeTimeCycle(anchor_event.clone()));
                }
                links.push((*relation, offset_days.unwrap_or(0)));
                match lookup(anchor_event) {
                    Some(next) => current = next,
                    None => return Ok(Resolution::Unresolvable),
                }
            }
        }
    };

    let mut acc = base;
    for (relation, offset) in links.into_iter().rev() {
        let next = match relation {
            TemporalRelation::Before => {
                let Some(end) = acc.start else {
                    return Ok(Resolution::Unresolvable);
                };
                ResolvedInterval {
                    start: None,
                    end: shift(Some(end), offset).flatten(),
                }
            }
            TemporalRelation::After => {
                let Some(start) = acc.end else {
                    return Ok(Resolution::Unresolvable);
                };
                ResolvedInterval {
                    start: shift(Some(start), offset).flatten(),
                    end: None,
                }
            }
            TemporalRelation::During => match (shift(acc.start, offset), shift(acc.end, offset)) {
                (Some(start), Some(end)) => ResolvedInterval { start, end },
                _ => return Ok(Resolution::Unresolvable),
            },
        };
        if next.start.is_none() && next.end.is_none() && relation != TemporalRelation::During {
            // shifting overflowed the calendar
            return Ok(Resolution::Unresolvable);
        }
        acc = next;
    }
    Ok(Resolution::Resolved(acc))
}
