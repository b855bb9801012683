use std::io::{self, Write};

use serde::Serialize;

use crate::model::{ClinicalVariable, Resolution};
use crate::query::{ResultRow, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Jsonl,
}

/// Writes either an aligned text table or one JSON object per row.
/// Auxiliary output (plans, summaries) goes through [`Printer::note`]:
/// plain text in table mode, a `{key: value}` object in JSONL mode.
pub(crate) struct Printer<'a> {
    pub format: Format,
    pub out: &'a mut dyn Write,
}

impl Printer<'_> {
    pub fn note<T: Serialize>(&mut self, key: &str, value: &T, text: &str) -> io::Result<()> {
        match self.format {
            Format::Table => writeln!(self.out, "{text}"),
            Format::Jsonl => {
                let obj = serde_json::json!({ key: value });
                writeln!(self.out, "{obj}")
            }
        }
    }

    pub fn rows<T: Serialize>(&mut self, headers: &[&str], items: &[T], cells: impl Fn(&T) -> Vec<String>) -> io::Result<()> {
        match self.format {
            Format::Jsonl => {
                for item in items {
                    let line = serde_json::to_string(item).map_err(io::Error::other)?;
                    writeln!(self.out, "{line}")?;
                }
                Ok(())
            }
            Format::Table => {
                let body: Vec<Vec<String>> = items.iter().map(cells).collect();
                write_table(self.out, headers, &body)
            }
        }
    }
}

fn write_table(out: &mut dyn Write, headers: &[&str], body: &[Vec<String>]) -> io::Result<()> {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |out: &mut dyn Write, cells: &mut dyn Iterator<Item = &str>| -> io::Result<()> {
        let mut s = String::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(cell);
            s.extend(std::iter::repeat_n(' ', w - cell.chars().count()));
        }
        writeln!(out, "{}", s.trim_end())
    };
    line(out, &mut headers.iter().copied())?;
    for row in body {
        line(out, &mut row.iter().map(String::as_str))?;
    }
    Ok(())
}

pub(crate) fn time_cell(time: &Option<Resolution>) -> String {
    match time {
        Some(Resolution::Resolved(i)) if i.start.is_some() && i.start == i.end => i.start.unwrap().to_string(),
        Some(Resolution::Resolved(i)) => i.to_string(),
        Some(Resolution::Unresolvable) => "unresolvable".into(),
        None => String::new(),
    }
}

pub(crate) fn variables_cell(vars: &[ClinicalVariable]) -> String {
    vars.iter()
        .map(|v| format!("{}={}", v.cvt_id, v.payload.value_key()))
        .collect::<Vec<_>>()
        .join("; ")
}

const ROW_HEADERS: [&str; 5] = ["pseudonym", "event", "type", "time", "variables"];

/// Column headers for rows of `target`; patient rows carry only the pseudonym.
pub(crate) fn row_headers(target: Target) -> &'static [&'static str] {
    match target {
        Target::Patients => &ROW_HEADERS[..1],
        Target::Events | Target::Variables => &ROW_HEADERS,
    }
}

pub(crate) fn row_cells(target: Target, r: &ResultRow) -> Vec<String> {
    let mut cells = vec![
        r.pseudonym.clone(),
        r.event_id.clone().unwrap_or_default(),
        r.event_type.clone().unwrap_or_default(),
        time_cell(&r.time),
        variables_cell(&r.variables),
    ];
    cells.truncate(row_headers(target).len());
    cells
}
