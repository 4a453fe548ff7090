//! Per-model class probabilities and their on-disk format.
//!
//! A table file is comma-separated with the header
//! `model_id,sample_id,p_toxic,p_engaging,p_fact`, preceded by a comment
//! line naming the layout:
//!
//! ```text
//! # layout: multi-label
//! model_id,sample_id,p_toxic,p_engaging,p_fact
//! gelectra-07,0,0.91,0.12,0.40
//! ```
//!
//! Single-label tables (`# layout: single-label; task: engaging`) fill only
//! their task's column with the positive-class probability. A file may hold
//! several models of the same layout. Externally produced probabilities can
//! be dropped in as long as they follow this layout; without the comment
//! line the layout is inferred from which columns are filled.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "task")]
pub enum Layout {
    /// Independent probabilities for all three tasks.
    MultiLabel,
    /// Positive-class probability for one task; the negative class is `1 - p`.
    SingleLabel(Task),
}

impl Layout {
    pub fn width(self) -> usize {
        match self {
            Layout::MultiLabel => 3,
            Layout::SingleLabel(_) => 1,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layout::MultiLabel => f.write_str("multi-label"),
            Layout::SingleLabel(t) => write!(f, "single-label; task: {t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub model_id: String,
    pub layout: Layout,
    pub sample_ids: Vec<u64>,
    /// Row-major, `layout.width()` values per sample.
    pub probs: Vec<f64>,
}

pub const CSV_HEADER: [&str; 5] = ["model_id", "sample_id", "p_toxic", "p_engaging", "p_fact"];

impl ProbabilityTable {
    pub fn new(model_id: impl Into<String>, layout: Layout) -> Self {
        ProbabilityTable {
            model_id: model_id.into(),
            layout,
            sample_ids: Vec::new(),
            probs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn push(&mut self, sample_id: u64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.layout.width());
        self.sample_ids.push(sample_id);
        self.probs.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.layout.width();
        &self.probs[i * w..(i + 1) * w]
    }

    /// Probability of task `task` being positive in row `i`.
    pub fn positive(&self, i: usize, task: Task) -> Option<f64> {
        match self.layout {
            Layout::MultiLabel => Some(self.probs[i * 3 + task.index()]),
            Layout::SingleLabel(t) if t == task => Some(self.probs[i]),
            Layout::SingleLabel(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.len() != self.sample_ids.len() * self.layout.width() {
            return Err(Error::LengthMismatch {
                what: "probability cells and sample ids",
                left: self.probs.len(),
                right: self.sample_ids.len() * self.layout.width(),
            });
        }
        if let Some(i) = self.probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config(format!(
                "model `{}`: probability {} for sample {} is outside [0, 1]",
                self.model_id,
                self.probs[i],
                self.sample_ids[i / self.layout.width()]
            )));
        }
        Ok(())
    }

    /// Position of every sample id.
    pub fn index(&self) -> HashMap<u64, usize> {
        self.sample_ids.iter().enumerate().map(|(i, &s)| (s, i)).collect()
    }
}

/// Writes tables into a single file. The layout comment is only written when
/// all tables share a layout; otherwise readers infer it per model from the
/// filled columns.
pub fn write_tables(path: &Path, tables: &[&ProbabilityTable]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    if let Some(first) = tables.first() {
        if tables.iter().all(|t| t.layout == first.layout) {
            writeln!(out, "# layout: {}", first.layout).map_err(|e| Error::io(path, e))?;
        }
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for t in tables {
        for i in 0..t.len() {
            let mut cells = [String::new(), String::new(), String::new()];
            match t.layout {
                Layout::MultiLabel => {
                    for (c, p) in cells.iter_mut().zip(t.row(i)) {
                        *c = p.to_string();
                    }
                }
                Layout::SingleLabel(task) => cells[task.index()] = t.probs[i].to_string(),
            }
            let id = t.sample_ids[i].to_string();
            writer.write_record([t.model_id.as_str(), &id, &cells[0], &cells[1], &cells[2]])?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn parse_layout_comment(line: &str) -> Option<Layout> {
    let body = line.trim_start_matches('#').trim();
    let mut kind = None;
    let mut task = None;
    for part in body.split(';') {
        let (key, value) = part.split_once(':')?;
        match key.trim() {
            "layout" => kind = Some(value.trim().to_owned()),
            "task" => task = value.parse::<Task>().ok(),
            _ => {}
        }
    }
    match (kind.as_deref(), task) {
        (Some("multi-label"), _) => Some(Layout::MultiLabel),
        (Some("single-label"), Some(t)) => Some(Layout::SingleLabel(t)),
        _ => None,
    }
}

/// Reads every table in a file, in order of first appearance of each model id.
pub fn read_tables(path: &Path) -> Result<Vec<ProbabilityTable>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let declared = raw
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(parse_layout_comment);

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(raw.as_bytes());
    let headers = reader.headers()?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_owned(),
                column: name.to_owned(),
            })?;
    }

    let mut tables: Vec<ProbabilityTable> = Vec::new();
    let mut by_model: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| Error::Parse {
            path: path.to_owned(),
            row: line,
            message,
        };
        let cell = |k: usize| record.get(cols[k]).map(str::trim).unwrap_or("");
        let mut values = [None; 3];
        for (k, v) in values.iter_mut().enumerate() {
            let c = cell(k + 2);
            if !c.is_empty() {
                *v = Some(
                    c.parse::<f64>()
                        .map_err(|_| err(format!("`{}` is not a number", c)))?,
                );
            }
        }
        let model_id = cell(0).to_owned();
        let known = by_model.get(&model_id).map(|&k| tables[k].layout);
        let row_layout = match declared.or(known) {
            Some(l) => l,
            None => match values.iter().filter(|v| v.is_some()).count() {
                3 => Layout::MultiLabel,
                1 => Layout::SingleLabel(Task::ALL[values.iter().position(Option::is_some).unwrap()]),
                _ => return Err(err("cannot infer layout: fill all three columns or exactly one".into())),
            },
        };
        let row: Vec<f64> = match row_layout {
            Layout::MultiLabel => values
                .iter()
                .map(|v| v.ok_or_else(|| err("multi-label row needs all three columns".into())))
                .collect::<Result<_>>()?,
            Layout::SingleLabel(t) => vec![values[t.index()]
                .ok_or_else(|| err(format!("single-label row needs column p_{}", t)))?],
        };
        let sample_id = cell(1)
            .parse::<u64>()
            .map_err(|_| err(format!("sample_id `{}` is not an integer", cell(1))))?;
        let slot = *by_model.entry(model_id.clone()).or_insert_with(|| {
            tables.push(ProbabilityTable::new(model_id, row_layout));
            tables.len() - 1
        });
        tables[slot].push(sample_id, &row);
    }
    for t in &tables {
        t.validate()?;
    }
    Ok(tables)
}

/// Reads a file expected to hold exactly one model.
pub fn read_table(path: &Path) -> Result<ProbabilityTable> {
    let mut tables = read_tables(path)?;
    match tables.len() {
        1 => Ok(tables.pop().unwrap()),
        n => Err(Error::config(format!(
            "{}: expected one model, found {n}",
            path.display()
        ))),
    }
}
