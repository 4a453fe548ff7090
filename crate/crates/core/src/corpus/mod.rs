//! Comment datasets: loading, deduplication, preprocessing and CV splits.

mod split;
pub mod synthetic;
mod text;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::{Error, LabelSet, Result};

pub use split::{early_stop_size, make_fold_plan, FoldPlan};
pub use text::{
    buffer_emojis, is_emoji, normalize_whitespace, preprocess, remove_inword_whitespace,
    token_count, truncate_tokens, DEFAULT_MAX_TOKENS,
};

/// A single comment with optional gold labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    /// Row index in the file the comment was loaded from.
    pub id: u64,
    /// Identifier from the source file, if it had an id column.
    pub source_id: Option<String>,
    pub text: String,
    pub labels: Option<LabelSet>,
}

/// Column names of a comment file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub id: String,
    pub text: String,
    pub toxic: String,
    pub engaging: String,
    pub fact: String,
    pub delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "comment_id".into(),
            text: "comment_text".into(),
            toxic: "Sub1_Toxic".into(),
            engaging: "Sub2_Engaging".into(),
            fact: "Sub3_FactClaiming".into(),
            delimiter: ',',
        }
    }
}

impl Schema {
    fn label_columns(&self) -> [&str; 3] {
        [&self.toxic, &self.engaging, &self.fact]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub steps: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub comments: Vec<Comment>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(comments: Vec<Comment>) -> Self {
        Dataset {
            comments,
            provenance: Provenance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        !self.comments.is_empty() && self.comments.iter().all(|c| c.labels.is_some())
    }

    /// Gold labels keyed by comment id. Unlabeled comments are skipped.
    pub fn gold(&self) -> HashMap<u64, LabelSet> {
        self.comments
            .iter()
            .filter_map(|c| c.labels.map(|l| (c.id, l)))
            .collect()
    }

    /// Applies [`preprocess`] to every text, keeping ids and labels.
    pub fn preprocessed(&self, max_tokens: usize) -> Dataset {
        let comments = self
            .comments
            .iter()
            .map(|c| Comment {
                text: preprocess(&c.text, max_tokens),
                ..c.clone()
            })
            .collect();
        let mut provenance = self.provenance.clone();
        provenance.steps.push(format!("preprocess(max_tokens={max_tokens})"));
        Dataset {
            comments,
            provenance,
        }
    }
}

/// Reads a delimiter-separated comment file with a header row.
///
/// Label columns are optional as a group: a file with none of them loads as
/// unlabeled test data, a file with only some of them is a schema error.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    let text_col = find(&schema.text).ok_or_else(|| Error::MissingColumn {
        path: path.to_owned(),
        column: schema.text.clone(),
    })?;
    let id_col = find(&schema.id);
    let label_cols: Vec<Option<usize>> = schema.label_columns().iter().map(|c| find(c)).collect();
    let labeled = label_cols.iter().any(Option::is_some);
    if labeled {
        if let Some(i) = label_cols.iter().position(Option::is_none) {
            return Err(Error::MissingColumn {
                path: path.to_owned(),
                column: schema.label_columns()[i].to_owned(),
            });
        }
    }

    let mut comments = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        let cell = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                row: line,
                message: format!("missing cell in column {}", col + 1),
            })
        };
        let labels = if labeled {
            let mut set = LabelSet::default();
            for (k, col) in label_cols.iter().enumerate() {
                let raw = cell(col.expect("checked above"))?;
                set.0[k] = match raw.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            path: path.to_owned(),
                            row: line,
                            message: format!(
                                "column `{}`: expected 0 or 1, found `{other}`",
                                schema.label_columns()[k]
                            ),
                        })
                    }
                };
            }
            Some(set)
        } else {
            None
        };
        comments.push(Comment {
            id: row as u64,
            source_id: id_col.map(|c| cell(c).map(str::to_owned)).transpose()?,
            text: cell(text_col)?.to_owned(),
            labels,
        });
    }

    Ok(Dataset {
        comments,
        provenance: Provenance {
            source: Some(path.to_owned()),
            steps: Vec::new(),
        },
    })
}

/// Writes a dataset in the same layout [`load_dataset`] reads.
pub fn write_dataset(path: &Path, dataset: &Dataset, schema: &Schema) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .from_writer(file);
    let labeled = dataset.comments.iter().any(|c| c.labels.is_some());
    let mut header = vec![schema.id.as_str(), schema.text.as_str()];
    if labeled {
        header.extend(schema.label_columns());
    }
    writer.write_record(&header)?;
    for c in &dataset.comments {
        let id = c.source_id.clone().unwrap_or_else(|| c.id.to_string());
        let mut row = vec![id, c.text.clone()];
        if labeled {
            let labels = c.labels.unwrap_or_default();
            row.extend(labels.0.iter().map(|&b| if b { "1" } else { "0" }.to_owned()));
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn delimiter_byte(schema: &Schema) -> Result<u8> {
    u8::try_from(schema.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::config(format!("delimiter {:?} is not ASCII", schema.delimiter)))
}

/// Keeps the first occurrence of every text. Texts are compared after NFC
/// normalization, without case folding.
pub fn deduplicate(dataset: &Dataset) -> Dataset {
    let mut seen = HashSet::new();
    let comments = dataset
        .comments
        .iter()
        .filter(|c| seen.insert(c.text.nfc().collect::<String>()))
        .cloned()
        .collect();
    let mut provenance = dataset.provenance.clone();
    provenance.steps.push("deduplicate".into());
    Dataset {
        comments,
        provenance,
    }
}

/// Counts reported by the preprocessing command.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub input: usize,
    pub after_dedup: usize,
    pub duplicates: usize,
    /// Comments dropped because nothing was left after preprocessing.
    pub empty: usize,
    pub truncated: usize,
    pub max_tokens: usize,
}

/// Number of comments with more than `max_tokens` tokens once the
/// whitespace steps of preprocessing have run.
pub fn truncated_count(dataset: &Dataset, max_tokens: usize) -> usize {
    dataset
        .comments
        .iter()
        .filter(|c| {
            let pre = normalize_whitespace(&buffer_emojis(&remove_inword_whitespace(&c.text)));
            token_count(&pre) > max_tokens
        })
        .count()
}

/// Deduplicates then preprocesses, counting how many comments the token
/// limit cut. Comments left empty (whitespace only) are dropped.
pub fn clean(dataset: &Dataset, max_tokens: usize) -> (Dataset, PreprocessStats) {
    let unique = deduplicate(dataset);
    let truncated = truncated_count(&unique, max_tokens);
    let mut cleaned = unique.preprocessed(max_tokens);
    let before = cleaned.len();
    cleaned.comments.retain(|c| !c.text.is_empty());
    let stats = PreprocessStats {
        input: dataset.len(),
        after_dedup: unique.len(),
        duplicates: dataset.len() - unique.len(),
        empty: before - cleaned.len(),
        truncated,
        max_tokens,
    };
    (cleaned, stats)
}
