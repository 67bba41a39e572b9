//! Column corpora (CoNLL-style), synthetic data generation from known
//! models, and chunk/token F1 scoring.

mod conll;
mod eval;
mod synth;

pub use conll::{read_conll, read_conll_str, write_conll, write_conll_str};
pub use eval::{bio_chunks, chunk_f1, token_f1, ChunkScore, PrCounts};
pub use synth::{generate_synthetic, SynthSpec};

use crate::crf::TrainingInstance;
use crate::inference::InferenceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: no instances found")]
    Empty { path: String },
    #[error("bad column schema: {0}")]
    Schema(String),
    #[error("bad synthesis spec: {0}")]
    Synth(String),
    #[error("gold and predictions are misaligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Role of one whitespace-separated column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRole {
    Word,
    Attribute(String),
    Label,
}

/// Declarative description of a column file: which column holds the
/// surface token, which are auxiliary attributes, which are labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub columns: Vec<ColumnRole>,
}

impl ColumnSchema {
    /// Parses a comma list of `word`, `attr:<name>`, and `label` roles,
    /// e.g. `word,attr:pos,label`. A word column is required; label
    /// columns are optional (prediction inputs may be unlabeled).
    pub fn parse(spec: &str) -> Result<Self, DataError> {
        let mut columns = Vec::new();
        for part in spec.split(',') {
            let part = part.trim();
            if part == "word" {
                columns.push(ColumnRole::Word);
            } else if part == "label" {
                columns.push(ColumnRole::Label);
            } else if let Some(name) = part.strip_prefix("attr:") {
                if name.is_empty() {
                    return Err(DataError::Schema("attribute column needs a name".into()));
                }
                columns.push(ColumnRole::Attribute(name.to_string()));
            } else {
                return Err(DataError::Schema(format!("unknown column role {part:?}")));
            }
        }
        let schema = ColumnSchema { columns };
        if schema.word_index().is_none() {
            return Err(DataError::Schema("schema needs a word column".into()));
        }
        Ok(schema)
    }

    /// `word label` — the layout synthetic chain corpora use.
    pub fn word_label() -> Self {
        ColumnSchema {
            columns: vec![ColumnRole::Word, ColumnRole::Label],
        }
    }

    /// `word label label` for two-level corpora.
    pub fn word_two_labels() -> Self {
        ColumnSchema {
            columns: vec![ColumnRole::Word, ColumnRole::Label, ColumnRole::Label],
        }
    }

    pub fn word_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| *c == ColumnRole::Word)
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == ColumnRole::Label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn attribute_columns(&self) -> Vec<(usize, &str)> {
        self.columns
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                ColumnRole::Attribute(name) => Some((i, name.as_str())),
                _ => None,
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn to_spec_string(&self) -> String {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnRole::Word => "word".to_string(),
                ColumnRole::Attribute(name) => format!("attr:{name}"),
                ColumnRole::Label => "label".to_string(),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Instances plus the schema they were read (or generated) under.
#[derive(Debug, Clone)]
pub struct ColumnCorpus {
    pub schema: ColumnSchema,
    pub instances: Vec<TrainingInstance>,
}

impl ColumnCorpus {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}
