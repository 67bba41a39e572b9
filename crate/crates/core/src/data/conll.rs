//! Whitespace-separated column files with blank lines between instances.
//! Lines starting with `#` are comments and are skipped.

use super::{ColumnCorpus, ColumnSchema, DataError};
use crate::crf::{TokenSequence, TrainingInstance};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub fn read_conll(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<ColumnCorpus, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    read_conll_str(&text, schema, &path.display().to_string())
}

pub fn read_conll_str(
    text: &str,
    schema: &ColumnSchema,
    origin: &str,
) -> Result<ColumnCorpus, DataError> {
    let word_col = schema
        .word_index()
        .ok_or_else(|| DataError::Schema("schema needs a word column".into()))?;
    let label_cols = schema.label_indices();
    let attr_cols = schema.attribute_columns();

    let mut instances = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut attrs: Vec<BTreeMap<String, String>> = Vec::new();
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); label_cols.len()];

    let mut flush = |tokens: &mut Vec<String>,
                     attrs: &mut Vec<BTreeMap<String, String>>,
                     labels: &mut Vec<Vec<String>>| {
        if tokens.is_empty() {
            return;
        }
        instances.push(TrainingInstance {
            sequence: TokenSequence {
                tokens: std::mem::take(tokens),
                attributes: std::mem::take(attrs),
            },
            labels: labels.iter_mut().map(std::mem::take).collect(),
        });
        *labels = vec![Vec::new(); label_cols.len()];
    };

    for (number, line) in text.lines().enumerate() {
        let line_no = number + 1;
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            flush(&mut tokens, &mut attrs, &mut labels);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != schema.width() {
            return Err(DataError::Parse {
                line: line_no,
                message: format!(
                    "expected {} columns, found {}",
                    schema.width(),
                    fields.len()
                ),
            });
        }
        tokens.push(fields[word_col].to_string());
        let mut attr = BTreeMap::new();
        for &(col, name) in &attr_cols {
            attr.insert(name.to_string(), fields[col].to_string());
        }
        attrs.push(attr);
        for (slot, &col) in label_cols.iter().enumerate() {
            labels[slot].push(fields[col].to_string());
        }
    }
    flush(&mut tokens, &mut attrs, &mut labels);

    if instances.is_empty() {
        return Err(DataError::Empty {
            path: origin.to_string(),
        });
    }
    Ok(ColumnCorpus {
        schema: schema.clone(),
        instances,
    })
}

pub fn write_conll_str(corpus: &ColumnCorpus) -> String {
    let mut out = String::new();
    for (i, instance) in corpus.instances.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in 0..instance.sequence.len() {
            let mut label_slot = 0usize;
            let mut fields: Vec<String> = Vec::with_capacity(corpus.schema.width());
            for role in &corpus.schema.columns {
                match role {
                    super::ColumnRole::Word => fields.push(instance.sequence.tokens[t].clone()),
                    super::ColumnRole::Attribute(name) => fields.push(
                        instance.sequence.attributes[t]
                            .get(name)
                            .cloned()
                            .unwrap_or_else(|| "_".to_string()),
                    ),
                    super::ColumnRole::Label => {
                        fields.push(instance.labels[label_slot][t].clone());
                        label_slot += 1;
                    }
                }
            }
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write_conll(corpus: &ColumnCorpus, path: impl AsRef<Path>) -> Result<(), DataError> {
    fs::write(path, write_conll_str(corpus))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_token_instance_parses() {
        let schema = ColumnSchema::parse("word,attr:pos,label").unwrap();
        let text = "Smith NNP B-PER\n. . O\n\n";
        let corpus = read_conll_str(text, &schema, "test").unwrap();
        assert_eq!(corpus.len(), 1);
        let inst = &corpus.instances[0];
        assert_eq!(inst.sequence.tokens, vec!["Smith", "."]);
        assert_eq!(inst.sequence.attributes[0]["pos"], "NNP");
        assert_eq!(inst.labels[0], vec!["B-PER", "O"]);
    }

    #[test]
    fn blank_lines_separate_instances() {
        let schema = ColumnSchema::word_label();
        let text = "a X\nb Y\n\nc X\n";
        let corpus = read_conll_str(text, &schema, "test").unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.instances[1].sequence.tokens, vec!["c"]);
    }

    #[test]
    fn ragged_row_reports_line_number() {
        let schema = ColumnSchema::word_label();
        let text = "a X\nb\n";
        let err = read_conll_str(text, &schema, "test").unwrap_err();
        match err {
            DataError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 2 columns"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let schema = ColumnSchema::word_label();
        assert!(matches!(
            read_conll_str("", &schema, "test").unwrap_err(),
            DataError::Empty { .. }
        ));
        // comments only is still empty
        assert!(matches!(
            read_conll_str("# nothing here\n", &schema, "test").unwrap_err(),
            DataError::Empty { .. }
        ));
    }

    #[test]
    fn write_then_read_round_trips() {
        let schema = ColumnSchema::parse("word,attr:pos,label").unwrap();
        let text = "Smith NNP B-PER\n. . O\n\nTalk VB O\n";
        let corpus = read_conll_str(text, &schema, "test").unwrap();
        let written = write_conll_str(&corpus);
        let again = read_conll_str(&written, &schema, "test").unwrap();
        assert_eq!(again.len(), corpus.len());
        for (a, b) in again.instances.iter().zip(&corpus.instances) {
            assert_eq!(a.sequence, b.sequence);
            assert_eq!(a.labels, b.labels);
        }
    }

    #[test]
    fn comments_are_skipped() {
        let schema = ColumnSchema::word_label();
        let text = "# generated corpus\na X\n";
        let corpus = read_conll_str(text, &schema, "test").unwrap();
        assert_eq!(corpus.len(), 1);
    }
}
