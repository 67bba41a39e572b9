//! Versioned flat text model format. Header lines carry the structure
//! kind, label alphabet(s), and lexicon contents; then one
//! `name<TAB>weight` line per feature. Weights print through the shortest
//! round-trip float formatting, so save → load is exact.

use super::{Alphabet, CrfModel, Lexicon, ModelError, StructureKind};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const MAGIC: &str = "pwmodel v1";

impl CrfModel {
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        let _ = writeln!(out, "structure\t{}", self.structure.as_str());
        let _ = writeln!(out, "labels\t{}", self.labels[0].names().join(" "));
        if self.labels.len() > 1 {
            let _ = writeln!(out, "labels2\t{}", self.labels[1].names().join(" "));
        }
        for lex in &self.lexicons {
            let mut words: Vec<&str> = lex.words.iter().map(|w| w.as_str()).collect();
            words.sort_unstable();
            let _ = writeln!(out, "lexicon\t{}\t{}", lex.name, words.join(" "));
        }
        let _ = writeln!(out, "features\t{}", self.features.len());
        for (name, weight) in self.features.names().iter().zip(&self.weights) {
            let _ = writeln!(out, "{name}\t{weight}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_model_string())?;
        Ok(())
    }

    pub fn from_model_string(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| fmt_err("empty model file"))?;
        if magic != MAGIC {
            return Err(fmt_err(format!("unsupported header {magic:?}")));
        }
        let structure_line = lines.next().ok_or_else(|| fmt_err("missing structure"))?;
        let structure = match structure_line.split_once('\t') {
            Some(("structure", kind)) => StructureKind::parse(kind)
                .ok_or_else(|| fmt_err(format!("unknown structure {kind:?}")))?,
            _ => return Err(fmt_err("expected structure line")),
        };

        let labels_line = lines.next().ok_or_else(|| fmt_err("missing labels"))?;
        let labels0 = match labels_line.split_once('\t') {
            Some(("labels", names)) => parse_alphabet(names)?,
            _ => return Err(fmt_err("expected labels line")),
        };
        let mut labels = vec![labels0];

        let mut lexicons = Vec::new();
        let mut pending = lines.next();
        if structure == StructureKind::Factorial {
            match pending.and_then(|l| l.split_once('\t')) {
                Some(("labels2", names)) => {
                    labels.push(parse_alphabet(names)?);
                    pending = lines.next();
                }
                _ => return Err(fmt_err("factorial model is missing labels2")),
            }
        }
        loop {
            match pending {
                Some(line) if line.starts_with("lexicon\t") => {
                    let mut parts = line.splitn(3, '\t');
                    parts.next(); // "lexicon"
                    let name = parts.next().ok_or_else(|| fmt_err("lexicon without name"))?;
                    let words = parts.next().unwrap_or("");
                    lexicons.push(Lexicon::new(
                        name,
                        words.split_whitespace().map(|w| w.to_string()),
                    ));
                    pending = lines.next();
                }
                _ => break,
            }
        }

        let count = match pending.and_then(|l| l.split_once('\t')) {
            Some(("features", n)) => n
                .parse::<usize>()
                .map_err(|_| fmt_err(format!("bad feature count {n:?}")))?,
            _ => return Err(fmt_err("expected features line")),
        };

        let mut features = Alphabet::new();
        let mut weights = Vec::with_capacity(count);
        for i in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| fmt_err(format!("truncated at feature {i} of {count}")))?;
            let (name, weight) = line
                .rsplit_once('\t')
                .ok_or_else(|| fmt_err(format!("feature line without tab: {line:?}")))?;
            let w: f64 = weight
                .parse()
                .map_err(|_| fmt_err(format!("bad weight {weight:?} for {name:?}")))?;
            if features.intern(name) != i {
                return Err(fmt_err(format!("duplicate feature {name:?}")));
            }
            weights.push(w);
        }
        if let Some(extra) = lines.next() {
            if !extra.trim().is_empty() {
                return Err(fmt_err(format!("trailing content: {extra:?}")));
            }
        }

        Ok(CrfModel {
            structure,
            labels,
            features,
            weights,
            lexicons,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        Self::from_model_string(&text)
    }
}

fn parse_alphabet(names: &str) -> Result<Alphabet, ModelError> {
    let list: Vec<String> = names.split_whitespace().map(|s| s.to_string()).collect();
    if list.is_empty() {
        return Err(fmt_err("empty label alphabet"));
    }
    Alphabet::from_names(list).map_err(fmt_err)
}

fn fmt_err(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}
