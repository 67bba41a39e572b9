//! Feature alphabets, observation predicates, and the naming scheme that
//! ties weights across unrolled graphs.
//!
//! Feature names are flat strings:
//!
//! * `U{level}|{predicate}|{label}` — unary observation features
//! * `T{level}|{a}>{b}` — transition label-pair bias
//! * `C|{a}+{b}` — cotemporal label-pair bias (factorial structures)
//! * `S|w={token}|{a}>{b}` — skip-edge features conjoining the (identical)
//!   endpoint word with the label pair
//!
//! Tokens come from whitespace-separated corpus columns, so names never
//! contain tabs and the model file's `name<TAB>weight` lines stay
//! unambiguous.

use super::TokenSequence;
use std::collections::{HashMap, HashSet};

/// Insertion-ordered string interner; index order is the weight index
/// order and is deterministic given the scan order.
#[derive(Debug, Clone, Default)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new() -> Self {
        Alphabet::default()
    }

    pub fn from_names(names: Vec<String>) -> Result<Self, String> {
        let mut a = Alphabet::new();
        for n in names {
            if a.index.contains_key(&n) {
                return Err(format!("duplicate alphabet entry {n:?}"));
            }
            a.intern(&n);
        }
        Ok(a)
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Named word list; membership is tested on the lowercased token.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub name: String,
    pub words: HashSet<String>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, words: impl IntoIterator<Item = String>) -> Self {
        Lexicon {
            name: name.into(),
            words: words.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }
}

/// First character is an uppercase letter.
pub fn is_capitalized(token: &str) -> bool {
    token.chars().next().map_or(false, |c| c.is_uppercase())
}

fn prefix(token: &str, n: usize) -> String {
    token.chars().take(n).collect()
}

fn suffix(token: &str, n: usize) -> String {
    let count = token.chars().count();
    token.chars().skip(count.saturating_sub(n)).collect()
}

/// Observation predicates for one position: word identity, lowercased
/// identity, capitalization flag, 3-character prefix/suffix, provided
/// attributes, and lexicon membership.
pub fn predicates(seq: &TokenSequence, position: usize, lexicons: &[Lexicon]) -> Vec<String> {
    let token = &seq.tokens[position];
    let lower = token.to_lowercase();
    let mut out = vec![format!("w={token}"), format!("lw={lower}")];
    if is_capitalized(token) {
        out.push("cap".to_string());
    }
    out.push(format!("p3={}", prefix(token, 3)));
    out.push(format!("s3={}", suffix(token, 3)));
    for (key, value) in &seq.attributes[position] {
        out.push(format!("{key}={value}"));
    }
    for lex in lexicons {
        if lex.words.contains(&lower) {
            out.push(format!("lex={}", lex.name));
        }
    }
    out
}

pub fn unary_feature(level: usize, predicate: &str, label: &str) -> String {
    format!("U{level}|{predicate}|{label}")
}

pub fn transition_feature(level: usize, from: &str, to: &str) -> String {
    format!("T{level}|{from}>{to}")
}

pub fn cotemporal_feature(label0: &str, label1: &str) -> String {
    format!("C|{label0}+{label1}")
}

pub fn skip_feature(token: &str, first: &str, second: &str) -> String {
    format!("S|w={token}|{first}>{second}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn alphabet_is_insertion_ordered_and_bijective() {
        let mut a = Alphabet::new();
        assert_eq!(a.intern("x"), 0);
        assert_eq!(a.intern("y"), 1);
        assert_eq!(a.intern("x"), 0);
        assert_eq!(a.lookup("y"), Some(1));
        assert_eq!(a.lookup("z"), None);
        assert_eq!(a.name(1), "y");
        assert!(Alphabet::from_names(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn capitalization_rule_checks_first_character() {
        assert!(is_capitalized("Smith"));
        assert!(!is_capitalized("smith"));
        assert!(!is_capitalized(".Smith"));
        assert!(!is_capitalized(""));
        assert!(is_capitalized("Ärzte")); // non-ASCII uppercase counts
    }

    #[test]
    fn predicates_cover_template_set() {
        let mut attrs = BTreeMap::new();
        attrs.insert("pos".to_string(), "NNP".to_string());
        let seq = TokenSequence {
            tokens: vec!["Smith".to_string()],
            attributes: vec![attrs],
        };
        let lex = Lexicon::new("names", vec!["smith".to_string()]);
        let preds = predicates(&seq, 0, &[lex]);
        assert!(preds.contains(&"w=Smith".to_string()));
        assert!(preds.contains(&"lw=smith".to_string()));
        assert!(preds.contains(&"cap".to_string()));
        assert!(preds.contains(&"p3=Smi".to_string()));
        assert!(preds.contains(&"s3=ith".to_string()));
        assert!(preds.contains(&"pos=NNP".to_string()));
        assert!(preds.contains(&"lex=names".to_string()));
    }

    #[test]
    fn short_tokens_keep_whole_string_as_affixes() {
        let seq = TokenSequence {
            tokens: vec!["ab".to_string()],
            attributes: vec![BTreeMap::new()],
        };
        let preds = predicates(&seq, 0, &[]);
        assert!(preds.contains(&"p3=ab".to_string()));
        assert!(preds.contains(&"s3=ab".to_string()));
    }

    #[test]
    fn predicates_are_deterministic() {
        let seq = TokenSequence {
            tokens: vec!["Alpha".to_string(), "beta".to_string()],
            attributes: vec![BTreeMap::new(), BTreeMap::new()],
        };
        assert_eq!(predicates(&seq, 0, &[]), predicates(&seq, 0, &[]));
    }
}
