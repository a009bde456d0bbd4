//! LaTeX tokenization and the frozen token vocabulary.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

const CONTROL: [&str; 5] = ["\\cos", "\\sin", "\\log", "\\exp", "\\frac"];
const OPERATORS: &[u8] = b"+-*/^_(){}=";

/// Splits rendered LaTeX into tokens by greedy longest match.
///
/// Unrecognized characters and control sequences come back as [`UNK_TOKEN`].
pub fn latex_tokens(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'\\' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_alphabetic() {
                j += 1;
            }
            let word = &text[i..j];
            out.push(if CONTROL.contains(&word) { word } else { UNK_TOKEN });
            i = j.max(i + 1);
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            out.push(&text[i..j]);
            i = j;
        } else if c.is_ascii_alphabetic() || OPERATORS.contains(&c) {
            out.push(&text[i..i + 1]);
            i += 1;
        } else {
            let len = text[i..].chars().next().map_or(1, char::len_utf8);
            out.push(UNK_TOKEN);
            i += len;
        }
    }
    out
}

/// Token-to-id map with [`PAD`] and [`UNK`] reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl TokenVocabulary {
    /// Collects every token of `texts`, sorted for a stable id assignment.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = BTreeSet::new();
        for t in texts {
            for tok in latex_tokens(t) {
                if tok != UNK_TOKEN {
                    set.insert(tok.to_string());
                }
            }
        }
        Self::from_tokens(set)
    }

    /// Builds from labels other than the reserved two, in the given order.
    pub fn from_tokens(labels: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(labels.into_iter().filter(|t| t != PAD_TOKEN && t != UNK_TOKEN));
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        latex_tokens(text).into_iter().map(|t| self.id(t)).collect()
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        if lines.len() < 2 || lines[0] != PAD_TOKEN || lines[1] != UNK_TOKEN {
            return Err(Error::Dataset(format!(
                "{}: vocabulary must start with {PAD_TOKEN} and {UNK_TOKEN}",
                path.display()
            )));
        }
        Ok(Self::from_tokens(lines.into_iter().skip(2)))
    }
}
