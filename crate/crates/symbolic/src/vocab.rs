use std::collections::HashSet;

use crate::error::VocabularyError;

/// Variable names and the integer range used by premise randomisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    constants: (i64, i64),
}

impl Vocabulary {
    pub fn new(names: Vec<String>, constants: (i64, i64)) -> Result<Self, VocabularyError> {
        if names.is_empty() {
            return Err(VocabularyError::Empty);
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(VocabularyError::DuplicateName(n.clone()));
            }
        }
        let (lo, hi) = constants;
        if lo < 2 || hi > 9 || lo > hi {
            return Err(VocabularyError::ConstantRange(lo, hi));
        }
        Ok(Self { names, constants })
    }

    /// Lowercase letters except `e`, `i`, `j` and `l`, constants `2..=9`.
    ///
    /// `e` and `i` read as constants, `j` and `l` are easily confused in
    /// rendered LaTeX.
    pub fn standard() -> Self {
        let names = ('a'..='z')
            .filter(|c| !matches!(c, 'e' | 'i' | 'j' | 'l'))
            .map(String::from)
            .collect();
        Self::new(names, (2, 9)).expect("standard vocabulary is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn constant_range(&self) -> (i64, i64) {
        self.constants
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_is_valid() {
        let v = Vocabulary::standard();
        assert_eq!(v.len(), 22);
        assert!(!v.names().contains(&"e".to_string()));
        assert_eq!(v.constant_range(), (2, 9));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Vocabulary::new(vec![], (2, 9)), Err(VocabularyError::Empty));
        assert_eq!(
            Vocabulary::new(vec!["x".into(), "x".into()], (2, 9)),
            Err(VocabularyError::DuplicateName("x".into()))
        );
        assert_eq!(
            Vocabulary::new(vec!["x".into()], (1, 9)),
            Err(VocabularyError::ConstantRange(1, 9))
        );
    }
}
