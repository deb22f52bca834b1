//! Words over the alphabet `{1..N}` and the block ordering used everywhere.
//!
//! Level `k` holds the `N^k` words of length `k` in first-letter-major
//! (lexicographic) order, so level `k` is the concatenation of the blocks
//! `[1·level(k-1), 2·level(k-1), ..., N·level(k-1)]`. Every block matrix in
//! the crate indexes its sub-blocks by this order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite word; the empty word is the identity of the free semigroup.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<usize>);

/// Position of a word inside its level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LevelIndex {
    pub level: usize,
    pub offset: usize,
}

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word, checking every letter against the alphabet size.
    pub fn new(letters: Vec<usize>, alphabet: usize) -> Result<Self> {
        let w = Word(letters);
        w.validate(alphabet)?;
        Ok(w)
    }

    /// Builds a word without alphabet validation (letters must still be ≥ 1).
    pub fn from_letters(letters: &[usize]) -> Self {
        debug_assert!(letters.iter().all(|&l| l >= 1));
        Word(letters.to_vec())
    }

    pub fn validate(&self, alphabet: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l == 0 || l > alphabet) {
            Some(&letter) => Err(Error::InvalidWord { letter, alphabet }),
            None => Ok(()),
        }
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `kσ`: the word with `k` prepended.
    pub fn prepend(&self, letter: usize) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Splits `w = kσ` into `(k, σ)`.
    pub fn split_first(&self) -> Result<(usize, Word)> {
        match self.0.split_first() {
            Some((&k, rest)) => Ok((k, Word(rest.to_vec()))),
            None => Err(Error::EmptyWord),
        }
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let sep = if self.0.iter().any(|&l| l > 9) { "." } else { "" };
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(sep))
    }
}

/// `N^k`, the number of words of length `k`.
pub fn level_size(alphabet: usize, level: usize) -> usize {
    alphabet.pow(level as u32)
}

/// `1 + N + ... + N^m`, the number of words of length at most `m`.
pub fn words_up_to_count(alphabet: usize, max_level: usize) -> usize {
    (0..=max_level).map(|k| level_size(alphabet, k)).sum()
}

/// Offset of the first word of `level` in the concatenation of levels `0, 1, ...`.
pub fn level_start(alphabet: usize, level: usize) -> usize {
    if level == 0 {
        0
    } else {
        words_up_to_count(alphabet, level - 1)
    }
}

/// All `N^k` words of length `k` in first-letter-major order.
pub fn enumerate_words(alphabet: usize, length: usize) -> Result<Vec<Word>> {
    if alphabet == 0 && length > 0 {
        return Err(Error::InvalidAlphabet { length });
    }
    let mut level = vec![Word::empty()];
    for _ in 0..length {
        let mut next = Vec::with_capacity(level.len() * alphabet);
        for k in 1..=alphabet {
            next.extend(level.iter().map(|tau| tau.prepend(k)));
        }
        level = next;
    }
    Ok(level)
}

/// All words of length at most `max_level`, level by level.
pub fn words_up_to(alphabet: usize, max_level: usize) -> Result<Vec<Word>> {
    let mut out = Vec::with_capacity(words_up_to_count(alphabet, max_level));
    for k in 0..=max_level {
        out.extend(enumerate_words(alphabet, k)?);
    }
    Ok(out)
}

/// Position of `w` within `enumerate_words(N, |w|)`.
pub fn word_index(w: &Word, alphabet: usize) -> Result<LevelIndex> {
    w.validate(alphabet)?;
    let offset = w.0.iter().fold(0usize, |acc, &l| acc * alphabet + (l - 1));
    Ok(LevelIndex { level: w.len(), offset })
}

/// Inverse of [`word_index`].
pub fn index_word(index: LevelIndex, alphabet: usize) -> Result<Word> {
    if alphabet == 0 {
        if index.level == 0 && index.offset == 0 {
            return Ok(Word::empty());
        }
        return Err(Error::InvalidAlphabet { length: index.level });
    }
    if index.offset >= level_size(alphabet, index.level) {
        return Err(Error::InvalidParameter(format!(
            "offset {} outside level {} of size {}",
            index.offset,
            index.level,
            level_size(alphabet, index.level)
        )));
    }
    let mut letters = vec![0; index.level];
    let mut rest = index.offset;
    for slot in letters.iter_mut().rev() {
        *slot = rest % alphabet + 1;
        rest /= alphabet;
    }
    Ok(Word(letters))
}

/// Index of `w` in the concatenation of all levels (`words_up_to` order).
pub fn global_index(w: &Word, alphabet: usize) -> Result<usize> {
    let idx = word_index(w, alphabet)?;
    Ok(level_start(alphabet, idx.level) + idx.offset)
}
