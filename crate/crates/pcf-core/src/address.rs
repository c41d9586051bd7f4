//! Finite words over the contraction alphabet and a small union-find.
//!
//! Letters are stored 0-based. The textual form is 1-based ("12" is the
//! word F_1 F_2), with letters separated by dots when the alphabet has more
//! than nine symbols.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn from_letters(letters: &[usize]) -> Self {
        Word(letters.iter().map(|&l| l as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&l| l as usize)
    }

    pub fn child(&self, letter: usize) -> Word {
        let mut v = self.0.clone();
        v.push(letter as u8);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// The word with its last letter removed (`w*`); `None` for the empty word.
    pub fn parent(&self) -> Option<Word> {
        if self.0.is_empty() {
            None
        } else {
            Some(Word(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().map(|&l| l as usize)
    }

    /// Shorter words first, then lexicographic.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }

    /// Parse the 1-based textual form. `n` is the alphabet size.
    pub fn parse(text: &str, n: usize) -> Result<Word> {
        let text = text.trim();
        if text.is_empty() || text == "∅" || text == "-" {
            return Ok(Word::empty());
        }
        let parts: Vec<&str> = if text.contains('.') {
            text.split('.').collect()
        } else {
            text.split("").filter(|s| !s.is_empty()).collect()
        };
        let mut letters = Vec::with_capacity(parts.len());
        for part in parts {
            let v: usize = part
                .parse()
                .map_err(|_| Error::arg(format!("bad letter `{part}` in word `{text}`")))?;
            if v == 0 || v > n {
                return Err(Error::arg(format!("letter {v} out of range 1..={n} in word `{text}`")));
            }
            letters.push(v - 1);
        }
        Ok(Word::from_letters(&letters))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let dotted = self.0.iter().any(|&l| l >= 9);
        for (k, l) in self.0.iter().enumerate() {
            if dotted && k > 0 {
                write!(f, ".")?;
            }
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}

/// Disjoint sets with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = self.parent[x] as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}
