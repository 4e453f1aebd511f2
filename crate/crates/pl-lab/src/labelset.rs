//! Candidate label sets and the enumerable space they live in.
//!
//! A candidate set is a proper, non-empty subset of the classes
//! `1..=k`, stored as a bitmask with label `i` on bit `i - 1`. The
//! full space of such sets has `2^k - 2` members and is ordered by
//! ascending bitmask, which gives a stable bijection between sets and
//! indices: the set at 0-based index `j` has mask `j + 1`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest class count for which whole-space enumeration is offered.
pub const MAX_ENUM_K: usize = 20;

/// Largest class count a `LabelSet` can represent at all.
pub const MAX_K: usize = 62;

/// A non-empty proper subset of the labels `1..=k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelSet {
    mask: u64,
    k: u8,
}

impl LabelSet {
    /// Builds a set from a raw bitmask. The mask must be non-zero,
    /// must not cover all `k` labels, and must not use bits past `k`.
    pub fn new(k: usize, mask: u64) -> Result<Self> {
        if !(2..=MAX_K).contains(&k) {
            return Err(Error::domain(format!(
                "class count k={k} outside supported range 2..={MAX_K}"
            )));
        }
        let full = (1u64 << k) - 1;
        if mask == 0 {
            return Err(Error::domain("candidate set must not be empty".to_string()));
        }
        if mask == full {
            return Err(Error::domain(format!(
                "candidate set must not contain all {k} labels"
            )));
        }
        if mask & !full != 0 {
            return Err(Error::domain(format!(
                "bitmask {mask:#x} uses labels beyond k={k}"
            )));
        }
        Ok(LabelSet { mask, k: k as u8 })
    }

    /// Builds a set from 1-based labels.
    pub fn from_labels(k: usize, labels: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &l in labels {
            if l < 1 || l > k {
                return Err(Error::domain(format!("label {l} outside 1..={k}")));
            }
            mask |= 1 << (l - 1);
        }
        LabelSet::new(k, mask)
    }

    pub fn k(&self) -> usize {
        self.k as usize
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Number of labels in the set. Always in `1..k`.
    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Membership of a 1-based label.
    pub fn contains(&self, label: usize) -> bool {
        label >= 1 && label <= self.k() && self.mask >> (label - 1) & 1 == 1
    }

    /// Complement within `1..=k`. Because the set is proper and
    /// non-empty, so is its complement.
    pub fn complement(&self) -> LabelSet {
        let full = (1u64 << self.k) - 1;
        LabelSet {
            mask: full ^ self.mask,
            k: self.k,
        }
    }

    /// The 1-based labels in ascending order.
    pub fn labels(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Iterates the 1-based labels in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.mask;
        (1..=self.k()).filter(move |l| mask >> (l - 1) & 1 == 1)
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

/// The ordered space of all candidate sets for a fixed `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlSpace {
    k: usize,
}

impl PlSpace {
    pub fn new(k: usize) -> Result<Self> {
        if !(2..=MAX_ENUM_K).contains(&k) {
            return Err(Error::domain(format!(
                "enumeration supports k in 2..={MAX_ENUM_K}, got {k}"
            )));
        }
        Ok(PlSpace { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `2^k - 2`.
    pub fn len(&self) -> usize {
        (1usize << self.k) - 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 0-based position of `set` in ascending-bitmask order.
    pub fn index_of(&self, set: &LabelSet) -> usize {
        assert_eq!(set.k(), self.k, "label set belongs to a different space");
        (set.mask - 1) as usize
    }

    /// The set at a 0-based position.
    pub fn set_at(&self, index: usize) -> LabelSet {
        assert!(index < self.len(), "index {index} outside PL space");
        LabelSet {
            mask: index as u64 + 1,
            k: self.k as u8,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = LabelSet> + '_ {
        let k = self.k as u8;
        (1..=self.len() as u64).map(move |mask| LabelSet { mask, k })
    }
}
