use std::fmt;

use crate::{Error, Result};

const WORD_BITS: usize = 64;

/// Candidate labels of one instance, stored as a bitmask over `0..m`.
///
/// Always holds at least one label.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CandidateSet {
    words: Box<[u64]>,
    m: usize,
}

impl CandidateSet {
    /// Single-label (clean) set.
    pub fn singleton(label: usize, m: usize) -> Result<Self> {
        Self::from_labels([label], m)
    }

    pub fn from_labels<I: IntoIterator<Item = usize>>(labels: I, m: usize) -> Result<Self> {
        let mut words = vec![0u64; m.div_ceil(WORD_BITS)].into_boxed_slice();
        for label in labels {
            if label >= m {
                return Err(Error::ClassOutOfRange { index: label, m });
            }
            words[label / WORD_BITS] |= 1 << (label % WORD_BITS);
        }
        if words.iter().all(|&w| w == 0) {
            return Err(Error::EmptyCandidates);
        }
        Ok(Self { words, m })
    }

    /// Every label in `0..m`.
    pub fn full(m: usize) -> Result<Self> {
        Self::from_labels(0..m, m)
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn contains(&self, label: usize) -> bool {
        label < self.m && self.words[label / WORD_BITS] & (1 << (label % WORD_BITS)) != 0
    }

    pub fn cardinality(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.cardinality() == 1
    }

    /// The label of a clean set, `None` for partial sets.
    pub fn sole_label(&self) -> Option<usize> {
        if self.is_clean() {
            self.iter().next()
        } else {
            None
        }
    }

    /// Labels in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD_BITS + bit)
            })
        })
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
