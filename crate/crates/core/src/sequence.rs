//! Small DNA-string helpers: short tandem repeat counting and point-difference
//! detection between aligned sequences.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shortest and longest motif accepted as a short tandem repeat unit.
pub const STR_MOTIF_MIN: usize = 2;
pub const STR_MOTIF_MAX: usize = 13;

/// A non-empty string over `{A, T, C, G}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DnaSequence(String);

impl DnaSequence {
    pub fn new(bases: impl Into<String>) -> Result<Self> {
        let bases = bases.into();
        if bases.is_empty() {
            return Err(Error::InputFormat("empty DNA sequence".into()));
        }
        if let Some((pos, c)) = bases
            .char_indices()
            .find(|(_, c)| !matches!(c, 'A' | 'T' | 'C' | 'G'))
        {
            return Err(Error::InputFormat(format!(
                "invalid base {c:?} at position {pos}"
            )));
        }
        Ok(DnaSequence(bases))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl FromStr for DnaSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DnaSequence::new(s)
    }
}

impl fmt::Display for DnaSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Largest `k` such that `motif` repeated `k` times occurs somewhere in `seq`.
///
/// Every start offset is scanned, so repeats embedded in flanking sequence are found.
pub fn str_repeat_count(seq: &DnaSequence, motif: &DnaSequence) -> Result<usize> {
    let m = motif.len();
    if !(STR_MOTIF_MIN..=STR_MOTIF_MAX).contains(&m) {
        return Err(Error::domain(format!(
            "STR motif length {m} outside [{STR_MOTIF_MIN}, {STR_MOTIF_MAX}]"
        )));
    }
    let s = seq.bytes();
    let motif = motif.bytes();
    if s.len() < m {
        return Ok(0);
    }

    // run[i] = number of back-to-back motif copies starting at i
    let mut run = vec![0usize; s.len() + m];
    let mut best = 0;
    for i in (0..=s.len() - m).rev() {
        if &s[i..i + m] == motif {
            run[i] = 1 + run[i + m];
            best = best.max(run[i]);
        }
    }
    Ok(best)
}

/// Sorted 0-based positions at which two equal-length sequences differ.
pub fn diff_positions(a: &DnaSequence, b: &DnaSequence) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "sequence lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(a.bytes()
        .iter()
        .zip(b.bytes())
        .enumerate()
        .filter_map(|(i, (x, y))| (x != y).then_some(i))
        .collect())
}
