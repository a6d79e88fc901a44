//! Fixed-width feature masks.
//!
//! Bit `i` set means feature `i` is kept. Masks over the same number of
//! features are partially ordered by set inclusion.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    n: usize,
    words: Vec<u64>,
}

impl Mask {
    pub fn zeros(n: usize) -> Self {
        Mask {
            n,
            words: vec![0; n.div_ceil(WORD)],
        }
    }

    pub fn ones(n: usize) -> Self {
        let mut m = Mask::zeros(n);
        for w in m.words.iter_mut() {
            *w = u64::MAX;
        }
        m.clear_tail();
        m
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(n: usize, indices: I) -> Result<Self> {
        let mut m = Mask::zeros(n);
        for i in indices {
            if i >= n {
                return Err(Error::arg(format!("feature index {i} out of range for n = {n}")));
            }
            m.set(i, true);
        }
        Ok(m)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = Mask::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            m.set(i, b);
        }
        m
    }

    /// Builds a mask from the low `n` bits of `index` (bit `i` is feature `i`).
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= WORD, "from_index supports at most 64 features");
        let mut m = Mask::zeros(n);
        if n > 0 {
            m.words[0] = index;
            m.clear_tail();
        }
        m
    }

    /// Inverse of [`Mask::from_index`]; `None` when `n > 64`.
    pub fn to_index(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.n, "bit {i} out of range for mask of width {}", self.n);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.n, "bit {i} out of range for mask of width {}", self.n);
        let bit = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= bit;
        } else {
            self.words[i / WORD] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of kept features, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.get(i))
    }

    /// Indices of dropped features, ascending. These are the free slots of an
    /// additive perturbation.
    pub fn iter_zeros(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| !self.get(i))
    }

    pub fn is_superset_of(&self, other: &Mask) -> bool {
        self.n == other.n
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & b == *b)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a | b)
    }

    /// Features kept in `self` but not in `other`.
    pub fn difference(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn not(&self) -> Mask {
        let mut m = Mask {
            n: self.n,
            words: self.words.iter().map(|w| !w).collect(),
        };
        m.clear_tail();
        m
    }

    fn zip_with(&self, other: &Mask, op: impl Fn(u64, u64) -> u64) -> Mask {
        assert_eq!(self.n, other.n, "mask widths differ");
        Mask {
            n: self.n,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    fn clear_tail(&mut self) {
        let rem = self.n % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl PartialOrd for Mask {
    /// Set inclusion: `a >= b` iff `a` keeps every feature `b` keeps.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.n != other.n {
            return None;
        }
        match (self.is_superset_of(other), other.is_superset_of(self)) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Greater),
            (false, true) => Some(Ordering::Less),
            (false, false) => None,
        }
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask({self})")
    }
}

impl FromStr for Mask {
    type Err = Error;

    /// Parses `"101"`: the first character is feature 0.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::arg(format!("invalid mask character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mask::from_bools(&bits))
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let m: Mask = "1011".parse().unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.get(0) && !m.get(1) && m.get(2) && m.get(3));
        assert_eq!(m.to_string(), "1011");
        assert_eq!(m.count_ones(), 3);
        assert!("10x".parse::<Mask>().is_err());
    }

    #[test]
    fn wide_masks_cross_word_boundaries() {
        let m = Mask::from_indices(130, [0, 63, 64, 129]).unwrap();
        assert_eq!(m.count_ones(), 4);
        assert_eq!(m.iter_ones().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
        assert_eq!(Mask::ones(130).count_ones(), 130);
        assert_eq!(m.not().count_ones(), 126);
        assert!(Mask::from_indices(3, [3]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let m = Mask::from_index(5, 0b10110);
        assert_eq!(m.to_string(), "01101");
        assert_eq!(m.to_index(), Some(0b10110));
        assert_eq!(Mask::from_index(3, 0xff).count_ones(), 3);
    }

    fn mask_pair(n: usize) -> impl Strategy<Value = (Mask, Mask)> {
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(a, b)| (Mask::from_bools(&a), Mask::from_bools(&b)))
    }

    proptest! {
        #[test]
        fn order_is_set_inclusion((a, b) in (1usize..80).prop_flat_map(mask_pair)) {
            let union = a.or(&b);
            let inter = a.and(&b);
            prop_assert!(union >= a && union >= b);
            prop_assert!(inter <= a && inter <= b);
            let a_ge_b = a >= b;
            let superset = b.iter_ones().all(|i| a.get(i));
            prop_assert_eq!(a_ge_b, superset);
            prop_assert!(a.count_ones() <= a.len());
            prop_assert_eq!(a.difference(&b).and(&b).count_ones(), 0);
        }
    }
}
