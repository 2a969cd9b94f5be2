//! Half-open time intervals and the disjoint-interval ledger behind the
//! Sybil guard.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `[start, end)` in epoch seconds. Abutting intervals do not overlap.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: u64,
    pub end: u64,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidArgument(format!("interval [{start}, {end}) is empty")));
        }
        Ok(Interval { start, end })
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn within(&self, outer: &Interval) -> bool {
        outer.start <= self.start && self.end <= outer.end
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Pairwise-disjoint set of intervals, each tagged with a value.
#[derive(Debug, Clone)]
pub struct DisjointIntervals<V> {
    by_start: BTreeMap<u64, (u64, V)>,
}

impl<V> Default for DisjointIntervals<V> {
    fn default() -> Self {
        DisjointIntervals { by_start: BTreeMap::new() }
    }
}

impl<V: Clone> DisjointIntervals<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.by_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_start.is_empty()
    }

    /// First stored interval overlapping `iv`, if any.
    pub fn conflict(&self, iv: &Interval) -> Option<(Interval, &V)> {
        // Stored intervals are disjoint, so only the last one starting before
        // `iv.end` can overlap.
        let (&start, (end, v)) = self.by_start.range(..iv.end).next_back()?;
        let found = Interval { start, end: *end };
        found.overlaps(iv).then_some((found, v))
    }

    pub fn insert(&mut self, iv: Interval, value: V) -> std::result::Result<(), Interval> {
        if let Some((existing, _)) = self.conflict(&iv) {
            return Err(existing);
        }
        self.by_start.insert(iv.start, (iv.end, value));
        Ok(())
    }

    pub fn remove(&mut self, iv: &Interval) -> Option<V> {
        match self.by_start.get(&iv.start) {
            Some((end, _)) if *end == iv.end => self.by_start.remove(&iv.start).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Interval, &V)> {
        self.by_start.iter().map(|(&start, (end, v))| (Interval { start, end: *end }, v))
    }

    /// The interval containing `t`.
    pub fn at(&self, t: u64) -> Option<(Interval, &V)> {
        let (&start, (end, v)) = self.by_start.range(..=t).next_back()?;
        (t < *end).then_some((Interval { start, end: *end }, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn abutting_is_not_overlap() {
        let a = Interval::new(100, 700).unwrap();
        let b = Interval::new(700, 1300).unwrap();
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&Interval::new(400, 900).unwrap()));
        assert!(Interval::new(5, 5).is_err());
    }

    #[test]
    fn ledger_rejects_overlap() {
        let mut set = DisjointIntervals::new();
        set.insert(Interval::new(100, 700).unwrap(), 1).unwrap();
        assert_eq!(set.insert(Interval::new(400, 900).unwrap(), 2), Err(Interval::new(100, 700).unwrap()));
        set.insert(Interval::new(700, 1300).unwrap(), 3).unwrap();
        set.insert(Interval::new(0, 100).unwrap(), 4).unwrap();
        assert!(set.insert(Interval::new(50, 60).unwrap(), 5).is_err());
        assert!(set.insert(Interval::new(0, 2000).unwrap(), 5).is_err());
        assert_eq!(set.len(), 3);
        assert_eq!(set.at(699).map(|(_, v)| *v), Some(1));
        assert_eq!(set.at(700).map(|(_, v)| *v), Some(3));
        assert_eq!(set.at(1300), None);
    }

    proptest! {
        #[test]
        fn inserted_intervals_stay_disjoint(raw in prop::collection::vec((0u64..500, 1u64..80), 1..60)) {
            let mut set = DisjointIntervals::new();
            let mut accepted: Vec<Interval> = Vec::new();
            for (i, (s, len)) in raw.into_iter().enumerate() {
                let iv = Interval::new(s, s + len).unwrap();
                let brute_conflict = accepted.iter().any(|a| a.overlaps(&iv));
                let res = set.insert(iv, i);
                prop_assert_eq!(res.is_err(), brute_conflict);
                if res.is_ok() {
                    accepted.push(iv);
                }
            }
            for (i, a) in accepted.iter().enumerate() {
                for b in &accepted[i + 1..] {
                    prop_assert!(!a.overlaps(b));
                }
            }
        }
    }
}
