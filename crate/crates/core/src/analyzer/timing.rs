use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::Serial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub serial: Serial,
    pub start: u64,
    pub end: u64,
}

/// Eavesdropped pseudonyms plus the held-out owner of each.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub observations: Vec<Observation>,
    #[serde(default)]
    pub ground_truth: HashMap<Serial, String>,
}

impl Transcript {
    pub fn sort(&mut self) {
        self.observations.sort_by_key(|o| (o.start, o.end, o.serial));
    }

    /// Consecutive pseudonyms of each owner, by slot start.
    pub fn true_pairs(&self) -> HashSet<(Serial, Serial)> {
        let mut by_owner: HashMap<&str, Vec<&Observation>> = HashMap::new();
        for o in &self.observations {
            if let Some(owner) = self.ground_truth.get(&o.serial) {
                by_owner.entry(owner).or_default().push(o);
            }
        }
        let mut pairs = HashSet::new();
        for obs in by_owner.values_mut() {
            obs.sort_by_key(|o| (o.start, o.serial));
            for w in obs.windows(2) {
                pairs.insert((w[0].serial, w[1].serial));
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub links: Vec<(Serial, Serial)>,
    /// Partition of all serials into predicted chains.
    pub chains: Vec<Vec<Serial>>,
    pub true_pairs: usize,
    pub correct_links: usize,
    pub recall: f64,
    pub precision: f64,
    /// Expiries with at least one successor candidate.
    pub expiry_events: usize,
    /// Successor candidate count per such expiry, keyed by expiring serial.
    pub candidate_counts: Vec<(Serial, usize)>,
    pub mean_anonymity_set: f64,
}

/// Links A to B when B is the only pseudonym starting within `tolerance` of
/// A's expiry and no other expiring pseudonym claims B.
pub fn timing_link(transcript: &Transcript, tolerance: u64) -> TimingReport {
    let mut starts: BTreeMap<u64, Vec<Serial>> = BTreeMap::new();
    for o in &transcript.observations {
        starts.entry(o.start).or_default().push(o.serial);
    }

    let mut candidate_counts = Vec::new();
    let mut unique: HashMap<Serial, Serial> = HashMap::new();
    let mut claims: HashMap<Serial, usize> = HashMap::new();
    for a in &transcript.observations {
        let lo = a.end.saturating_sub(tolerance);
        let cands: Vec<Serial> = starts
            .range(lo..=a.end.saturating_add(tolerance))
            .flat_map(|(_, v)| v.iter().copied())
            .filter(|b| *b != a.serial)
            .collect();
        if cands.is_empty() {
            continue;
        }
        candidate_counts.push((a.serial, cands.len()));
        if let [b] = cands[..] {
            unique.insert(a.serial, b);
            *claims.entry(b).or_default() += 1;
        }
    }

    let mut links: Vec<(Serial, Serial)> = transcript
        .observations
        .iter()
        .filter_map(|a| unique.get(&a.serial).map(|b| (a.serial, *b)))
        .filter(|(_, b)| claims[b] == 1)
        .collect();
    links.sort();

    let truth = transcript.true_pairs();
    let correct = links.iter().filter(|l| truth.contains(l)).count();
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let mean_set = ratio(candidate_counts.iter().map(|c| c.1).sum(), candidate_counts.len());

    TimingReport {
        chains: chains(&transcript.observations, &links),
        true_pairs: truth.len(),
        correct_links: correct,
        recall: ratio(correct, truth.len()),
        precision: ratio(correct, links.len()),
        expiry_events: candidate_counts.len(),
        mean_anonymity_set: mean_set,
        candidate_counts,
        links,
    }
}

fn chains(obs: &[Observation], links: &[(Serial, Serial)]) -> Vec<Vec<Serial>> {
    let next: HashMap<Serial, Serial> = links.iter().copied().collect();
    let has_pred: HashSet<Serial> = links.iter().map(|l| l.1).collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for o in obs {
        if has_pred.contains(&o.serial) || !seen.insert(o.serial) {
            continue;
        }
        let mut chain = vec![o.serial];
        let mut cur = o.serial;
        while let Some(n) = next.get(&cur) {
            if !seen.insert(*n) {
                break;
            }
            chain.push(*n);
            cur = *n;
        }
        out.push(chain);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Builder(Transcript);

    impl Builder {
        fn new() -> Self {
            Builder(Transcript::default())
        }
        fn add(&mut self, owner: &str, start: u64, end: u64) -> Serial {
            let serial = Serial::random();
            self.0.observations.push(Observation { serial, start, end });
            self.0.ground_truth.insert(serial, owner.into());
            serial
        }
        fn slots(&mut self, owner: &str, from: u64, n: u64, tau: u64) -> Vec<Serial> {
            (0..n).map(|i| self.add(owner, from + i * tau, from + (i + 1) * tau)).collect()
        }
        fn done(mut self) -> Transcript {
            self.0.sort();
            self.0
        }
    }

    #[test]
    fn lone_vehicle_fully_chained() {
        let mut b = Builder::new();
        let s = b.slots("a", 0, 5, 60);
        let r = timing_link(&b.done(), 0);
        assert_eq!(r.links.len(), 4);
        assert_eq!(r.correct_links, 4);
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.chains, vec![s]);
    }

    #[test]
    fn aligned_pair_unlinkable() {
        let mut b = Builder::new();
        b.slots("a", 0, 10, 60);
        b.slots("b", 0, 10, 60);
        let r = timing_link(&b.done(), 0);
        assert!(r.links.is_empty());
        assert_eq!(r.mean_anonymity_set, 2.0);
        assert_eq!(r.expiry_events, 18);
    }

    #[test]
    fn staggered_expiry_links() {
        // Row 1 runs [0,3) [3,6); row 2 [1,5) then [5,8): only row 2's
        // successor starts at 5.
        let mut b = Builder::new();
        b.add("a", 0, 3);
        b.add("a", 3, 6);
        let x = b.add("b", 1, 5);
        let y = b.add("b", 5, 8);
        let r = timing_link(&b.done(), 0);
        assert!(r.links.contains(&(x, y)));
        assert_eq!(r.correct_links, 2);
    }

    #[test]
    fn shared_successor_links_neither() {
        let mut b = Builder::new();
        b.add("a", 0, 10);
        b.add("b", 2, 10);
        b.add("a", 10, 20);
        let r = timing_link(&b.done(), 0);
        assert!(r.links.is_empty());
    }

    #[test]
    fn tolerance_window() {
        let mut b = Builder::new();
        b.add("a", 0, 10);
        b.add("a", 12, 20);
        let t = b.done();
        assert!(timing_link(&t, 0).links.is_empty());
        assert_eq!(timing_link(&t, 2).links.len(), 1);
    }

    proptest! {
        #[test]
        fn scores_match_brute_force(
            trips in prop::collection::vec((0u64..50, 1u64..6, 1u64..4), 1..8),
        ) {
            let mut b = Builder::new();
            for (i, (start, n, tau)) in trips.iter().enumerate() {
                b.slots(&format!("v{i}"), *start, *n, *tau);
            }
            let t = b.done();
            let r = timing_link(&t, 0);
            // Brute force the adversary rule.
            let obs = &t.observations;
            let mut expect = Vec::new();
            for a in obs {
                let c: Vec<_> = obs.iter().filter(|b| b.serial != a.serial && b.start == a.end).collect();
                if c.len() != 1 { continue; }
                let claimants = obs.iter().filter(|o| {
                    let oc: Vec<_> = obs.iter().filter(|b| b.serial != o.serial && b.start == o.end).collect();
                    oc.len() == 1 && oc[0].serial == c[0].serial
                }).count();
                if claimants == 1 { expect.push((a.serial, c[0].serial)); }
            }
            expect.sort();
            prop_assert_eq!(&r.links, &expect);
            let truth = t.true_pairs();
            let correct = expect.iter().filter(|l| truth.contains(l)).count();
            prop_assert_eq!(r.correct_links, correct);
            let total: usize = r.chains.iter().map(|c| c.len()).sum();
            prop_assert_eq!(total, obs.len());
        }
    }
}
