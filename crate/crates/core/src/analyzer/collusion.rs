//! What a coalition of authorities can derive by joining their ledgers.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LtcaLedgerExport, PcaLedgerExport, Serial, SubjectId, SubjectRef};

pub const LEDGER_NAMES: [&str; 4] = ["hltca", "fltca", "pcah", "pcaf"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LedgerSet {
    pub hltca: Option<LtcaLedgerExport>,
    pub fltca: Option<LtcaLedgerExport>,
    pub pcah: Option<PcaLedgerExport>,
    pub pcaf: Option<PcaLedgerExport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollusionReport {
    pub members: Vec<String>,
    /// Distinct vehicle identities in the joined ledgers.
    pub identities_known: usize,
    /// Ticket rows, each revealing a requested interval.
    pub intervals_known: usize,
    pub pseudonyms_known: usize,
    /// Pseudonyms joined to a vehicle identity.
    pub identified_pseudonyms: usize,
    /// Of those, how many name the true owner.
    pub correctly_identified: usize,
    /// Groups of two or more pseudonyms known to share an owner.
    pub pseudonym_groups: usize,
    pub largest_group: usize,
    /// Groups that span more than one pseudonym request.
    pub cross_request_groups: usize,
    /// Groups mixing pseudonyms of different true owners.
    pub mislinked_groups: usize,
}

impl CollusionReport {
    pub fn identified_fraction(&self) -> f64 {
        if self.pseudonyms_known == 0 {
            0.0
        } else {
            self.identified_pseudonyms as f64 / self.pseudonyms_known as f64
        }
    }

    pub fn links_identities(&self) -> bool {
        self.identified_pseudonyms > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    Pseudonym(Serial),
    Ticket(Serial),
    Vehicle(SubjectId),
}

#[derive(Default)]
struct UnionFind {
    ids: HashMap<Node, usize>,
    parent: Vec<usize>,
}

impl UnionFind {
    fn id(&mut self, n: Node) -> usize {
        let next = self.parent.len();
        let id = *self.ids.entry(n).or_insert(next);
        if id == next {
            self.parent.push(next);
        }
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: Node, b: Node) {
        let (a, b) = (self.id(a), self.id(b));
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Joins the ledgers of `members` (names from [`LEDGER_NAMES`]) and scores
/// the result against `truth` (pseudonym serial to vehicle id).
pub fn collusion_view(set: &LedgerSet, members: &[&str], truth: &HashMap<Serial, String>) -> Result<CollusionReport> {
    let mut ltcas = Vec::new();
    let mut pcas = Vec::new();
    let mut names = BTreeSet::new();
    for m in members {
        let missing = || Error::NotFound(format!("ledger {m} was not exported"));
        match *m {
            "hltca" => ltcas.push(set.hltca.as_ref().ok_or_else(missing)?),
            "fltca" => ltcas.push(set.fltca.as_ref().ok_or_else(missing)?),
            "pcah" => pcas.push(set.pcah.as_ref().ok_or_else(missing)?),
            "pcaf" => pcas.push(set.pcaf.as_ref().ok_or_else(missing)?),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown ledger {other:?}; expected one of {}",
                    LEDGER_NAMES.join(", ")
                )))
            }
        }
        names.insert(m.to_string());
    }

    let mut uf = UnionFind::default();
    let mut pseudonyms: Vec<(Serial, Serial)> = Vec::new();
    for p in &pcas {
        for r in &p.records {
            uf.union(Node::Pseudonym(r.pseudonym_serial), Node::Ticket(r.ticket_serial));
            pseudonyms.push((r.pseudonym_serial, r.ticket_serial));
        }
    }
    let mut vehicles = BTreeSet::new();
    let mut intervals = 0;
    for l in &ltcas {
        for r in &l.records {
            intervals += 1;
            let other = match &r.subject {
                SubjectRef::Vehicle(id) => {
                    vehicles.insert(id.clone());
                    Node::Vehicle(id.clone())
                }
                SubjectRef::ForeignTicket { serial, .. } => Node::Ticket(*serial),
            };
            uf.union(Node::Ticket(r.ticket_serial), other);
        }
    }

    let mut identity_of_root: HashMap<usize, SubjectId> = HashMap::new();
    for v in &vehicles {
        let id = uf.id(Node::Vehicle(v.clone()));
        let root = uf.find(id);
        identity_of_root.insert(root, v.clone());
    }

    struct Group {
        members: Vec<Serial>,
        tickets: BTreeSet<Serial>,
        owners: BTreeSet<String>,
    }
    let mut groups: HashMap<usize, Group> = HashMap::new();
    let mut report = CollusionReport {
        members: names.into_iter().collect(),
        identities_known: vehicles.len(),
        intervals_known: intervals,
        pseudonyms_known: pseudonyms.len(),
        ..Default::default()
    };
    for (p, t) in &pseudonyms {
        let id = uf.id(Node::Pseudonym(*p));
        let root = uf.find(id);
        let owner = truth.get(p).cloned();
        if let Some(identity) = identity_of_root.get(&root) {
            report.identified_pseudonyms += 1;
            if owner.as_deref() == Some(identity.as_str()) {
                report.correctly_identified += 1;
            }
        }
        let g = groups.entry(root).or_insert_with(|| Group { members: Vec::new(), tickets: BTreeSet::new(), owners: BTreeSet::new() });
        g.members.push(*p);
        g.tickets.insert(*t);
        g.owners.extend(owner);
    }
    for g in groups.values().filter(|g| g.members.len() >= 2) {
        report.pseudonym_groups += 1;
        report.largest_group = report.largest_group.max(g.members.len());
        if g.tickets.len() > 1 {
            report.cross_request_groups += 1;
        }
        if g.owners.len() > 1 {
            report.mislinked_groups += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;
    use crate::model::{AuthorityId, LtcaLedgerRecord, PcaLedgerRecord};

    fn iv() -> Interval {
        Interval::new(0, 600).unwrap()
    }

    /// Vehicle "a" at home (one ticket, two pseudonyms) and abroad (one
    /// exchanged ticket, one pseudonym).
    fn fixture() -> (LedgerSet, HashMap<Serial, String>) {
        let (t_home, f_tkt, n_tkt) = (Serial::random(), Serial::random(), Serial::random());
        let ps: Vec<Serial> = (0..3).map(|_| Serial::random()).collect();
        let h = AuthorityId::new("home-ltca");
        let rec = |ticket_serial, subject| LtcaLedgerRecord { ticket_serial, validity: iv(), subject };
        let prec = |pseudonym_serial, ticket_serial| PcaLedgerRecord { pseudonym_serial, ticket_serial, validity: iv() };
        let set = LedgerSet {
            hltca: Some(LtcaLedgerExport {
                authority: h.clone(),
                records: vec![rec(t_home, SubjectRef::Vehicle("a".into())), rec(f_tkt, SubjectRef::Vehicle("a".into()))],
            }),
            fltca: Some(LtcaLedgerExport {
                authority: "foreign-ltca".into(),
                records: vec![rec(n_tkt, SubjectRef::ForeignTicket { issuer: h, serial: f_tkt })],
            }),
            pcah: Some(PcaLedgerExport { authority: "home-pca".into(), records: vec![prec(ps[0], t_home), prec(ps[1], t_home)] }),
            pcaf: Some(PcaLedgerExport { authority: "foreign-pca".into(), records: vec![prec(ps[2], n_tkt)] }),
        };
        let truth = ps.iter().map(|p| (*p, "a".to_string())).collect();
        (set, truth)
    }

    #[test]
    fn rows() {
        let (set, truth) = fixture();
        let v = |m: &[&str]| collusion_view(&set, m, &truth).unwrap();

        let r = v(&["hltca"]);
        assert_eq!((r.identities_known, r.intervals_known, r.pseudonyms_known), (1, 2, 0));

        let r = v(&["pcah"]);
        assert_eq!((r.pseudonym_groups, r.cross_request_groups, r.identified_pseudonyms), (1, 0, 0));

        let r = v(&["hltca", "fltca"]);
        assert_eq!(r.identified_pseudonyms, 0);

        let r = v(&["pcah", "pcaf"]);
        assert_eq!((r.identities_known, r.cross_request_groups), (0, 0));

        let r = v(&["hltca", "pcah"]);
        assert_eq!((r.identified_pseudonyms, r.correctly_identified), (2, 2));

        let r = v(&["fltca", "pcaf"]);
        assert_eq!((r.identities_known, r.identified_pseudonyms), (0, 0));

        let r = v(&["hltca", "fltca", "pcaf"]);
        assert_eq!((r.identified_pseudonyms, r.correctly_identified), (1, 1));

        let r = v(&["hltca", "fltca", "pcah", "pcaf"]);
        assert_eq!((r.identified_pseudonyms, r.largest_group, r.cross_request_groups), (3, 3, 1));
    }

    #[test]
    fn unknown_name() {
        let (set, truth) = fixture();
        assert!(matches!(collusion_view(&set, &["ra"], &truth), Err(Error::InvalidArgument(_))));
        let empty = LedgerSet::default();
        assert!(matches!(collusion_view(&empty, &["pcah"], &truth), Err(Error::NotFound(_))));
    }
}
