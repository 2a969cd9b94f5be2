use serde::{Deserialize, Serialize};

use super::{AuthorityId, Serial, SubjectId};
use crate::interval::Interval;

/// What an LTCA ledger row points back to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectRef {
    Vehicle(SubjectId),
    ForeignTicket { issuer: AuthorityId, serial: Serial },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtcaLedgerRecord {
    pub ticket_serial: Serial,
    pub validity: Interval,
    pub subject: SubjectRef,
}

/// Everything an LTCA legitimately knows after a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtcaLedgerExport {
    pub authority: AuthorityId,
    pub records: Vec<LtcaLedgerRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaLedgerRecord {
    pub pseudonym_serial: Serial,
    pub ticket_serial: Serial,
    pub validity: Interval,
}

/// Everything a PCA legitimately knows after a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaLedgerExport {
    pub authority: AuthorityId,
    pub records: Vec<PcaLedgerRecord>,
}
