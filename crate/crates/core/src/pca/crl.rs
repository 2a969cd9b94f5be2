use std::collections::HashMap;

use crate::model::Serial;

/// Ordered revocation log. The n-th revoked serial carries sequence number n.
#[derive(Debug, Default)]
pub struct CrlStore {
    revoked: Vec<Serial>,
    index: HashMap<Serial, u64>,
}

impl CrlStore {
    /// Appends `serial`; false if it was already revoked.
    pub fn revoke(&mut self, serial: Serial) -> bool {
        if self.index.contains_key(&serial) {
            return false;
        }
        self.revoked.push(serial);
        self.index.insert(serial, self.revoked.len() as u64);
        true
    }

    pub fn is_revoked(&self, serial: &Serial) -> bool {
        self.index.contains_key(serial)
    }

    pub fn latest(&self) -> u64 {
        self.revoked.len() as u64
    }

    /// Serials with sequence number above `since`, as `(since', latest, serials)`.
    /// A `since` beyond the latest sequence yields an empty delta at the latest.
    pub fn delta(&self, since: u64) -> (u64, u64, Vec<Serial>) {
        let latest = self.latest();
        let since = since.min(latest);
        (since, latest, self.revoked[since as usize..].to_vec())
    }
}
