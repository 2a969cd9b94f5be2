use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Epoch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// User-controlled: one request covering the expected trip.
    P1,
    /// Oblivious: a fresh Γ-long request every Γ from departure.
    P2,
    /// Universally fixed: requests aligned to a global Γ grid.
    P3,
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(PolicyKind::P1),
            "P2" => Ok(PolicyKind::P2),
            "P3" => Ok(PolicyKind::P3),
            _ => Err(Error::InvalidArgument(format!("unknown policy {s:?}"))),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::P1 => "P1",
            PolicyKind::P2 => "P2",
            PolicyKind::P3 => "P3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub policy: PolicyKind,
    /// Γ, refill interval in seconds.
    pub gamma_seconds: u64,
    /// τ, pseudonym lifetime in seconds.
    pub tau_seconds: u64,
    /// Anchor of the P3 grid.
    #[serde(default)]
    pub grid_epoch: Epoch,
}

impl PolicyConfig {
    pub fn new(policy: PolicyKind, gamma_seconds: u64, tau_seconds: u64) -> Result<Self> {
        let cfg = PolicyConfig { policy, gamma_seconds, tau_seconds, grid_epoch: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_grid_epoch(mut self, grid_epoch: Epoch) -> Self {
        self.grid_epoch = grid_epoch;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_seconds == 0 {
            return Err(Error::InvalidArgument("tau must be at least 1 s".into()));
        }
        if self.gamma_seconds == 0 {
            return Err(Error::InvalidArgument("gamma must be at least 1 s".into()));
        }
        if self.policy != PolicyKind::P1 && !self.gamma_seconds.is_multiple_of(self.tau_seconds) {
            return Err(Error::InvalidArgument(format!(
                "gamma {} is not a multiple of tau {}",
                self.gamma_seconds, self.tau_seconds
            )));
        }
        Ok(())
    }

    /// Fully unlinkable setting: one pseudonym per ticket.
    pub fn is_fully_unlinkable(&self) -> bool {
        self.gamma_seconds == self.tau_seconds
    }
}
