//! Slot arithmetic shared by the PCA (what to issue) and the vehicle (what
//! to ask for), so both sides derive the same count from the same inputs.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::model::{Epoch, PolicyConfig, PolicyKind};

/// Whether `t` lies on the P3 window grid.
pub fn on_window_grid(cfg: &PolicyConfig, t: Epoch) -> bool {
    t >= cfg.grid_epoch && (t - cfg.grid_epoch).is_multiple_of(cfg.gamma_seconds)
}

/// The grid window containing `t`.
pub fn window_containing(cfg: &PolicyConfig, t: Epoch) -> Result<Interval> {
    if t < cfg.grid_epoch {
        return Err(Error::InvalidArgument(format!("time {t} precedes grid epoch {}", cfg.grid_epoch)));
    }
    let start = t - (t - cfg.grid_epoch) % cfg.gamma_seconds;
    Interval::new(start, start + cfg.gamma_seconds)
}

/// All slots of `validity`: consecutive τ-wide slots anchored at its start,
/// the last one possibly shorter (only legal under P1).
pub fn tile(validity: Interval, tau: u64) -> Vec<Interval> {
    let mut out = Vec::with_capacity(validity.len().div_ceil(tau) as usize);
    let mut s = validity.start;
    while s < validity.end {
        let e = (s + tau).min(validity.end);
        out.push(Interval { start: s, end: e });
        s = e;
    }
    out
}

/// Slots a PCA issues for a request over `validity` sent at `t_now`.
///
/// P1 tiles the interval, P2 additionally requires a whole number of slots
/// within one Γ, and P3 requires exactly one grid window and only issues the
/// slots that have not ended by `t_now`.
pub fn issuable(cfg: &PolicyConfig, validity: Interval, t_now: Epoch) -> Result<Vec<Interval>> {
    let tau = cfg.tau_seconds;
    match cfg.policy {
        PolicyKind::P1 => Ok(tile(validity, tau)),
        PolicyKind::P2 => {
            if !validity.len().is_multiple_of(tau) || validity.len() > cfg.gamma_seconds {
                return Err(Error::Policy(format!(
                    "P2 interval {validity} must be a multiple of {tau} s and at most {} s",
                    cfg.gamma_seconds
                )));
            }
            Ok(tile(validity, tau))
        }
        PolicyKind::P3 => {
            if !on_window_grid(cfg, validity.start) || validity.len() != cfg.gamma_seconds {
                return Err(Error::Policy(format!("P3 interval {validity} is not a grid window")));
            }
            Ok(tile(validity, tau).into_iter().filter(|s| s.end > t_now).collect())
        }
    }
}
