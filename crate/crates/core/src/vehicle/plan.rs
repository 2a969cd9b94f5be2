use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::model::{Epoch, PolicyConfig, PolicyKind};
use crate::slots;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub request_time: Epoch,
    pub interval: Interval,
    /// Slots the PCA will issue if the request is sent at `request_time`.
    pub expected_slot_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestPlan {
    pub entries: Vec<PlanEntry>,
}

impl RequestPlan {
    pub fn total_slots(&self) -> usize {
        self.entries.iter().map(|e| e.expected_slot_count).sum()
    }
}

fn entry(cfg: &PolicyConfig, request_time: Epoch, interval: Interval) -> Result<PlanEntry> {
    let expected_slot_count = slots::issuable(cfg, interval, request_time)?.len();
    Ok(PlanEntry { request_time, interval, expected_slot_count })
}

/// Request schedule for a trip `[departure, departure + duration)`, with
/// every request after the first sent at its interval start.
pub fn plan_requests(cfg: &PolicyConfig, departure: Epoch, duration: u64) -> Result<RequestPlan> {
    plan_requests_with_lead(cfg, departure, duration, 0)
}

/// As [`plan_requests`], sending follow-up requests `lead` seconds before
/// their interval starts (never before departure).
pub fn plan_requests_with_lead(cfg: &PolicyConfig, departure: Epoch, duration: u64, lead: u64) -> Result<RequestPlan> {
    cfg.validate()?;
    if duration == 0 {
        return Err(Error::InvalidArgument("trip duration must be positive".into()));
    }
    let trip_end = departure + duration;
    let at = |start: Epoch| start.saturating_sub(lead).max(departure);
    let gamma = cfg.gamma_seconds;
    let mut entries = Vec::new();
    match cfg.policy {
        PolicyKind::P1 => entries.push(entry(cfg, departure, Interval::new(departure, trip_end)?)?),
        PolicyKind::P2 => {
            let mut start = departure;
            while start < trip_end {
                entries.push(entry(cfg, at(start), Interval::new(start, start + gamma)?)?);
                start += gamma;
            }
        }
        PolicyKind::P3 => {
            let mut window = slots::window_containing(cfg, departure)?;
            entries.push(entry(cfg, departure, window)?);
            while window.end < trip_end {
                window = Interval::new(window.end, window.end + gamma)?;
                entries.push(entry(cfg, at(window.start), window)?);
            }
        }
    }
    Ok(RequestPlan { entries })
}

/// Follow-up P1 request when a trip outlasts its estimate.
pub fn overrun_entry(cfg: &PolicyConfig, planned_end: Epoch, actual_end: Epoch) -> Result<Option<PlanEntry>> {
    if cfg.policy != PolicyKind::P1 || actual_end <= planned_end {
        return Ok(None);
    }
    Ok(Some(entry(cfg, planned_end, Interval::new(planned_end, actual_end)?)?))
}
