//! Two-domain scenario: every vehicle acquires once at home and once in
//! the foreign domain, leaving ledgers for the collusion analysis.

use std::collections::HashMap;
use std::sync::Arc;

use super::deploy::Deployment;
use crate::analyzer::LedgerSet;
use crate::clock::ManualClock;
use crate::error::Result;
use crate::model::{PolicyConfig, Serial};
use crate::vehicle::plan_requests;

#[derive(Debug)]
pub struct RoamRun {
    pub deployment: Deployment,
    pub ledgers: LedgerSet,
    /// Pseudonym serial to vehicle id.
    pub truth: HashMap<Serial, String>,
    pub home_pseudonyms: usize,
    pub foreign_pseudonyms: usize,
}

/// `vehicles` trips of `trip` seconds from `start`: home first, then abroad.
pub async fn roam(vehicles: usize, policy: PolicyConfig, start: u64, trip: u64) -> Result<RoamRun> {
    let clock = Arc::new(ManualClock::new(start));
    let dep = Deployment::two_domain(policy, clock.clone())?;
    let mut truth = HashMap::new();
    let (mut home_n, mut foreign_n) = (0, 0);
    let mut cars = Vec::with_capacity(vehicles);
    for i in 0..vehicles {
        cars.push(dep.vehicle(&format!("car-{i:03}"), "home").await?);
    }
    let home = dep.home().clone();
    let foreign = dep.domain("foreign")?.clone();
    for v in &mut cars {
        clock.set(start);
        let plan = plan_requests(&policy, start, trip)?;
        // Abroad only once every home ticket has run out.
        let abroad = plan.entries.last().map_or(start + trip, |e| e.interval.end);
        for e in plan.entries {
            clock.set(e.request_time);
            for p in v.acquire(&e, home.ltca.as_ref(), home.pca.as_ref()).await?.pseudonyms {
                truth.insert(p.serial, v.subject_id().to_string());
                home_n += 1;
            }
        }
        clock.set(abroad);
        for e in plan_requests(&policy, abroad, trip)?.entries {
            clock.set(e.request_time);
            let acq = v.acquire_foreign(&e, home.ltca.as_ref(), foreign.ltca.as_ref(), foreign.pca.as_ref()).await?;
            for p in acq.pseudonyms {
                truth.insert(p.serial, v.subject_id().to_string());
                foreign_n += 1;
            }
        }
    }
    let ledgers = LedgerSet {
        hltca: Some(home.ltca.export_ledger()),
        fltca: Some(foreign.ltca.export_ledger()),
        pcah: Some(home.pca.export_ledger()),
        pcaf: Some(foreign.pca.export_ledger()),
    };
    Ok(RoamRun { deployment: dep, ledgers, truth, home_pseudonyms: home_n, foreign_pseudonyms: foreign_n })
}
