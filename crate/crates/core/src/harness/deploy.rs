//! In-process deployments: one or more domains, each with an LTCA and a
//! PCA, plus a single RA wired to every authority.

use std::collections::HashMap;
use std::sync::Arc;

use crate::clock::Clock;
use crate::crypto::KeyPair;
use crate::error::{Error, Result};
use crate::ltca::{Ltca, LtcaConfig};
use crate::model::{AuthorityId, LtcaLedgerExport, PcaLedgerExport, PolicyConfig, DEFAULT_SKEW_TOLERANCE};
use crate::pca::puzzle::PuzzleConfig;
use crate::pca::{Pca, PcaConfig};
use crate::ra::Ra;
use crate::registry::{AuthorityEntry, Registry, Role};
use crate::vehicle::Vehicle;

pub const RA_ID: &str = "ra";

pub fn ltca_id(domain: &str) -> AuthorityId {
    AuthorityId::new(format!("{domain}-ltca"))
}

pub fn pca_id(domain: &str) -> AuthorityId {
    AuthorityId::new(format!("{domain}-pca"))
}

#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub name: String,
    pub policy: PolicyConfig,
    pub puzzle: PuzzleConfig,
    pub skew_tolerance: u64,
}

impl DomainSpec {
    pub fn new(name: impl Into<String>, policy: PolicyConfig) -> Self {
        DomainSpec { name: name.into(), policy, puzzle: PuzzleConfig::default(), skew_tolerance: DEFAULT_SKEW_TOLERANCE }
    }
}

/// Fresh key pairs and the registry that trusts them.
pub fn generate_keys(domains: &[&str]) -> Result<(Registry, HashMap<AuthorityId, KeyPair>)> {
    let mut entries = Vec::new();
    let mut keys = HashMap::new();
    let mut add = |id: AuthorityId, role, domain: &str| -> Result<()> {
        let key = KeyPair::generate()?;
        entries.push(AuthorityEntry { id: id.clone(), role, domain: domain.into(), public_key: key.public_key().clone(), endpoint: None });
        keys.insert(id, key);
        Ok(())
    };
    for d in domains {
        add(ltca_id(d), Role::Ltca, d)?;
        add(pca_id(d), Role::Pca, d)?;
    }
    let first = domains.first().ok_or_else(|| Error::InvalidArgument("a deployment needs a domain".into()))?;
    add(AuthorityId::new(RA_ID), Role::Ra, first)?;
    Ok((Registry::new(entries)?, keys))
}

#[derive(Debug, Clone)]
pub struct Domain {
    pub name: String,
    pub ltca: Arc<Ltca>,
    pub pca: Arc<Pca>,
}

#[derive(Debug)]
pub struct Deployment {
    pub registry: Arc<Registry>,
    pub clock: Arc<dyn Clock>,
    pub domains: Vec<Domain>,
    pub ra: Arc<Ra>,
    ra_key: KeyPair,
}

impl Deployment {
    pub fn build(specs: &[DomainSpec], clock: Arc<dyn Clock>) -> Result<Self> {
        let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        let (registry, mut keys) = generate_keys(&names)?;
        let registry = Arc::new(registry);
        let mut take = |id: &AuthorityId| keys.remove(id).ok_or_else(|| Error::Fatal(format!("no key for {id}")));

        let mut domains = Vec::new();
        let ra_key = take(&AuthorityId::new(RA_ID))?;
        let mut ra = Ra::new(RA_ID, KeyPair::from_pkcs8(ra_key.signing_key().to_pkcs8())?, registry.clone(), clock.clone());
        for spec in specs {
            let mut lcfg = LtcaConfig::new(ltca_id(&spec.name));
            lcfg.skew_tolerance = spec.skew_tolerance;
            let ltca = Arc::new(Ltca::new(lcfg, take(&ltca_id(&spec.name))?, registry.clone(), clock.clone()));
            let mut pcfg = PcaConfig::new(pca_id(&spec.name), spec.policy);
            pcfg.skew_tolerance = spec.skew_tolerance;
            pcfg.puzzle = spec.puzzle;
            let pca = Arc::new(Pca::new(pcfg, take(&pca_id(&spec.name))?, registry.clone(), clock.clone())?);
            ra = ra.with_pca(pca_id(&spec.name), pca.clone()).with_ltca(ltca_id(&spec.name), ltca.clone());
            domains.push(Domain { name: spec.name.clone(), ltca, pca });
        }
        Ok(Deployment { registry, clock, domains, ra: Arc::new(ra), ra_key })
    }

    pub fn single(policy: PolicyConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        Self::build(&[DomainSpec::new("home", policy)], clock)
    }

    /// Domains "home" and "foreign" under the same policy.
    pub fn two_domain(policy: PolicyConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        Self::build(&[DomainSpec::new("home", policy), DomainSpec::new("foreign", policy)], clock)
    }

    pub fn domain(&self, name: &str) -> Result<&Domain> {
        self.domains.iter().find(|d| d.name == name).ok_or_else(|| Error::NotFound(format!("domain {name}")))
    }

    pub fn home(&self) -> &Domain {
        &self.domains[0]
    }

    /// Registers a new vehicle with `domain`'s LTCA.
    pub async fn vehicle(&self, subject: &str, domain: &str) -> Result<Vehicle> {
        let d = self.domain(domain)?;
        let policy = d.pca.config().policy;
        Vehicle::register(subject, policy, self.registry.clone(), self.clock.clone(), d.ltca.as_ref()).await
    }

    /// A second handle on the resolution authority, wired to every domain and
    /// then passed through `rewire` (e.g. to put a dishonest resolver in front
    /// of one authority).
    pub fn ra_with(&self, rewire: impl FnOnce(Ra) -> Ra) -> Result<Ra> {
        let mut ra = Ra::new(RA_ID, KeyPair::from_pkcs8(self.ra_key.signing_key().to_pkcs8())?, self.registry.clone(), self.clock.clone());
        for d in &self.domains {
            ra = ra.with_pca(d.pca.id().clone(), d.pca.clone()).with_ltca(d.ltca.id().clone(), d.ltca.clone());
        }
        Ok(rewire(ra))
    }

    pub fn ltca_exports(&self) -> Vec<LtcaLedgerExport> {
        self.domains.iter().map(|d| d.ltca.export_ledger()).collect()
    }

    pub fn pca_exports(&self) -> Vec<PcaLedgerExport> {
        self.domains.iter().map(|d| d.pca.export_ledger()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::model::PolicyKind;
    use crate::vehicle::plan_requests;

    #[tokio::test]
    async fn home_and_foreign_acquisition() {
        let clock = Arc::new(ManualClock::new(1000));
        let dep = Deployment::two_domain(PolicyConfig::new(PolicyKind::P2, 600, 60).unwrap(), clock.clone()).unwrap();
        let mut v = dep.vehicle("car-1", "home").await.unwrap();
        let plan = plan_requests(v.policy(), 1000, 300).unwrap();
        let home = dep.home();
        let got = v.acquire(&plan.entries[0], home.ltca.as_ref(), home.pca.as_ref()).await.unwrap();
        assert_eq!(got.pseudonyms.len(), 10);
        assert_eq!(v.current_pseudonym(1010).unwrap().pseudonym.serial, got.pseudonyms[0].serial);

        clock.set(1600);
        let f = dep.domain("foreign").unwrap();
        let entry = &plan_requests(v.policy(), 1600, 300).unwrap().entries[0];
        let got = v.acquire_foreign(entry, home.ltca.as_ref(), f.ltca.as_ref(), f.pca.as_ref()).await.unwrap();
        assert!(got.pseudonyms.iter().all(|p| p.issuer_id == f.pca.id().clone()));

        let res = dep.ra.resolve(&got.pseudonyms[0], false).await.unwrap();
        assert_eq!(res.ltc.subject_id, *v.subject_id());
        assert_eq!(res.trail.hops.len(), 3);
    }
}
