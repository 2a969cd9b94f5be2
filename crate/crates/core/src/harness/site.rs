//! On-disk deployment directory used by the CLI:
//!
//! ```text
//! <dir>/site.toml        policy and puzzle settings
//! <dir>/registry.toml    trust roots and endpoints
//! <dir>/keys/<id>.key    hex PKCS#8 private keys
//! <dir>/journal/<id>.log append-only service journals
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::deploy::{generate_keys, ltca_id, pca_id};
use crate::clock::Clock;
use crate::crypto::KeyPair;
use crate::error::{Error, Result};
use crate::ltca::{Ltca, LtcaConfig};
use crate::model::{AuthorityId, PolicyConfig};
use crate::pca::puzzle::PuzzleConfig;
use crate::pca::{Pca, PcaConfig};
use crate::registry::{Registry, Role};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteConfig {
    pub policy: PolicyConfig,
    pub puzzle: PuzzleConfig,
    pub domains: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Site {
    dir: PathBuf,
    pub config: SiteConfig,
    pub registry: Arc<Registry>,
}

fn io_ctx(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

impl Site {
    /// Generates keys and a registry with loopback endpoints from `base_port`
    /// (LTCA and PCA of each domain on consecutive ports).
    pub fn init(dir: impl AsRef<Path>, config: SiteConfig, base_port: u16) -> Result<Site> {
        let dir = dir.as_ref().to_path_buf();
        config.policy.validate()?;
        let names: Vec<&str> = config.domains.iter().map(String::as_str).collect();
        let (mut registry, keys) = generate_keys(&names)?;
        let mut entries: Vec<_> = registry.iter().cloned().collect();
        let mut port = base_port;
        for e in &mut entries {
            if e.role != Role::Ra {
                e.endpoint = Some(format!("http://127.0.0.1:{port}"));
                port += 1;
            }
        }
        registry = Registry::new(entries)?;
        std::fs::create_dir_all(dir.join("keys")).map_err(|e| io_ctx(&dir, e))?;
        std::fs::create_dir_all(dir.join("journal")).map_err(|e| io_ctx(&dir, e))?;
        for (id, key) in &keys {
            let path = dir.join("keys").join(format!("{id}.key"));
            std::fs::write(&path, hex::encode(key.signing_key().to_pkcs8())).map_err(|e| io_ctx(&path, e))?;
        }
        registry.save(dir.join("registry.toml"))?;
        let text = toml::to_string(&config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let path = dir.join("site.toml");
        std::fs::write(&path, text).map_err(|e| io_ctx(&path, e))?;
        Ok(Site { dir, config, registry: Arc::new(registry) })
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Site> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join("site.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| io_ctx(&path, e))?;
        let config: SiteConfig = toml::from_str(&text).map_err(|e| Error::decode(path.display().to_string(), e.to_string()))?;
        let registry = Registry::load(dir.join("registry.toml"))?;
        Ok(Site { dir, config, registry: Arc::new(registry) })
    }

    pub fn key(&self, id: &AuthorityId) -> Result<KeyPair> {
        let path = self.dir.join("keys").join(format!("{id}.key"));
        let text = std::fs::read_to_string(&path).map_err(|e| io_ctx(&path, e))?;
        let raw = hex::decode(text.trim()).map_err(|e| Error::decode(path.display().to_string(), e.to_string()))?;
        KeyPair::from_pkcs8(&raw)
    }

    pub fn journal(&self, id: &AuthorityId) -> PathBuf {
        self.dir.join("journal").join(format!("{id}.log"))
    }

    pub fn endpoint(&self, id: &AuthorityId) -> Result<String> {
        self.registry
            .get(id)
            .and_then(|a| a.endpoint.clone())
            .ok_or_else(|| Error::NotFound(format!("no endpoint for {id}")))
    }

    pub fn open_ltca(&self, domain: &str, clock: Arc<dyn Clock>) -> Result<Ltca> {
        let id = ltca_id(domain);
        Ltca::open(LtcaConfig::new(id.clone()), self.key(&id)?, self.registry.clone(), clock, self.journal(&id))
    }

    pub fn open_pca(&self, domain: &str, clock: Arc<dyn Clock>) -> Result<Pca> {
        let id = pca_id(domain);
        let mut cfg = PcaConfig::new(id.clone(), self.config.policy);
        cfg.puzzle = self.config.puzzle;
        Pca::open(cfg, self.key(&id)?, self.registry.clone(), clock, self.journal(&id))
    }
}
