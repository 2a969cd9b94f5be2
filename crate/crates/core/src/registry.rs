//! Static endpoint and trust-root registry, loaded from TOML.
//!
//! ```toml
//! [[authority]]
//! id = "ltca.home"
//! role = "ltca"
//! domain = "home"
//! public_key = "04ab..."
//! endpoint = "http://127.0.0.1:7001"
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::error::{Error, Result};
use crate::model::AuthorityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ltca,
    Pca,
    Ra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityEntry {
    pub id: AuthorityId,
    pub role: Role,
    pub domain: String,
    pub public_key: PublicKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Registry {
    #[serde(rename = "authority", default)]
    authorities: Vec<AuthorityEntry>,
    #[serde(skip)]
    index: HashMap<AuthorityId, usize>,
}

impl Registry {
    pub fn new(authorities: Vec<AuthorityEntry>) -> Result<Self> {
        let mut reg = Registry { authorities, index: HashMap::new() };
        reg.reindex()?;
        Ok(reg)
    }

    fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        for (i, a) in self.authorities.iter().enumerate() {
            if self.index.insert(a.id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("authority {} listed twice", a.id)));
            }
        }
        Ok(())
    }

    pub fn add(&mut self, entry: AuthorityEntry) -> Result<()> {
        if self.index.contains_key(&entry.id) {
            return Err(Error::Conflict(format!("authority {} already registered", entry.id)));
        }
        self.index.insert(entry.id.clone(), self.authorities.len());
        self.authorities.push(entry);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut reg: Registry = toml::from_str(text).map_err(|e| Error::decode("registry", e.to_string()))?;
        reg.reindex()?;
        Ok(reg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("registry is always representable as TOML")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn get(&self, id: &AuthorityId) -> Option<&AuthorityEntry> {
        self.index.get(id).map(|&i| &self.authorities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &AuthorityEntry> {
        self.authorities.iter()
    }

    pub fn by_role(&self, role: Role) -> impl Iterator<Item = &AuthorityEntry> {
        self.authorities.iter().filter(move |a| a.role == role)
    }

    /// Public key of `id`, which must hold `role`.
    pub fn key_for(&self, id: &AuthorityId, role: Role) -> Result<&PublicKey> {
        match self.get(id) {
            Some(a) if a.role == role => Ok(&a.public_key),
            Some(a) => Err(Error::Authentication(format!("{id} is a {:?}, not a {role:?}", a.role))),
            None => Err(Error::Authentication(format!("{id} is not a trusted authority"))),
        }
    }

    /// Whether some RA key verifies `check`.
    pub fn any_ra(&self, check: impl Fn(&PublicKey) -> bool) -> bool {
        self.by_role(Role::Ra).any(|a| check(&a.public_key))
    }
}
