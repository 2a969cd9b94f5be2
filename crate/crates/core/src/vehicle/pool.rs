use std::collections::VecDeque;

use crate::crypto::KeyPair;
use crate::error::Result;
use crate::model::SelfSignedKey;

/// Pseudonym key pairs generated ahead of time, each with its proof of
/// possession already computed.
#[derive(Debug, Default)]
pub struct KeyPool {
    keys: VecDeque<(KeyPair, SelfSignedKey)>,
}

impl KeyPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Tops the pool up to at least `n` keys.
    pub fn fill(&mut self, n: usize) -> Result<()> {
        while self.keys.len() < n {
            let key = KeyPair::generate()?;
            let proof = SelfSignedKey::create(&key)?;
            self.keys.push_back((key, proof));
        }
        Ok(())
    }

    /// Takes `n` keys, generating any shortfall on the spot.
    pub fn take(&mut self, n: usize) -> Result<Vec<(KeyPair, SelfSignedKey)>> {
        self.fill(n)?;
        Ok(self.keys.drain(..n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn take_refills() {
        let mut pool = KeyPool::new();
        pool.fill(2).unwrap();
        let keys = pool.take(3).unwrap();
        assert_eq!(keys.len(), 3);
        assert!(pool.is_empty());
        assert!(keys.iter().all(|(k, s)| s.verify() && &s.public_key == k.public_key()));
    }
}
