//! Stateless L-stage round-trip puzzle.
//!
//! A refused request receives the first token of a chain keyed with a
//! server secret and bound to the digest of the exact request bytes. Each
//! further stage costs one round trip: presenting token `i` yields token
//! `i + 1`. The request is admitted once it carries token `L`. The server
//! keeps no per-client state; checking stage `i` recomputes `i` HMACs.

use ring::hmac;
use ring::rand::SystemRandom;
use serde::{Deserialize, Serialize};

use crate::clock::wall_ms;
use crate::crypto::Digest;
use crate::error::{Error, Result};
use crate::model::{PuzzleChallenge, PuzzleSolution, PuzzleStep};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PuzzleMode {
    Off,
    Always,
    /// Active while at least this many requests are in flight.
    OnLoad(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuzzleConfig {
    pub mode: PuzzleMode,
    pub difficulty: u8,
    /// Lifetime of a challenge, wall-clock milliseconds.
    pub max_age_ms: u64,
}

impl Default for PuzzleConfig {
    fn default() -> Self {
        PuzzleConfig { mode: PuzzleMode::Off, difficulty: 5, max_age_ms: 30_000 }
    }
}

impl PuzzleConfig {
    pub fn always(difficulty: u8) -> Self {
        PuzzleConfig { mode: PuzzleMode::Always, difficulty, ..Default::default() }
    }
}

pub struct PuzzleGate {
    cfg: PuzzleConfig,
    key: hmac::Key,
}

impl std::fmt::Debug for PuzzleGate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PuzzleGate").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl PuzzleGate {
    pub fn new(cfg: PuzzleConfig) -> Result<Self> {
        if cfg.difficulty == 0 {
            return Err(Error::InvalidArgument("puzzle difficulty must be at least 1".into()));
        }
        let key = hmac::Key::generate(hmac::HMAC_SHA256, &SystemRandom::new())
            .map_err(|_| Error::Fatal("entropy source failed".into()))?;
        Ok(PuzzleGate { cfg, key })
    }

    pub fn config(&self) -> &PuzzleConfig {
        &self.cfg
    }

    pub fn active(&self, in_flight: usize) -> bool {
        match self.cfg.mode {
            PuzzleMode::Off => false,
            PuzzleMode::Always => true,
            PuzzleMode::OnLoad(threshold) => in_flight >= threshold,
        }
    }

    fn stage_message(stage: u8, prev: &[u8], bound_to: &Digest) -> Vec<u8> {
        let mut m = Vec::with_capacity(1 + prev.len() + 32);
        m.push(stage);
        m.extend_from_slice(prev);
        m.extend_from_slice(bound_to.as_bytes());
        m
    }

    fn tag(&self, msg: &[u8]) -> Digest {
        let tag = hmac::sign(&self.key, msg);
        Digest(tag.as_ref().try_into().expect("HMAC-SHA256 output is 32 bytes"))
    }

    /// Token of stage `stage` (1-based).
    fn token(&self, bound_to: &Digest, issued_at: u64, stage: u8) -> Digest {
        let mut t = self.tag(&Self::stage_message(1, &issued_at.to_be_bytes(), bound_to));
        for i in 2..=stage {
            t = self.tag(&Self::stage_message(i, t.as_bytes(), bound_to));
        }
        t
    }

    pub fn challenge(&self, bound_to: Digest) -> PuzzleChallenge {
        let issued_at = wall_ms();
        PuzzleChallenge {
            difficulty: self.cfg.difficulty,
            bound_to,
            issued_at,
            stage_tokens: vec![self.token(&bound_to, issued_at, 1)],
        }
    }

    fn restart(&self, bound_to: Digest, why: &str) -> Error {
        log::trace!("puzzle restart: {why}");
        Error::PuzzleRequired(Box::new(self.challenge(bound_to)))
    }

    fn expired(&self, issued_at: u64) -> bool {
        let now = wall_ms();
        issued_at > now.saturating_add(1_000) || now.saturating_sub(issued_at) > self.cfg.max_age_ms
    }

    pub fn step(&self, step: &PuzzleStep) -> Result<PuzzleStep> {
        if step.stage == 0 || step.stage >= self.cfg.difficulty {
            return Err(self.restart(step.bound_to, "stage out of range"));
        }
        if self.expired(step.issued_at) {
            return Err(self.restart(step.bound_to, "challenge expired"));
        }
        let expected = self.token(&step.bound_to, step.issued_at, step.stage);
        if expected != step.token {
            return Err(self.restart(step.bound_to, "token does not match stage"));
        }
        let next = self.tag(&Self::stage_message(step.stage + 1, expected.as_bytes(), &step.bound_to));
        Ok(PuzzleStep { bound_to: step.bound_to, issued_at: step.issued_at, stage: step.stage + 1, token: next })
    }

    /// Admits a request whose bytes hash to `bound_to` if it carries a
    /// completed tour; otherwise answers with a fresh challenge.
    pub fn admit(&self, bound_to: Digest, solution: Option<&PuzzleSolution>) -> Result<()> {
        let Some(sol) = solution else {
            return Err(self.restart(bound_to, "no solution"));
        };
        if self.expired(sol.issued_at) {
            return Err(self.restart(bound_to, "solution expired"));
        }
        let last = self.cfg.difficulty;
        let msg = if last == 1 {
            Self::stage_message(1, &sol.issued_at.to_be_bytes(), &bound_to)
        } else {
            Self::stage_message(last, self.token(&bound_to, sol.issued_at, last - 1).as_bytes(), &bound_to)
        };
        hmac::verify(&self.key, &msg, sol.token.as_bytes()).map_err(|_| self.restart(bound_to, "bad final token"))
    }
}

/// Client side: walks the tour for `challenge` using `step`, returning the
/// solution and the number of step round trips made.
pub async fn solve<F, Fut>(challenge: &PuzzleChallenge, mut step: F) -> Result<(PuzzleSolution, usize)>
where
    F: FnMut(PuzzleStep) -> Fut,
    Fut: std::future::Future<Output = Result<PuzzleStep>>,
{
    let first = challenge
        .stage_tokens
        .first()
        .ok_or_else(|| Error::ResponseIntegrity("challenge carries no token".into()))?;
    let mut cur = PuzzleStep { bound_to: challenge.bound_to, issued_at: challenge.issued_at, stage: 1, token: *first };
    let mut trips = 0;
    while cur.stage < challenge.difficulty {
        let next = step(cur.clone()).await?;
        trips += 1;
        if next.stage != cur.stage + 1 || next.bound_to != cur.bound_to {
            return Err(Error::ResponseIntegrity("puzzle step out of sequence".into()));
        }
        cur = next;
    }
    Ok((PuzzleSolution { issued_at: cur.issued_at, token: cur.token }, trips))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(gate: &PuzzleGate, bound: Digest) -> (PuzzleSolution, usize) {
        let challenge = match gate.admit(bound, None) {
            Err(Error::PuzzleRequired(c)) => *c,
            other => panic!("unexpected {other:?}"),
        };
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        rt.block_on(solve(&challenge, |s| std::future::ready(gate.step(&s)))).unwrap()
    }

    #[test]
    fn honest_client_takes_l_minus_one_steps() {
        let gate = PuzzleGate::new(PuzzleConfig::always(5)).unwrap();
        let bound = Digest::of(b"request");
        let (sol, trips) = run(&gate, bound);
        assert_eq!(trips, 4);
        gate.admit(bound, Some(&sol)).unwrap();
    }

    #[test]
    fn solution_bound_to_request() {
        let gate = PuzzleGate::new(PuzzleConfig::always(5)).unwrap();
        let (sol, _) = run(&gate, Digest::of(b"a"));
        assert!(matches!(gate.admit(Digest::of(b"b"), Some(&sol)), Err(Error::PuzzleRequired(_))));
    }

    #[test]
    fn out_of_order_restarts() {
        let gate = PuzzleGate::new(PuzzleConfig::always(5)).unwrap();
        let bound = Digest::of(b"x");
        let c = gate.challenge(bound);
        let skip = PuzzleStep { bound_to: bound, issued_at: c.issued_at, stage: 2, token: c.stage_tokens[0] };
        assert!(matches!(gate.step(&skip), Err(Error::PuzzleRequired(_))));
        let early = PuzzleSolution { issued_at: c.issued_at, token: c.stage_tokens[0] };
        assert!(matches!(gate.admit(bound, Some(&early)), Err(Error::PuzzleRequired(_))));
        let final_stage = PuzzleStep { bound_to: bound, issued_at: c.issued_at, stage: 5, token: c.stage_tokens[0] };
        assert!(matches!(gate.step(&final_stage), Err(Error::PuzzleRequired(_))));
    }

    #[test]
    fn difficulty_one_is_single_trip() {
        let gate = PuzzleGate::new(PuzzleConfig::always(1)).unwrap();
        let bound = Digest::of(b"y");
        let (sol, trips) = run(&gate, bound);
        assert_eq!(trips, 0);
        gate.admit(bound, Some(&sol)).unwrap();
    }

    #[test]
    fn load_trigger() {
        let gate = PuzzleGate::new(PuzzleConfig { mode: PuzzleMode::OnLoad(3), ..Default::default() }).unwrap();
        assert!(!gate.active(2));
        assert!(gate.active(3));
    }
}
