use serde::Serialize;

use super::{Arm, Rewards};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AtomCounts {
    pub successes: u64,
    pub failures: u64,
}

impl AtomCounts {
    pub fn total(&self) -> u64 {
        self.successes + self.failures
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub arm: Arm,
    pub rewards: Rewards,
}

/// Observed data: per-atom counts plus, optionally, the ordered round log.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    counts: Vec<AtomCounts>,
    log: Option<Vec<RoundRecord>>,
}

impl History {
    pub fn new(d: usize) -> Self {
        Self {
            counts: vec![AtomCounts::default(); d],
            log: Some(Vec::new()),
        }
    }

    /// A history that keeps only aggregate counts.
    pub fn counts_only(d: usize) -> Self {
        Self {
            counts: vec![AtomCounts::default(); d],
            log: None,
        }
    }

    pub fn record(&mut self, round: u64, arm: Arm, rewards: Rewards) {
        debug_assert!(Arm::from_bits(rewards.bits()).is_subset_of(arm));
        for a in arm.atoms() {
            if rewards.get(a) {
                self.counts[a].successes += 1;
            } else {
                self.counts[a].failures += 1;
            }
        }
        if let Some(log) = &mut self.log {
            log.push(RoundRecord {
                round,
                arm,
                rewards,
            });
        }
    }

    /// Add exogenous samples for one atom (not tied to any round).
    pub fn add_samples(&mut self, atom: usize, successes: u64, failures: u64) {
        self.counts[atom].successes += successes;
        self.counts[atom].failures += failures;
    }

    pub fn counts(&self) -> &[AtomCounts] {
        &self.counts
    }

    pub fn log(&self) -> Option<&[RoundRecord]> {
        self.log.as_deref()
    }

    pub fn samples(&self, atom: usize) -> u64 {
        self.counts[atom].total()
    }
}
