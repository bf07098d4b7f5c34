//! Committee sortition seeded by the request and the hash of its block.
//!
//! Slot draw `i` (starting at 1) picks `digest(i ‖ R ‖ b) mod N`. Under
//! [`SelectionRule::WithReplacement`] the first `k` draws are the committee
//! and a subject may hold several slots. Under [`SelectionRule::Distinct`]
//! draws that repeat an already chosen subject are skipped until `k`
//! distinct subjects are found, which makes the committee a uniformly random
//! `k`-subset of the population.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest};
use crate::ledger::TxId;

pub type SubjectId = u64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    #[default]
    Distinct,
    WithReplacement,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitteeError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("committee size must be at least 1")]
    EmptyCommittee,
    #[error("cannot draw {size} distinct members from a population of {population}")]
    TooLarge { size: u64, population: u64 },
}

/// One sortition draw: `digest(i ‖ R ‖ b) mod N`.
pub fn draw(slot: u64, request: &[u8], block_hash: &Digest, population: u64) -> Result<SubjectId, CommitteeError> {
    let d = crypto::digest(&[&slot.to_be_bytes()[..], request, block_hash.as_bytes()])
        .expect("three parts");
    crypto::index_from_digest(&d, population).map_err(|_| CommitteeError::EmptyPopulation)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committee {
    pub request_id: Option<TxId>,
    pub rule: SelectionRule,
    pub population: u64,
    /// `members[j]` holds slot `j + 1`.
    members: Vec<SubjectId>,
    /// Draw index that produced each member.
    draws: Vec<u64>,
}

impl Committee {
    pub fn members(&self) -> &[SubjectId] {
        &self.members
    }

    pub fn draws(&self) -> &[u64] {
        &self.draws
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn distinct_members(&self) -> BTreeSet<SubjectId> {
        self.members.iter().copied().collect()
    }

    /// Slots held by a subject beyond its first one, summed over the committee.
    pub fn duplicate_count(&self) -> usize {
        self.members.len() - self.distinct_members().len()
    }

    /// Member at a 1-based slot.
    pub fn member_at(&self, slot: usize) -> Option<SubjectId> {
        slot.checked_sub(1).and_then(|j| self.members.get(j)).copied()
    }

    /// 1-based slots held by `subject`.
    pub fn slots_of(&self, subject: SubjectId) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == subject)
            .map(|(j, _)| j + 1)
            .collect()
    }

    pub fn contains(&self, subject: SubjectId) -> bool {
        self.members.contains(&subject)
    }

    pub fn with_request(mut self, id: TxId) -> Self {
        self.request_id = Some(id);
        self
    }
}

fn check(population: u64, size: u64, rule: SelectionRule) -> Result<(), CommitteeError> {
    if population == 0 {
        return Err(CommitteeError::EmptyPopulation);
    }
    if size == 0 {
        return Err(CommitteeError::EmptyCommittee);
    }
    if rule == SelectionRule::Distinct && size > population {
        return Err(CommitteeError::TooLarge { size, population });
    }
    Ok(())
}

pub fn select(
    request: &[u8],
    block_hash: &Digest,
    population: u64,
    size: u64,
    rule: SelectionRule,
) -> Result<Committee, CommitteeError> {
    check(population, size, rule)?;
    let mut members = Vec::with_capacity(size as usize);
    let mut draws = Vec::with_capacity(size as usize);
    let mut seen = BTreeSet::new();
    let mut slot = 1u64;
    while (members.len() as u64) < size {
        let id = draw(slot, request, block_hash, population)?;
        if rule == SelectionRule::WithReplacement || seen.insert(id) {
            members.push(id);
            draws.push(slot);
        }
        slot += 1;
    }
    Ok(Committee {
        request_id: None,
        rule,
        population,
        members,
        draws,
    })
}

/// Membership test a subject runs on its own: returns the 1-based slots it
/// holds (empty when not selected).
pub fn is_member(
    request: &[u8],
    block_hash: &Digest,
    population: u64,
    size: u64,
    rule: SelectionRule,
    subject: SubjectId,
) -> Result<(bool, Vec<usize>), CommitteeError> {
    check(population, size, rule)?;
    let slots: Vec<usize> = match rule {
        SelectionRule::WithReplacement => (1..=size)
            .map(|i| draw(i, request, block_hash, population))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .enumerate()
            .filter(|(_, id)| *id == subject)
            .map(|(j, _)| j + 1)
            .collect(),
        SelectionRule::Distinct => {
            if subject >= population {
                return Ok((false, Vec::new()));
            }
            let mut seen = BTreeSet::new();
            let mut filled = 0usize;
            let mut slot = 1u64;
            let mut found = Vec::new();
            while (filled as u64) < size {
                let id = draw(slot, request, block_hash, population)?;
                slot += 1;
                if seen.insert(id) {
                    filled += 1;
                    if id == subject {
                        found.push(filled);
                        break;
                    }
                }
            }
            found
        }
    };
    Ok((!slots.is_empty(), slots))
}

/// Probability that `size` draws with replacement from `population`
/// contain at least one repeat: `1 − N!/(N^k (N−k)!)`.
pub fn duplicate_probability(population: u64, size: u64) -> f64 {
    if size > population {
        return 1.0;
    }
    let n = population as f64;
    let all_distinct: f64 = (0..size).map(|i| (n - i as f64) / n).product();
    1.0 - all_distinct
}
