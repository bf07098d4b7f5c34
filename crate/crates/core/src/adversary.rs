//! Threat model: an adversary controlling `m` certified subjects, plus the
//! channel capabilities it may or may not have.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::committee::SubjectId;
use crate::ledger::TxId;
use crate::protocol::messages::Protocol;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    None,
    /// P3: corrupted members accept a proof delivered over a side channel.
    MiscertifyAccept,
    /// P4: corrupted members leak Q_i to the adversary and disclose on cue.
    MiscertifyDisclose,
    /// Corrupted members never respond to an honest request.
    DosSilence,
    /// Send the proof with a forged sender address E.
    Spoof,
    /// Read the partial challenges delivered to E.
    Eavesdrop,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::MiscertifyAccept => "miscertify_accept",
            Strategy::MiscertifyDisclose => "miscertify_disclose",
            Strategy::DosSilence => "dos_silence",
            Strategy::Spoof => "spoof",
            Strategy::Eavesdrop => "eavesdrop",
        }
    }

    /// Strategies where the adversary files its own request for a victim's
    /// endpoint, as opposed to attacking an honest request.
    pub fn is_miscertification(self) -> bool {
        matches!(
            self,
            Strategy::MiscertifyAccept | Strategy::MiscertifyDisclose | Strategy::Spoof | Strategy::Eavesdrop
        )
    }

    pub fn check_protocol(self, protocol: Protocol) -> Result<(), AdversaryError> {
        let ok = match self {
            Strategy::None => true,
            Strategy::MiscertifyAccept => protocol == Protocol::P3,
            Strategy::MiscertifyDisclose => protocol == Protocol::P4,
            Strategy::DosSilence => protocol.is_decentralized(),
            Strategy::Spoof => matches!(protocol, Protocol::P3 | Protocol::Basic2),
            Strategy::Eavesdrop => matches!(protocol, Protocol::P4 | Protocol::Basic1),
        };
        if ok {
            Ok(())
        } else {
            Err(AdversaryError::Incompatible {
                strategy: self.name(),
                protocol: protocol.name(),
            })
        }
    }
}

/// Which certified subjects the adversary controls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionRule {
    /// Ids `0..m`.
    First,
    /// A uniformly random `m`-subset drawn from the seed.
    Random(u64),
    /// Exactly these ids.
    Explicit(Vec<SubjectId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    /// m
    pub corrupted_count: u64,
    /// c, per subject and period
    pub cost_per_subject: f64,
    pub strategy: Strategy,
    pub target_request: Option<TxId>,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            corrupted_count: 0,
            cost_per_subject: 1.0,
            strategy: Strategy::None,
            target_request: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("cannot corrupt {requested} subjects out of {population}")]
    TooManyCorrupted { requested: u64, population: u64 },
    #[error("explicit corruption list names {listed} subjects but m = {requested}")]
    ExplicitCountMismatch { listed: usize, requested: u64 },
    #[error("subject {0} is not certified")]
    UnknownSubject(SubjectId),
    #[error("strategy {strategy} does not apply to protocol {protocol}")]
    Incompatible {
        strategy: &'static str,
        protocol: &'static str,
    },
}

/// Pick the `m` corrupted subjects without touching the registry.
pub fn choose_corrupted(population: u64, rule: &CorruptionRule, m: u64) -> Result<BTreeSet<SubjectId>, AdversaryError> {
    if m > population {
        return Err(AdversaryError::TooManyCorrupted {
            requested: m,
            population,
        });
    }
    match rule {
        CorruptionRule::First => Ok((0..m).collect()),
        CorruptionRule::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(index::sample(&mut rng, population as usize, m as usize)
                .into_iter()
                .map(|i| i as SubjectId)
                .collect())
        }
        CorruptionRule::Explicit(ids) => {
            let set: BTreeSet<_> = ids.iter().copied().collect();
            if set.len() as u64 != m {
                return Err(AdversaryError::ExplicitCountMismatch {
                    listed: set.len(),
                    requested: m,
                });
            }
            if let Some(bad) = set.iter().find(|id| **id >= population) {
                return Err(AdversaryError::UnknownSubject(*bad));
            }
            Ok(set)
        }
    }
}

/// Flag exactly `m` subjects as corrupted (clearing any previous flags).
pub fn corrupt(registry: &mut Registry, rule: &CorruptionRule, m: u64) -> Result<BTreeSet<SubjectId>, AdversaryError> {
    let chosen = choose_corrupted(registry.population(), rule, m)?;
    for id in 0..registry.population() {
        registry
            .set_corrupted(id, chosen.contains(&id))
            .expect("id below population");
    }
    Ok(chosen)
}

/// c · m · periods.
pub fn attack_cost(config: &AdversaryConfig, periods: u64) -> f64 {
    config.cost_per_subject * config.corrupted_count as f64 * periods as f64
}

/// What the adversary achieved in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub strategy: Strategy,
    /// Distinct corrupted subjects that ended up on the committee.
    pub corrupted_in_committee: usize,
    /// Miscertification: the forged binding got certified.
    /// DoS: the honest request did not.
    pub success: bool,
}
