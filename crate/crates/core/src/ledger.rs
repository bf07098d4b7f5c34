//! Idealized append-only chain.
//!
//! Blocks are sealed on a fixed schedule (`height × block_interval`) with
//! unbounded capacity, no forks and no reorgs. A transaction submitted at
//! `t` reaches every node at `t + propagation_delay` and is sealed into the
//! first block whose commit time is at or after that instant. Empty blocks
//! are sealed too, so a fresh block hash is always available.

use std::collections::HashMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest, KeyPair, PublicKey, Signature};
use crate::scalar::Scalar;

pub type TxId = u64;

const TX_DOMAIN: &[u8] = b"epcert/tx/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxKind {
    CertificationRequest,
    Acceptance,
    ProofPublication,
    ChallengeDisclosure,
    Summarization,
}

impl TxKind {
    pub fn tag(self) -> u8 {
        match self {
            TxKind::CertificationRequest => 1,
            TxKind::Acceptance => 2,
            TxKind::ProofPublication => 3,
            TxKind::ChallengeDisclosure => 4,
            TxKind::Summarization => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TxKind::CertificationRequest => "request",
            TxKind::Acceptance => "acceptance",
            TxKind::ProofPublication => "proof",
            TxKind::ChallengeDisclosure => "disclosure",
            TxKind::Summarization => "summarization",
        }
    }
}

/// Bytes covered by a transaction signature.
pub fn signing_bytes(kind: TxKind, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(TX_DOMAIN.len() + 1 + payload.len());
    out.extend_from_slice(TX_DOMAIN);
    out.push(kind.tag());
    out.extend_from_slice(payload);
    out
}

/// A signed transaction that has not been handed to the ledger yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxDraft {
    pub kind: TxKind,
    pub payload: Vec<u8>,
    pub submitter: PublicKey,
    pub signature: Signature,
}

impl TxDraft {
    pub fn signed(kind: TxKind, payload: Vec<u8>, key: &KeyPair) -> Self {
        let signature = key.sign(&signing_bytes(kind, &payload));
        Self {
            kind,
            payload,
            submitter: key.public(),
            signature,
        }
    }

    pub fn verify(&self) -> bool {
        crypto::verify(
            self.submitter.as_bytes(),
            &signing_bytes(self.kind, &self.payload),
            &self.signature,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction<T> {
    pub id: TxId,
    pub kind: TxKind,
    pub payload: Vec<u8>,
    pub submitter: PublicKey,
    pub signature: Signature,
    pub submit_time: T,
}

impl<T> Transaction<T> {
    pub fn verify(&self) -> bool {
        crypto::verify(
            self.submitter.as_bytes(),
            &signing_bytes(self.kind, &self.payload),
            &self.signature,
        )
    }

    /// Canonical bytes hashed into the block.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 1 + 32 + 64 + self.payload.len());
        out.extend_from_slice(&self.id.to_be_bytes());
        out.push(self.kind.tag());
        out.extend_from_slice(self.submitter.as_bytes());
        out.extend_from_slice(self.signature.as_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub height: u64,
    pub hash: Digest,
    pub parent_hash: Digest,
    pub commit_time: T,
    pub transactions: Vec<Transaction<T>>,
}

impl<T> Block<T> {
    pub fn compute_hash(parent: &Digest, height: u64, transactions: &[Transaction<T>]) -> Digest {
        let mut parts: Vec<Vec<u8>> = Vec::with_capacity(transactions.len() + 2);
        parts.push(parent.as_bytes().to_vec());
        parts.push(height.to_be_bytes().to_vec());
        parts.extend(transactions.iter().map(Transaction::canonical_bytes));
        crypto::digest(&parts).expect("non-empty parts")
    }
}

/// Position of a committed transaction in the total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxLocation {
    pub height: u64,
    pub index: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("transaction signature does not verify under submitter {0:?}")]
    InvalidSignature(PublicKey),
    #[error("time regression: requested {requested}, ledger clock already at {clock}")]
    TimeRegression { requested: String, clock: String },
    #[error("transaction {0} is not committed")]
    Uncommitted(TxId),
    #[error("invalid ledger timing: {0}")]
    InvalidTiming(&'static str),
}

#[derive(Debug, Clone)]
struct Pending<T> {
    tx: Transaction<T>,
    eligible_at: T,
}

#[derive(Debug, Clone)]
pub struct LedgerState<T> {
    blocks: Vec<Block<T>>,
    pending: Vec<Pending<T>>,
    block_interval: T,
    propagation_delay: T,
    clock: Option<T>,
    next_tx_id: TxId,
    locations: HashMap<TxId, TxLocation>,
}

impl<T: Scalar> LedgerState<T> {
    pub fn new(block_interval: T, propagation_delay: T) -> Result<Self, LedgerError> {
        if !block_interval.is_well_formed() || block_interval <= T::zero() {
            return Err(LedgerError::InvalidTiming("block interval must be positive"));
        }
        if !propagation_delay.is_well_formed() || propagation_delay < T::zero() {
            return Err(LedgerError::InvalidTiming("propagation delay must be non-negative"));
        }
        Ok(Self {
            blocks: Vec::new(),
            pending: Vec::new(),
            block_interval,
            propagation_delay,
            clock: None,
            next_tx_id: 0,
            locations: HashMap::new(),
        })
    }

    /// Ledger whose block 0 (committed at time 0) holds `genesis` in order.
    pub fn with_genesis(
        block_interval: T,
        propagation_delay: T,
        genesis: impl IntoIterator<Item = TxDraft>,
    ) -> Result<Self, LedgerError> {
        let mut ledger = Self::new(block_interval, propagation_delay)?;
        for draft in genesis {
            if !draft.verify() {
                return Err(LedgerError::InvalidSignature(draft.submitter));
            }
            ledger.push_pending(draft, T::zero(), T::zero());
        }
        ledger.advance_to(T::zero())?;
        Ok(ledger)
    }

    pub fn block_interval(&self) -> T {
        self.block_interval
    }

    pub fn propagation_delay(&self) -> T {
        self.propagation_delay
    }

    pub fn clock(&self) -> Option<T> {
        self.clock
    }

    pub fn blocks(&self) -> &[Block<T>] {
        &self.blocks
    }

    pub fn block(&self, height: u64) -> Option<&Block<T>> {
        self.blocks.get(height as usize)
    }

    pub fn tip(&self) -> Option<&Block<T>> {
        self.blocks.last()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Commit time of the next block to be sealed.
    pub fn next_commit_time(&self) -> T {
        T::from_count(self.blocks.len() as u64) * self.block_interval
    }

    /// Hand a signed transaction to the network at time `now`.
    pub fn submit(&mut self, draft: TxDraft, now: T) -> Result<TxId, LedgerError> {
        let eligible = now + self.propagation_delay;
        self.enqueue(draft, now, eligible)
    }

    /// Transactions the block producers add by consensus rule: they skip
    /// gossip and land in the first block sealed after `now`.
    pub fn submit_consensus(&mut self, draft: TxDraft, now: T) -> Result<TxId, LedgerError> {
        self.enqueue(draft, now, now)
    }

    fn enqueue(&mut self, draft: TxDraft, now: T, eligible_at: T) -> Result<TxId, LedgerError> {
        if !draft.verify() {
            return Err(LedgerError::InvalidSignature(draft.submitter));
        }
        self.check_time(now)?;
        self.advance_to(now)?;
        Ok(self.push_pending(draft, now, eligible_at))
    }

    fn push_pending(&mut self, draft: TxDraft, now: T, eligible_at: T) -> TxId {
        let id = self.next_tx_id;
        self.next_tx_id += 1;
        self.pending.push(Pending {
            tx: Transaction {
                id,
                kind: draft.kind,
                payload: draft.payload,
                submitter: draft.submitter,
                signature: draft.signature,
                submit_time: now,
            },
            eligible_at,
        });
        id
    }

    fn check_time(&self, t: T) -> Result<(), LedgerError> {
        if !t.is_well_formed() {
            return Err(LedgerError::InvalidTiming("time must be a number"));
        }
        match self.clock {
            Some(clock) if t < clock => Err(LedgerError::TimeRegression {
                requested: t.to_string(),
                clock: clock.to_string(),
            }),
            _ => Ok(()),
        }
    }

    /// Seal every block with `commit_time ≤ t`; returns the new blocks.
    pub fn advance_to(&mut self, t: T) -> Result<&[Block<T>], LedgerError> {
        self.check_time(t)?;
        let first_new = self.blocks.len();
        while self.next_commit_time() <= t {
            self.seal_next();
        }
        self.clock = Some(t);
        Ok(&self.blocks[first_new..])
    }

    fn seal_next(&mut self) {
        let height = self.blocks.len() as u64;
        let commit_time = self.next_commit_time();
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|p| p.eligible_at <= commit_time);
        self.pending = waiting;
        let transactions: Vec<_> = ready.into_iter().map(|p| p.tx).collect();
        let parent_hash = self.blocks.last().map_or(Digest::ZERO, |b| b.hash);
        let hash = Block::compute_hash(&parent_hash, height, &transactions);
        for (index, tx) in transactions.iter().enumerate() {
            self.locations.insert(tx.id, TxLocation { height, index });
        }
        self.blocks.push(Block {
            height,
            hash,
            parent_hash,
            commit_time,
            transactions,
        });
    }

    pub fn location(&self, id: TxId) -> Option<TxLocation> {
        self.locations.get(&id).copied()
    }

    pub fn transaction(&self, id: TxId) -> Option<&Transaction<T>> {
        let loc = self.location(id)?;
        Some(&self.blocks[loc.height as usize].transactions[loc.index])
    }

    pub fn block_of(&self, id: TxId) -> Option<&Block<T>> {
        self.location(id).map(|loc| &self.blocks[loc.height as usize])
    }

    /// Strict total order on committed transactions.
    pub fn happens_after(&self, a: TxId, b: TxId) -> Result<bool, LedgerError> {
        let la = self.location(a).ok_or(LedgerError::Uncommitted(a))?;
        let lb = self.location(b).ok_or(LedgerError::Uncommitted(b))?;
        Ok(la > lb)
    }

    /// Time spent waiting for a block once the transaction had propagated.
    pub fn wait_of(&self, id: TxId) -> Option<T> {
        let tx = self.transaction(id)?;
        let block = self.block_of(id)?;
        Some(block.commit_time - tx.submit_time - self.propagation_delay)
    }

    /// Committed transactions in total order, with their location.
    pub fn committed(&self) -> impl Iterator<Item = (TxLocation, &Transaction<T>)> {
        self.blocks.iter().flat_map(|b| {
            b.transactions
                .iter()
                .enumerate()
                .map(move |(index, tx)| (TxLocation { height: b.height, index }, tx))
        })
    }

    /// Committed transactions in blocks at or above `height`.
    pub fn committed_from(&self, height: u64) -> impl Iterator<Item = (TxLocation, &Transaction<T>)> {
        self.blocks
            .iter()
            .skip(height as usize)
            .flat_map(|b| {
                b.transactions
                    .iter()
                    .enumerate()
                    .map(move |(index, tx)| (TxLocation { height: b.height, index }, tx))
            })
    }

    /// Recompute every block hash and parent link.
    pub fn verify_chain(&self) -> bool {
        let mut parent = Digest::ZERO;
        for (h, block) in self.blocks.iter().enumerate() {
            let expected_time = T::from_count(h as u64) * self.block_interval;
            if block.height != h as u64
                || block.parent_hash != parent
                || block.commit_time != expected_time
                || block.hash != Block::compute_hash(&parent, block.height, &block.transactions)
                || !block.transactions.iter().all(Transaction::verify)
            {
                return false;
            }
            parent = block.hash;
        }
        true
    }

    /// One CSV record per committed transaction.
    pub fn write_dump<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["height", "index", "commit_time", "tx_id", "kind", "submitter", "payload"])?;
        for (loc, tx) in self.committed() {
            let block = &self.blocks[loc.height as usize];
            w.write_record([
                loc.height.to_string(),
                loc.index.to_string(),
                block.commit_time.to_string(),
                tx.id.to_string(),
                tx.kind.name().to_string(),
                tx.submitter.to_hex(),
                crypto::to_hex(&tx.payload),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
