//! Certified subjects, summarization, and certificate verification.
//!
//! The registry is derived from the chain: replaying the summarization
//! transactions of a ledger rebuilds it exactly (apart from the
//! simulation-only `corrupted` flag). Verification procedures read only
//! public chain data.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::EndpointAddress;
use crate::committee::{self, Committee, CommitteeError, SelectionRule, SubjectId};
use crate::crypto::{KeyPair, PublicKey};
use crate::ledger::{Block, LedgerError, LedgerState, TxDraft, TxId, TxKind, TxLocation};
use crate::protocol::messages::{
    challenge_for, CertificationRequest, Disclosure, Origin, P3Envelope, P4Proof, Protocol, Summarization,
};
use crate::scalar::Scalar;

/// Chain-wide consensus parameters of the certification protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// k
    pub committee_size: u64,
    /// k̄
    pub threshold: u64,
    #[serde(default)]
    pub rule: SelectionRule,
}

impl ProtocolParams {
    pub fn new(committee_size: u64, threshold: u64) -> Self {
        Self {
            committee_size,
            threshold,
            rule: SelectionRule::default(),
        }
    }

    pub fn with_rule(mut self, rule: SelectionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        if self.threshold == 0 || self.committee_size < self.threshold {
            return Err(RegistryError::BadParams {
                committee_size: self.committee_size,
                threshold: self.threshold,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifiedSubject {
    pub id: SubjectId,
    pub public_key: PublicKey,
    pub endpoint: EndpointAddress,
    /// Height of the block holding the summarization.
    pub certified_at: u64,
    pub origin: Origin,
    pub request_tx: Option<TxId>,
    /// Simulation-only adversary flag; not part of chain state.
    pub corrupted: bool,
    /// Cleared when the certificate lapses (for example an unpaid fee period).
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: SubjectId,
    pub request: CertificationRequest,
    pub request_tx: TxId,
    pub protocol: Protocol,
    /// P4: the proof publication. P3: the acceptance that reached k̄.
    pub proof_tx: TxId,
    /// Counted acceptances (P3) or disclosures (P4).
    pub supporting_txs: Vec<TxId>,
    pub summarization_tx: TxId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum P3Verdict {
    Certified {
        count: usize,
        supporting: Vec<TxId>,
        completing_tx: TxId,
    },
    NotCertified {
        count: usize,
    },
}

impl P3Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, P3Verdict::Certified { .. })
    }

    pub fn count(&self) -> usize {
        match self {
            P3Verdict::Certified { count, .. } | P3Verdict::NotCertified { count } => *count,
        }
    }
}

/// First failing check of the P4 verification procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P4Step {
    /// R is missing, malformed or not signed by its own key.
    Request,
    /// No proof publication refers to R.
    ProofMissing,
    /// P does not verify under p.
    ProofSignature,
    /// P covers fewer than k̄ committee members.
    Challenges,
    /// Fewer than k̄ matching disclosures.
    Disclosures,
    /// Matching disclosures exist but some precede P in the history.
    DisclosureOrder,
}

impl P4Step {
    pub fn name(self) -> &'static str {
        match self {
            P4Step::Request => "request",
            P4Step::ProofMissing => "proof missing",
            P4Step::ProofSignature => "proof signature",
            P4Step::Challenges => "challenges",
            P4Step::Disclosures => "disclosures",
            P4Step::DisclosureOrder => "disclosure order",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum P4Verdict {
    Certified {
        count: usize,
        proof_tx: TxId,
        supporting: Vec<TxId>,
        completing_tx: TxId,
    },
    NotCertified {
        step: P4Step,
        count: usize,
    },
}

impl P4Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, P4Verdict::Certified { .. })
    }

    pub fn count(&self) -> usize {
        match self {
            P4Verdict::Certified { count, .. } | P4Verdict::NotCertified { count, .. } => *count,
        }
    }

    pub fn failing_step(&self) -> Option<P4Step> {
        match self {
            P4Verdict::NotCertified { step, .. } => Some(*step),
            P4Verdict::Certified { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("transaction {0} is not on chain")]
    RequestNotOnChain(TxId),
    #[error("transaction {0} is not a well-formed certification request")]
    NotARequest(TxId),
    #[error("request {0} is not signed by the key it certifies")]
    RequestNotSignedBySubject(TxId),
    #[error("request {0} is already certified or pending summarization")]
    DuplicateRequest(TxId),
    #[error("binding is already held by active subject {0}")]
    DuplicateBinding(SubjectId),
    #[error("insufficient evidence: {count} of {needed} required")]
    InsufficientEvidence { count: usize, needed: u64 },
    #[error("P4 verification failed at step '{}'", .0.name())]
    VerificationFailed(P4Step),
    #[error("{0} is not a decentralized protocol")]
    UnsupportedProtocol(&'static str),
    #[error("invalid parameters: threshold {threshold} with committee size {committee_size}")]
    BadParams { committee_size: u64, threshold: u64 },
    #[error("unknown subject {0}")]
    UnknownSubject(SubjectId),
    #[error(transparent)]
    Committee(#[from] CommitteeError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone)]
pub struct Registry {
    params: ProtocolParams,
    authority: PublicKey,
    subjects: Vec<CertifiedSubject>,
    by_key: HashMap<PublicKey, SubjectId>,
    summarized: HashMap<TxId, SubjectId>,
    pending: Vec<Certificate>,
    certificates: Vec<Certificate>,
}

/// Committed request data needed by both verification procedures.
struct RequestView<'a> {
    bytes: &'a [u8],
    request: CertificationRequest,
    location: TxLocation,
    committee: Committee,
}

impl Registry {
    pub fn new(params: ProtocolParams, authority: PublicKey) -> Result<Self, RegistryError> {
        params.validate()?;
        Ok(Self {
            params,
            authority,
            subjects: Vec::new(),
            by_key: HashMap::new(),
            summarized: HashMap::new(),
            pending: Vec::new(),
            certificates: Vec::new(),
        })
    }

    /// Rebuild from every summarization on chain.
    pub fn from_chain<T: Scalar>(
        ledger: &LedgerState<T>,
        params: ProtocolParams,
        authority: PublicKey,
    ) -> Result<Self, RegistryError> {
        let mut registry = Self::new(params, authority)?;
        for block in ledger.blocks() {
            registry.apply_block(block);
        }
        Ok(registry)
    }

    /// Genesis summarizations for an initial population, ids in order.
    pub fn bootstrap_drafts(
        authority: &KeyPair,
        subjects: impl IntoIterator<Item = (PublicKey, EndpointAddress)>,
    ) -> Vec<TxDraft> {
        subjects
            .into_iter()
            .enumerate()
            .map(|(id, (public_key, endpoint))| {
                let s = Summarization {
                    subject: id as SubjectId,
                    request_tx: None,
                    origin: Origin::Bootstrap,
                    request: CertificationRequest::new(public_key, endpoint),
                };
                TxDraft::signed(TxKind::Summarization, s.encode(), authority)
            })
            .collect()
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn authority(&self) -> PublicKey {
        self.authority
    }

    /// Current N.
    pub fn population(&self) -> u64 {
        self.subjects.len() as u64
    }

    /// N as frozen for a request committed at `height`.
    pub fn population_at(&self, height: u64) -> u64 {
        self.subjects.partition_point(|s| s.certified_at <= height) as u64
    }

    pub fn subjects(&self) -> &[CertifiedSubject] {
        &self.subjects
    }

    pub fn subject(&self, id: SubjectId) -> Option<&CertifiedSubject> {
        self.subjects.get(id as usize)
    }

    pub fn subject_by_key(&self, key: &PublicKey) -> Option<&CertifiedSubject> {
        self.by_key.get(key).and_then(|id| self.subject(*id))
    }

    pub fn certificates(&self) -> &[Certificate] {
        &self.certificates
    }

    pub fn pending(&self) -> &[Certificate] {
        &self.pending
    }

    pub fn is_summarized(&self, request: TxId) -> bool {
        self.summarized.contains_key(&request)
    }

    pub fn is_pending(&self, request: TxId) -> bool {
        self.pending.iter().any(|c| c.request_tx == request)
    }

    pub fn set_corrupted(&mut self, id: SubjectId, corrupted: bool) -> Result<(), RegistryError> {
        let s = self.subjects.get_mut(id as usize).ok_or(RegistryError::UnknownSubject(id))?;
        s.corrupted = corrupted;
        Ok(())
    }

    pub fn corrupted_ids(&self) -> BTreeSet<SubjectId> {
        self.subjects.iter().filter(|s| s.corrupted).map(|s| s.id).collect()
    }

    pub fn expire(&mut self, id: SubjectId) -> Result<(), RegistryError> {
        let s = self.subjects.get_mut(id as usize).ok_or(RegistryError::UnknownSubject(id))?;
        s.active = false;
        Ok(())
    }

    /// Ingest the summarizations of a freshly sealed block.
    pub fn apply_block<T>(&mut self, block: &Block<T>) {
        for tx in &block.transactions {
            if tx.kind != TxKind::Summarization || tx.submitter != self.authority {
                continue;
            }
            let Some(s) = Summarization::decode(&tx.payload) else {
                continue;
            };
            // ids must stay gap-free
            if s.subject != self.population() {
                continue;
            }
            self.by_key.entry(s.request.public_key).or_insert(s.subject);
            if let Some(request_tx) = s.request_tx {
                self.summarized.insert(request_tx, s.subject);
            }
            self.subjects.push(CertifiedSubject {
                id: s.subject,
                public_key: s.request.public_key,
                endpoint: s.request.endpoint,
                certified_at: block.height,
                origin: s.origin,
                request_tx: s.request_tx,
                corrupted: false,
                active: true,
            });
            if let Some(pos) = self.pending.iter().position(|c| c.summarization_tx == tx.id) {
                let cert = self.pending.remove(pos);
                self.certificates.push(cert);
            }
        }
    }

    fn request_view<'a, T: Scalar>(
        &self,
        ledger: &'a LedgerState<T>,
        request: TxId,
    ) -> Result<RequestView<'a>, RegistryError> {
        let tx = ledger.transaction(request).ok_or(RegistryError::RequestNotOnChain(request))?;
        if tx.kind != TxKind::CertificationRequest {
            return Err(RegistryError::NotARequest(request));
        }
        let req = CertificationRequest::decode(&tx.payload).ok_or(RegistryError::NotARequest(request))?;
        if tx.submitter != req.public_key {
            return Err(RegistryError::RequestNotSignedBySubject(request));
        }
        let location = ledger.location(request).expect("committed");
        let block = ledger.block(location.height).expect("committed");
        let committee = committee::select(
            &tx.payload,
            &block.hash,
            self.population_at(location.height),
            self.params.committee_size,
            self.params.rule,
        )?
        .with_request(request);
        Ok(RequestView {
            bytes: &tx.payload,
            request: req,
            location,
            committee,
        })
    }

    /// Committee of a committed request, recomputed from chain data.
    pub fn committee_for<T: Scalar>(&self, ledger: &LedgerState<T>, request: TxId) -> Result<Committee, RegistryError> {
        Ok(self.request_view(ledger, request)?.committee)
    }

    fn member_id(&self, key: &PublicKey) -> Option<SubjectId> {
        self.by_key.get(key).copied()
    }

    /// Count distinct committee members with a valid acceptance of `[Q]_p`.
    pub fn verify_p3<T: Scalar>(&self, ledger: &LedgerState<T>, request: TxId) -> Result<P3Verdict, RegistryError> {
        let view = self.request_view(ledger, request)?;
        let block_hash = ledger.block(view.location.height).expect("committed").hash;
        let expected_q = challenge_for(view.bytes, &block_hash);
        let needed = self.params.threshold as usize;

        let mut counted = BTreeSet::new();
        let mut supporting = Vec::new();
        let mut completing = None;
        for (loc, tx) in ledger.committed_from(view.location.height) {
            if tx.kind != TxKind::Acceptance || loc <= view.location {
                continue;
            }
            let Some(env) = P3Envelope::decode(&tx.payload) else {
                continue;
            };
            if env.request != request || env.proof.challenge != expected_q || !env.proof.verify(&view.request.public_key)
            {
                continue;
            }
            let Some(member) = self.member_id(&tx.submitter) else {
                continue;
            };
            if !view.committee.contains(member) || !counted.insert(member) {
                continue;
            }
            supporting.push(tx.id);
            if counted.len() == needed {
                completing = Some(tx.id);
            }
        }
        let count = counted.len();
        Ok(match completing {
            Some(completing_tx) => P3Verdict::Certified {
                count,
                supporting,
                completing_tx,
            },
            None => P3Verdict::NotCertified { count },
        })
    }

    /// The four-step P4 procedure. Never errors; failures name the step.
    pub fn verify_p4<T: Scalar>(&self, ledger: &LedgerState<T>, request: TxId) -> P4Verdict {
        let view = match self.request_view(ledger, request) {
            Ok(v) => v,
            Err(_) => {
                return P4Verdict::NotCertified {
                    step: P4Step::Request,
                    count: 0,
                }
            }
        };
        let needed = self.params.threshold as usize;

        // disclosures by (member, slot, value) → locations
        let mut disclosures: HashMap<(SubjectId, u32, [u8; 32]), Vec<(TxLocation, TxId)>> = HashMap::new();
        let mut proofs = Vec::new();
        for (loc, tx) in ledger.committed_from(view.location.height) {
            if loc <= view.location {
                continue;
            }
            match tx.kind {
                TxKind::ProofPublication => {
                    if let Some(p) = P4Proof::decode(&tx.payload).filter(|p| p.request == request) {
                        proofs.push((loc, tx.id, p));
                    }
                }
                TxKind::ChallengeDisclosure => {
                    let Some(member) = self.member_id(&tx.submitter) else {
                        continue;
                    };
                    if let Some(d) = Disclosure::decode(&tx.payload).filter(|d| d.request == request) {
                        for (slot, value) in d.challenges {
                            disclosures.entry((member, slot, value)).or_default().push((loc, tx.id));
                        }
                    }
                }
                _ => {}
            }
        }

        let mut failure = P4Verdict::NotCertified {
            step: P4Step::ProofMissing,
            count: 0,
        };
        for (proof_loc, proof_tx, proof) in proofs {
            if !proof.verify(&view.request.public_key, view.bytes) {
                failure = P4Verdict::NotCertified {
                    step: P4Step::ProofSignature,
                    count: 0,
                };
                continue;
            }
            let covered: Vec<_> = proof
                .entries
                .iter()
                .filter(|e| view.committee.member_at(e.slot as usize) == Some(e.member))
                .collect();
            let covered_members: BTreeSet<_> = covered.iter().map(|e| e.member).collect();
            if covered_members.len() < needed {
                failure = P4Verdict::NotCertified {
                    step: P4Step::Challenges,
                    count: covered_members.len(),
                };
                continue;
            }

            // earliest disclosure after P, per member
            let mut first_ordered: BTreeMap<SubjectId, (TxLocation, TxId)> = BTreeMap::new();
            let mut saw_out_of_order = false;
            for e in covered {
                let Some(found) = disclosures.get(&(e.member, e.slot, e.value)) else {
                    continue;
                };
                for &(loc, id) in found {
                    if loc > proof_loc {
                        let slot = first_ordered.entry(e.member).or_insert((loc, id));
                        if loc < slot.0 {
                            *slot = (loc, id);
                        }
                    } else {
                        saw_out_of_order = true;
                    }
                }
            }
            let count = first_ordered.len();
            if count >= needed {
                let mut ordered: Vec<_> = first_ordered.into_values().collect();
                ordered.sort();
                let completing_tx = ordered[needed - 1].1;
                return P4Verdict::Certified {
                    count,
                    proof_tx,
                    supporting: ordered.into_iter().map(|(_, id)| id).collect(),
                    completing_tx,
                };
            }
            failure = P4Verdict::NotCertified {
                step: if saw_out_of_order {
                    P4Step::DisclosureOrder
                } else {
                    P4Step::Disclosures
                },
                count,
            };
        }
        failure
    }

    /// Verify `request` under `protocol`, and when certified, submit the
    /// summarization transaction by consensus rule. The returned certificate
    /// becomes part of [`Registry::certificates`] once that transaction is
    /// sealed and applied.
    pub fn summarize<T: Scalar>(
        &mut self,
        ledger: &mut LedgerState<T>,
        authority: &KeyPair,
        request: TxId,
        protocol: Protocol,
        now: T,
    ) -> Result<Certificate, RegistryError> {
        if self.is_summarized(request) || self.is_pending(request) {
            return Err(RegistryError::DuplicateRequest(request));
        }
        let (origin, proof_tx, supporting) = match protocol {
            Protocol::P3 => match self.verify_p3(ledger, request)? {
                P3Verdict::Certified {
                    supporting,
                    completing_tx,
                    ..
                } => (Origin::P3, completing_tx, supporting),
                P3Verdict::NotCertified { count } => {
                    return Err(RegistryError::InsufficientEvidence {
                        count,
                        needed: self.params.threshold,
                    })
                }
            },
            Protocol::P4 => match self.verify_p4(ledger, request) {
                P4Verdict::Certified {
                    proof_tx, supporting, ..
                } => (Origin::P4, proof_tx, supporting),
                P4Verdict::NotCertified { step: P4Step::Request, .. } => {
                    // surface the structural reason
                    self.request_view(ledger, request)?;
                    return Err(RegistryError::VerificationFailed(P4Step::Request));
                }
                P4Verdict::NotCertified { count, step } => {
                    return Err(match step {
                        P4Step::Disclosures | P4Step::Challenges => RegistryError::InsufficientEvidence {
                            count,
                            needed: self.params.threshold,
                        },
                        other => RegistryError::VerificationFailed(other),
                    })
                }
            },
            other => return Err(RegistryError::UnsupportedProtocol(other.name())),
        };
        let tx = ledger.transaction(request).expect("verified");
        let req = CertificationRequest::decode(&tx.payload).expect("verified");
        if let Some(holder) = self
            .subjects
            .iter()
            .find(|s| s.active && s.public_key == req.public_key && s.endpoint == req.endpoint)
        {
            return Err(RegistryError::DuplicateBinding(holder.id));
        }
        if self.pending.iter().any(|c| c.request == req) {
            return Err(RegistryError::DuplicateBinding(self.population()));
        }
        let subject = self.population() + self.pending.len() as u64;
        let summary = Summarization {
            subject,
            request_tx: Some(request),
            origin,
            request: req.clone(),
        };
        let summarization_tx =
            ledger.submit_consensus(TxDraft::signed(TxKind::Summarization, summary.encode(), authority), now)?;
        let cert = Certificate {
            subject,
            request: req,
            request_tx: request,
            protocol,
            proof_tx,
            supporting_txs: supporting,
            summarization_tx,
        };
        self.pending.push(cert.clone());
        Ok(cert)
    }

    /// Re-run both verification procedures over every request on chain.
    pub fn audit<T: Scalar>(&self, ledger: &LedgerState<T>) -> Audit {
        let mut verified = BTreeSet::new();
        for (_, tx) in ledger.committed() {
            if tx.kind != TxKind::CertificationRequest {
                continue;
            }
            let p3 = self.verify_p3(ledger, tx.id).map(|v| v.is_certified()).unwrap_or(false);
            if p3 || self.verify_p4(ledger, tx.id).is_certified() {
                verified.insert(tx.id);
            }
        }
        let summarized: BTreeSet<_> = self.summarized.keys().copied().collect();
        Audit { verified, summarized }
    }

    /// CSV: id, public key, endpoint, certified_at.
    pub fn write_export<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "public_key", "endpoint", "certified_at"])?;
        for s in &self.subjects {
            w.write_record([
                s.id.to_string(),
                s.public_key.to_hex(),
                s.endpoint.to_string(),
                s.certified_at.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Ids are exactly `0..N` and active bindings are unique.
    pub fn check_invariants(&self) -> bool {
        let gap_free = self.subjects.iter().enumerate().all(|(i, s)| s.id == i as u64);
        let mut bindings = HashSet::new();
        let unique = self
            .subjects
            .iter()
            .filter(|s| s.active)
            .all(|s| bindings.insert((s.public_key, s.endpoint.clone())));
        gap_free && unique
    }
}

/// Requests that verify from raw chain data vs. requests the registry
/// summarized. Equal sets mean the registry is a function of the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Audit {
    pub verified: BTreeSet<TxId>,
    pub summarized: BTreeSet<TxId>,
}

impl Audit {
    pub fn consistent(&self) -> bool {
        self.verified == self.summarized
    }
}
