//! Discrete-event execution of the decentralized protocols.
//!
//! A run drives one certification request through the ledger, the channel
//! and the committee. Events fire in `(time, sequence)` order; a block whose
//! commit time equals an event time is sealed first. Everything is seeded,
//! so a run is a pure function of its [`RunConfig`] and [`Genesis`].

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{AdversaryError, AttackOutcome, Strategy};
use crate::channel::{ChannelError, ChannelProfile, ChannelState, EndpointAddress, EndpointKind, MessageId, ObserverId};
use crate::committee::{Committee, SubjectId};
use crate::crypto::{self, Digest, KeyPair};
use crate::ledger::{LedgerError, LedgerState, TxDraft, TxId, TxKind};
use crate::protocol::messages::{
    CertificationRequest, ChallengeEntry, Disclosure, P3Envelope, P3Proof, P4Proof, PartialChallenge, Protocol,
    Summarization, PARTIAL_CHALLENGE_LEN,
};
use crate::registry::{Certificate, P3Verdict, P4Verdict, ProtocolParams, Registry, RegistryError};
use crate::scalar::{OrderedTime, Scalar};

const ADVERSARY: ObserverId = 0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// The initial certified population: keys and endpoints of subjects
/// `0..N`, plus the key block producers use for consensus-rule transactions.
#[derive(Debug, Clone)]
pub struct Population {
    keys: Vec<KeyPair>,
    endpoints: Vec<EndpointAddress>,
    authority: KeyPair,
}

impl Population {
    pub fn generate(size: u64, seed: u64, kind: EndpointKind) -> Self {
        let keys = (0..size)
            .map(|i| {
                let mut s = b"population/".to_vec();
                s.extend_from_slice(&seed.to_be_bytes());
                s.extend_from_slice(&i.to_be_bytes());
                crypto::generate_keypair(&s).expect("non-empty seed")
            })
            .collect();
        let endpoints = (0..size)
            .map(|i| EndpointAddress::new(kind, format!("subject-{i}")))
            .collect();
        let authority = crypto::generate_keypair(b"consensus-authority").expect("non-empty seed");
        Self {
            keys,
            endpoints,
            authority,
        }
    }

    pub fn size(&self) -> u64 {
        self.keys.len() as u64
    }

    pub fn key(&self, id: SubjectId) -> &KeyPair {
        &self.keys[id as usize]
    }

    pub fn endpoint(&self, id: SubjectId) -> &EndpointAddress {
        &self.endpoints[id as usize]
    }

    pub fn authority(&self) -> &KeyPair {
        &self.authority
    }

    /// Chain whose genesis block certifies the whole population.
    pub fn genesis<T: Scalar>(
        &self,
        params: ProtocolParams,
        block_interval: T,
        propagation_delay: T,
    ) -> Result<Genesis<T>, SimError> {
        if self.keys.is_empty() {
            return Err(SimError::Config("population must not be empty".into()));
        }
        let drafts = Registry::bootstrap_drafts(
            &self.authority,
            self.keys
                .iter()
                .zip(&self.endpoints)
                .map(|(k, e)| (k.public(), e.clone())),
        );
        let ledger = LedgerState::with_genesis(block_interval, propagation_delay, drafts)?;
        let registry = Registry::from_chain(&ledger, params, self.authority.public())?;
        Ok(Genesis { ledger, registry })
    }
}

/// Ledger and registry right after genesis; cloned by every run.
#[derive(Debug, Clone)]
pub struct Genesis<T> {
    pub ledger: LedgerState<T>,
    pub registry: Registry,
}

#[derive(Debug, Clone)]
pub struct RunConfig<T> {
    pub protocol: Protocol,
    pub channel: ChannelProfile<T>,
    /// When the request is handed to the network.
    pub submit_time: T,
    /// Blocks after the request's block within which certification must happen.
    pub deadline_blocks: u64,
    pub subject_online: bool,
    /// The first this-many distinct committee members (by slot) are offline.
    pub offline_members: usize,
    /// P4: this many honest members (after the offline ones) disclose their
    /// challenge right after sending it instead of waiting for P.
    pub early_disclosers: usize,
    pub strategy: Strategy,
    pub corrupted: BTreeSet<SubjectId>,
    /// Drives the requester's key and the partial challenges.
    pub seed: u64,
}

impl<T: Scalar> RunConfig<T> {
    pub fn honest(protocol: Protocol, channel: ChannelProfile<T>, submit_time: T, seed: u64) -> Self {
        Self {
            protocol,
            channel,
            submit_time,
            deadline_blocks: 10,
            subject_online: true,
            offline_members: 0,
            early_disclosers: 0,
            strategy: Strategy::None,
            corrupted: BTreeSet::new(),
            seed,
        }
    }
}

/// Measured outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics<T> {
    pub protocol: Protocol,
    pub certified: bool,
    pub failure: Option<String>,
    /// Request submission until the evidence block has reached every node.
    pub latency: Option<T>,
    /// b̄: wait of the request between propagation and commit.
    pub request_wait: Option<T>,
    pub endpoint_messages: usize,
    pub endpoint_cost: f64,
    pub total_messages: usize,
    /// Valid acceptances (P3) or ordered disclosures (P4) counted by the verifier.
    pub evidence_count: usize,
    pub committee: Vec<SubjectId>,
    pub duplicate_slots: usize,
    pub corrupted_in_committee: usize,
    /// Acceptance/disclosure transactions published by members; the unit a
    /// reward scheme would pay for.
    pub member_transactions: usize,
    pub subject_id: Option<SubjectId>,
    pub attack: Option<AttackOutcome>,
}

/// Full state at the end of a run.
#[derive(Debug)]
pub struct RunOutcome<T> {
    pub metrics: RunMetrics<T>,
    pub ledger: LedgerState<T>,
    pub registry: Registry,
    pub channel: ChannelState<T>,
    pub request_tx: Option<TxId>,
    pub certificate: Option<Certificate>,
    pub committee: Option<Committee>,
    pub partial_challenges: Vec<[u8; PARTIAL_CHALLENGE_LEN]>,
    pub endpoint: EndpointAddress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    SubmitRequest,
    BlockSeen(u64),
    Deliver(MessageId),
    Tap(MessageId),
    CollectionWindowClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Owner {
    Subject(SubjectId),
    Requester,
    Victim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Honest,
    Offline,
    EarlyDiscloser,
    /// Corrupted member under the active strategy.
    Adversarial,
}

struct Sim<'a, T> {
    cfg: &'a RunConfig<T>,
    population: &'a Population,
    ledger: LedgerState<T>,
    registry: Registry,
    channel: ChannelState<T>,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<(OrderedTime<T>, u64)>>,
    events: HashMap<u64, Event>,
    seq: u64,

    requester: KeyPair,
    request: CertificationRequest,
    request_bytes: Vec<u8>,
    owners: HashMap<EndpointAddress, Owner>,

    request_tx: Option<TxId>,
    request_height: Option<u64>,
    challenge: Option<Digest>,
    committee: Option<Committee>,
    roles: BTreeMap<SubjectId, Role>,

    accepted: HashSet<SubjectId>,
    my_challenges: BTreeMap<SubjectId, Vec<(u32, [u8; PARTIAL_CHALLENGE_LEN])>>,
    disclosed: HashSet<SubjectId>,
    all_challenges: Vec<[u8; PARTIAL_CHALLENGE_LEN]>,
    /// What the proof author has collected: (slot → entry).
    collected: BTreeMap<u32, ChallengeEntry>,
    seen_disclosed: HashSet<(u32, [u8; PARTIAL_CHALLENGE_LEN])>,
    window_closed: bool,
    proof_published: bool,
    proof_seen: bool,
    member_transactions: usize,

    certified_at: Option<T>,
    verdict_count: usize,
    failure: Option<String>,
    certificate: Option<Certificate>,
    subject_id: Option<SubjectId>,
    done: bool,
}

/// Execute one P3 or P4 run.
pub fn run<T: Scalar>(population: &Population, genesis: &Genesis<T>, cfg: &RunConfig<T>) -> Result<RunOutcome<T>, SimError> {
    if !cfg.protocol.is_decentralized() {
        return Err(SimError::Config(format!(
            "{} is a basic protocol; use the basic runners",
            cfg.protocol.name()
        )));
    }
    cfg.strategy.check_protocol(cfg.protocol)?;
    if !cfg.submit_time.is_well_formed() || cfg.submit_time < T::zero() {
        return Err(SimError::Config("submit time must be non-negative".into()));
    }
    if cfg.deadline_blocks == 0 {
        return Err(SimError::Config("deadline must be at least one block".into()));
    }
    let population_size = genesis.registry.population();
    if let Some(bad) = cfg.corrupted.iter().find(|id| **id >= population_size) {
        return Err(SimError::Adversary(AdversaryError::UnknownSubject(*bad)));
    }
    Sim::new(population, genesis, cfg)?.execute()
}

impl<'a, T: Scalar> Sim<'a, T> {
    fn new(population: &'a Population, genesis: &Genesis<T>, cfg: &'a RunConfig<T>) -> Result<Self, SimError> {
        let mut registry = genesis.registry.clone();
        for id in &cfg.corrupted {
            registry.set_corrupted(*id, true)?;
        }
        let adversarial = cfg.strategy.is_miscertification();
        let key_seed = {
            let mut s = if adversarial { b"adversary/".to_vec() } else { b"requester/".to_vec() };
            s.extend_from_slice(&cfg.seed.to_be_bytes());
            s
        };
        let requester = crypto::generate_keypair(&key_seed).expect("non-empty seed");
        let kind = population.endpoints.first().map_or(EndpointKind::Email, |e| e.kind);
        let endpoint = EndpointAddress::new(kind, format!("endpoint-{}", cfg.seed));
        let request = CertificationRequest::new(requester.public(), endpoint.clone());
        let request_bytes = request.encode();

        let mut owners: HashMap<_, _> = population
            .endpoints
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), Owner::Subject(i as SubjectId)))
            .collect();
        owners.insert(endpoint, if adversarial { Owner::Victim } else { Owner::Requester });

        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(crypto::digest(&[b"challenges".as_slice(), &cfg.seed.to_be_bytes()]).expect("non-empty input").as_bytes());

        Ok(Self {
            cfg,
            population,
            ledger: genesis.ledger.clone(),
            registry,
            channel: ChannelState::new(cfg.channel)?,
            rng: ChaCha8Rng::from_seed(rng_seed),
            queue: BinaryHeap::new(),
            events: HashMap::new(),
            seq: 0,
            requester,
            request,
            request_bytes,
            owners,
            request_tx: None,
            request_height: None,
            challenge: None,
            committee: None,
            roles: BTreeMap::new(),
            accepted: HashSet::new(),
            my_challenges: BTreeMap::new(),
            disclosed: HashSet::new(),
            all_challenges: Vec::new(),
            collected: BTreeMap::new(),
            seen_disclosed: HashSet::new(),
            window_closed: false,
            proof_published: false,
            proof_seen: false,
            member_transactions: 0,
            certified_at: None,
            verdict_count: 0,
            failure: None,
            certificate: None,
            subject_id: None,
            done: false,
        })
    }

    fn schedule(&mut self, at: T, event: Event) {
        let seq = self.seq;
        self.seq += 1;
        self.events.insert(seq, event);
        self.queue.push(Reverse((OrderedTime(at), seq)));
    }

    fn execute(mut self) -> Result<RunOutcome<T>, SimError> {
        if self.cfg.subject_online {
            self.schedule(self.cfg.submit_time, Event::SubmitRequest);
        } else {
            self.failure = Some("subject offline".into());
            self.done = true;
        }

        while !self.done {
            let next_block = self.ledger.next_commit_time();
            let next_event = self.queue.peek().map(|Reverse((t, _))| t.0);
            match next_event {
                Some(t) if t < next_block => {
                    let Reverse((_, seq)) = self.queue.pop().expect("peeked");
                    let event = self.events.remove(&seq).expect("scheduled");
                    self.handle(event, t)?;
                }
                _ => self.seal(next_block)?,
            }
        }

        let metrics = self.metrics();
        Ok(RunOutcome {
            metrics,
            ledger: self.ledger,
            registry: self.registry,
            channel: self.channel,
            request_tx: self.request_tx,
            certificate: self.certificate,
            committee: self.committee,
            partial_challenges: self.all_challenges,
            endpoint: self.request.endpoint,
        })
    }

    fn seal(&mut self, at: T) -> Result<(), SimError> {
        let heights: Vec<u64> = self.ledger.advance_to(at)?.iter().map(|b| b.height).collect();
        for height in heights {
            self.on_sealed(height)?;
        }
        Ok(())
    }

    fn on_sealed(&mut self, height: u64) -> Result<(), SimError> {
        let block = self.ledger.block(height).expect("sealed").clone();
        self.registry.apply_block(&block);
        let commit_time = block.commit_time;

        for tx in &block.transactions {
            if Some(tx.id) == self.request_tx {
                self.request_height = Some(height);
            }
            if tx.kind == TxKind::Summarization {
                if let Some(s) = Summarization::decode(&tx.payload) {
                    if s.request_tx.is_some() && s.request_tx == self.request_tx {
                        self.subject_id = Some(s.subject);
                        self.done = true;
                    }
                }
            }
        }

        if let (Some(request), Some(request_height)) = (self.request_tx, self.request_height) {
            if self.certified_at.is_none() && !self.done {
                let within = height <= request_height + self.cfg.deadline_blocks;
                let certified = within && self.check_certified(request)?;
                if certified {
                    self.certified_at = Some(commit_time);
                    let cert = self.registry.summarize(
                        &mut self.ledger,
                        self.population.authority(),
                        request,
                        self.cfg.protocol,
                        commit_time,
                    )?;
                    self.certificate = Some(cert);
                } else if !within || height == request_height + self.cfg.deadline_blocks {
                    if self.failure.is_none() {
                        self.failure = Some(self.failure_reason());
                    }
                    self.done = true;
                }
            }
        }

        let seen_at = commit_time + self.ledger.propagation_delay();
        self.schedule(seen_at, Event::BlockSeen(height));
        Ok(())
    }

    fn check_certified(&mut self, request: TxId) -> Result<bool, SimError> {
        Ok(match self.cfg.protocol {
            Protocol::P3 => {
                let v = self.registry.verify_p3(&self.ledger, request)?;
                self.verdict_count = v.count();
                matches!(v, P3Verdict::Certified { .. })
            }
            _ => {
                let v = self.registry.verify_p4(&self.ledger, request);
                self.verdict_count = v.count();
                matches!(v, P4Verdict::Certified { .. })
            }
        })
    }

    fn failure_reason(&self) -> String {
        match self.cfg.protocol {
            Protocol::P3 => "insufficient acceptances".into(),
            _ => {
                if !self.proof_seen {
                    "insufficient challenges".into()
                } else {
                    match self.request_tx.map(|r| self.registry.verify_p4(&self.ledger, r)) {
                        Some(P4Verdict::NotCertified { step, .. }) => format!("verification failed: {}", step.name()),
                        _ => "insufficient disclosures".into(),
                    }
                }
            }
        }
    }

    fn handle(&mut self, event: Event, now: T) -> Result<(), SimError> {
        match event {
            Event::SubmitRequest => {
                if self.cfg.strategy == Strategy::Eavesdrop {
                    let target = self.request.endpoint.clone();
                    // a refusal leaves the adversary blind; the run goes on
                    let _ = self.channel.attempt_eavesdrop(ADVERSARY, &target);
                }
                let draft = TxDraft::signed(TxKind::CertificationRequest, self.request_bytes.clone(), &self.requester);
                self.request_tx = Some(self.ledger.submit(draft, now)?);
            }
            Event::BlockSeen(height) => self.on_block_seen(height, now)?,
            Event::Deliver(id) => self.on_deliver(id, now)?,
            Event::Tap(id) => self.on_tap(id, now)?,
            Event::CollectionWindowClosed => {
                self.window_closed = true;
                self.try_publish_proof(now)?;
            }
        }
        Ok(())
    }

    fn on_block_seen(&mut self, height: u64, now: T) -> Result<(), SimError> {
        let block = self.ledger.block(height).expect("sealed");
        let mut saw_request = false;
        let mut saw_proof = false;
        let mut disclosures = Vec::new();
        for tx in &block.transactions {
            if Some(tx.id) == self.request_tx {
                saw_request = true;
            }
            match tx.kind {
                TxKind::ProofPublication => {
                    if P4Proof::decode(&tx.payload).is_some_and(|p| Some(p.request) == self.request_tx) {
                        saw_proof = true;
                    }
                }
                TxKind::ChallengeDisclosure => {
                    if let Some(d) = Disclosure::decode(&tx.payload).filter(|d| Some(d.request) == self.request_tx) {
                        disclosures.extend(d.challenges);
                    }
                }
                _ => {}
            }
        }
        self.seen_disclosed.extend(disclosures);
        if saw_request {
            self.start_protocol(now)?;
        }
        if saw_proof && !self.proof_seen {
            self.proof_seen = true;
            self.disclose_all(now)?;
        }
        Ok(())
    }

    fn start_protocol(&mut self, now: T) -> Result<(), SimError> {
        let request = self.request_tx.expect("request seen");
        let committee = self.registry.committee_for(&self.ledger, request)?;
        let block_hash = self.ledger.block_of(request).expect("committed").hash;
        self.challenge = Some(self.request.challenge(&block_hash));

        // roles by slot order
        let mut offline_left = self.cfg.offline_members;
        let mut early_left = self.cfg.early_disclosers;
        for &member in committee.members() {
            if self.roles.contains_key(&member) {
                continue;
            }
            let corrupted = self.cfg.corrupted.contains(&member) && self.cfg.strategy != Strategy::None;
            let active = self.registry.subject(member).is_some_and(|s| s.active);
            let role = if !active {
                Role::Offline
            } else if corrupted && matches!(
                self.cfg.strategy,
                Strategy::MiscertifyAccept | Strategy::MiscertifyDisclose | Strategy::DosSilence
            ) {
                Role::Adversarial
            } else if offline_left > 0 {
                offline_left -= 1;
                Role::Offline
            } else if early_left > 0 && self.cfg.protocol == Protocol::P4 {
                early_left -= 1;
                Role::EarlyDiscloser
            } else {
                Role::Honest
            };
            self.roles.insert(member, role);
        }
        self.committee = Some(committee.clone());

        match self.cfg.protocol {
            Protocol::P3 => self.start_p3(&committee, now),
            _ => self.start_p4(&committee, now),
        }
    }

    fn start_p3(&mut self, committee: &Committee, now: T) -> Result<(), SimError> {
        let request = self.request_tx.expect("request seen");
        let proof = P3Proof::create(self.challenge.expect("computed"), &self.requester);
        let envelope = P3Envelope { request, proof }.encode();
        let endpoint = self.request.endpoint.clone();

        match self.cfg.strategy {
            Strategy::MiscertifyAccept => {
                // side channel: corrupted members accept without any message through E
                let members: BTreeSet<_> = committee.members().iter().copied().collect();
                for member in members {
                    if self.roles.get(&member) == Some(&Role::Adversarial) {
                        self.accept(member, envelope.clone(), now)?;
                    }
                }
            }
            Strategy::Spoof => {
                for &member in committee.members() {
                    let to = self.population.endpoint(member).clone();
                    if let Ok(d) = self.channel.attempt_spoof(ADVERSARY, endpoint.clone(), to, envelope.clone(), now) {
                        self.schedule(d.delivered_at, Event::Deliver(d.message));
                    }
                }
            }
            _ => {
                // S sends from E, one message per slot
                if self.owners.get(&endpoint) == Some(&Owner::Requester) {
                    for &member in committee.members() {
                        let to = self.population.endpoint(member).clone();
                        let d = self.channel.send(endpoint.clone(), to, envelope.clone(), now);
                        self.schedule(d.delivered_at, Event::Deliver(d.message));
                        for _ in d.taps {
                            self.schedule(d.delivered_at, Event::Tap(d.message));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn start_p4(&mut self, committee: &Committee, now: T) -> Result<(), SimError> {
        let request = self.request_tx.expect("request seen");
        let endpoint = self.request.endpoint.clone();
        for (j, &member) in committee.members().iter().enumerate() {
            let slot = (j + 1) as u32;
            let role = self.roles[&member];
            let silenced = role == Role::Adversarial && self.cfg.strategy == Strategy::DosSilence;
            if role == Role::Offline || silenced {
                continue;
            }
            let mut value = [0u8; PARTIAL_CHALLENGE_LEN];
            self.rng.fill_bytes(&mut value);
            self.all_challenges.push(value);
            self.my_challenges.entry(member).or_default().push((slot, value));
            let challenge = PartialChallenge {
                request,
                slot,
                member,
                value,
            };
            if role == Role::Adversarial {
                // leaked over the side channel
                self.collected.insert(slot, ChallengeEntry { slot, member, value });
                continue;
            }
            let from = self.population.endpoint(member).clone();
            let d = self.channel.send(from, endpoint.clone(), challenge.encode(), now);
            self.schedule(d.delivered_at, Event::Deliver(d.message));
            for _ in d.taps {
                self.schedule(d.delivered_at, Event::Tap(d.message));
            }
        }

        for (&member, &role) in &self.roles.clone() {
            if role == Role::EarlyDiscloser {
                self.disclose(member, now)?;
            }
        }

        // The proof author stops waiting for stragglers once every online
        // member's challenge could have arrived.
        let profile = *self.channel.profile();
        let window = profile.delivery_delay + T::from_count(committee.size() as u64) * profile.per_message_time;
        match self.cfg.strategy {
            Strategy::MiscertifyDisclose => {
                self.window_closed = true;
                self.try_publish_proof(now)?;
            }
            _ => self.schedule(now + window, Event::CollectionWindowClosed),
        }
        Ok(())
    }

    fn accept(&mut self, member: SubjectId, envelope: Vec<u8>, now: T) -> Result<(), SimError> {
        if !self.accepted.insert(member) {
            return Ok(());
        }
        let draft = TxDraft::signed(TxKind::Acceptance, envelope, self.population.key(member));
        self.ledger.submit(draft, now)?;
        self.member_transactions += 1;
        Ok(())
    }

    fn disclose(&mut self, member: SubjectId, now: T) -> Result<(), SimError> {
        let Some(challenges) = self.my_challenges.get(&member).cloned() else {
            return Ok(());
        };
        if !self.disclosed.insert(member) {
            return Ok(());
        }
        let payload = Disclosure {
            request: self.request_tx.expect("request seen"),
            challenges,
        }
        .encode();
        let draft = TxDraft::signed(TxKind::ChallengeDisclosure, payload, self.population.key(member));
        self.ledger.submit(draft, now)?;
        self.member_transactions += 1;
        Ok(())
    }

    fn disclose_all(&mut self, now: T) -> Result<(), SimError> {
        let members: Vec<_> = self.my_challenges.keys().copied().collect();
        for member in members {
            let role = self.roles[&member];
            if matches!(role, Role::Honest | Role::Adversarial) {
                self.disclose(member, now)?;
            }
        }
        Ok(())
    }

    fn on_deliver(&mut self, id: MessageId, now: T) -> Result<(), SimError> {
        let msg = self.channel.message(id).expect("sent").clone();
        match self.owners.get(&msg.to).copied() {
            Some(Owner::Subject(member)) => {
                if self.cfg.protocol != Protocol::P3 || self.roles.get(&member) != Some(&Role::Honest) {
                    return Ok(());
                }
                // member checks: sender address, request, Q, signature
                let Some(env) = P3Envelope::decode(&msg.payload) else {
                    return Ok(());
                };
                let valid = msg.from == self.request.endpoint
                    && Some(env.request) == self.request_tx
                    && Some(env.proof.challenge) == self.challenge
                    && env.proof.verify(&self.request.public_key);
                if valid {
                    self.accept(member, msg.payload, now)?;
                }
            }
            Some(Owner::Requester) => {
                if let Some(q) = PartialChallenge::decode(&msg.payload) {
                    self.collect(q, now)?;
                }
            }
            Some(Owner::Victim) | None => {}
        }
        Ok(())
    }

    fn on_tap(&mut self, id: MessageId, now: T) -> Result<(), SimError> {
        if self.cfg.strategy != Strategy::Eavesdrop {
            return Ok(());
        }
        let msg = self.channel.message(id).expect("sent");
        if let Some(q) = PartialChallenge::decode(&msg.payload) {
            self.collect(q, now)?;
        }
        Ok(())
    }

    fn collect(&mut self, q: PartialChallenge, now: T) -> Result<(), SimError> {
        if Some(q.request) != self.request_tx {
            return Ok(());
        }
        self.collected.insert(
            q.slot,
            ChallengeEntry {
                slot: q.slot,
                member: q.member,
                value: q.value,
            },
        );
        let slots = self.committee.as_ref().map_or(0, |c| c.size());
        if self.collected.len() >= slots {
            self.window_closed = true;
        }
        self.try_publish_proof(now)
    }

    fn try_publish_proof(&mut self, now: T) -> Result<(), SimError> {
        if self.proof_published || !self.window_closed {
            return Ok(());
        }
        let usable: Vec<ChallengeEntry> = self
            .collected
            .values()
            .filter(|e| !self.seen_disclosed.contains(&(e.slot, e.value)))
            .copied()
            .collect();
        let members: BTreeSet<_> = usable.iter().map(|e| e.member).collect();
        if (members.len() as u64) < self.registry.params().threshold {
            return Ok(());
        }
        let request = self.request_tx.expect("request seen");
        let proof = P4Proof::create(request, usable, &self.request_bytes, &self.requester);
        let draft = TxDraft::signed(TxKind::ProofPublication, proof.encode(), &self.requester);
        self.ledger.submit(draft, now)?;
        self.proof_published = true;
        Ok(())
    }

    fn metrics(&self) -> RunMetrics<T> {
        let certified = self.certified_at.is_some();
        let latency = match (self.certified_at, self.request_tx) {
            (Some(at), Some(_)) => Some(at + self.ledger.propagation_delay() - self.cfg.submit_time),
            _ => None,
        };
        let request_wait = self.request_tx.and_then(|id| self.ledger.wait_of(id));
        let committee = self.committee.as_ref().map(|c| c.members().to_vec()).unwrap_or_default();
        let corrupted_in_committee = self
            .committee
            .as_ref()
            .map(|c| c.distinct_members().intersection(&self.cfg.corrupted).count())
            .unwrap_or(0);
        let attack = (self.cfg.strategy != Strategy::None).then(|| AttackOutcome {
            strategy: self.cfg.strategy,
            corrupted_in_committee,
            success: if self.cfg.strategy.is_miscertification() {
                certified
            } else {
                !certified
            },
        });
        let endpoint = &self.request.endpoint;
        RunMetrics {
            protocol: self.cfg.protocol,
            certified,
            failure: if certified { None } else { self.failure.clone() },
            latency,
            request_wait,
            endpoint_messages: self.channel.endpoint_message_count(endpoint),
            endpoint_cost: self.channel.endpoint_cost(endpoint),
            total_messages: self.channel.messages().len(),
            evidence_count: self.verdict_count,
            duplicate_slots: self.committee.as_ref().map_or(0, |c| c.duplicate_count()),
            committee,
            corrupted_in_committee,
            member_transactions: self.member_transactions,
            subject_id: self.subject_id,
            attack,
        }
    }
}
