//! The two interactive baselines: every verifier runs its own challenge
//! exchange with the subject, so `v` verifiers cost `v` endpoint messages.
//!
//! The alternative mean M (the channel that does not go through E) is taken
//! to be instantaneous.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{ChannelProfile, ChannelState, EndpointAddress, ObserverId};
use crate::crypto::{self, KeyPair, PublicKey, Signature};
use crate::protocol::engine::SimError;
use crate::protocol::messages::{Protocol, Writer};
use crate::scalar::Scalar;

const CODE_LEN: usize = 32;
const ADVERSARY: ObserverId = 0;

/// Who answers the verifiers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasicRole {
    /// The subject controls E and is online.
    #[default]
    Owner,
    /// The subject claims E but cannot use it.
    NoAccess,
    /// The subject never answers.
    Offline,
    /// An adversary claims E with its own key and reads traffic to E.
    Eavesdropper,
    /// An adversary claims E with its own key and forges E as sender.
    Spoofer,
}

#[derive(Debug, Clone)]
pub struct BasicConfig<T> {
    pub channel: ChannelProfile<T>,
    pub endpoint: EndpointAddress,
    /// v
    pub verifiers: u64,
    pub role: BasicRole,
    pub start: T,
    pub seed: u64,
}

impl<T: Scalar> BasicConfig<T> {
    pub fn new(channel: ChannelProfile<T>, endpoint: EndpointAddress, verifiers: u64, seed: u64) -> Self {
        Self {
            channel,
            endpoint,
            verifiers,
            role: BasicRole::Owner,
            start: T::zero(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasicMetrics<T> {
    pub protocol: Protocol,
    /// Every verifier accepted the binding.
    pub verified: bool,
    pub accepted_by: usize,
    pub failure: Option<String>,
    /// Until the last verifier has its answer.
    pub latency: Option<T>,
    pub endpoint_messages: usize,
    pub endpoint_cost: f64,
    /// The binding was accepted although the claimant does not own E.
    pub miscertified: bool,
}

#[derive(Debug)]
pub struct BasicOutcome<T> {
    pub metrics: BasicMetrics<T>,
    pub channel: ChannelState<T>,
    /// The key the verifiers were asked to bind to E.
    pub claimed_key: PublicKey,
}

fn code_message(verifier: u64, code: &[u8; CODE_LEN]) -> Vec<u8> {
    Writer::default().raw(b"epcert/basic-code/v1").u64(verifier).raw(code).finish()
}

struct Setup<T> {
    channel: ChannelState<T>,
    claimant: KeyPair,
    codes: Vec<[u8; CODE_LEN]>,
    verifiers: Vec<EndpointAddress>,
}

fn setup<T: Scalar>(cfg: &BasicConfig<T>) -> Result<Setup<T>, SimError> {
    if !cfg.start.is_well_formed() || cfg.start < T::zero() {
        return Err(SimError::Config("start time must be non-negative".into()));
    }
    let channel = ChannelState::new(cfg.channel)?;
    let mut seed = b"basic/".to_vec();
    seed.extend_from_slice(&cfg.seed.to_be_bytes());
    if matches!(cfg.role, BasicRole::Eavesdropper | BasicRole::Spoofer) {
        seed.extend_from_slice(b"/adversary");
    }
    let claimant = crypto::generate_keypair(&seed).expect("non-empty seed");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let codes = (0..cfg.verifiers)
        .map(|_| {
            let mut c = [0u8; CODE_LEN];
            rng.fill_bytes(&mut c);
            c
        })
        .collect();
    let verifiers = (0..cfg.verifiers)
        .map(|i| EndpointAddress::new(cfg.endpoint.kind, format!("verifier-{i}")))
        .collect();
    Ok(Setup {
        channel,
        claimant,
        codes,
        verifiers,
    })
}

fn finish<T: Scalar>(
    protocol: Protocol,
    cfg: &BasicConfig<T>,
    setup: Setup<T>,
    answered: Vec<Option<T>>,
    failure: &str,
) -> BasicOutcome<T> {
    let accepted_by = answered.iter().flatten().count();
    let verified = accepted_by == answered.len();
    let latency = if verified {
        Some(
            answered
                .iter()
                .flatten()
                .fold(cfg.start, |a, &t| if t > a { t } else { a })
                - cfg.start,
        )
    } else {
        None
    };
    let owner = cfg.role == BasicRole::Owner;
    BasicOutcome {
        metrics: BasicMetrics {
            protocol,
            verified,
            accepted_by,
            failure: (!verified).then(|| failure.to_string()),
            latency,
            endpoint_messages: setup.channel.endpoint_message_count(&cfg.endpoint),
            endpoint_cost: setup.channel.endpoint_cost(&cfg.endpoint),
            miscertified: verified && !owner,
        },
        claimed_key: setup.claimant.public(),
        channel: setup.channel,
    }
}

fn check(claimed: &PublicKey, verifier: u64, code: &[u8; CODE_LEN], answer: &Signature) -> bool {
    crypto::verify(claimed.as_bytes(), &code_message(verifier, code), answer)
}

/// Protocol 1: each verifier sends a code to E; whoever reads it returns the
/// code signed, over M.
pub fn run_basic_p1<T: Scalar>(cfg: &BasicConfig<T>) -> Result<BasicOutcome<T>, SimError> {
    let mut s = setup(cfg)?;
    if cfg.role == BasicRole::Eavesdropper {
        // without a tap the adversary just never sees a code
        let _ = s.channel.attempt_eavesdrop(ADVERSARY, &cfg.endpoint);
    }
    let claimed = s.claimant.public();
    let mut answered = Vec::with_capacity(s.codes.len());
    for (i, code) in s.codes.iter().enumerate() {
        let d = s
            .channel
            .send(s.verifiers[i].clone(), cfg.endpoint.clone(), code.to_vec(), cfg.start);
        let reader_sees = match cfg.role {
            BasicRole::Owner => true,
            BasicRole::Eavesdropper => d.taps.contains(&ADVERSARY),
            BasicRole::NoAccess | BasicRole::Offline | BasicRole::Spoofer => false,
        };
        let answer = reader_sees.then(|| s.claimant.sign(&code_message(i as u64, code)));
        let ok = answer.is_some_and(|sig| check(&claimed, i as u64, code, &sig));
        answered.push(ok.then_some(d.delivered_at));
    }
    let failure = failure_reason(cfg.role);
    Ok(finish(Protocol::Basic1, cfg, s, answered, failure))
}

/// Protocol 2: each verifier hands a code to the subject over M; the subject
/// sends it back signed from E.
pub fn run_basic_p2<T: Scalar>(cfg: &BasicConfig<T>) -> Result<BasicOutcome<T>, SimError> {
    let mut s = setup(cfg)?;
    let claimed = s.claimant.public();
    let mut answered = Vec::with_capacity(s.codes.len());
    for (i, code) in s.codes.iter().enumerate() {
        let sig = s.claimant.sign(&code_message(i as u64, code));
        let to = s.verifiers[i].clone();
        let delivery = match cfg.role {
            BasicRole::Owner => Some(s.channel.send(cfg.endpoint.clone(), to, sig.0.to_vec(), cfg.start)),
            BasicRole::Spoofer => s
                .channel
                .attempt_spoof(ADVERSARY, cfg.endpoint.clone(), to, sig.0.to_vec(), cfg.start)
                .ok(),
            BasicRole::NoAccess | BasicRole::Offline | BasicRole::Eavesdropper => None,
        };
        let ok = delivery.as_ref().is_some_and(|d| {
            let msg = s.channel.message(d.message).expect("sent");
            msg.from == cfg.endpoint
                && Signature::from_slice(&msg.payload).is_some_and(|sig| check(&claimed, i as u64, code, &sig))
        });
        answered.push(if ok { delivery.map(|d| d.delivered_at) } else { None });
    }
    let failure = failure_reason(cfg.role);
    Ok(finish(Protocol::Basic2, cfg, s, answered, failure))
}

fn failure_reason(role: BasicRole) -> &'static str {
    match role {
        BasicRole::Offline => "timeout: subject offline",
        BasicRole::NoAccess => "timeout: no access to endpoint",
        BasicRole::Owner | BasicRole::Eavesdropper | BasicRole::Spoofer => "channel refused the adversary",
    }
}
