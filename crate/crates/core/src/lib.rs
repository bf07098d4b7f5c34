//! Endpoint-binding certification on an idealized blockchain.
//!
//! A subject proves it controls a communication endpoint (phone number,
//! mailbox, web server…) to a randomly sampled committee of already
//! certified subjects, who attest on-chain. The crate contains the ledger,
//! the registry that derives certificates from it, the channel model, the
//! protocols, an adversary model and the closed-form analysis.
//!
//! Time is generic over [`Scalar`]; the aliases below fix it to `f64` or to
//! exact rationals.

pub mod adversary;
pub mod analysis;
pub mod channel;
pub mod committee;
pub mod crypto;
pub mod ledger;
pub mod protocol;
pub mod registry;
pub mod scalar;
pub mod scenario;

pub use num_rational::Rational64;

pub use adversary::{AdversaryConfig, AttackOutcome, CorruptionRule, Strategy};
pub use analysis::{latency_basic, latency_p3, latency_p4, p_dos, p_exact, p_montecarlo, SecurityParams};
pub use channel::{ChannelState, EndpointAddress, EndpointKind};
pub use committee::{Committee, SelectionRule, SubjectId};
pub use crypto::{Digest, KeyPair, PublicKey, Signature};
pub use ledger::{LedgerState, TxDraft, TxId, TxKind};
pub use protocol::Protocol;
pub use registry::{Certificate, ProtocolParams, Registry};
pub use scalar::Scalar;
pub use scenario::{run_analysis, run_scenario, MetricsReport, ScenarioConfig, SweepSpec};

pub type Ledger = LedgerState<f64>;
pub type ExactLedger = LedgerState<Rational64>;
pub type Channel = ChannelState<f64>;
pub type ExactChannel = ChannelState<Rational64>;
pub type ChannelProfile = channel::ChannelProfile<f64>;
pub type ExactChannelProfile = channel::ChannelProfile<Rational64>;
pub type TimingParams = analysis::TimingParams<f64>;
pub type ExactTimingParams = analysis::TimingParams<Rational64>;
pub type RunConfig = protocol::RunConfig<f64>;
pub type ExactRunConfig = protocol::RunConfig<Rational64>;
pub type RunOutcome = protocol::RunOutcome<f64>;
pub type ExactRunOutcome = protocol::RunOutcome<Rational64>;
pub type Genesis = protocol::Genesis<f64>;
pub type ExactGenesis = protocol::Genesis<Rational64>;
