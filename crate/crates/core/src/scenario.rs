//! Scenario files, batch runs and parameter sweeps.
//!
//! A scenario is one TOML document describing a protocol, its parameters,
//! the channel and the adversary. [`run_scenario`] executes `trials`
//! independent runs with seeds derived from `(seed, trial)` and reports one
//! row per run plus aggregates computed from those rows.

use std::collections::BTreeSet;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, CorruptionRule, Strategy};
use crate::analysis::{self, SecurityParams, TimingParams};
use crate::channel::{preset, ChannelProfile, EndpointAddress, EndpointKind};
use crate::committee::{SelectionRule, SubjectId};
use crate::protocol::basic::{run_basic_p1, run_basic_p2, BasicConfig, BasicRole};
use crate::protocol::engine::{self, Genesis, Population, RunConfig, RunOutcome, SimError};
use crate::protocol::messages::Protocol;
use crate::registry::ProtocolParams;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        reason: reason.into(),
    }
}

fn one() -> u64 {
    1
}

fn ten() -> u64 {
    10
}

fn yes() -> bool {
    true
}

fn unit_cost() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    /// N
    pub population: u64,
    /// k
    pub committee: u64,
    /// k̄
    pub threshold: u64,
    #[serde(default)]
    pub selection: SelectionRule,
    /// v, for the basic protocols
    #[serde(default = "one")]
    pub verifiers: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default = "ten")]
    pub deadline_blocks: u64,
    pub timing: TimingConfig,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub faults: FaultConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    /// b
    pub block_interval: f64,
    /// p
    pub propagation_delay: f64,
    /// e; falls back to the channel preset
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_delay: Option<f64>,
    /// W; falls back to the channel preset
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_message_time: Option<f64>,
    /// Fixed submission time. When absent each trial submits at a uniform
    /// time in `[b, 2b)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submit_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Endpoint kind when no preset is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EndpointKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spoofable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eavesdroppable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_per_message: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    First,
    #[default]
    Random,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    #[serde(default)]
    pub strategy: Strategy,
    /// m
    #[serde(default)]
    pub corrupted_count: u64,
    /// c
    #[serde(default = "unit_cost")]
    pub cost_per_subject: f64,
    #[serde(default)]
    pub corruption: CorruptionMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<SubjectId>,
}

impl Default for AdversarySection {
    fn default() -> Self {
        Self {
            strategy: Strategy::None,
            corrupted_count: 0,
            cost_per_subject: 1.0,
            corruption: CorruptionMode::Random,
            explicit: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    #[serde(default = "yes")]
    pub subject_online: bool,
    #[serde(default)]
    pub offline_members: usize,
    #[serde(default)]
    pub early_disclosers: usize,
    /// Subjects whose certificate lapsed before the runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expired: Vec<SubjectId>,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            subject_online: true,
            offline_members: 0,
            early_disclosers: 0,
            expired: Vec::new(),
        }
    }
}

/// Scenario values converted to the simulation scalar.
#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub params: ProtocolParams,
    pub block_interval: T,
    pub propagation_delay: T,
    pub channel: ChannelProfile<T>,
    pub kind: EndpointKind,
    pub submit_time: Option<T>,
}

fn to_scalar<T: Scalar>(field: &'static str, value: f64) -> Result<T, ScenarioError> {
    if !(value >= 0.0) {
        return Err(invalid(field, "must be a non-negative number"));
    }
    T::from_config(value).ok_or_else(|| invalid(field, "not representable in the chosen number type"))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn security_params(&self) -> SecurityParams {
        SecurityParams::new(self.population, self.committee, self.threshold, self.adversary.corrupted_count)
    }

    /// Check every field and convert timings to `T`.
    pub fn resolve<T: Scalar>(&self) -> Result<Resolved<T>, ScenarioError> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.deadline_blocks == 0 {
            return Err(invalid("deadline_blocks", "must be at least 1"));
        }
        if self.population == 0 {
            return Err(invalid("population", "must be at least 1"));
        }
        if self.protocol.is_decentralized() {
            if self.committee == 0 || self.committee > self.population {
                return Err(invalid("committee", "need 1 <= k <= N"));
            }
            if self.threshold == 0 || self.threshold > self.committee {
                return Err(invalid("threshold", "need 1 <= k̄ <= k"));
            }
            if self.faults.offline_members as u64 > self.committee {
                return Err(invalid("faults.offline_members", "exceeds the committee size"));
            }
        } else if self.verifiers == 0 {
            return Err(invalid("verifiers", "must be at least 1"));
        }
        if let Some(bad) = self.faults.expired.iter().find(|id| **id >= self.population) {
            return Err(invalid("faults.expired", format!("subject {bad} is not in the population")));
        }

        let block_interval: T = to_scalar("timing.block_interval", self.timing.block_interval)?;
        if block_interval <= T::zero() {
            return Err(invalid("timing.block_interval", "must be positive"));
        }
        let propagation_delay = to_scalar("timing.propagation_delay", self.timing.propagation_delay)?;
        let submit_time = self
            .timing
            .submit_time
            .map(|t| to_scalar("timing.submit_time", t))
            .transpose()?;

        let base = match &self.channel.preset {
            Some(name) => Some(*preset(name).ok_or_else(|| invalid("channel.preset", format!("unknown preset {name:?}")))?),
            None => None,
        };
        let kind = match (self.channel.kind, base) {
            (Some(k), _) => k,
            (None, Some(p)) => p.kind,
            (None, None) => EndpointKind::Email,
        };
        let per_message_time = match (self.timing.per_message_time, base) {
            (Some(w), _) => to_scalar("timing.per_message_time", w)?,
            (None, Some(p)) => p.profile::<T>().per_message_time,
            (None, None) => return Err(invalid("timing.per_message_time", "required without a channel preset")),
        };
        let delivery_delay = match (self.timing.endpoint_delay, base) {
            (Some(e), _) => to_scalar("timing.endpoint_delay", e)?,
            (None, Some(p)) => p.profile::<T>().delivery_delay,
            (None, None) => return Err(invalid("timing.endpoint_delay", "required without a channel preset")),
        };
        let channel = ChannelProfile {
            per_message_time,
            delivery_delay,
            spoofable: self.channel.spoofable.or(base.map(|p| p.spoofable)).unwrap_or(false),
            eavesdroppable: self.channel.eavesdroppable.or(base.map(|p| p.eavesdroppable)).unwrap_or(false),
            cost_per_message: self.channel.cost_per_message.or(base.map(|p| p.cost_per_message)).unwrap_or(0.0),
        };
        channel.validate().map_err(|e| invalid("channel", e.to_string()))?;

        let adv = &self.adversary;
        if adv.corrupted_count > self.population {
            return Err(invalid("adversary.corrupted_count", "exceeds the population"));
        }
        if !(adv.cost_per_subject >= 0.0) {
            return Err(invalid("adversary.cost_per_subject", "must be a non-negative number"));
        }
        adv.strategy
            .check_protocol(self.protocol)
            .map_err(|e| invalid("adversary.strategy", e.to_string()))?;
        if adv.corruption == CorruptionMode::Explicit {
            adversary::choose_corrupted(self.population, &CorruptionRule::Explicit(adv.explicit.clone()), adv.corrupted_count)
                .map_err(|e| invalid("adversary.explicit", e.to_string()))?;
        }

        Ok(Resolved {
            params: ProtocolParams::new(self.committee, self.threshold).with_rule(self.selection),
            block_interval,
            propagation_delay,
            channel,
            kind,
            submit_time,
        })
    }

    fn corruption_rule(&self, trial_seed: u64) -> CorruptionRule {
        match self.adversary.corruption {
            CorruptionMode::First => CorruptionRule::First,
            CorruptionMode::Random => CorruptionRule::Random(trial_seed),
            CorruptionMode::Explicit => CorruptionRule::Explicit(self.adversary.explicit.clone()),
        }
    }
}

/// One trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub trial: u64,
    pub seed: u64,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub failure: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_wait: Option<f64>,
    pub endpoint_messages: usize,
    pub endpoint_cost: f64,
    /// Acceptances (P3), disclosures (P4) or answering verifiers (basic).
    pub evidence_count: usize,
    pub corrupted_in_committee: usize,
    pub duplicate_slots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_success: Option<bool>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Standard error of the mean.
fn std_error(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Some((var / values.len() as f64).sqrt())
}

fn proportion_error(successes: u64, n: u64) -> f64 {
    let p = successes as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: u64,
    pub certified: u64,
    pub certification_rate: f64,
    pub certification_std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_latency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_request_wait: Option<f64>,
    pub mean_endpoint_messages: f64,
    pub mean_endpoint_cost: f64,
    pub attack_runs: u64,
    pub attack_successes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_success_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_std_error: Option<f64>,
}

impl Aggregate {
    pub fn from_rows(rows: &[RunRow]) -> Self {
        let runs = rows.len() as u64;
        let certified = rows.iter().filter(|r| r.certified).count() as u64;
        let latencies: Vec<f64> = rows.iter().filter_map(|r| r.latency).collect();
        let waits: Vec<f64> = rows.iter().filter_map(|r| r.request_wait).collect();
        let messages: Vec<f64> = rows.iter().map(|r| r.endpoint_messages as f64).collect();
        let costs: Vec<f64> = rows.iter().map(|r| r.endpoint_cost).collect();
        let attacks: Vec<bool> = rows.iter().filter_map(|r| r.attack_success).collect();
        let attack_runs = attacks.len() as u64;
        let attack_successes = attacks.iter().filter(|s| **s).count() as u64;
        Self {
            runs,
            certified,
            certification_rate: certified as f64 / runs.max(1) as f64,
            certification_std_error: if runs > 0 { proportion_error(certified, runs) } else { 0.0 },
            mean_latency: mean(&latencies),
            latency_std_error: std_error(&latencies),
            mean_request_wait: mean(&waits),
            mean_endpoint_messages: mean(&messages).unwrap_or(0.0),
            mean_endpoint_cost: mean(&costs).unwrap_or(0.0),
            attack_runs,
            attack_successes,
            attack_success_rate: (attack_runs > 0).then(|| attack_successes as f64 / attack_runs as f64),
            attack_std_error: (attack_runs > 0).then(|| proportion_error(attack_successes, attack_runs)),
        }
    }
}

/// Closed-form reference values for the scenario, where they apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// Attack success probability from the hypergeometric tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_probability: Option<f64>,
    /// c · m for one period.
    pub attack_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub aggregate: Aggregate,
    pub expected: Expected,
    pub rows: Vec<RunRow>,
}

impl MetricsReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn write_rows_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Submission time of a trial: fixed, or uniform over `[b, 2b)` on a
/// grid of 10^6 points.
fn submit_time<T: Scalar>(resolved: &Resolved<T>, trial_seed: u64) -> T {
    resolved.submit_time.unwrap_or_else(|| {
        const GRID: u64 = 1_000_000;
        let u = T::from_ratio((trial_seed % GRID) as i64, GRID as i64);
        resolved.block_interval + u * resolved.block_interval
    })
}

/// Execute every trial of `config` with scalar type `T`.
pub fn run_scenario<T: Scalar>(config: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    let resolved = config.resolve::<T>()?;
    let rows = if config.protocol.is_decentralized() {
        run_decentralized(config, &resolved)?
    } else {
        run_basic(config, &resolved)?
    };
    let params = config.security_params();
    let attack_probability = match config.adversary.strategy {
        Strategy::MiscertifyAccept | Strategy::MiscertifyDisclose => analysis::p_exact(&params).ok(),
        Strategy::DosSilence => analysis::p_dos(&params).ok(),
        Strategy::None | Strategy::Spoof | Strategy::Eavesdrop => None,
    };
    let cost = adversary::attack_cost(
        &adversary::AdversaryConfig {
            corrupted_count: config.adversary.corrupted_count,
            cost_per_subject: config.adversary.cost_per_subject,
            strategy: config.adversary.strategy,
            target_request: None,
        },
        1,
    );
    Ok(MetricsReport {
        protocol: config.protocol,
        seed: config.seed,
        aggregate: Aggregate::from_rows(&rows),
        expected: Expected {
            attack_probability,
            attack_cost: cost,
        },
        rows,
    })
}

fn world<T: Scalar>(config: &ScenarioConfig, resolved: &Resolved<T>) -> Result<(Population, Genesis<T>), ScenarioError> {
    let population = Population::generate(config.population, config.seed, resolved.kind);
    let mut genesis = population.genesis(resolved.params, resolved.block_interval, resolved.propagation_delay)?;
    for id in &config.faults.expired {
        genesis
            .registry
            .expire(*id)
            .map_err(|e| invalid("faults.expired", e.to_string()))?;
    }
    Ok((population, genesis))
}

fn trial_config<T: Scalar>(config: &ScenarioConfig, resolved: &Resolved<T>, trial: u64) -> Result<RunConfig<T>, ScenarioError> {
    let seed = analysis::trial_seed(config.seed, trial);
    let corrupted = if config.adversary.strategy == Strategy::None {
        BTreeSet::new()
    } else {
        adversary::choose_corrupted(config.population, &config.corruption_rule(seed), config.adversary.corrupted_count)
            .map_err(SimError::from)?
    };
    Ok(RunConfig {
        protocol: config.protocol,
        channel: resolved.channel,
        submit_time: submit_time(resolved, seed),
        deadline_blocks: config.deadline_blocks,
        subject_online: config.faults.subject_online,
        offline_members: config.faults.offline_members,
        early_disclosers: config.faults.early_disclosers,
        strategy: config.adversary.strategy,
        corrupted,
        seed,
    })
}

/// Re-execute one trial of a P3/P4 scenario and keep its full state
/// (ledger, registry, channel) for inspection.
pub fn replay_trial<T: Scalar>(config: &ScenarioConfig, trial: u64) -> Result<RunOutcome<T>, ScenarioError> {
    if !config.protocol.is_decentralized() {
        return Err(invalid("protocol", "only p3 and p4 runs have a chain to replay"));
    }
    let resolved = config.resolve::<T>()?;
    let (population, genesis) = world(config, &resolved)?;
    Ok(engine::run(&population, &genesis, &trial_config(config, &resolved, trial)?)?)
}

fn run_decentralized<T: Scalar>(config: &ScenarioConfig, resolved: &Resolved<T>) -> Result<Vec<RunRow>, ScenarioError> {
    let (population, genesis) = world(config, resolved)?;
    let mut rows = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        let run = trial_config(config, resolved, trial)?;
        let seed = run.seed;
        let m = engine::run(&population, &genesis, &run)?.metrics;
        rows.push(RunRow {
            trial,
            seed,
            certified: m.certified,
            failure: m.failure.unwrap_or_default(),
            latency: m.latency.map(Scalar::to_f64_lossy),
            request_wait: m.request_wait.map(Scalar::to_f64_lossy),
            endpoint_messages: m.endpoint_messages,
            endpoint_cost: m.endpoint_cost,
            evidence_count: m.evidence_count,
            corrupted_in_committee: m.corrupted_in_committee,
            duplicate_slots: m.duplicate_slots,
            attack_success: m.attack.map(|a| a.success),
        });
    }
    Ok(rows)
}

fn run_basic<T: Scalar>(config: &ScenarioConfig, resolved: &Resolved<T>) -> Result<Vec<RunRow>, ScenarioError> {
    let role = match (config.faults.subject_online, config.adversary.strategy) {
        (_, Strategy::Spoof) => BasicRole::Spoofer,
        (_, Strategy::Eavesdrop) => BasicRole::Eavesdropper,
        (false, _) => BasicRole::Offline,
        (true, _) => BasicRole::Owner,
    };
    let attacked = matches!(role, BasicRole::Spoofer | BasicRole::Eavesdropper);
    let endpoint = EndpointAddress::new(resolved.kind, "endpoint");
    let mut rows = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        let seed = analysis::trial_seed(config.seed, trial);
        let cfg = BasicConfig {
            channel: resolved.channel,
            endpoint: endpoint.clone(),
            verifiers: config.verifiers,
            role,
            start: resolved.submit_time.unwrap_or_else(T::zero),
            seed,
        };
        let out = match config.protocol {
            Protocol::Basic1 => run_basic_p1(&cfg)?,
            _ => run_basic_p2(&cfg)?,
        };
        let m = out.metrics;
        rows.push(RunRow {
            trial,
            seed,
            certified: m.verified,
            failure: m.failure.unwrap_or_default(),
            latency: m.latency.map(Scalar::to_f64_lossy),
            request_wait: None,
            endpoint_messages: m.endpoint_messages,
            endpoint_cost: m.endpoint_cost,
            evidence_count: m.accepted_by,
            corrupted_in_committee: 0,
            duplicate_slots: 0,
            attack_success: attacked.then_some(m.miscertified),
        });
    }
    Ok(rows)
}

/// A sweep axis: a single value, an explicit list, or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid<V> {
    One(V),
    List(Vec<V>),
    Range { start: V, end: V, step: V },
}

pub trait GridValue: Copy + Sized {
    fn range(start: Self, end: Self, step: Self) -> Option<Vec<Self>>;
}

impl GridValue for u64 {
    fn range(start: u64, end: u64, step: u64) -> Option<Vec<u64>> {
        (step > 0).then(|| (start..=end).step_by(step as usize).collect())
    }
}

impl GridValue for f64 {
    fn range(start: f64, end: f64, step: f64) -> Option<Vec<f64>> {
        if !(step > 0.0) || !start.is_finite() || !end.is_finite() {
            return None;
        }
        let n = ((end - start) / step + 1e-9).floor();
        (n >= 0.0).then(|| (0..=n as u64).map(|i| start + i as f64 * step).collect())
    }
}

impl<V: GridValue> Grid<V> {
    pub fn values(&self, field: &'static str) -> Result<Vec<V>, ScenarioError> {
        let v = match self {
            Grid::One(x) => vec![*x],
            Grid::List(xs) => xs.clone(),
            Grid::Range { start, end, step } => {
                V::range(*start, *end, *step).ok_or_else(|| invalid(field, "range step must be positive"))?
            }
        };
        if v.is_empty() {
            return Err(invalid(field, "grid is empty"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySweep {
    pub population: Grid<u64>,
    pub committee: Grid<u64>,
    pub threshold: Grid<u64>,
    pub corrupted: Grid<u64>,
    /// Monte Carlo trials per grid point; 0 skips the estimate.
    #[serde(default)]
    pub montecarlo_trials: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSweep {
    pub block_interval: Grid<f64>,
    pub propagation_delay: Grid<f64>,
    pub request_wait: Grid<f64>,
    pub endpoint_delay: Grid<f64>,
    pub per_message_time: Grid<f64>,
    pub committee: Grid<u64>,
    pub verifiers: Grid<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub security: Option<SecuritySweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSweep>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let spec: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if spec.security.is_none() && spec.timing.is_none() {
            return Err(invalid("security", "a sweep needs a security or a timing grid"));
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep serializes")
    }
}

/// One CSV line of a sweep. Columns that do not apply stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: String,
    pub population: Option<u64>,
    pub committee: Option<u64>,
    pub threshold: Option<u64>,
    pub corrupted: Option<u64>,
    pub p_exact: Option<f64>,
    pub p_dos: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub block_interval: Option<String>,
    pub propagation_delay: Option<String>,
    pub request_wait: Option<String>,
    pub endpoint_delay: Option<String>,
    pub per_message_time: Option<String>,
    pub verifiers: Option<u64>,
    pub latency_basic: Option<String>,
    pub latency_p3: Option<String>,
    pub latency_p4: Option<String>,
    pub basic_messages: Option<u64>,
    pub decentralized_messages: Option<u64>,
    pub warning: Option<String>,
}

/// Evaluate every grid point; `trials` and `seed` override the spec's
/// Monte Carlo settings when given.
pub fn sweep_rows<T: Scalar>(
    spec: &SweepSpec,
    trials: Option<u64>,
    seed: Option<u64>,
) -> Result<Vec<SweepRow>, ScenarioError> {
    let mut rows = Vec::new();
    if let Some(s) = &spec.security {
        let trials = trials.unwrap_or(s.montecarlo_trials);
        let seed = seed.unwrap_or(s.seed);
        for n in s.population.values("security.population")? {
            for k in s.committee.values("security.committee")? {
                for t in s.threshold.values("security.threshold")? {
                    for m in s.corrupted.values("security.corrupted")? {
                        let params = SecurityParams::new(n, k, t, m);
                        let mut row = SweepRow {
                            kind: "security".into(),
                            population: Some(n),
                            committee: Some(k),
                            threshold: Some(t),
                            corrupted: Some(m),
                            ..Default::default()
                        };
                        match params.validate() {
                            Err(e) => row.warning = Some(format!("skipped: {e}")),
                            Ok(()) => {
                                row.p_exact = Some(analysis::p_exact(&params).expect("validated"));
                                row.p_dos = Some(analysis::p_dos(&params).expect("validated"));
                                if trials > 0 {
                                    let point_seed = analysis::trial_seed(seed, rows.len() as u64);
                                    let mc = analysis::p_montecarlo(&params, trials, point_seed).expect("validated");
                                    row.mc_estimate = Some(mc.estimate);
                                    row.mc_std_error = Some(mc.std_error);
                                }
                            }
                        }
                        rows.push(row);
                    }
                }
            }
        }
    }
    if let Some(g) = &spec.timing {
        for b in g.block_interval.values("timing.block_interval")? {
            for p in g.propagation_delay.values("timing.propagation_delay")? {
                for w in g.request_wait.values("timing.request_wait")? {
                    for e in g.endpoint_delay.values("timing.endpoint_delay")? {
                        for mt in g.per_message_time.values("timing.per_message_time")? {
                            for k in g.committee.values("timing.committee")? {
                                for v in g.verifiers.values("timing.verifiers")? {
                                    rows.push(timing_row::<T>([b, p, w, e, mt], k, v));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn timing_row<T: Scalar>([b, p, w, e, mt]: [f64; 5], k: u64, v: u64) -> SweepRow {
    let mut row = SweepRow {
        kind: "timing".into(),
        committee: Some(k),
        block_interval: Some(b.to_string()),
        propagation_delay: Some(p.to_string()),
        request_wait: Some(w.to_string()),
        endpoint_delay: Some(e.to_string()),
        per_message_time: Some(mt.to_string()),
        verifiers: Some(v),
        ..Default::default()
    };
    let convert = |x: f64| T::from_config(x).ok_or(());
    let timing = match (convert(b), convert(p), convert(w), convert(e), convert(mt)) {
        (Ok(b), Ok(p), Ok(w), Ok(e), Ok(mt)) => TimingParams {
            block_interval: b,
            propagation_delay: p,
            request_wait: w,
            endpoint_delay: e,
            per_message_time: mt,
            verifier_count: v,
        },
        _ => {
            row.warning = Some("skipped: value not representable".into());
            return row;
        }
    };
    let security = SecurityParams::new(k.max(1), k, k.max(1), 0);
    match analysis::compare(&timing, &security, v) {
        Err(err) => row.warning = Some(format!("skipped: {err}")),
        Ok(c) => {
            row.latency_basic = Some(c.latency_basic.to_string());
            row.latency_p3 = Some(c.latency_p3.to_string());
            row.latency_p4 = Some(c.latency_p4.to_string());
            row.basic_messages = Some(c.basic_messages);
            row.decentralized_messages = Some(c.decentralized_messages);
        }
    }
    row
}

/// Run a sweep and write it as CSV. Returns the number of rows.
pub fn run_analysis<T: Scalar, W: io::Write>(
    spec: &SweepSpec,
    trials: Option<u64>,
    seed: Option<u64>,
    out: W,
) -> Result<usize, ScenarioError> {
    let rows = sweep_rows::<T>(spec, trials, seed)?;
    let mut w = csv::Writer::from_writer(out);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    const P3: &str = r#"
protocol = "p3"
population = 30
committee = 3
threshold = 3
seed = 4
trials = 3

[timing]
block_interval = 10.0
propagation_delay = 1.0
endpoint_delay = 2.0
per_message_time = 1.0

[channel]
preset = "web"
"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = ScenarioConfig::from_toml(P3).unwrap();
        assert_eq!(cfg.deadline_blocks, 10);
        assert_eq!(cfg.adversary.strategy, Strategy::None);
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = P3.replace("threshold = 3", "threshold = 4");
        let err = ScenarioConfig::from_toml(&bad).unwrap().resolve::<f64>().unwrap_err();
        assert!(err.to_string().contains("`threshold`"), "{err}");
        let bad = P3.replace("\"web\"", "\"carrier_pigeon\"");
        let err = ScenarioConfig::from_toml(&bad).unwrap().resolve::<f64>().unwrap_err();
        assert!(err.to_string().contains("channel.preset"), "{err}");
        let bad = P3.replace("trials = 3", "trials = 3\nwhatever = 1");
        assert!(matches!(ScenarioConfig::from_toml(&bad), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn honest_p3_rows_and_aggregate() {
        let cfg = ScenarioConfig::from_toml(P3).unwrap();
        let report = run_scenario::<f64>(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.certified && r.endpoint_messages == 3));
        assert_eq!(report.aggregate, Aggregate::from_rows(&report.rows));
        assert_eq!(report.to_toml(), run_scenario::<f64>(&cfg).unwrap().to_toml());
    }

    #[test]
    fn grids_expand() {
        assert_eq!(Grid::Range { start: 0u64, end: 10, step: 5 }.values("x").unwrap(), vec![0, 5, 10]);
        assert_eq!(Grid::One(3u64).values("x").unwrap(), vec![3]);
        assert!(Grid::<u64>::List(vec![]).values("x").is_err());
        assert!(Grid::Range { start: 0u64, end: 10, step: 0 }.values("x").is_err());
        assert_eq!(
            Grid::Range { start: 0.5, end: 1.5, step: 0.5 }.values("x").unwrap(),
            vec![0.5, 1.0, 1.5]
        );
    }

    #[test]
    fn invalid_grid_points_become_warnings() {
        let spec = SweepSpec::from_toml(
            r#"
[security]
population = 10
committee = 4
threshold = [2, 5]
corrupted = 3
"#,
        )
        .unwrap();
        let rows = sweep_rows::<f64>(&spec, None, None).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].warning.is_none() && rows[0].p_exact.is_some());
        assert!(rows[1].warning.as_deref().unwrap().starts_with("skipped"));
    }
}
