//! Simulated endpoint communication technology.
//!
//! A message occupies both its sending and its receiving endpoint for
//! `per_message_time` (W), then arrives `delivery_delay` (e) later. Back to
//! back messages through one endpoint therefore complete at `e + kW`,
//! whichever side of the exchange the endpoint is on.

use std::collections::HashMap;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    PhoneSms,
    PhoneIvr,
    Postal,
    Email,
    Ip,
    Web,
    Dns,
    Bank,
}

impl EndpointKind {
    pub const ALL: [EndpointKind; 8] = [
        EndpointKind::PhoneSms,
        EndpointKind::PhoneIvr,
        EndpointKind::Postal,
        EndpointKind::Email,
        EndpointKind::Ip,
        EndpointKind::Web,
        EndpointKind::Dns,
        EndpointKind::Bank,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EndpointKind::PhoneSms => "phone_sms",
            EndpointKind::PhoneIvr => "phone_ivr",
            EndpointKind::Postal => "postal",
            EndpointKind::Email => "email",
            EndpointKind::Ip => "ip",
            EndpointKind::Web => "web",
            EndpointKind::Dns => "dns",
            EndpointKind::Bank => "bank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndpointAddress {
    pub kind: EndpointKind,
    pub address: String,
}

impl EndpointAddress {
    pub fn new(kind: EndpointKind, address: impl Into<String>) -> Self {
        Self {
            kind,
            address: address.into(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.address.len());
        out.push(self.kind.tag());
        out.extend_from_slice(self.address.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let (&tag, rest) = bytes.split_first()?;
        Some(Self {
            kind: EndpointKind::from_tag(tag)?,
            address: String::from_utf8(rest.to_vec()).ok()?,
        })
    }
}

impl fmt::Display for EndpointAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.address)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("per-message time must be positive")]
    NonPositiveMessageTime,
    #[error("delivery delay must be non-negative")]
    NegativeDelay,
    #[error("cost per message must be a non-negative number")]
    BadCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile<T> {
    pub per_message_time: T,
    pub delivery_delay: T,
    pub spoofable: bool,
    pub eavesdroppable: bool,
    pub cost_per_message: f64,
}

impl<T: Scalar> ChannelProfile<T> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.per_message_time.is_well_formed() || self.per_message_time <= T::zero() {
            return Err(ChannelError::NonPositiveMessageTime);
        }
        if !self.delivery_delay.is_well_formed() || self.delivery_delay < T::zero() {
            return Err(ChannelError::NegativeDelay);
        }
        if !(self.cost_per_message >= 0.0 && self.cost_per_message.is_finite()) {
            return Err(ChannelError::BadCost);
        }
        Ok(())
    }
}

/// Default parameters per endpoint technology.
///
/// Security flags follow the qualitative attack-difficulty ratings: a "low"
/// spoofing difficulty makes the preset spoofable, a "medium" eavesdropping
/// difficulty makes it eavesdroppable. Timings (seconds) and costs are
/// illustrative defaults only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub kind: EndpointKind,
    pub message: &'static str,
    /// W as `(numerator, denominator)`.
    pub per_message_time: (i64, i64),
    /// e as `(numerator, denominator)`.
    pub delivery_delay: (i64, i64),
    pub spoofable: bool,
    pub eavesdroppable: bool,
    pub cost_per_message: f64,
    pub suggested: &'static str,
}

impl Preset {
    pub fn profile<T: Scalar>(&self) -> ChannelProfile<T> {
        ChannelProfile {
            per_message_time: T::from_ratio(self.per_message_time.0, self.per_message_time.1),
            delivery_delay: T::from_ratio(self.delivery_delay.0, self.delivery_delay.1),
            spoofable: self.spoofable,
            eavesdroppable: self.eavesdroppable,
            cost_per_message: self.cost_per_message,
        }
    }
}

pub const PRESETS: [Preset; 8] = [
    Preset {
        name: "phone_sms",
        kind: EndpointKind::PhoneSms,
        message: "SMS",
        per_message_time: (1, 1),
        delivery_delay: (5, 1),
        spoofable: false,
        eavesdroppable: true,
        cost_per_message: 0.05,
        suggested: "P3",
    },
    Preset {
        name: "phone_ivr",
        kind: EndpointKind::PhoneIvr,
        message: "phone call with IVR",
        per_message_time: (60, 1),
        delivery_delay: (10, 1),
        spoofable: false,
        eavesdroppable: true,
        cost_per_message: 0.2,
        suggested: "P3",
    },
    Preset {
        name: "postal",
        kind: EndpointKind::Postal,
        message: "letter",
        per_message_time: (60, 1),
        delivery_delay: (172_800, 1),
        spoofable: true,
        eavesdroppable: true,
        cost_per_message: 1.0,
        suggested: "P4",
    },
    Preset {
        name: "email",
        kind: EndpointKind::Email,
        message: "email",
        per_message_time: (1, 8),
        delivery_delay: (2, 1),
        spoofable: true,
        eavesdroppable: true,
        cost_per_message: 0.0,
        suggested: "P4",
    },
    Preset {
        name: "ip",
        kind: EndpointKind::Ip,
        message: "IP packet",
        per_message_time: (1, 1024),
        delivery_delay: (1, 16),
        spoofable: true,
        eavesdroppable: true,
        cost_per_message: 0.0,
        suggested: "P4",
    },
    Preset {
        name: "web",
        kind: EndpointKind::Web,
        message: "page change / HTTP request",
        per_message_time: (1, 2),
        delivery_delay: (1, 1),
        spoofable: false,
        eavesdroppable: true,
        cost_per_message: 0.0,
        suggested: "P3",
    },
    Preset {
        name: "dns",
        kind: EndpointKind::Dns,
        message: "DNS response",
        per_message_time: (1, 1),
        delivery_delay: (300, 1),
        spoofable: false,
        eavesdroppable: false,
        cost_per_message: 0.0,
        suggested: "P3",
    },
    Preset {
        name: "bank",
        kind: EndpointKind::Bank,
        message: "bank transfer description",
        per_message_time: (10, 1),
        delivery_delay: (86_400, 1),
        spoofable: false,
        eavesdroppable: false,
        cost_per_message: 0.5,
        suggested: "P3 or P4",
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub type MessageId = usize;
/// Identifies an adversary tapping or spoofing on the channel.
pub type ObserverId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMessage<T> {
    pub id: MessageId,
    pub from: EndpointAddress,
    pub to: EndpointAddress,
    pub payload: Vec<u8>,
    pub sent_at: T,
    /// Start of the endpoint occupancy interval `[start, start + W)`.
    pub start: T,
    pub delivered_at: T,
    pub spoofed: bool,
}

/// A scheduled arrival, plus the observers that get a copy of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery<T> {
    pub message: MessageId,
    pub delivered_at: T,
    pub taps: Vec<ObserverId>,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum Refusal {
    #[error("channel does not allow spoofing the sender address")]
    NotSpoofable,
    #[error("channel does not allow eavesdropping on the endpoint")]
    NotEavesdroppable,
}

#[derive(Debug, Clone)]
pub struct ChannelState<T> {
    profile: ChannelProfile<T>,
    busy_until: HashMap<EndpointAddress, T>,
    spoofer_busy_until: HashMap<ObserverId, T>,
    taps: HashMap<EndpointAddress, Vec<ObserverId>>,
    messages: Vec<ChannelMessage<T>>,
    cost: f64,
}

impl<T: Scalar> ChannelState<T> {
    pub fn new(profile: ChannelProfile<T>) -> Result<Self, ChannelError> {
        profile.validate()?;
        Ok(Self {
            profile,
            busy_until: HashMap::new(),
            spoofer_busy_until: HashMap::new(),
            taps: HashMap::new(),
            messages: Vec::new(),
            cost: 0.0,
        })
    }

    pub fn profile(&self) -> &ChannelProfile<T> {
        &self.profile
    }

    pub fn send(&mut self, from: EndpointAddress, to: EndpointAddress, payload: Vec<u8>, now: T) -> Delivery<T> {
        let mut start = now;
        for endpoint in [&from, &to] {
            if let Some(&busy) = self.busy_until.get(endpoint) {
                if busy > start {
                    start = busy;
                }
            }
        }
        let end = start + self.profile.per_message_time;
        self.busy_until.insert(from.clone(), end);
        self.busy_until.insert(to.clone(), end);
        self.record(from, to, payload, now, start, false)
    }

    /// Inject a message that claims to come from `claimed_from`. Uses the
    /// adversary's own transmitter, so honest endpoints stay untouched.
    pub fn attempt_spoof(
        &mut self,
        adversary: ObserverId,
        claimed_from: EndpointAddress,
        to: EndpointAddress,
        payload: Vec<u8>,
        now: T,
    ) -> Result<Delivery<T>, Refusal> {
        if !self.profile.spoofable {
            return Err(Refusal::NotSpoofable);
        }
        let busy = self.spoofer_busy_until.entry(adversary).or_insert(now);
        let start = if *busy > now { *busy } else { now };
        *busy = start + self.profile.per_message_time;
        Ok(self.record(claimed_from, to, payload, now, start, true))
    }

    /// Subscribe `adversary` to copies of everything later delivered to `target`.
    pub fn attempt_eavesdrop(&mut self, adversary: ObserverId, target: &EndpointAddress) -> Result<(), Refusal> {
        if !self.profile.eavesdroppable {
            return Err(Refusal::NotEavesdroppable);
        }
        let observers = self.taps.entry(target.clone()).or_default();
        if !observers.contains(&adversary) {
            observers.push(adversary);
        }
        Ok(())
    }

    fn record(
        &mut self,
        from: EndpointAddress,
        to: EndpointAddress,
        payload: Vec<u8>,
        sent_at: T,
        start: T,
        spoofed: bool,
    ) -> Delivery<T> {
        let delivered_at = start + self.profile.per_message_time + self.profile.delivery_delay;
        let id = self.messages.len();
        let taps = self.taps.get(&to).cloned().unwrap_or_default();
        self.cost += self.profile.cost_per_message;
        self.messages.push(ChannelMessage {
            id,
            from,
            to,
            payload,
            sent_at,
            start,
            delivered_at,
            spoofed,
        });
        Delivery {
            message: id,
            delivered_at,
            taps,
        }
    }

    pub fn message(&self, id: MessageId) -> Option<&ChannelMessage<T>> {
        self.messages.get(id)
    }

    pub fn messages(&self) -> &[ChannelMessage<T>] {
        &self.messages
    }

    /// Genuine (non-spoofed) messages sent from or delivered to `endpoint`.
    pub fn endpoint_message_count(&self, endpoint: &EndpointAddress) -> usize {
        self.messages
            .iter()
            .filter(|m| !m.spoofed && (&m.from == endpoint || &m.to == endpoint))
            .count()
    }

    pub fn endpoint_cost(&self, endpoint: &EndpointAddress) -> f64 {
        self.endpoint_message_count(endpoint) as f64 * self.profile.cost_per_message
    }

    pub fn total_cost(&self) -> f64 {
        self.cost
    }

    /// CSV trace: one row per message.
    pub fn write_trace<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sent_at", "delivered_at", "from", "to", "size", "spoofed"])?;
        for m in &self.messages {
            w.write_record([
                m.sent_at.to_string(),
                m.delivered_at.to_string(),
                m.from.to_string(),
                m.to.to_string(),
                m.payload.len().to_string(),
                m.spoofed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
