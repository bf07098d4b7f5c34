#![allow(dead_code)]

use epcert::channel::{ChannelProfile, EndpointKind};
use epcert::committee::SelectionRule;
use epcert::protocol::{Genesis, Population, Protocol, RunConfig};
use epcert::registry::ProtocolParams;
use epcert::Rational64;
use num_bigint::BigInt;
use num_rational::BigRational;

pub fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

pub fn rq(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

pub fn profile(w: Rational64, e: Rational64, spoofable: bool, eavesdroppable: bool) -> ChannelProfile<Rational64> {
    ChannelProfile {
        per_message_time: w,
        delivery_delay: e,
        spoofable,
        eavesdroppable,
        cost_per_message: 1.0,
    }
}

/// Private, non-spoofable channel with W=1, e=2.
pub fn closed() -> ChannelProfile<Rational64> {
    profile(r(1), r(2), false, false)
}

pub struct World {
    pub population: Population,
    pub genesis: Genesis<Rational64>,
}

pub fn world(n: u64, k: u64, threshold: u64, b: Rational64, p: Rational64) -> World {
    world_with_rule(n, k, threshold, b, p, SelectionRule::Distinct)
}

pub fn world_with_rule(n: u64, k: u64, threshold: u64, b: Rational64, p: Rational64, rule: SelectionRule) -> World {
    let population = Population::generate(n, 11, EndpointKind::Email);
    let genesis = population
        .genesis(ProtocolParams::new(k, threshold).with_rule(rule), b, p)
        .unwrap();
    World { population, genesis }
}

pub fn honest(protocol: Protocol, channel: ChannelProfile<Rational64>, submit: Rational64, seed: u64) -> RunConfig<Rational64> {
    RunConfig::honest(protocol, channel, submit, seed)
}

/// Count, over every k-subset of {0..N}, those holding ≥ k̄ of {0..m}.
pub fn enumerate(n: u64, k: u64, threshold: u64, m: u64) -> BigRational {
    fn walk(next: u64, left: u64, bad: u64, n: u64, m: u64, threshold: u64, hits: &mut u64, total: &mut u64) {
        if left == 0 {
            *total += 1;
            if bad >= threshold {
                *hits += 1;
            }
            return;
        }
        for i in next..n {
            if n - i < left {
                break;
            }
            walk(i + 1, left - 1, bad + (i < m) as u64, n, m, threshold, hits, total);
        }
    }
    let (mut hits, mut total) = (0, 0);
    walk(0, k, 0, n, m, threshold, &mut hits, &mut total);
    BigRational::new(BigInt::from(hits), BigInt::from(total))
}
