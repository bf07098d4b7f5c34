//! Distributional checks on key generation, digest reduction and sortition.

use std::collections::HashSet;

use epcert::committee::{self, SelectionRule};
use epcert::crypto::{self, Digest};

/// Upper `z`-quantile of χ²(df), Wilson–Hilferty approximation.
fn chi2_critical(df: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

fn chi2(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

fn block_hash(i: u64) -> Digest {
    crypto::digest(&[b"block".as_slice(), &i.to_be_bytes()]).unwrap()
}

#[test]
fn distinct_seeds_give_distinct_keys() {
    let mut keys = HashSet::new();
    for i in 0..10_000u32 {
        let kp = crypto::generate_keypair(&i.to_be_bytes()).unwrap();
        assert!(keys.insert(kp.public()));
    }
}

#[test]
fn digest_reduction_is_uniform() {
    let n = 97;
    let mut counts = vec![0u64; n as usize];
    for i in 0..100_000u64 {
        let d = crypto::digest(&[i.to_be_bytes()]).unwrap();
        counts[crypto::index_from_digest(&d, n).unwrap() as usize] += 1;
    }
    let stat = chi2(&counts);
    assert!(stat < chi2_critical(96.0, 3.09), "chi2 = {stat}");
}

#[test]
fn single_member_committees_are_uniform() {
    let n = 50;
    let mut counts = vec![0u64; n as usize];
    for i in 0..10_000u64 {
        let req = i.to_be_bytes();
        let c = committee::select(&req, &block_hash(i), n, 1, SelectionRule::Distinct).unwrap();
        counts[c.members()[0] as usize] += 1;
    }
    let stat = chi2(&counts);
    assert!(stat < chi2_critical(49.0, 3.09), "chi2 = {stat}");
}

#[test]
fn duplicate_rate_follows_the_birthday_bound() {
    let (n, k, trials) = (1000u64, 20u64, 10_000u64);
    // P(no repeat) = Π (1 − i/N)
    let expected = 1.0 - (0..k).map(|i| 1.0 - i as f64 / n as f64).product::<f64>();
    assert!((committee::duplicate_probability(n, k) - expected).abs() < 1e-12);
    let hits = (0..trials)
        .filter(|&i| {
            let c = committee::select(&i.to_be_bytes(), &block_hash(i), n, k, SelectionRule::WithReplacement).unwrap();
            c.duplicate_count() > 0
        })
        .count() as f64;
    let rate = hits / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    assert!((rate - expected).abs() < 3.0 * sigma, "rate {rate}, expected {expected}");
}

#[test]
fn distinct_committees_never_repeat_members() {
    for i in 0..2_000u64 {
        let c = committee::select(&i.to_be_bytes(), &block_hash(i), 30, 12, SelectionRule::Distinct).unwrap();
        assert_eq!(c.distinct_members().len(), 12);
        assert_eq!(c.duplicate_count(), 0);
    }
}
