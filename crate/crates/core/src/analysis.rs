//! Attack probabilities and latency / message-count formulas.
//!
//! `p(m)` is the chance that a uniformly chosen `k`-subset of `N` subjects
//! contains at least `k̄` of the `m` corrupted ones. The tail is summed with
//! big integers and only converted to a float at the very end.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crypto;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("need 1 <= threshold <= committee size <= population (got k̄={threshold}, k={committee}, N={population})")]
    BadCommittee {
        threshold: u64,
        committee: u64,
        population: u64,
    },
    #[error("corrupted count {corrupted} exceeds population {population}")]
    TooManyCorrupted { corrupted: u64, population: u64 },
    #[error("timing: {0}")]
    Timing(&'static str),
    #[error("at least one trial is needed")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SecurityParams {
    /// N
    pub population: u64,
    /// k
    pub committee_size: u64,
    /// k̄
    pub threshold: u64,
    /// m
    pub corrupted: u64,
}

impl SecurityParams {
    pub fn new(population: u64, committee_size: u64, threshold: u64, corrupted: u64) -> Self {
        Self {
            population,
            committee_size,
            threshold,
            corrupted,
        }
    }

    /// α = k̄ / k
    pub fn alpha(&self) -> f64 {
        self.threshold as f64 / self.committee_size as f64
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.threshold == 0 || self.threshold > self.committee_size || self.committee_size > self.population {
            return Err(AnalysisError::BadCommittee {
                threshold: self.threshold,
                committee: self.committee_size,
                population: self.population,
            });
        }
        if self.corrupted > self.population {
            return Err(AnalysisError::TooManyCorrupted {
                corrupted: self.corrupted,
                population: self.population,
            });
        }
        Ok(())
    }

    /// Parameters whose miscertification tail is the DoS probability:
    /// blocking needs `k − k̄ + 1` corrupted members.
    pub fn dos_dual(&self) -> Self {
        Self {
            threshold: self.committee_size - self.threshold + 1,
            ..*self
        }
    }
}

/// C(n, r), zero when `r > n`.
pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Σ_{i=k̄}^{k} C(m,i)·C(N−m,k−i) / C(N,k), exactly.
pub fn p_exact_ratio(params: &SecurityParams) -> Result<BigRational, AnalysisError> {
    params.validate()?;
    let SecurityParams {
        population: n,
        committee_size: k,
        threshold: t,
        corrupted: m,
    } = *params;
    let honest = n - m;
    let lo = t.max(k.saturating_sub(honest));
    let hi = k.min(m);
    let mut sum = BigUint::zero();
    if lo <= hi {
        // walk the terms with the ratio term(i+1)/term(i); every partial
        // product is an integer, so the divisions are exact
        let mut term = binomial(m, lo) * binomial(honest, k - lo);
        for i in lo..=hi {
            sum += &term;
            if i < hi {
                term *= (m - i) * (k - i);
                term /= (i + 1) * (honest + i + 1 - k);
            }
        }
    }
    Ok(BigRational::new(sum.into(), binomial(n, k).into()))
}

/// [`p_exact_ratio`] as a float.
pub fn p_exact(params: &SecurityParams) -> Result<f64, AnalysisError> {
    Ok(ratio_to_f64(&p_exact_ratio(params)?))
}

/// Probability that `m` corrupted subjects block an honest request:
/// fewer than `k̄` honest responders remain.
pub fn p_dos(params: &SecurityParams) -> Result<f64, AnalysisError> {
    params.validate()?;
    p_exact(&params.dos_dual())
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    // scale so both parts fit a float even for huge binomials
    let shift = r.denom().bits().saturating_sub(1000) as usize;
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Seed for trial `index` of a run seeded with `master`; independent of
/// how trials are scheduled.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let d = crypto::digest(&[b"trial".as_slice(), &master.to_be_bytes(), &index.to_be_bytes()])
        .expect("non-empty input");
    u64::from_be_bytes(d.0[..8].try_into().expect("eight bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    /// sqrt(p̂(1−p̂)/n)
    pub std_error: f64,
}

impl MonteCarlo {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let estimate = successes as f64 / trials as f64;
        Self {
            trials,
            successes,
            estimate,
            std_error: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
        }
    }

    /// Whether `p` lies within `z` binomial standard deviations of the
    /// estimate, using `p` itself for the deviation.
    pub fn agrees_with(&self, p: f64, z: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials as f64).sqrt();
        (self.estimate - p).abs() <= z * sigma + f64::EPSILON
    }
}

/// Sample committees without replacement; corrupted subjects are `0..m`.
pub fn p_montecarlo(params: &SecurityParams, trials: u64, seed: u64) -> Result<MonteCarlo, AnalysisError> {
    params.validate()?;
    if trials == 0 {
        return Err(AnalysisError::NoTrials);
    }
    let n = params.population as usize;
    let k = params.committee_size as usize;
    let successes = (0..trials)
        .filter(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i));
            let bad = index::sample(&mut rng, n, k)
                .into_iter()
                .filter(|&j| (j as u64) < params.corrupted)
                .count();
            bad as u64 >= params.threshold
        })
        .count() as u64;
    Ok(MonteCarlo::from_counts(successes, trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingParams<T> {
    /// b
    pub block_interval: T,
    /// p
    pub propagation_delay: T,
    /// b̄
    pub request_wait: T,
    /// e
    pub endpoint_delay: T,
    /// W
    pub per_message_time: T,
    /// v
    pub verifier_count: u64,
}

impl<T: Scalar> TimingParams<T> {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let all = [
            self.block_interval,
            self.propagation_delay,
            self.request_wait,
            self.endpoint_delay,
            self.per_message_time,
        ];
        if all.iter().any(|x| !x.is_well_formed() || *x < T::zero()) {
            return Err(AnalysisError::Timing("times must be non-negative numbers"));
        }
        if self.block_interval <= T::zero() {
            return Err(AnalysisError::Timing("block interval must be positive"));
        }
        if self.request_wait >= self.block_interval {
            return Err(AnalysisError::Timing("request wait must be below the block interval"));
        }
        Ok(())
    }

    /// ⌈(2p + e + kW) / b⌉
    fn response_blocks(&self, k: u64) -> T {
        let two = T::from_count(2);
        ((two * self.propagation_delay + self.endpoint_delay + T::from_count(k) * self.per_message_time)
            / self.block_interval)
            .ceil()
    }
}

/// ⌈(2p+e+kW)/b⌉·b + 2p + b̄. The block interval must be positive.
pub fn latency_p3<T: Scalar>(t: &TimingParams<T>, k: u64) -> T {
    let two = T::from_count(2);
    t.response_blocks(k) * t.block_interval + two * t.propagation_delay + t.request_wait
}

/// (⌈(2p+e+kW)/b⌉ + 1)·b + 2p + b̄. The block interval must be positive.
pub fn latency_p4<T: Scalar>(t: &TimingParams<T>, k: u64) -> T {
    latency_p3(t, k) + t.block_interval
}

/// e + vW
pub fn latency_basic<T: Scalar>(t: &TimingParams<T>) -> T {
    t.endpoint_delay + T::from_count(t.verifier_count) * t.per_message_time
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison<T> {
    pub verifiers: u64,
    pub committee_size: u64,
    pub basic_messages: u64,
    pub decentralized_messages: u64,
    /// v at which both approaches send the same number of endpoint messages.
    pub break_even_verifiers: u64,
    pub latency_basic: T,
    pub latency_p3: T,
    pub latency_p4: T,
}

impl<T: Scalar> Comparison<T> {
    /// basic / decentralized endpoint messages.
    pub fn message_ratio(&self) -> f64 {
        self.basic_messages as f64 / self.decentralized_messages as f64
    }

    pub fn decentralized_faster(&self) -> bool {
        self.latency_p3 < self.latency_basic
    }
}

pub fn compare<T: Scalar>(t: &TimingParams<T>, params: &SecurityParams, v: u64) -> Result<Comparison<T>, AnalysisError> {
    t.validate()?;
    let k = params.committee_size;
    let timing = TimingParams { verifier_count: v, ..*t };
    Ok(Comparison {
        verifiers: v,
        committee_size: k,
        basic_messages: v,
        decentralized_messages: k,
        break_even_verifiers: k,
        latency_basic: latency_basic(&timing),
        latency_p3: latency_p3(&timing, k),
        latency_p4: latency_p4(&timing, k),
    })
}
