use epcert::analysis::{
    compare, latency_basic, latency_p3, latency_p4, p_dos, p_exact, p_exact_ratio, p_montecarlo, SecurityParams,
    TimingParams,
};
use epcert::Rational64;
use num_rational::BigRational;

mod common;
use common::enumerate;

#[test]
fn exact_tail_matches_enumeration() {
    for n in 1..=10 {
        for k in 1..=n.min(5) {
            for t in 1..=k {
                for m in 0..=n {
                    let p = SecurityParams::new(n, k, t, m);
                    assert_eq!(p_exact_ratio(&p).unwrap(), enumerate(n, k, t, m), "{p:?}");
                }
            }
        }
    }
}

#[test]
fn small_worked_example() {
    let p = SecurityParams::new(4, 2, 1, 2);
    assert_eq!(enumerate(4, 2, 1, 2), BigRational::new(5.into(), 6.into()));
    assert!((p_exact(&p).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    let mc = p_montecarlo(&p, 100_000, 1).unwrap();
    assert!((mc.estimate - 5.0 / 6.0).abs() <= 3.0 * mc.std_error, "{mc:?}");
}

#[test]
fn edges() {
    assert_eq!(p_exact(&SecurityParams::new(50, 10, 1, 0)).unwrap(), 0.0);
    assert_eq!(p_exact(&SecurityParams::new(50, 10, 10, 50)).unwrap(), 1.0);
}

#[test]
fn monotone_in_corrupted_and_threshold() {
    for n in (1..=60).step_by(3) {
        for k in [1, 2, 3, 5, 8, 13, 21, 34, 55] {
            if k > n {
                continue;
            }
            let mut prev_t: Option<Vec<BigRational>> = None;
            for t in 1..=k {
                let row: Vec<BigRational> = (0..=n)
                    .map(|m| p_exact_ratio(&SecurityParams::new(n, k, t, m)).unwrap())
                    .collect();
                assert!(row.windows(2).all(|w| w[0] <= w[1]), "N={n} k={k} t={t}");
                if let Some(prev) = &prev_t {
                    assert!(prev.iter().zip(&row).all(|(a, b)| a >= b), "N={n} k={k} t={t}");
                }
                prev_t = Some(row);
            }
        }
    }
}

#[test]
fn half_point_and_near_zero_region() {
    let p = |m| p_exact(&SecurityParams::new(1000, 100, 50, m)).unwrap();
    let half = p(500);
    assert!((0.4..=0.6).contains(&half), "{half}");
    assert!(p(375) < 0.01, "{}", p(375));
    // with a small committee the same ratio is far from negligible
    let small = p_exact(&SecurityParams::new(1000, 20, 10, 375)).unwrap();
    assert!(small > 0.05, "{small}");
}

#[test]
fn dos_is_the_complementary_threshold() {
    for (n, k, t) in [(30, 10, 6), (100, 11, 6), (12, 5, 5), (12, 5, 1)] {
        for m in 0..=n {
            let s = SecurityParams::new(n, k, t, m);
            let dual = SecurityParams::new(n, k, k - t + 1, m);
            assert_eq!(p_dos(&s).unwrap(), p_exact(&dual).unwrap());
        }
    }
}

#[test]
fn montecarlo_tracks_the_exact_value() {
    for m in [20, 100, 180] {
        let s = SecurityParams::new(200, 10, 5, m);
        let exact = p_exact(&s).unwrap();
        let mc = p_montecarlo(&s, 20_000, m).unwrap();
        assert!(mc.agrees_with(exact, 3.0), "m={m}: {mc:?} vs {exact}");
    }
}

fn timing(b: i64, p: i64, wait: i64, e: i64, w: i64, v: u64) -> TimingParams<Rational64> {
    TimingParams {
        block_interval: Rational64::from_integer(b),
        propagation_delay: Rational64::from_integer(p),
        request_wait: Rational64::from_integer(wait),
        endpoint_delay: Rational64::from_integer(e),
        per_message_time: Rational64::from_integer(w),
        verifier_count: v,
    }
}

#[test]
fn latency_formulas() {
    let t = timing(10, 1, 5, 2, 1, 5);
    assert_eq!(latency_p3(&t, 3), Rational64::from_integer(17));
    assert_eq!(latency_p4(&t, 3), Rational64::from_integer(27));
    assert_eq!(latency_basic(&t), Rational64::from_integer(7));
    assert_eq!(latency_basic(&TimingParams { verifier_count: 0, ..t }), Rational64::from_integer(2));
    // k = 0 leaves ⌈(2p+e)/b⌉
    assert_eq!(latency_p4(&t, 0), Rational64::from_integer(10 + 10 + 2 + 5));

    for k in 0..20 {
        for wait in 0..10 {
            let t = timing(10, 1, wait, 3, 2, 4);
            assert_eq!(latency_p4(&t, k) - latency_p3(&t, k), Rational64::from_integer(10));
            let doubled = TimingParams {
                request_wait: t.request_wait * 2,
                ..t
            };
            assert_eq!(latency_p3(&doubled, k) - latency_p3(&t, k), t.request_wait);
        }
    }
    let t = timing(10, 1, 5, 2, 3, 4);
    let twice = TimingParams { verifier_count: 8, ..t };
    assert_eq!(latency_basic(&twice) - t.endpoint_delay, (latency_basic(&t) - t.endpoint_delay) * 2);
}

#[test]
fn comparison_report() {
    let s = SecurityParams::new(1000, 10, 5, 0);
    let c = compare(&timing(10, 1, 5, 2, 1, 0), &s, 100).unwrap();
    assert_eq!(c.basic_messages, 100);
    assert_eq!(c.decentralized_messages, 10);
    assert_eq!(c.message_ratio(), 10.0);

    // slow endpoint, many verifiers: decentralized wins on latency too
    let c = compare(&timing(10, 1, 5, 2, 60, 0), &s, 100).unwrap();
    assert!(c.decentralized_faster());
    let c = compare(&timing(600, 1, 5, 2, 1, 0), &s, 3).unwrap();
    assert!(!c.decentralized_faster());
}
