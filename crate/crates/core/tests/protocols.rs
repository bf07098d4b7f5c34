mod common;

use std::collections::{BTreeSet, HashSet};

use common::*;
use epcert::adversary::Strategy;
use epcert::analysis::{latency_p3, latency_p4, TimingParams};
use epcert::committee::SelectionRule;
use epcert::ledger::TxKind;
use epcert::protocol::{run, Protocol, RunConfig};
use epcert::registry::{P3Verdict, P4Verdict};

#[test]
fn p3_ideal_run_certifies_with_all_acceptances() {
    let w = world(10, 3, 3, r(10), r(1));
    let out = run(&w.population, &w.genesis, &honest(Protocol::P3, closed(), rq(37, 2), 1)).unwrap();
    let m = &out.metrics;
    assert!(m.certified, "{:?}", m.failure);
    assert_eq!(m.evidence_count, 3);
    assert_eq!(m.endpoint_messages, 3);
    assert_eq!(m.subject_id, Some(10));
    assert_eq!(out.registry.population(), 11);
    let cert = out.certificate.as_ref().unwrap();
    assert_eq!(cert.subject, 10);
    assert_eq!(out.registry.subject(10).unwrap().endpoint, out.endpoint);
    assert!(matches!(
        out.registry.verify_p3(&out.ledger, out.request_tx.unwrap()).unwrap(),
        P3Verdict::Certified { count: 3, .. }
    ));
    assert!(out.registry.audit(&out.ledger).consistent());
    assert!(out.ledger.verify_chain());
}

#[test]
fn p3_threshold_tolerates_offline_members() {
    let w = world(10, 3, 2, r(10), r(1));
    let mut cfg = honest(Protocol::P3, closed(), r(12), 2);
    cfg.offline_members = 1;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(out.metrics.certified);
    assert_eq!(out.metrics.evidence_count, 2);
    assert_eq!(out.metrics.endpoint_messages, 3);

    cfg.offline_members = 2;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(!out.metrics.certified);
    assert_eq!(out.metrics.failure.as_deref(), Some("insufficient acceptances"));
    assert_eq!(out.metrics.evidence_count, 1);
    assert!(out.certificate.is_none());
    assert_eq!(out.registry.population(), 10);
}

#[test]
fn p4_ideal_run_discloses_after_the_proof() {
    let w = world(10, 3, 3, r(10), r(1));
    let out = run(&w.population, &w.genesis, &honest(Protocol::P4, closed(), r(15), 3)).unwrap();
    assert!(out.metrics.certified, "{:?}", out.metrics.failure);
    assert_eq!(out.metrics.endpoint_messages, 3);
    assert_eq!(out.metrics.evidence_count, 3);
    let request = out.request_tx.unwrap();
    let P4Verdict::Certified { proof_tx, supporting, .. } = out.registry.verify_p4(&out.ledger, request) else {
        panic!("not certified");
    };
    assert_eq!(supporting.len(), 3);
    for d in supporting {
        assert_eq!(out.ledger.transaction(d).unwrap().kind, TxKind::ChallengeDisclosure);
        assert!(out.ledger.happens_after(d, proof_tx).unwrap());
    }
    assert!(out.registry.audit(&out.ledger).consistent());
}

#[test]
fn p4_early_disclosure_is_not_counted() {
    let w = world(10, 3, 2, r(10), r(1));
    let mut cfg = honest(Protocol::P4, closed(), r(15), 4);
    cfg.early_disclosers = 1;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(out.metrics.certified);
    assert_eq!(out.metrics.evidence_count, 2);

    let w = world(10, 3, 3, r(10), r(1));
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(!out.metrics.certified);
    let failure = out.metrics.failure.unwrap();
    assert!(failure.contains("disclosure") || failure.contains("challenges"), "{failure}");
}

#[test]
fn p4_collects_only_threshold_when_members_are_offline() {
    let w = world(20, 5, 3, r(10), r(1));
    let mut cfg = honest(Protocol::P4, closed(), r(15), 5);
    cfg.offline_members = 2;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(out.metrics.certified, "{:?}", out.metrics.failure);
    assert_eq!(out.metrics.evidence_count, 3);
    assert_eq!(out.metrics.endpoint_messages, 3);

    cfg.offline_members = 3;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(!out.metrics.certified);
    assert_eq!(out.metrics.failure.as_deref(), Some("insufficient challenges"));
}

#[test]
fn offline_subject_times_out() {
    let w = world(10, 3, 3, r(10), r(1));
    let mut cfg = honest(Protocol::P3, closed(), r(12), 6);
    cfg.subject_online = false;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(!out.metrics.certified);
    assert_eq!(out.metrics.endpoint_messages, 0);
}

#[test]
fn runs_are_deterministic() {
    let w = world(40, 5, 3, r(10), r(1));
    for protocol in [Protocol::P3, Protocol::P4] {
        let cfg = honest(protocol, closed(), rq(123, 10), 77);
        let a = run(&w.population, &w.genesis, &cfg).unwrap();
        let b = run(&w.population, &w.genesis, &cfg).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.ledger.tip().unwrap().hash, b.ledger.tip().unwrap().hash);
        assert_eq!(a.partial_challenges, b.partial_challenges);
    }
}

#[test]
fn latency_matches_the_closed_forms() {
    let (b, p) = (r(10), r(1));
    let w = world(30, 4, 4, b, p);
    let ch = profile(rq(3, 2), r(2), false, false);
    for (i, submit) in [r(10), rq(101, 10), rq(199, 10), r(25)].into_iter().enumerate() {
        for protocol in [Protocol::P3, Protocol::P4] {
            let out = run(&w.population, &w.genesis, &honest(protocol, ch, submit, i as u64)).unwrap();
            let m = &out.metrics;
            let t = TimingParams {
                block_interval: b,
                propagation_delay: p,
                request_wait: m.request_wait.unwrap(),
                endpoint_delay: ch.delivery_delay,
                per_message_time: ch.per_message_time,
                verifier_count: 0,
            };
            let expected = match protocol {
                Protocol::P3 => latency_p3(&t, 4),
                _ => latency_p4(&t, 4),
            };
            assert_eq!(m.latency, Some(expected), "{protocol:?} submit={submit}");
        }
    }
}

#[test]
fn float_time_agrees_with_exact_time() {
    let wf = {
        let population = epcert::protocol::Population::generate(30, 11, epcert::EndpointKind::Email);
        let genesis = population
            .genesis(epcert::ProtocolParams::new(4, 4), 10.0f64, 1.0)
            .unwrap();
        (population, genesis)
    };
    let cfg = RunConfig::honest(
        Protocol::P3,
        epcert::channel::ChannelProfile {
            per_message_time: 1.5f64,
            delivery_delay: 2.0,
            spoofable: false,
            eavesdroppable: false,
            cost_per_message: 1.0,
        },
        12.5,
        9,
    );
    let m = run(&wf.0, &wf.1, &cfg).unwrap().metrics;
    let t = TimingParams {
        block_interval: 10.0,
        propagation_delay: 1.0,
        request_wait: m.request_wait.unwrap(),
        endpoint_delay: 2.0,
        per_message_time: 1.5,
        verifier_count: 0,
    };
    assert_eq!(m.latency, Some(latency_p3(&t, 4)));
}

#[test]
fn spoofing_defeats_p3_only_on_spoofable_channels() {
    let w = world(30, 5, 3, r(10), r(1));
    let mut cfg = honest(Protocol::P3, profile(r(1), r(2), true, false), r(12), 8);
    cfg.strategy = Strategy::Spoof;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(out.metrics.certified);
    assert_eq!(out.metrics.corrupted_in_committee, 0);
    assert!(out.metrics.attack.unwrap().success);
    // the victim's endpoint never carried a real message
    assert_eq!(out.metrics.endpoint_messages, 0);

    cfg.channel = closed();
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(!out.metrics.certified);
    assert!(!out.metrics.attack.unwrap().success);
}

#[test]
fn eavesdropping_defeats_p4_only_on_tappable_channels() {
    let w = world(30, 5, 3, r(10), r(1));
    let mut cfg = honest(Protocol::P4, profile(r(1), r(2), false, true), r(12), 9);
    cfg.strategy = Strategy::Eavesdrop;
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(out.metrics.certified, "{:?}", out.metrics.failure);
    assert!(out.metrics.attack.unwrap().success);
    assert_eq!(out.metrics.corrupted_in_committee, 0);

    cfg.channel = closed();
    let out = run(&w.population, &w.genesis, &cfg).unwrap();
    assert!(!out.metrics.certified);
}

#[test]
fn corrupted_committee_majority_miscertifies() {
    let w = world(12, 4, 2, r(10), r(1));
    for (protocol, strategy) in [
        (Protocol::P3, Strategy::MiscertifyAccept),
        (Protocol::P4, Strategy::MiscertifyDisclose),
    ] {
        let mut cfg = honest(protocol, closed(), r(12), 10);
        cfg.strategy = strategy;
        cfg.corrupted = (0..12).collect();
        let out = run(&w.population, &w.genesis, &cfg).unwrap();
        assert!(out.metrics.certified, "{strategy:?}: {:?}", out.metrics.failure);
        assert_eq!(out.metrics.corrupted_in_committee, 4);
        assert_eq!(out.metrics.endpoint_messages, 0);

        cfg.corrupted = BTreeSet::new();
        let out = run(&w.population, &w.genesis, &cfg).unwrap();
        assert!(!out.metrics.certified);
        assert!(!out.metrics.attack.unwrap().success);
    }
}

fn committee_of(w: &World, protocol: Protocol, seed: u64) -> Vec<u64> {
    let out = run(&w.population, &w.genesis, &honest(protocol, closed(), r(12), seed)).unwrap();
    out.metrics.committee
}

#[test]
fn silenced_members_block_at_the_threshold() {
    let w = world(50, 10, 6, r(10), r(1));
    for protocol in [Protocol::P3, Protocol::P4] {
        let committee = committee_of(&w, protocol, 12);
        for (silenced, certified) in [(4, true), (5, false)] {
            let mut cfg = honest(protocol, closed(), r(12), 12);
            cfg.strategy = Strategy::DosSilence;
            cfg.corrupted = committee[..silenced].iter().copied().collect();
            let out = run(&w.population, &w.genesis, &cfg).unwrap();
            assert_eq!(out.metrics.committee, committee);
            assert_eq!(out.metrics.certified, certified, "{protocol:?} silenced={silenced}");
            assert_eq!(out.metrics.attack.unwrap().success, !certified);
        }
    }
}

#[test]
fn duplicated_members_count_once() {
    // N = 3, k = 3 with replacement: duplicates are likely
    let w = world_with_rule(3, 3, 2, r(10), r(1), SelectionRule::WithReplacement);
    let mut saw_duplicate = false;
    for seed in 0..30 {
        let out = run(&w.population, &w.genesis, &honest(Protocol::P3, closed(), r(12), seed)).unwrap();
        let m = &out.metrics;
        assert_eq!(m.endpoint_messages, 3);
        let distinct: HashSet<_> = m.committee.iter().collect();
        assert_eq!(m.duplicate_slots, 3 - distinct.len());
        saw_duplicate |= m.duplicate_slots > 0;
        assert_eq!(m.certified, distinct.len() >= 2);
        if m.certified {
            assert_eq!(m.evidence_count, distinct.len());
        }
    }
    assert!(saw_duplicate);
}

#[test]
fn partial_challenges_never_repeat() {
    let w = world(20, 3, 2, r(10), r(1));
    let mut seen = HashSet::new();
    for seed in 0..10_000u64 {
        let cfg = honest(Protocol::P4, closed(), r(12), seed);
        let out = run(&w.population, &w.genesis, &cfg).unwrap();
        for q in out.partial_challenges {
            assert!(seen.insert(q), "repeated challenge in run {seed}");
        }
    }
    assert_eq!(seen.len(), 30_000);
}

#[test]
fn member_transactions_are_recorded() {
    let w = world(20, 5, 3, r(10), r(1));
    let out = run(&w.population, &w.genesis, &honest(Protocol::P3, closed(), r(12), 13)).unwrap();
    assert_eq!(out.metrics.member_transactions, 5);
    let out = run(&w.population, &w.genesis, &honest(Protocol::P4, closed(), r(12), 13)).unwrap();
    assert_eq!(out.metrics.member_transactions, 5);
}

#[test]
fn rejects_bad_configurations() {
    let w = world(10, 3, 3, r(10), r(1));
    let mut cfg = honest(Protocol::Basic1, closed(), r(12), 1);
    assert!(run(&w.population, &w.genesis, &cfg).is_err());
    cfg.protocol = Protocol::P4;
    cfg.strategy = Strategy::Spoof;
    assert!(run(&w.population, &w.genesis, &cfg).is_err());
    cfg.strategy = Strategy::None;
    cfg.submit_time = r(-1);
    assert!(run(&w.population, &w.genesis, &cfg).is_err());
    cfg.submit_time = r(1);
    cfg.corrupted = BTreeSet::from([99]);
    assert!(run(&w.population, &w.genesis, &cfg).is_err());
}
