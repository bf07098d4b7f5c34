//! Wire encodings of requests, proofs, acceptances, disclosures and
//! summarizations. All integers are big-endian; variable-length fields are
//! prefixed with a `u32` length.

use serde::{Deserialize, Serialize};

use crate::channel::EndpointAddress;
use crate::committee::SubjectId;
use crate::crypto::{self, Digest, KeyPair, PublicKey, Signature, DIGEST_LEN, PUBLIC_KEY_LEN, SIGNATURE_LEN};
use crate::ledger::TxId;

const P3_DOMAIN: &[u8] = b"epcert/p3-proof/v1";
const P4_DOMAIN: &[u8] = b"epcert/p4-proof/v1";
pub const PARTIAL_CHALLENGE_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Basic1,
    Basic2,
    P3,
    P4,
}

impl Protocol {
    pub fn is_decentralized(self) -> bool {
        matches!(self, Protocol::P3 | Protocol::P4)
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Basic1 => "basic1",
            Protocol::Basic2 => "basic2",
            Protocol::P3 => "p3",
            Protocol::P4 => "p4",
        }
    }
}

#[derive(Default)]
pub(crate) struct Writer(Vec<u8>);

impl Writer {
    pub fn u8(mut self, v: u8) -> Self {
        self.0.push(v);
        self
    }

    pub fn u32(mut self, v: u32) -> Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn raw(mut self, v: &[u8]) -> Self {
        self.0.extend_from_slice(v);
        self
    }

    pub fn bytes(self, v: &[u8]) -> Self {
        self.u32(v.len() as u32).raw(v)
    }

    pub fn finish(self) -> Vec<u8> {
        self.0
    }
}

pub(crate) struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self(bytes)
    }

    pub fn raw(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.0.len() < n {
            return None;
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Some(head)
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.raw(1).map(|b| b[0])
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.raw(4).map(|b| u32::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.raw(8).map(|b| u64::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Option<&'a [u8]> {
        let n = self.u32()? as usize;
        self.raw(n)
    }

    pub fn end(self) -> Option<()> {
        self.0.is_empty().then_some(())
    }
}

/// R = ⟨p, E⟩.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CertificationRequest {
    pub public_key: PublicKey,
    pub endpoint: EndpointAddress,
}

impl CertificationRequest {
    pub fn new(public_key: PublicKey, endpoint: EndpointAddress) -> Self {
        Self { public_key, endpoint }
    }

    pub fn encode(&self) -> Vec<u8> {
        Writer::default()
            .u8(b'R')
            .raw(self.public_key.as_bytes())
            .bytes(&self.endpoint.encode())
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        (r.u8()? == b'R').then_some(())?;
        let public_key = PublicKey::from_slice(r.raw(PUBLIC_KEY_LEN)?)?;
        let endpoint = EndpointAddress::decode(r.bytes()?)?;
        r.end()?;
        Some(Self { public_key, endpoint })
    }

    /// Q = hash(R | b), computed from the hash of the block holding R.
    pub fn challenge(&self, block_hash: &Digest) -> Digest {
        challenge_for(&self.encode(), block_hash)
    }
}

pub fn challenge_for(request_bytes: &[u8], block_hash: &Digest) -> Digest {
    crypto::digest(&[request_bytes, block_hash.as_bytes()]).expect("two parts")
}

/// P = [Q]_S.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P3Proof {
    pub challenge: Digest,
    pub signature: Signature,
}

impl P3Proof {
    pub fn signing_message(challenge: &Digest) -> Vec<u8> {
        Writer::default().raw(P3_DOMAIN).raw(challenge.as_bytes()).finish()
    }

    pub fn create(challenge: Digest, key: &KeyPair) -> Self {
        Self {
            challenge,
            signature: key.sign(&Self::signing_message(&challenge)),
        }
    }

    pub fn verify(&self, public: &PublicKey) -> bool {
        crypto::verify(public.as_bytes(), &Self::signing_message(&self.challenge), &self.signature)
    }

    pub fn encode(&self) -> Vec<u8> {
        Writer::default()
            .raw(self.challenge.as_bytes())
            .raw(self.signature.as_bytes())
            .finish()
    }

    fn read(r: &mut Reader<'_>) -> Option<Self> {
        let challenge = Digest(r.raw(DIGEST_LEN)?.try_into().ok()?);
        let signature = Signature::from_slice(r.raw(SIGNATURE_LEN)?)?;
        Some(Self { challenge, signature })
    }
}

/// What S sends from E to each committee member, and also the payload of
/// a member's acceptance transaction (whose own signature is `[P]_c`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P3Envelope {
    pub request: TxId,
    pub proof: P3Proof,
}

impl P3Envelope {
    pub fn encode(&self) -> Vec<u8> {
        Writer::default().u64(self.request).raw(&self.proof.encode()).finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let request = r.u64()?;
        let proof = P3Proof::read(&mut r)?;
        r.end()?;
        Some(Self { request, proof })
    }
}

/// Q_i as sent by the member holding `slot` to the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialChallenge {
    pub request: TxId,
    pub slot: u32,
    pub member: SubjectId,
    pub value: [u8; PARTIAL_CHALLENGE_LEN],
}

impl PartialChallenge {
    pub fn encode(&self) -> Vec<u8> {
        Writer::default()
            .u64(self.request)
            .u32(self.slot)
            .u64(self.member)
            .raw(&self.value)
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let request = r.u64()?;
        let slot = r.u32()?;
        let member = r.u64()?;
        let value = r.raw(PARTIAL_CHALLENGE_LEN)?.try_into().ok()?;
        r.end()?;
        Some(Self { request, slot, member, value })
    }
}

/// One covered partial challenge inside a P4 proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChallengeEntry {
    pub slot: u32,
    pub member: SubjectId,
    pub value: [u8; PARTIAL_CHALLENGE_LEN],
}

/// P = [Q_1 | … | Q_k | R]_S, naming the slot and member of each Q_i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct P4Proof {
    pub request: TxId,
    /// Sorted by slot.
    pub entries: Vec<ChallengeEntry>,
    pub signature: Signature,
}

impl P4Proof {
    pub fn signing_message(entries: &[ChallengeEntry], request_bytes: &[u8]) -> Vec<u8> {
        let mut w = Writer::default().raw(P4_DOMAIN).u32(entries.len() as u32);
        for e in entries {
            w = w.u32(e.slot).u64(e.member).raw(&e.value);
        }
        w.bytes(request_bytes).finish()
    }

    pub fn create(request: TxId, mut entries: Vec<ChallengeEntry>, request_bytes: &[u8], key: &KeyPair) -> Self {
        entries.sort_by_key(|e| e.slot);
        let signature = key.sign(&Self::signing_message(&entries, request_bytes));
        Self {
            request,
            entries,
            signature,
        }
    }

    pub fn verify(&self, public: &PublicKey, request_bytes: &[u8]) -> bool {
        crypto::verify(
            public.as_bytes(),
            &Self::signing_message(&self.entries, request_bytes),
            &self.signature,
        )
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default().u64(self.request).u32(self.entries.len() as u32);
        for e in &self.entries {
            w = w.u32(e.slot).u64(e.member).raw(&e.value);
        }
        w.raw(self.signature.as_bytes()).finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let request = r.u64()?;
        let n = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            entries.push(ChallengeEntry {
                slot: r.u32()?,
                member: r.u64()?,
                value: r.raw(PARTIAL_CHALLENGE_LEN)?.try_into().ok()?,
            });
        }
        let signature = Signature::from_slice(r.raw(SIGNATURE_LEN)?)?;
        r.end()?;
        Some(Self {
            request,
            entries,
            signature,
        })
    }
}

/// A member making its partial challenges for `request` public.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disclosure {
    pub request: TxId,
    pub challenges: Vec<(u32, [u8; PARTIAL_CHALLENGE_LEN])>,
}

impl Disclosure {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default().u64(self.request).u32(self.challenges.len() as u32);
        for (slot, value) in &self.challenges {
            w = w.u32(*slot).raw(value);
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let request = r.u64()?;
        let n = r.u32()? as usize;
        let mut challenges = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            challenges.push((r.u32()?, r.raw(PARTIAL_CHALLENGE_LEN)?.try_into().ok()?));
        }
        r.end()?;
        Some(Self { request, challenges })
    }
}

/// How a summarized subject got certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Bootstrap,
    P3,
    P4,
}

impl Origin {
    fn tag(self) -> u8 {
        match self {
            Origin::Bootstrap => 0,
            Origin::P3 => 3,
            Origin::P4 => 4,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Origin::Bootstrap),
            3 => Some(Origin::P3),
            4 => Some(Origin::P4),
            _ => None,
        }
    }
}

/// ⟨S, E, id(S)⟩ committed by consensus rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summarization {
    pub subject: SubjectId,
    /// Request transaction; `None` for bootstrap subjects.
    pub request_tx: Option<TxId>,
    pub origin: Origin,
    pub request: CertificationRequest,
}

impl Summarization {
    pub fn encode(&self) -> Vec<u8> {
        Writer::default()
            .u64(self.subject)
            .u64(self.request_tx.unwrap_or(u64::MAX))
            .u8(self.origin.tag())
            .bytes(&self.request.encode())
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let subject = r.u64()?;
        let request_tx = Some(r.u64()?).filter(|v| *v != u64::MAX);
        let origin = Origin::from_tag(r.u8()?)?;
        let request = CertificationRequest::decode(r.bytes()?)?;
        r.end()?;
        Some(Self {
            subject,
            request_tx,
            origin,
            request,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::EndpointKind;
    use crate::crypto::generate_keypair;
    use proptest::prelude::*;

    fn request() -> (KeyPair, CertificationRequest) {
        let key = generate_keypair(b"subject").unwrap();
        let req = CertificationRequest::new(key.public(), EndpointAddress::new(EndpointKind::Email, "s@example.org"));
        (key, req)
    }

    #[test]
    fn request_encoding() {
        let (_, req) = request();
        assert_eq!(CertificationRequest::decode(&req.encode()), Some(req.clone()));
        let mut bytes = req.encode();
        bytes.push(0);
        assert_eq!(CertificationRequest::decode(&bytes), None);
        assert_eq!(CertificationRequest::decode(&bytes[..10]), None);
    }

    #[test]
    fn p3_proof_binds_challenge_and_key() {
        let (key, req) = request();
        let b = crypto::digest(&["block"]).unwrap();
        let proof = P3Proof::create(req.challenge(&b), &key);
        assert!(proof.verify(&key.public()));
        let other = generate_keypair(b"other").unwrap();
        assert!(!proof.verify(&other.public()));
        let mut stale = proof;
        stale.challenge = req.challenge(&crypto::digest(&["other block"]).unwrap());
        assert!(!stale.verify(&key.public()));
        let env = P3Envelope { request: 9, proof };
        assert_eq!(P3Envelope::decode(&env.encode()), Some(env));
    }

    #[test]
    fn p4_proof_covers_request() {
        let (key, req) = request();
        let entries = vec![
            ChallengeEntry { slot: 2, member: 5, value: [2; 32] },
            ChallengeEntry { slot: 1, member: 3, value: [1; 32] },
        ];
        let proof = P4Proof::create(4, entries, &req.encode(), &key);
        assert_eq!(proof.entries[0].slot, 1);
        assert!(proof.verify(&key.public(), &req.encode()));
        let other_req = CertificationRequest::new(req.public_key, EndpointAddress::new(EndpointKind::Email, "x"));
        assert!(!proof.verify(&key.public(), &other_req.encode()));
        assert_eq!(P4Proof::decode(&proof.encode()), Some(proof));
    }

    #[test]
    fn summarization_encoding() {
        let (_, req) = request();
        for (request_tx, origin) in [(None, Origin::Bootstrap), (Some(12), Origin::P4)] {
            let s = Summarization { subject: 7, request_tx, origin, request: req.clone() };
            assert_eq!(Summarization::decode(&s.encode()), Some(s));
        }
    }

    proptest! {
        #[test]
        fn disclosure_and_challenge_round_trip(
            request in any::<u64>(),
            slots in proptest::collection::vec((any::<u32>(), any::<[u8; 32]>()), 0..6),
            member in any::<u64>(),
        ) {
            let d = Disclosure { request, challenges: slots.clone() };
            prop_assert_eq!(Disclosure::decode(&d.encode()), Some(d));
            for (slot, value) in slots {
                let q = PartialChallenge { request, slot, member, value };
                prop_assert_eq!(PartialChallenge::decode(&q.encode()), Some(q));
            }
        }
    }
}
