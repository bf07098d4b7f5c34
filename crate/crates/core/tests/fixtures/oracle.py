"""Reference values for tests/golden.rs, computed without the Rust code.

Run: python3 oracle.py > golden.json
"""
import hashlib
import json
import struct

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

KINDS = ["phone_sms", "phone_ivr", "postal", "email", "ip", "web", "dns", "bank"]


def framed(parts):
    h = hashlib.sha256(struct.pack(">Q", len(parts)))
    for p in parts:
        h.update(struct.pack(">Q", len(p)))
        h.update(p)
    return h.digest()


def keypair(seed):
    secret = framed([b"epcert/keygen/v1", seed])
    key = Ed25519PrivateKey.from_private_bytes(secret)
    public = key.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    return secret, public, key


def request_bytes(public, kind, address):
    endpoint = bytes([KINDS.index(kind)]) + address.encode()
    return b"R" + public + struct.pack(">I", len(endpoint)) + endpoint


def committee(req, block, n, k, distinct):
    members, seen, slot = [], set(), 1
    while len(members) < k:
        i = int.from_bytes(framed([struct.pack(">Q", slot), req, block]), "big") % n
        slot += 1
        if distinct and i in seen:
            continue
        seen.add(i)
        members.append(i)
    return members


def main():
    out = {"digests": [], "indices": [], "keys": [], "requests": [], "committees": []}
    for parts in [[b""], [b"abc"], [b"a", b"bc"], [b"ab", b"c"], [b"x" * 1000, b"", b"\x00"]]:
        out["digests"].append({"parts": [p.hex() for p in parts], "digest": framed(parts).hex()})
    for j, n in enumerate([1, 2, 7, 97, 1000, 2**32 - 5, 2**63 + 1, 2**64 - 1]):
        d = framed([b"index", bytes([j])])
        out["indices"].append({"digest": d.hex(), "n": str(n), "index": str(int.from_bytes(d, "big") % n)})
    for seed in [b"alice", b"bob", b"\x00", b"subject-17"]:
        secret, public, key = keypair(seed)
        msg = b"message for " + seed
        out["keys"].append({
            "seed": seed.hex(),
            "secret": secret.hex(),
            "public": public.hex(),
            "message": msg.hex(),
            "signature": key.sign(msg).hex(),
        })
    for i, (kind, addr) in enumerate([("email", "alice@example.org"), ("phone_sms", "+390612345678"), ("dns", "example.org")]):
        _, public, _ = keypair(("req-%d" % i).encode())
        req = request_bytes(public, kind, addr)
        block = hashlib.sha256(b"block-%d" % i).digest()
        out["requests"].append({
            "seed": ("req-%d" % i).encode().hex(),
            "kind": kind,
            "address": addr,
            "request": req.hex(),
            "block_hash": block.hex(),
            "challenge": framed([req, block]).hex(),
        })
        for n, k in [(10, 3), (200, 10), (5, 5), (1000, 100)]:
            for distinct in [True, False]:
                out["committees"].append({
                    "request": req.hex(),
                    "block_hash": block.hex(),
                    "population": n,
                    "size": k,
                    "rule": "distinct" if distinct else "with_replacement",
                    "members": committee(req, block, n, k, distinct),
                })
    print(json.dumps(out, indent=1))


main()
