"""Deterministic seed derivation."""
import hashlib
import json


def derive_seed(*parts):
    """Stable 64-bit seed from JSON-serialisable parts.

    Used to give every scene, render tile and QA stream its own generator, so
    work can run in any order or in parallel with identical results.
    """
    payload = json.dumps(parts, separators=(",", ":"), sort_keys=True).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")
