"""Shared fixtures. RSA generation is the only expensive operation in the
suite, so a couple of session-scoped pairs are shared by tests that do not
care about key freshness."""

from __future__ import annotations

import hashlib

import pytest

from keyauth import generate_sharing_keypair


def make_entropy(seed: bytes):
    """Deterministic entropy source: a SHA-256 counter stream over ``seed``."""

    counter = 0

    def entropy(n: int) -> bytes:
        nonlocal counter
        out = b""
        while len(out) < n:
            out += hashlib.sha256(seed + counter.to_bytes(8, "big")).digest()
            counter += 1
        return out[:n]

    return entropy


@pytest.fixture(scope="session")
def rsa_pair():
    return generate_sharing_keypair()


@pytest.fixture(scope="session")
def rsa_pair_alt():
    return generate_sharing_keypair()
