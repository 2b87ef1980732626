"""The five protocol hash functions, domain-separated over SHAKE256.

Every function prefixes its input with a per-function tag and the backend id.
H1 on the production backend goes through RFC 9380 hash-to-curve with the
same tag as DST; everything else is SHAKE256.

On the toy backend H2 and H5 are transparent (the exponent itself, encoded or
passed through) so algebra tests can be checked by hand.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any

from mibe.backend import Backend, Mirrored
from mibe.errors import EmptyIdentityError, LengthMismatchError

DEFAULT_TAGS = ("MIBE-H1", "MIBE-H2", "MIBE-H3", "MIBE-H4", "MIBE-H5")
XOF_NAME = "shake256"


@dataclass(frozen=True)
class HashConfig:
    tags: tuple[str, ...] = DEFAULT_TAGS
    n_bits: int = 256
    l_bits: int = 256
    xof: str = XOF_NAME

    def __post_init__(self):
        if len(self.tags) != 5 or len(set(self.tags)) != 5:
            raise ValueError("need five pairwise distinct hash tags")
        for name in ("n_bits", "l_bits"):
            bits = getattr(self, name)
            if bits <= 0 or bits % 8:
                raise ValueError(f"{name} must be a positive multiple of 8")
        if self.xof != XOF_NAME:
            raise ValueError(f"unsupported XOF {self.xof!r}")

    @property
    def n_bytes(self) -> int:
        return self.n_bits // 8

    @property
    def l_bytes(self) -> int:
        return self.l_bits // 8


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def xof(dst: bytes, *parts: bytes, length: int) -> bytes:
    h = hashlib.shake_256(_lp(dst))
    for p in parts:
        h.update(_lp(p))
    return h.digest(length)


class Hashes:
    """H1..H5 bound to one backend and one :class:`HashConfig`."""

    def __init__(self, backend: Backend, config: HashConfig | None = None):
        self.backend = backend
        self.config = config or HashConfig()
        bid = bytes([backend.backend_id])
        self._dst = [t.encode() + b":" + bid for t in self.config.tags]

    def dst(self, i: int) -> bytes:
        return self._dst[i - 1]

    def _scalar(self, i: int, *parts: bytes) -> int:
        q = self.backend.order
        counter = 0
        while True:
            wide = xof(self.dst(i), *parts, counter.to_bytes(4, "big"), length=64)
            k = int.from_bytes(wide, "big") % q
            if k:
                return k
            counter += 1

    def h1_identity_to_point(
        self, identity: str, pkg_pub: Mirrored, pkpo_pub: Mirrored | None = None
    ) -> Any:
        """Map an identity bound to the authority public keys into G1."""
        if not identity:
            raise EmptyIdentityError("identity must be non-empty")
        b = self.backend
        pubs = pkg_pub.encode(b) + (pkpo_pub.encode(b) if pkpo_pub is not None else b"")
        base = _lp(identity.encode("utf-8")) + _lp(pubs)
        counter = 0
        while True:
            point = b.hash_to_g1(base + counter.to_bytes(4, "big"), self.dst(1))
            if not b.is_identity(point, "g1"):
                return point
            counter += 1

    def h2_gt_mask(self, g: Any) -> bytes:
        n = self.config.l_bytes
        if self.backend.is_toy:
            return self.backend.serialize(g, "gt").ljust(n, b"\x00")[:n]
        return xof(self.dst(2), self.backend.serialize(g, "gt"), length=n)

    def h3_fo_randomness(self, z: bytes, m: bytes) -> int:
        n = self.config.n_bytes
        if len(z) != n or len(m) != n:
            raise LengthMismatchError(f"H3 inputs must be {n} bytes each")
        return self._scalar(3, z, m)

    def h4_payload_mask(self, z: bytes) -> bytes:
        n = self.config.n_bytes
        if len(z) != n:
            raise LengthMismatchError(f"H4 input must be {n} bytes")
        return xof(self.dst(4), z, length=n)

    def h5_blind_scalar(self, g: Any) -> int:
        """Nonzero scalar derived from a pairing value; always invertible."""
        if self.backend.is_toy:
            return g or 1
        return self._scalar(5, self.backend.serialize(g, "gt"))


def xor(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise LengthMismatchError("xor operands differ in length")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")
