"""Bilinear group backends.

Two interchangeable implementations sit behind one interface:

* ``Bls12Backend`` -- BLS12-381 through ``py_arkworks_bls12381`` with
  hash-to-G1 from ``blspy`` (RFC 9380 SSWU).  Type-3 pairing G1 x G2 -> GT.
* ``ToyBackend`` -- every group is Z_q written in exponent space:
  an element *is* its discrete log, ``pair(a, b) = a*b mod q`` and
  ``gt_pow(g, k) = g*k mod q``.  DLP is trivial, so this backend exists only
  as a brute-force oracle for the protocol algebra.

Scalars are plain Python ints reduced modulo the group order.  Every public
operation reports itself to the active op counter (see ``mibe.metering``).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping

from mibe.errors import BackendError, DecodeError, InvalidElementError

PRODUCTION_ID = 0x01
TOY_ID = 0x7F

KINDS = ("g1", "g2", "gt")

# BLS12-381 prime subgroup order.
BLS12_381_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001


@dataclass(frozen=True)
class BackendDescriptor:
    backend_id: int
    name: str
    order: int
    sizes: Mapping[str, int] = field(default_factory=dict)

    def size(self, kind: str) -> int:
        return self.sizes[kind]


def _tally(op: str, n: int = 1) -> None:
    # Imported lazily: metering imports this module for type references.
    from mibe import metering

    metering.record(op, n)


class Backend:
    """Common interface.  Subclasses implement the underscored primitives."""

    descriptor: BackendDescriptor

    @property
    def backend_id(self) -> int:
        return self.descriptor.backend_id

    @property
    def name(self) -> str:
        return self.descriptor.name

    @property
    def order(self) -> int:
        return self.descriptor.order

    @property
    def is_toy(self) -> bool:
        return self.descriptor.backend_id == TOY_ID

    # -- scalars -----------------------------------------------------------

    def scalar(self, k: int) -> int:
        return k % self.order

    def random_scalar(self, rng) -> int:
        """Uniform nonzero scalar; a drawn zero is discarded and redrawn."""
        while True:
            k = rng.randrange(self.order)
            if k != 0:
                return k

    def scalar_inverse(self, k: int) -> int:
        k %= self.order
        if k == 0:
            raise InvalidElementError("zero scalar has no inverse")
        _tally("I")
        return pow(k, -1, self.order)

    def encode_scalar(self, k: int) -> bytes:
        return (k % self.order).to_bytes(self.descriptor.size("scalar"), "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.descriptor.size("scalar"):
            raise DecodeError("scalar has wrong length")
        k = int.from_bytes(data, "big")
        if k >= self.order:
            raise DecodeError("scalar is not reduced")
        return k

    # -- group operations (metered) ----------------------------------------

    def scalar_mul(self, k: int, g: Any) -> Any:
        _tally("M")
        return self._mul(k % self.order, g)

    def pair(self, a: Any, b: Any) -> Any:
        _tally("P")
        return self._pair(a, b)

    def gt_pow(self, g: Any, k: int) -> Any:
        _tally("E")
        return self._gt_pow(g, k % self.order)

    def hash_to_g1(self, msg: bytes, dst: bytes) -> Any:
        _tally("H")
        return self._hash_to_g1(msg, dst)

    # -- unmetered helpers -------------------------------------------------

    def add(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def gt_mul(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def generator(self, kind: str) -> Any:
        raise NotImplementedError

    def identity(self, kind: str) -> Any:
        raise NotImplementedError

    def is_identity(self, g: Any, kind: str) -> bool:
        return self.eq(g, self.identity(kind))

    def eq(self, a: Any, b: Any) -> bool:
        return a == b

    def serialize(self, g: Any, kind: str) -> bytes:
        raise NotImplementedError

    def deserialize(self, data: bytes, kind: str) -> Any:
        raise NotImplementedError

    def _mul(self, k: int, g: Any) -> Any:
        raise NotImplementedError

    def _pair(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def _gt_pow(self, g: Any, k: int) -> Any:
        raise NotImplementedError

    def _hash_to_g1(self, msg: bytes, dst: bytes) -> Any:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} q={self.order}>"


class ToyBackend(Backend):
    """Exponent-space oracle over Z_q.  Elements are ints in [0, q)."""

    ELEMENT_WIDTH = 8

    def __init__(self, q: int = 101):
        if q < 3 or q >= 2**64 or not _is_prime(q):
            raise BackendError(f"toy group order must be a prime below 2**64, got {q}")
        w = self.ELEMENT_WIDTH
        self.descriptor = BackendDescriptor(
            TOY_ID, "toy", q, {"g1": w, "g2": w, "gt": w, "scalar": w}
        )

    def _check(self, g: Any) -> int:
        if not isinstance(g, int) or isinstance(g, bool) or not 0 <= g < self.order:
            raise InvalidElementError(f"not a toy element: {g!r}")
        return g

    def _mul(self, k, g):
        return (k * self._check(g)) % self.order

    def _pair(self, a, b):
        return (self._check(a) * self._check(b)) % self.order

    def _gt_pow(self, g, k):
        return (self._check(g) * k) % self.order

    def _hash_to_g1(self, msg, dst):
        digest = hashlib.shake_256(_lp(dst) + msg).digest(64)
        return int.from_bytes(digest, "big") % self.order

    def add(self, a, b):
        return (self._check(a) + self._check(b)) % self.order

    def gt_mul(self, a, b):
        return self.add(a, b)

    def generator(self, kind):
        _kind(kind)
        return 1

    def identity(self, kind):
        _kind(kind)
        return 0

    def serialize(self, g, kind):
        _kind(kind)
        return self._check(g).to_bytes(self.ELEMENT_WIDTH, "little")

    def deserialize(self, data, kind):
        _kind(kind)
        if len(data) != self.ELEMENT_WIDTH:
            raise DecodeError(f"toy element must be {self.ELEMENT_WIDTH} bytes")
        v = int.from_bytes(data, "little")
        if v >= self.order:
            raise DecodeError("toy element not reduced modulo q")
        return v

    def encode_scalar(self, k):
        return (k % self.order).to_bytes(self.ELEMENT_WIDTH, "little")

    def decode_scalar(self, data):
        if len(data) != self.ELEMENT_WIDTH:
            raise DecodeError("scalar has wrong length")
        k = int.from_bytes(data, "little")
        if k >= self.order:
            raise DecodeError("scalar is not reduced")
        return k


class Bls12Backend(Backend):
    """BLS12-381 with compressed ZCash-style point encodings."""

    def __init__(self):
        try:
            import blspy
            import py_arkworks_bls12381 as ark
        except ImportError as exc:  # pragma: no cover - dependency missing
            raise BackendError(f"production backend unavailable: {exc}") from exc
        self._ark = ark
        self._blspy = blspy
        self._types = {"g1": ark.G1Point, "g2": ark.G2Point, "gt": ark.GT}
        self.descriptor = BackendDescriptor(
            PRODUCTION_ID,
            "bls12-381",
            BLS12_381_ORDER,
            {"g1": 48, "g2": 96, "gt": 576, "scalar": 32},
        )
        self._gt_one = ark.GT.one()

    def _check(self, g: Any, *kinds: str) -> Any:
        if not isinstance(g, tuple(self._types[k] for k in kinds)):
            raise InvalidElementError(f"expected {'/'.join(kinds)} element, got {type(g).__name__}")
        return g

    def _mul(self, k, g):
        self._check(g, "g1", "g2")
        return g * self._ark.Scalar(k)

    def _pair(self, a, b):
        return self._ark.GT.pairing(self._check(a, "g1"), self._check(b, "g2"))

    def _gt_pow(self, g, k):
        self._check(g, "gt")
        # Left-to-right square-and-multiply; the binding exposes only GT * GT.
        acc = self._gt_one
        for bit in bin(k)[2:] if k else "":
            acc = acc * acc
            if bit == "1":
                acc = acc * g
        return acc

    def _hash_to_g1(self, msg, dst):
        point = self._blspy.G1Element.from_message(msg, dst)
        return self._ark.G1Point.from_compressed_bytes(bytes(point))

    def add(self, a, b):
        return a + b

    def gt_mul(self, a, b):
        return self._check(a, "gt") * self._check(b, "gt")

    def generator(self, kind):
        _kind(kind)
        if kind == "gt":
            return self._ark.GT()
        return self._types[kind]()

    def identity(self, kind):
        _kind(kind)
        if kind == "gt":
            return self._gt_one
        return self._types[kind].identity()

    def serialize(self, g, kind):
        _kind(kind)
        self._check(g, kind)
        if kind == "gt":
            return bytes.fromhex(str(g))
        return bytes(g.to_compressed_bytes())

    def deserialize(self, data, kind):
        _kind(kind)
        data = bytes(data)
        if len(data) != self.descriptor.size(kind):
            raise DecodeError(f"{kind} element must be {self.descriptor.size(kind)} bytes")
        if kind == "gt":
            # The binding offers no GT constructor; GT values are only ever hashed.
            raise DecodeError("GT elements cannot be decoded on the production backend")
        try:
            g = self._types[kind].from_compressed_bytes(data)
        except ValueError as exc:
            raise DecodeError(f"invalid {kind} encoding: {exc}") from exc
        # The underlying decoder tolerates junk bits beside the infinity flag.
        if bytes(g.to_compressed_bytes()) != data:
            raise DecodeError(f"non-canonical {kind} encoding")
        return g


def _kind(kind: str) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown element kind {kind!r}")


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def _is_prime(n: int) -> bool:
    from sympy import isprime

    return bool(isprime(n))


_PRODUCTION: Bls12Backend | None = None
_TOYS: dict[int, ToyBackend] = {}


def production() -> Bls12Backend:
    global _PRODUCTION
    if _PRODUCTION is None:
        _PRODUCTION = Bls12Backend()
    return _PRODUCTION


def toy(q: int = 101) -> ToyBackend:
    if q not in _TOYS:
        _TOYS[q] = ToyBackend(q)
    return _TOYS[q]


def get_backend(name: str, q: int | None = None) -> Backend:
    if name in ("production", "bls12-381"):
        return production()
    if name == "toy":
        return toy(q or 101)
    raise BackendError(f"unknown backend {name!r}")


def backend_for_id(backend_id: int, q: int | None = None) -> Backend:
    if backend_id == PRODUCTION_ID:
        return production()
    if backend_id == TOY_ID:
        if q is None:
            raise BackendError("toy backend needs its group order")
        return toy(q)
    raise BackendError(f"unknown backend id {backend_id:#x}")


@dataclass(frozen=True)
class Mirrored:
    """One public value published in both source groups from the same scalar."""

    g1: Any
    g2: Any

    @classmethod
    def from_scalar(cls, backend: Backend, k: int, base: "Mirrored") -> "Mirrored":
        return cls(backend.scalar_mul(k, base.g1), backend.scalar_mul(k, base.g2))

    def encode(self, backend: Backend) -> bytes:
        return backend.serialize(self.g1, "g1") + backend.serialize(self.g2, "g2")

    @classmethod
    def decode(cls, backend: Backend, data: bytes) -> "Mirrored":
        w1 = backend.descriptor.size("g1")
        if len(data) != w1 + backend.descriptor.size("g2"):
            raise DecodeError("mirrored pair has wrong length")
        return cls(backend.deserialize(data[:w1], "g1"), backend.deserialize(data[w1:], "g2"))

    def is_consistent(self, backend: Backend, base: "Mirrored") -> bool:
        """Cross-pairing check that both halves carry the same discrete log."""
        return backend.eq(backend.pair(self.g1, base.g2), backend.pair(base.g1, self.g2))
