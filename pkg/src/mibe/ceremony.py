"""Two-authority setup and blinded private-key issuing.

Roles: the PKG holds the master scalar ``pkg_pr``; the PKPO (privacy
organisation) holds ``pkpo_pr``.  A user's final key is
``D_ID = pkg_pr * pkpo_pr * Q_ID`` but neither authority ever transmits its
contribution in the clear: each divides by an H5 blind that only the holder
of ``usk_pr`` can recompute.

Pairings are type-3, so values paired on both sides (the generator and the
public keys) are published as :class:`~mibe.backend.Mirrored` pairs.  All
protocol points (Q_ID, Q/T replies, D_ID) live in G1.
"""

from __future__ import annotations

import datetime as _dt
import logging
import threading
from dataclasses import dataclass, field
from typing import IO, Any, Callable, Iterable

from mibe.backend import Backend, Mirrored, backend_for_id
from mibe.errors import (
    DecodeError,
    IdentityRejectedError,
    InvalidElementError,
    VerificationError,
)
from mibe.hashing import HashConfig, Hashes
from mibe.wire import Reader, Writer

log = logging.getLogger(__name__)

EXPIRY_SEPARATOR = "|"

Vet = Callable[[str], bool]


def accept_all(identity: str) -> bool:
    return True


def allowlist(identities: Iterable[str]) -> Vet:
    allowed = frozenset(identities)
    return lambda identity: identity in allowed


# -- identities with limited validity ---------------------------------------


def with_expiry(identity: str, expiry: _dt.date) -> str:
    return f"{identity}{EXPIRY_SEPARATOR}{expiry.isoformat()}"


def identity_expiry(identity: str) -> _dt.date | None:
    """Expiry date carried by a ``name|YYYY-MM-DD`` identity, if any."""
    head, sep, tail = identity.rpartition(EXPIRY_SEPARATOR)
    if not sep or not head or len(tail) != 10:
        return None
    try:
        return _dt.date.fromisoformat(tail)
    except ValueError:
        return None


# -- secrets and public parameters ------------------------------------------


@dataclass(frozen=True)
class PkgSecret:
    pkg_pr: int = field(repr=False)


@dataclass(frozen=True)
class PkpoSecret:
    pkpo_pr: int = field(repr=False)


@dataclass(frozen=True)
class SystemParams:
    backend: Backend
    generator: Mirrored
    pkg_pub: Mirrored
    pkpo_pub: Mirrored | None = None
    hash_config: HashConfig = field(default_factory=HashConfig)

    @property
    def complete(self) -> bool:
        return self.pkpo_pub is not None

    @property
    def hashes(self) -> Hashes:
        h = self.__dict__.get("_hashes")
        if h is None:
            h = Hashes(self.backend, self.hash_config)
            object.__setattr__(self, "_hashes", h)
        return h

    def q_id(self, identity: str) -> Any:
        self._require_complete()
        return self.hashes.h1_identity_to_point(identity, self.pkg_pub, self.pkpo_pub)

    def _require_complete(self) -> None:
        if self.pkpo_pub is None:
            raise ValueError("parameters lack the PKPO public key; run pkpo setup first")

    def to_bytes(self) -> bytes:
        b = self.backend
        w = Writer().u8(b.backend_id).blob(_int_bytes(b.order))
        cfg = self.hash_config
        w.u16(cfg.n_bits).u16(cfg.l_bits).text(cfg.xof)
        for tag in cfg.tags:
            w.text(tag)
        w.raw(self.generator.encode(b)).raw(self.pkg_pub.encode(b))
        if self.pkpo_pub is None:
            w.u8(0)
        else:
            w.u8(1).raw(self.pkpo_pub.encode(b))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SystemParams":
        r = Reader(data)
        params = cls.read(r)
        r.done()
        return params

    @classmethod
    def read(cls, r: Reader) -> "SystemParams":
        backend_id = r.u8()
        order = int.from_bytes(r.blob(), "big")
        backend = backend_for_id(backend_id, order)
        if backend.order != order:
            raise DecodeError("group order does not match backend")
        n_bits, l_bits, xof_name = r.u16(), r.u16(), r.text()
        tags = tuple(r.text() for _ in range(5))
        try:
            cfg = HashConfig(tags=tags, n_bits=n_bits, l_bits=l_bits, xof=xof_name)
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
        width = backend.descriptor.size("g1") + backend.descriptor.size("g2")
        generator = Mirrored.decode(backend, r.raw(width))
        pkg_pub = Mirrored.decode(backend, r.raw(width))
        pkpo_pub = Mirrored.decode(backend, r.raw(width)) if r.u8() else None
        return cls(backend, generator, pkg_pub, pkpo_pub, cfg)

    def check_consistency(self) -> bool:
        """Every mirrored value carries the same scalar in G1 and G2."""
        b, base = self.backend, self.generator
        values = [self.pkg_pub] + ([self.pkpo_pub] if self.pkpo_pub is not None else [])
        return all(v.is_consistent(b, base) for v in values)


def _int_bytes(n: int) -> bytes:
    return n.to_bytes((n.bit_length() + 7) // 8, "big")


def pkg_setup(rng, backend: Backend, config: HashConfig | None = None) -> tuple[SystemParams, PkgSecret]:
    """PKG half of setup: master key and partial parameters."""
    pkg_pr = backend.random_scalar(rng)
    generator = Mirrored(backend.generator("g1"), backend.generator("g2"))
    pkg_pub = Mirrored.from_scalar(backend, pkg_pr, generator)
    return SystemParams(backend, generator, pkg_pub, None, config or HashConfig()), PkgSecret(pkg_pr)


def pkpo_setup(rng, params: SystemParams) -> tuple[SystemParams, PkpoSecret]:
    """PKPO half of setup: ``pkpo_pub = pkpo_pr * pkg_pub`` completes the params."""
    b = params.backend
    pkpo_pr = b.random_scalar(rng)
    pkpo_pub = Mirrored.from_scalar(b, pkpo_pr, params.pkg_pub)
    return (
        SystemParams(b, params.generator, params.pkg_pub, pkpo_pub, params.hash_config),
        PkpoSecret(pkpo_pr),
    )


def setup(rng, backend: Backend, config: HashConfig | None = None) -> tuple[SystemParams, PkgSecret, PkpoSecret]:
    partial, pkg = pkg_setup(rng, backend, config)
    params, pkpo = pkpo_setup(rng, partial)
    return params, pkg, pkpo


# -- user side --------------------------------------------------------------


@dataclass(frozen=True)
class UserKeypair:
    identity: str
    usk_pr: int = field(repr=False)
    usk_pub: Mirrored


def user_keygen(rng, params: SystemParams, identity: str) -> UserKeypair:
    b = params.backend
    usk_pr = b.random_scalar(rng)
    return UserKeypair(identity, usk_pr, Mirrored.from_scalar(b, usk_pr, params.generator))


def keypair_from_scalar(params: SystemParams, identity: str, usk_pr: int) -> UserKeypair:
    b = params.backend
    usk_pr %= b.order
    if usk_pr == 0:
        raise InvalidElementError("user secret must be nonzero")
    return UserKeypair(identity, usk_pr, Mirrored.from_scalar(b, usk_pr, params.generator))


# -- replies and keys -------------------------------------------------------


@dataclass(frozen=True)
class PartialKeyReply:
    q_pkg: Any
    t_pkg: Any


@dataclass(frozen=True)
class SecuredKeyReply:
    q_pkpo: Any
    t_pkpo: Any


@dataclass(frozen=True)
class ExtractedPrivateKey:
    identity: str
    d_id: Any = field(repr=False)

    @property
    def expiry(self) -> _dt.date | None:
        return identity_expiry(self.identity)


def _check_usk_pub(params: SystemParams, usk_pub: Mirrored) -> None:
    b = params.backend
    if b.is_identity(usk_pub.g1, "g1") or b.is_identity(usk_pub.g2, "g2"):
        raise InvalidElementError("user public key is the identity element")
    if not usk_pub.is_consistent(b, params.generator):
        raise InvalidElementError("user public key halves disagree")


def partial_key_supply(
    pkg_secret: PkgSecret,
    params: SystemParams,
    identity: str,
    usk_pub: Mirrored,
    vet: Vet = accept_all,
) -> PartialKeyReply:
    """PKG stage: ``Q_pkg = (pkg_pr * Q_ID) / H5(e(pkg_pr * usk_pub, pkg_pub))``."""
    if not vet(identity):
        raise IdentityRejectedError(f"identity {identity!r} rejected by vetting")
    b = params.backend
    _check_usk_pub(params, usk_pub)
    k = pkg_secret.pkg_pr
    q_id = params.q_id(identity)
    blind = params.hashes.h5_blind_scalar(b.pair(b.scalar_mul(k, usk_pub.g1), params.pkg_pub.g2))
    q_pkg = b.scalar_mul(b.scalar_inverse(blind), b.scalar_mul(k, q_id))
    return PartialKeyReply(q_pkg, b.scalar_mul(k, q_pkg))


def verify_partial(params: SystemParams, reply: PartialKeyReply) -> bool:
    """``e(T_pkg, P) == e(Q_pkg, pkg_pub)``."""
    b = params.backend
    try:
        lhs = b.pair(reply.t_pkg, params.generator.g2)
        rhs = b.pair(reply.q_pkg, params.pkg_pub.g2)
    except InvalidElementError:
        return False
    return b.eq(lhs, rhs)


def key_securing(
    pkpo_secret: PkpoSecret,
    params: SystemParams,
    identity: str,
    usk_pub: Mirrored,
    reply: PartialKeyReply,
) -> SecuredKeyReply:
    """PKPO stage: re-blind the verified partial key with ``pkpo_pr``."""
    if not verify_partial(params, reply):
        raise VerificationError("partial", "partial key verification failed")
    b = params.backend
    _check_usk_pub(params, usk_pub)
    k = pkpo_secret.pkpo_pr
    blind = params.hashes.h5_blind_scalar(b.pair(b.scalar_mul(k, usk_pub.g1), params.pkg_pub.g2))
    q_pkpo = b.scalar_mul(b.scalar_inverse(blind), b.scalar_mul(k, reply.q_pkg))
    return SecuredKeyReply(q_pkpo, b.scalar_mul(k, q_pkpo))


def verify_secured(params: SystemParams, reply: SecuredKeyReply) -> bool:
    """``e(T_pkpo, pkg_pub) == e(Q_pkpo, pkpo_pub)``."""
    params._require_complete()
    b = params.backend
    try:
        lhs = b.pair(reply.t_pkpo, params.pkg_pub.g2)
        rhs = b.pair(reply.q_pkpo, params.pkpo_pub.g2)
    except InvalidElementError:
        return False
    return b.eq(lhs, rhs)


def unblind_factors(user: UserKeypair, params: SystemParams) -> tuple[int, int]:
    """The two H5 values the user multiplies back in.

    ``e(pkg_pub, pkg_pub)^usk`` cancels the PKG blind and
    ``e(pkpo_pub, P)^usk`` cancels the PKPO blind; both sides equal
    ``e(P, P)`` raised to the same product of three secrets.
    """
    b, h = params.backend, params.hashes
    f_pkg = h.h5_blind_scalar(b.gt_pow(b.pair(params.pkg_pub.g1, params.pkg_pub.g2), user.usk_pr))
    f_pkpo = h.h5_blind_scalar(b.gt_pow(b.pair(params.pkpo_pub.g1, params.generator.g2), user.usk_pr))
    return f_pkg, f_pkpo


def key_fetching(user: UserKeypair, params: SystemParams, secured: SecuredKeyReply) -> ExtractedPrivateKey:
    if not verify_secured(params, secured):
        raise VerificationError("secured", "secured key verification failed")
    b = params.backend
    f_pkg, f_pkpo = unblind_factors(user, params)
    d_id = b.scalar_mul(f_pkg * f_pkpo, secured.q_pkpo)
    key = ExtractedPrivateKey(user.identity, d_id)
    if not validate_private_key(params, user.identity, key):
        raise VerificationError("validation", "unblinded key failed validation")
    return key


def validate_private_key(params: SystemParams, identity: str, key: ExtractedPrivateKey) -> bool:
    """``e(Q_ID, pkpo_pub) == e(D_ID, P)``."""
    b = params.backend
    try:
        lhs = b.pair(params.q_id(identity), params.pkpo_pub.g2)
        rhs = b.pair(key.d_id, params.generator.g2)
    except InvalidElementError:
        return False
    return b.eq(lhs, rhs)


def court_recover(
    pkg_secret: PkgSecret, pkpo_secret: PkpoSecret, params: SystemParams, identity: str
) -> ExtractedPrivateKey:
    """Judicial recovery once both authorities surrender their secrets."""
    if not isinstance(pkg_secret, PkgSecret) or not isinstance(pkpo_secret, PkpoSecret):
        raise TypeError("court recovery needs a PkgSecret and a PkpoSecret")
    b = params.backend
    k = pkg_secret.pkg_pr * pkpo_secret.pkpo_pr
    return ExtractedPrivateKey(identity, b.scalar_mul(k, params.q_id(identity)))


# -- transcripts ------------------------------------------------------------


@dataclass
class CeremonyTranscript:
    identity: str
    usk_pub: Mirrored
    partial: PartialKeyReply | None = None
    secured: SecuredKeyReply | None = None
    outcome: str = "pending"

    def records(self, backend: Backend) -> list[str]:
        """Line records ``stage<TAB>field=hex ...`` in stage order."""
        ser = backend.serialize
        lines = [
            f"request\tid={self.identity.encode().hex()}\tusk_pub={self.usk_pub.encode(backend).hex()}"
        ]
        if self.partial is not None:
            lines.append(
                f"partial\tq_pkg={ser(self.partial.q_pkg, 'g1').hex()}\tt_pkg={ser(self.partial.t_pkg, 'g1').hex()}"
            )
        if self.secured is not None:
            lines.append(
                f"secured\tq_pkpo={ser(self.secured.q_pkpo, 'g1').hex()}"
                f"\tt_pkpo={ser(self.secured.t_pkpo, 'g1').hex()}"
            )
        lines.append(f"outcome\tvalue={self.outcome}")
        return lines

    @classmethod
    def from_records(cls, backend: Backend, lines: Iterable[str]) -> "CeremonyTranscript":
        t: CeremonyTranscript | None = None
        for line in lines:
            stage, *fields = line.rstrip("\n").split("\t")
            kv = dict(f.split("=", 1) for f in fields)
            if stage == "request":
                t = cls(bytes.fromhex(kv["id"]).decode(), Mirrored.decode(backend, bytes.fromhex(kv["usk_pub"])))
            elif t is None:
                raise DecodeError("transcript must start with a request record")
            elif stage == "partial":
                t.partial = PartialKeyReply(
                    backend.deserialize(bytes.fromhex(kv["q_pkg"]), "g1"),
                    backend.deserialize(bytes.fromhex(kv["t_pkg"]), "g1"),
                )
            elif stage == "secured":
                t.secured = SecuredKeyReply(
                    backend.deserialize(bytes.fromhex(kv["q_pkpo"]), "g1"),
                    backend.deserialize(bytes.fromhex(kv["t_pkpo"]), "g1"),
                )
            elif stage == "outcome":
                t.outcome = kv["value"]
            else:
                raise DecodeError(f"unknown transcript stage {stage!r}")
        if t is None:
            raise DecodeError("empty transcript")
        return t


class TranscriptLog:
    """Append-only transcript store, safe to share between threads."""

    def __init__(self, backend: Backend, stream: IO[str] | None = None):
        self._backend = backend
        self._stream = stream
        self._lock = threading.Lock()
        self._entries: list[CeremonyTranscript] = []

    def append(self, transcript: CeremonyTranscript) -> None:
        lines = transcript.records(self._backend)
        with self._lock:
            self._entries.append(transcript)
            if self._stream is not None:
                self._stream.write("\n".join(lines) + "\n")
                self._stream.flush()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def entries(self) -> list[CeremonyTranscript]:
        with self._lock:
            return list(self._entries)


def run_ceremony(
    params: SystemParams,
    pkg_secret: PkgSecret,
    pkpo_secret: PkpoSecret,
    user: UserKeypair,
    vet: Vet = accept_all,
) -> tuple[ExtractedPrivateKey, CeremonyTranscript]:
    """All three stages in-process, with the user's checks between them."""
    transcript = CeremonyTranscript(user.identity, user.usk_pub)
    try:
        transcript.partial = partial_key_supply(pkg_secret, params, user.identity, user.usk_pub, vet)
        if not verify_partial(params, transcript.partial):
            raise VerificationError("partial")
        transcript.secured = key_securing(pkpo_secret, params, user.identity, user.usk_pub, transcript.partial)
        key = key_fetching(user, params, transcript.secured)
    except Exception as exc:
        transcript.outcome = f"failed:{getattr(exc, 'stage', type(exc).__name__)}"
        log.debug("ceremony for %r failed: %s", user.identity, exc)
        exc.transcript = transcript
        raise
    transcript.outcome = "done"
    return key, transcript
