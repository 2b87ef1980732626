"""Basic and Fujisaki-Okamoto (full) encryption, plus a Boneh-Franklin baseline.

Encryption towards identity ``ID`` uses ``g = e(Q_ID, pkpo_pub)``; the
recipient recovers ``g^r`` as ``e(D_ID, U)`` with ``U = r*P`` in G2.  The
baseline is the same construction with one authority: ``g = e(Q_ID, pkg_pub)``
and ``D_ID = s*Q_ID``.

Decryption of a full ciphertext returns ``None`` for reject; it never raises
on a well-formed but invalid ciphertext.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from typing import Any

from mibe.backend import Backend
from mibe.ceremony import (
    ExtractedPrivateKey,
    PkgSecret,
    SystemParams,
    identity_expiry,
    pkg_setup,
)
from mibe.errors import DecodeError, ExpiredIdentityError, InvalidElementError, LengthMismatchError
from mibe.hashing import HashConfig, xor
from mibe.wire import Reader, Writer

MAGIC = b"MIBE"
VERSION = 1

SCHEME_BASIC = 1
SCHEME_FULL = 2
SCHEME_BF = 3


@dataclass(frozen=True)
class BasicCiphertext:
    u: Any
    v: bytes
    scheme: int = SCHEME_BASIC

    def to_bytes(self, backend: Backend) -> bytes:
        return _header(backend, self.scheme, len(self.v) * 8).raw(backend.serialize(self.u, "g2")).raw(self.v).getvalue()


@dataclass(frozen=True)
class FullCiphertext:
    u: Any
    v: bytes
    w: bytes
    scheme: int = SCHEME_FULL

    def to_bytes(self, backend: Backend) -> bytes:
        w = _header(backend, self.scheme, len(self.v) * 8)
        return w.raw(backend.serialize(self.u, "g2")).raw(self.v).raw(self.w).getvalue()


def _header(backend: Backend, scheme: int, bits: int) -> Writer:
    return Writer().raw(MAGIC).u8(VERSION).u8(backend.backend_id).u8(scheme).u16(bits)


def decode_ciphertext(data: bytes, backend: Backend) -> BasicCiphertext | FullCiphertext:
    r = Reader(data)
    if r.raw(4) != MAGIC:
        raise DecodeError("not an M-IBE ciphertext")
    if r.u8() != VERSION:
        raise DecodeError("unsupported ciphertext version")
    if r.u8() != backend.backend_id:
        raise DecodeError("ciphertext was made for another backend")
    scheme = r.u8()
    bits = r.u16()
    if bits == 0 or bits % 8:
        raise DecodeError("block length must be a positive multiple of 8 bits")
    u = backend.deserialize(r.raw(backend.descriptor.size("g2")), "g2")
    nbytes = bits // 8
    if scheme == SCHEME_BASIC:
        c = BasicCiphertext(u, r.raw(nbytes))
    elif scheme in (SCHEME_FULL, SCHEME_BF):
        c = FullCiphertext(u, r.raw(nbytes), r.raw(nbytes), scheme)
    else:
        raise DecodeError(f"unknown scheme id {scheme}")
    r.done()
    return c


def check_expiry(identity: str, today: _dt.date | None = None) -> None:
    expiry = identity_expiry(identity)
    if expiry is not None and expiry < (today or _dt.date.today()):
        raise ExpiredIdentityError(f"identity {identity!r} expired on {expiry.isoformat()}")


def _require_len(block: bytes, nbytes: int, what: str) -> None:
    if len(block) != nbytes:
        raise LengthMismatchError(f"{what} must be exactly {nbytes * 8} bits, got {len(block) * 8}")


# -- shared cores -------------------------------------------------------------


def _basic_encrypt(params: SystemParams, q_id: Any, recipient_pub_g2: Any, m: bytes, r: int) -> BasicCiphertext:
    b = params.backend
    g = b.pair(q_id, recipient_pub_g2)
    u = b.scalar_mul(r, params.generator.g2)
    return BasicCiphertext(u, xor(m, params.hashes.h2_gt_mask(b.gt_pow(g, r))))


def _full_encrypt(
    params: SystemParams, q_id: Any, recipient_pub_g2: Any, m: bytes, z: bytes, scheme: int
) -> FullCiphertext:
    b, h = params.backend, params.hashes
    r = h.h3_fo_randomness(z, m)
    g = b.pair(q_id, recipient_pub_g2)
    u = b.scalar_mul(r, params.generator.g2)
    mask = h.h2_gt_mask(b.gt_pow(g, r))
    return FullCiphertext(u, xor(z, mask[: len(z)]), xor(m, h.h4_payload_mask(z)), scheme)


def _full_decrypt(params: SystemParams, d_id: Any, c: FullCiphertext) -> bytes | None:
    b, h = params.backend, params.hashes
    n = params.hash_config.n_bytes
    if len(c.v) != n or len(c.w) != n:
        return None
    try:
        g_prime = b.pair(d_id, c.u)
    except InvalidElementError:
        return None
    z = xor(c.v, h.h2_gt_mask(g_prime)[:n])
    m = xor(c.w, h.h4_payload_mask(z))
    r = h.h3_fo_randomness(z, m)
    if not b.eq(b.scalar_mul(r, params.generator.g2), c.u):
        return None
    return m


def _full_mask_fits(params: SystemParams) -> None:
    if params.hash_config.l_bits < params.hash_config.n_bits:
        raise ValueError("H2 output (l bits) must cover the n-bit nonce")


# -- basic ------------------------------------------------------------------


def encrypt_basic(
    params: SystemParams, recipient_id: str, m: bytes, rng, *, today: _dt.date | None = None
) -> BasicCiphertext:
    _require_len(m, params.hash_config.l_bytes, "message")
    check_expiry(recipient_id, today)
    r = params.backend.random_scalar(rng)
    return _basic_encrypt(params, params.q_id(recipient_id), params.pkpo_pub.g2, m, r)


def decrypt_basic(params: SystemParams, key: ExtractedPrivateKey, c: BasicCiphertext) -> bytes:
    b = params.backend
    _require_len(c.v, params.hash_config.l_bytes, "ciphertext V")
    return xor(c.v, params.hashes.h2_gt_mask(b.pair(key.d_id, c.u)))


# -- full -------------------------------------------------------------------


def encrypt_full(
    params: SystemParams,
    recipient_id: str,
    m: bytes,
    rng,
    *,
    today: _dt.date | None = None,
    z: bytes | None = None,
) -> FullCiphertext:
    """FO-transformed encryption; ``z`` may be pinned to make the output deterministic."""
    n = params.hash_config.n_bytes
    _require_len(m, n, "message")
    _full_mask_fits(params)
    check_expiry(recipient_id, today)
    if z is None:
        z = rng.randbytes(n)
    _require_len(z, n, "nonce z")
    return _full_encrypt(params, params.q_id(recipient_id), params.pkpo_pub.g2, m, z, SCHEME_FULL)


def decrypt_full(params: SystemParams, key: ExtractedPrivateKey, c: FullCiphertext) -> bytes | None:
    """Plaintext, or ``None`` when the FO re-encryption check fails."""
    if c.scheme != SCHEME_FULL:
        return None
    return _full_decrypt(params, key.d_id, c)


# -- Boneh-Franklin baseline --------------------------------------------------


def bf_setup(rng, backend: Backend, config: HashConfig | None = None) -> tuple[SystemParams, PkgSecret]:
    """Single-authority parameters; ``pkpo_pub`` stays empty."""
    return pkg_setup(rng, backend, config)


def bf_q_id(params: SystemParams, identity: str) -> Any:
    return params.hashes.h1_identity_to_point(identity, params.pkg_pub)


def bf_extract(master: PkgSecret, params: SystemParams, identity: str) -> ExtractedPrivateKey:
    return ExtractedPrivateKey(identity, params.backend.scalar_mul(master.pkg_pr, bf_q_id(params, identity)))


def bf_baseline_encrypt(
    params: SystemParams,
    recipient_id: str,
    m: bytes,
    rng,
    *,
    today: _dt.date | None = None,
    z: bytes | None = None,
) -> FullCiphertext:
    n = params.hash_config.n_bytes
    _require_len(m, n, "message")
    _full_mask_fits(params)
    check_expiry(recipient_id, today)
    if z is None:
        z = rng.randbytes(n)
    _require_len(z, n, "nonce z")
    return _full_encrypt(params, bf_q_id(params, recipient_id), params.pkg_pub.g2, m, z, SCHEME_BF)


def bf_baseline_decrypt(params: SystemParams, key: ExtractedPrivateKey, c: FullCiphertext) -> bytes | None:
    if c.scheme != SCHEME_BF:
        return None
    return _full_decrypt(params, key.d_id, c)


def decrypt_full_bytes(params: SystemParams, key: ExtractedPrivateKey, data: bytes) -> bytes | None:
    """Decode and decrypt a serialized full ciphertext; any failure is a reject."""
    try:
        c = decode_ciphertext(data, params.backend)
    except DecodeError:
        return None
    if not isinstance(c, FullCiphertext):
        return None
    return decrypt_full(params, key, c)
