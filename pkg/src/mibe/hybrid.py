"""KEM/DEM envelope for arbitrary-length files.

A fresh n-bit block is encrypted with the full (FO) scheme; its SHAKE256
derivative keys AES-256-GCM over the file body.  The header, including the
KEM ciphertext, is bound as associated data.

Envelope::

    "MIBH" | u8 version | u32 kem length | kem ciphertext | 12-byte nonce | AEAD body
"""

from __future__ import annotations

import hashlib
import datetime as _dt

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from mibe import schemes
from mibe.ceremony import ExtractedPrivateKey, SystemParams
from mibe.errors import DecodeError
from mibe.wire import Reader, Writer

MAGIC = b"MIBH"
VERSION = 1
NONCE_BYTES = 12


def _dem_key(block: bytes) -> bytes:
    return hashlib.shake_256(b"MIBE-DEM\x00" + block).digest(32)


def seal(params: SystemParams, recipient_id: str, body: bytes, rng, *, today: _dt.date | None = None) -> bytes:
    block = rng.randbytes(params.hash_config.n_bytes)
    kem = schemes.encrypt_full(params, recipient_id, block, rng, today=today).to_bytes(params.backend)
    nonce = rng.randbytes(NONCE_BYTES)
    header = Writer().raw(MAGIC).u8(VERSION).u32(len(kem)).raw(kem).raw(nonce).getvalue()
    return header + AESGCM(_dem_key(block)).encrypt(nonce, body, header)


def open_envelope(params: SystemParams, key: ExtractedPrivateKey, envelope: bytes) -> bytes | None:
    """Plaintext, or ``None`` if the KEM check or the AEAD tag fails."""
    r = Reader(envelope)
    try:
        if r.raw(4) != MAGIC or r.u8() != VERSION:
            return None
        kem = r.raw(r.u32())
        r.raw(NONCE_BYTES)
    except DecodeError:
        return None
    header_len = len(envelope) - r.remaining()
    header, sealed = envelope[:header_len], envelope[header_len:]
    block = schemes.decrypt_full_bytes(params, key, kem)
    if block is None:
        return None
    nonce = header[-NONCE_BYTES:]
    try:
        return AESGCM(_dem_key(block)).decrypt(nonce, sealed, header)
    except InvalidTag:
        return None
