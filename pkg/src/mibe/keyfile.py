"""Armored key files.

Binary body::

    "MIBK" | u8 version | u8 backend id | u8 role | u32 payload length |
    payload | SHA-256 over everything before it

wrapped in ``-----BEGIN MIBE <ROLE>-----`` base64 armor.  Every role's payload
starts with the serialized :class:`SystemParams`, so a single file is enough
to use the key it holds.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import textwrap
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from mibe.ceremony import ExtractedPrivateKey, PkgSecret, PkpoSecret, SystemParams, keypair_from_scalar, UserKeypair
from mibe.errors import DecodeError, KeyFileError
from mibe.wire import Reader, Writer

MAGIC = b"MIBK"
VERSION = 1


class Role(enum.IntEnum):
    PKG_SECRET = 1
    PKPO_SECRET = 2
    USER_KEYPAIR = 3
    PRIVATE_KEY = 4
    PARAMS = 5

    @property
    def label(self) -> str:
        return self.name.replace("_", "-")


@dataclass(frozen=True)
class KeyFile:
    role: Role
    backend_id: int
    payload: bytes

    def to_bytes(self) -> bytes:
        body = (
            Writer()
            .raw(MAGIC)
            .u8(VERSION)
            .u8(self.backend_id)
            .u8(self.role)
            .u32(len(self.payload))
            .raw(self.payload)
            .getvalue()
        )
        return body + hashlib.sha256(body).digest()

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyFile":
        if len(data) < 32:
            raise KeyFileError("key file too short")
        body, checksum = data[:-32], data[-32:]
        if hashlib.sha256(body).digest() != checksum:
            raise KeyFileError("key file checksum mismatch")
        r = Reader(body)
        try:
            if r.raw(4) != MAGIC:
                raise KeyFileError("not a key file")
            if r.u8() != VERSION:
                raise KeyFileError("unsupported key file version")
            backend_id, role = r.u8(), r.u8()
            payload = r.raw(r.u32())
            r.done()
            return cls(Role(role), backend_id, payload)
        except (DecodeError, ValueError) as exc:
            raise KeyFileError(f"malformed key file: {exc}") from exc

    def armor(self) -> str:
        b64 = base64.b64encode(self.to_bytes()).decode("ascii")
        label = self.role.label
        return f"-----BEGIN MIBE {label}-----\n" + "\n".join(textwrap.wrap(b64, 64)) + f"\n-----END MIBE {label}-----\n"

    @classmethod
    def dearmor(cls, text: str) -> "KeyFile":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if len(lines) < 3 or not lines[0].startswith("-----BEGIN MIBE ") or not lines[-1].startswith("-----END MIBE "):
            raise KeyFileError("missing key file armor")
        try:
            raw = base64.b64decode("".join(lines[1:-1]), validate=True)
        except ValueError as exc:
            raise KeyFileError("bad base64 in key file") from exc
        kf = cls.from_bytes(raw)
        if lines[0] != f"-----BEGIN MIBE {kf.role.label}-----":
            raise KeyFileError("armor label does not match role")
        return kf

    def expect(self, role: Role) -> "KeyFile":
        if self.role != role:
            raise KeyFileError(f"expected a {role.label} file, got {self.role.label}")
        return self


def _pack(role: Role, params: SystemParams, *fields: bytes) -> KeyFile:
    w = Writer().raw(_u32_blob(params.to_bytes()))
    for f in fields:
        w.raw(_u32_blob(f))
    return KeyFile(role, params.backend.backend_id, w.getvalue())


def _u32_blob(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def _unpack(kf: KeyFile, nfields: int) -> tuple[SystemParams, list[bytes]]:
    r = Reader(kf.payload)
    try:
        params = SystemParams.from_bytes(r.raw(r.u32()))
        fields = [r.raw(r.u32()) for _ in range(nfields)]
        r.done()
    except DecodeError as exc:
        raise KeyFileError(f"malformed {kf.role.label} payload: {exc}") from exc
    if params.backend.backend_id != kf.backend_id:
        raise KeyFileError("backend id in header does not match parameters")
    return params, fields


def dump_params(params: SystemParams) -> KeyFile:
    return _pack(Role.PARAMS, params)


def dump_pkg_secret(params: SystemParams, secret: PkgSecret) -> KeyFile:
    return _pack(Role.PKG_SECRET, params, params.backend.encode_scalar(secret.pkg_pr))


def dump_pkpo_secret(params: SystemParams, secret: PkpoSecret) -> KeyFile:
    return _pack(Role.PKPO_SECRET, params, params.backend.encode_scalar(secret.pkpo_pr))


def dump_user_keypair(params: SystemParams, user: UserKeypair) -> KeyFile:
    return _pack(Role.USER_KEYPAIR, params, user.identity.encode(), params.backend.encode_scalar(user.usk_pr))


def dump_private_key(params: SystemParams, key: ExtractedPrivateKey) -> KeyFile:
    return _pack(Role.PRIVATE_KEY, params, key.identity.encode(), params.backend.serialize(key.d_id, "g1"))


def load(kf: KeyFile) -> tuple[SystemParams, Any]:
    """Decode any key file into ``(params, object)`` according to its role."""
    try:
        if kf.role == Role.PARAMS:
            params, _ = _unpack(kf, 0)
            return params, params
        if kf.role in (Role.PKG_SECRET, Role.PKPO_SECRET):
            params, (raw,) = _unpack(kf, 1)
            k = params.backend.decode_scalar(raw)
            if k == 0:
                raise KeyFileError("secret scalar is zero")
            return params, (PkgSecret(k) if kf.role == Role.PKG_SECRET else PkpoSecret(k))
        if kf.role == Role.USER_KEYPAIR:
            params, (ident, raw) = _unpack(kf, 2)
            return params, keypair_from_scalar(params, ident.decode(), params.backend.decode_scalar(raw))
        params, (ident, raw) = _unpack(kf, 2)
        return params, ExtractedPrivateKey(ident.decode(), params.backend.deserialize(raw, "g1"))
    except (DecodeError, UnicodeDecodeError) as exc:
        raise KeyFileError(f"malformed {kf.role.label} payload: {exc}") from exc


def write(path: str | Path, kf: KeyFile) -> None:
    Path(path).write_text(kf.armor())


def read(path: str | Path, role: Role | None = None) -> tuple[SystemParams, Any]:
    kf = KeyFile.dearmor(Path(path).read_text())
    if role is not None:
        kf.expect(role)
    return load(kf)
