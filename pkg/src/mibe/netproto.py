"""Framed request/reply protocol and the PKG / PKPO daemons.

Frame layout (bit-exact)::

    u32 big-endian payload length | u8 version (=1) | u8 message type | payload

Group elements travel in their canonical fixed-width encodings; identities
are u16-length-prefixed UTF-8 of at most 1024 bytes.  One request per
connection is the norm, but a connection may carry several in sequence.
"""

from __future__ import annotations

import enum
import logging
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Any, ClassVar

from mibe.backend import Backend, Mirrored
from mibe.ceremony import (
    CeremonyTranscript,
    ExtractedPrivateKey,
    PartialKeyReply,
    PkgSecret,
    PkpoSecret,
    SecuredKeyReply,
    SystemParams,
    TranscriptLog,
    UserKeypair,
    Vet,
    accept_all,
    key_fetching,
    key_securing,
    partial_key_supply,
    verify_partial,
    verify_secured,
)
from mibe.errors import (
    DecodeError,
    IdentityRejectedError,
    InvalidElementError,
    ProtocolError,
    RemoteError,
    TransportError,
    VerificationError,
)
from mibe.wire import Reader, Writer

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
HEADER = struct.Struct(">IBB")
MAX_PAYLOAD = 1 << 20
MAX_IDENTITY_BYTES = 1024

DEFAULT_PKG_PORT = 7401
DEFAULT_PKPO_PORT = 7402


class MsgType(enum.IntEnum):
    PARAMS_REQUEST = 1
    PARAMS_REPLY = 2
    PARTIAL_KEY_REQUEST = 3
    PARTIAL_KEY_REPLY = 4
    SECURE_REQUEST = 5
    SECURE_REPLY = 6
    ERROR_REPLY = 15


class ErrorCode(enum.IntEnum):
    """Stable codes carried in ErrorReply."""

    IDENTITY_REJECTED = 1
    VERIFICATION_FAILED = 2
    PROTOCOL_ERROR = 3
    INVALID_REQUEST = 4
    INTERNAL_ERROR = 5


# -- messages ---------------------------------------------------------------


@dataclass(frozen=True)
class ParamsRequest:
    TYPE: ClassVar[MsgType] = MsgType.PARAMS_REQUEST

    def payload(self, backend: Backend | None) -> bytes:
        return b""

    @classmethod
    def parse(cls, r: Reader, backend: Backend | None) -> "ParamsRequest":
        return cls()


@dataclass(frozen=True)
class ParamsReply:
    params: SystemParams
    TYPE: ClassVar[MsgType] = MsgType.PARAMS_REPLY

    def payload(self, backend):
        return self.params.to_bytes()

    @classmethod
    def parse(cls, r, backend):
        return cls(SystemParams.read(r))


def _write_identity(w: Writer, identity: str) -> None:
    raw = identity.encode("utf-8")
    if not raw or len(raw) > MAX_IDENTITY_BYTES:
        raise ProtocolError("bad-identity", "identity must be 1..1024 bytes")
    w.blob(raw)


def _read_identity(r: Reader) -> str:
    identity = r.text()
    if not identity or len(identity.encode("utf-8")) > MAX_IDENTITY_BYTES:
        raise ProtocolError("bad-identity", "identity must be 1..1024 bytes")
    return identity


def _need_backend(backend: Backend | None) -> Backend:
    if backend is None:
        raise ProtocolError("no-params", "message carries group elements but no parameters are known")
    return backend


def _read_g1(r: Reader, b: Backend) -> Any:
    return b.deserialize(r.raw(b.descriptor.size("g1")), "g1")


def _read_mirrored(r: Reader, b: Backend) -> Mirrored:
    return Mirrored.decode(b, r.raw(b.descriptor.size("g1") + b.descriptor.size("g2")))


@dataclass(frozen=True)
class PartialKeyRequest:
    identity: str
    usk_pub: Mirrored
    TYPE: ClassVar[MsgType] = MsgType.PARTIAL_KEY_REQUEST

    def payload(self, backend):
        w = Writer()
        _write_identity(w, self.identity)
        return w.raw(self.usk_pub.encode(_need_backend(backend))).getvalue()

    @classmethod
    def parse(cls, r, backend):
        b = _need_backend(backend)
        return cls(_read_identity(r), _read_mirrored(r, b))


@dataclass(frozen=True)
class PartialKeyReplyMsg:
    q_pkg: Any
    t_pkg: Any
    TYPE: ClassVar[MsgType] = MsgType.PARTIAL_KEY_REPLY

    def payload(self, backend):
        b = _need_backend(backend)
        return b.serialize(self.q_pkg, "g1") + b.serialize(self.t_pkg, "g1")

    @classmethod
    def parse(cls, r, backend):
        b = _need_backend(backend)
        return cls(_read_g1(r, b), _read_g1(r, b))


@dataclass(frozen=True)
class SecureRequest:
    identity: str
    usk_pub: Mirrored
    q_pkg: Any
    t_pkg: Any
    TYPE: ClassVar[MsgType] = MsgType.SECURE_REQUEST

    def payload(self, backend):
        b = _need_backend(backend)
        w = Writer()
        _write_identity(w, self.identity)
        w.raw(self.usk_pub.encode(b)).raw(b.serialize(self.q_pkg, "g1")).raw(b.serialize(self.t_pkg, "g1"))
        return w.getvalue()

    @classmethod
    def parse(cls, r, backend):
        b = _need_backend(backend)
        return cls(_read_identity(r), _read_mirrored(r, b), _read_g1(r, b), _read_g1(r, b))


@dataclass(frozen=True)
class SecureReplyMsg:
    q_pkpo: Any
    t_pkpo: Any
    TYPE: ClassVar[MsgType] = MsgType.SECURE_REPLY

    def payload(self, backend):
        b = _need_backend(backend)
        return b.serialize(self.q_pkpo, "g1") + b.serialize(self.t_pkpo, "g1")

    @classmethod
    def parse(cls, r, backend):
        b = _need_backend(backend)
        return cls(_read_g1(r, b), _read_g1(r, b))


@dataclass(frozen=True)
class ErrorReply:
    code: int
    text: str
    TYPE: ClassVar[MsgType] = MsgType.ERROR_REPLY

    def payload(self, backend):
        return Writer().u16(self.code).text(self.text[:1000]).getvalue()

    @classmethod
    def parse(cls, r, backend):
        return cls(r.u16(), r.text())


MESSAGES = {
    cls.TYPE: cls
    for cls in (
        ParamsRequest,
        ParamsReply,
        PartialKeyRequest,
        PartialKeyReplyMsg,
        SecureRequest,
        SecureReplyMsg,
        ErrorReply,
    )
}


# -- framing ----------------------------------------------------------------


def encode_frame(msg: Any, backend: Backend | None = None) -> bytes:
    payload = msg.payload(backend)
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError("oversized", f"payload of {len(payload)} bytes")
    return HEADER.pack(len(payload), PROTOCOL_VERSION, msg.TYPE) + payload


def _check_header(length: int, version: int, mtype: int) -> type:
    if length > MAX_PAYLOAD:
        raise ProtocolError("oversized", f"payload length {length} exceeds {MAX_PAYLOAD}")
    if version != PROTOCOL_VERSION:
        raise ProtocolError("bad-version", f"version {version}")
    try:
        return MESSAGES[MsgType(mtype)]
    except ValueError:
        raise ProtocolError("unknown-type", f"message type {mtype}") from None


def parse_payload(cls: type, payload: bytes, backend: Backend | None) -> Any:
    r = Reader(payload)
    try:
        msg = cls.parse(r, backend)
        r.done()
    except ProtocolError:
        raise
    except (DecodeError, InvalidElementError) as exc:
        raise ProtocolError("malformed", str(exc)) from exc
    except Exception as exc:  # any other decoder failure is still a protocol error
        raise ProtocolError("malformed", f"{type(exc).__name__}: {exc}") from exc
    return msg


def decode_frame(data: bytes, backend: Backend | None = None) -> Any:
    """Inverse of :func:`encode_frame`; every failure is a :class:`ProtocolError`."""
    data = bytes(data)
    if len(data) < HEADER.size:
        raise ProtocolError("truncated", "short header")
    length, version, mtype = HEADER.unpack_from(data)
    cls = _check_header(length, version, mtype)
    body = data[HEADER.size :]
    if len(body) < length:
        raise ProtocolError("truncated", f"expected {length} payload bytes, got {len(body)}")
    if len(body) > length:
        raise ProtocolError("trailing-bytes", f"{len(body) - length} bytes after payload")
    return parse_payload(cls, body, backend)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 65536))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket, backend: Backend | None) -> Any | None:
    """Read one message; ``None`` on a clean EOF before any header byte."""
    first = sock.recv(1)
    if not first:
        return None
    header = first + _recv_exact(sock, HEADER.size - 1)
    length, version, mtype = HEADER.unpack(header)
    cls = _check_header(length, version, mtype)
    return parse_payload(cls, _recv_exact(sock, length), backend)


def write_frame(sock: socket.socket, msg: Any, backend: Backend | None) -> None:
    sock.sendall(encode_frame(msg, backend))


# -- daemons ----------------------------------------------------------------


class _Handler(socketserver.BaseRequestHandler):
    server: "AuthorityServer"

    def handle(self) -> None:
        sock = self.request
        backend = self.server.params.backend
        while True:
            try:
                msg = read_frame(sock, backend)
            except ProtocolError as exc:
                self._send(ErrorReply(ErrorCode.PROTOCOL_ERROR, str(exc)))
                return
            except (ConnectionError, OSError):
                return
            if msg is None:
                return
            try:
                reply = self.server.dispatch(msg)
            except IdentityRejectedError as exc:
                reply = ErrorReply(ErrorCode.IDENTITY_REJECTED, str(exc))
            except VerificationError as exc:
                reply = ErrorReply(ErrorCode.VERIFICATION_FAILED, str(exc))
            except ProtocolError as exc:
                reply = ErrorReply(ErrorCode.PROTOCOL_ERROR, str(exc))
            except (InvalidElementError, ValueError) as exc:
                reply = ErrorReply(ErrorCode.INVALID_REQUEST, str(exc))
            except Exception:
                log.exception("request handling failed")
                reply = ErrorReply(ErrorCode.INTERNAL_ERROR, "internal error")
            if not self._send(reply):
                return

    def _send(self, msg: Any) -> bool:
        try:
            write_frame(self.request, msg, self.server.params.backend)
        except OSError:
            return False
        return True


class AuthorityServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, params: SystemParams, address: tuple[str, int], transcripts: TranscriptLog | None = None):
        self.params = params
        self.transcripts = transcripts if transcripts is not None else TranscriptLog(params.backend)
        super().__init__(address, _Handler)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def dispatch(self, msg: Any) -> Any:
        if isinstance(msg, ParamsRequest):
            return ParamsReply(self.params)
        raise ProtocolError("unexpected-message", f"{type(msg).__name__} not served here")

    def start(self) -> threading.Thread:
        """Serve from a daemon thread; stop with ``shutdown()``."""
        t = threading.Thread(target=self.serve_forever, name=type(self).__name__, daemon=True)
        t.start()
        return t


class PkgServer(AuthorityServer):
    def __init__(self, secret: PkgSecret, params: SystemParams, vet: Vet, address, transcripts=None):
        self.secret = secret
        self.vet = vet
        super().__init__(params, address, transcripts)

    def dispatch(self, msg):
        if isinstance(msg, PartialKeyRequest):
            reply = partial_key_supply(self.secret, self.params, msg.identity, msg.usk_pub, self.vet)
            self.transcripts.append(CeremonyTranscript(msg.identity, msg.usk_pub, reply, outcome="partial-issued"))
            return PartialKeyReplyMsg(reply.q_pkg, reply.t_pkg)
        return super().dispatch(msg)


class PkpoServer(AuthorityServer):
    def __init__(self, secret: PkpoSecret, params: SystemParams, address, transcripts=None):
        self.secret = secret
        super().__init__(params, address, transcripts)

    def dispatch(self, msg):
        if isinstance(msg, SecureRequest):
            partial = PartialKeyReply(msg.q_pkg, msg.t_pkg)
            try:
                secured = key_securing(self.secret, self.params, msg.identity, msg.usk_pub, partial)
            except VerificationError:
                self.transcripts.append(
                    CeremonyTranscript(msg.identity, msg.usk_pub, partial, outcome="failed:partial")
                )
                raise
            self.transcripts.append(
                CeremonyTranscript(msg.identity, msg.usk_pub, partial, secured, outcome="secured-issued")
            )
            return SecureReplyMsg(secured.q_pkpo, secured.t_pkpo)
        return super().dispatch(msg)


def pkg_serve(pkg_secret: PkgSecret, params: SystemParams, vet: Vet = accept_all, listener=("127.0.0.1", DEFAULT_PKG_PORT), transcripts=None) -> PkgServer:
    """Bind the PKG daemon; call ``serve_forever()`` or ``start()`` on the result."""
    return PkgServer(pkg_secret, params, vet, listener, transcripts)


def pkpo_serve(pkpo_secret: PkpoSecret, params: SystemParams, listener=("127.0.0.1", DEFAULT_PKPO_PORT), transcripts=None) -> PkpoServer:
    return PkpoServer(pkpo_secret, params, listener, transcripts)


# -- client -----------------------------------------------------------------


class SessionState(enum.Enum):
    AWAITING_PARTIAL = "awaiting-partial"
    AWAITING_SECURE = "awaiting-secure"
    DONE = "done"
    FAILED = "failed"


_FORWARD = {
    SessionState.AWAITING_PARTIAL: {SessionState.AWAITING_SECURE, SessionState.FAILED},
    SessionState.AWAITING_SECURE: {SessionState.DONE, SessionState.FAILED},
    SessionState.DONE: set(),
    SessionState.FAILED: set(),
}


class CeremonySession:
    """Client-side state machine; transitions only move forward."""

    def __init__(self):
        self.state = SessionState.AWAITING_PARTIAL
        self.failure: str | None = None
        self.partial: PartialKeyReply | None = None
        self.secured: SecuredKeyReply | None = None

    def advance(self, new: SessionState) -> None:
        if new not in _FORWARD[self.state]:
            raise ProtocolError("illegal-transition", f"{self.state.value} -> {new.value}")
        self.state = new

    def fail(self, reason: str) -> None:
        self.failure = reason
        self.advance(SessionState.FAILED)


def _parse_addr(addr: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(addr, tuple):
        return addr
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


def request(addr, msg: Any, backend: Backend | None, timeout: float = 10.0) -> Any:
    """Send one message on a fresh connection and return the reply."""
    try:
        with socket.create_connection(_parse_addr(addr), timeout=timeout) as sock:
            write_frame(sock, msg, backend)
            reply = read_frame(sock, backend)
    except (OSError, ConnectionError) as exc:
        raise TransportError(f"{addr}: {exc}") from exc
    if reply is None:
        raise TransportError(f"{addr}: connection closed without reply")
    if isinstance(reply, ErrorReply):
        raise RemoteError(reply.code, reply.text)
    return reply


def fetch_params(addr, timeout: float = 10.0) -> SystemParams:
    reply = request(addr, ParamsRequest(), None, timeout)
    if not isinstance(reply, ParamsReply):
        raise ProtocolError("unexpected-message", type(reply).__name__)
    return reply.params


def client_run_ceremony(
    user: UserKeypair,
    pkg_addr,
    pkpo_addr,
    params: SystemParams | None = None,
    timeout: float = 10.0,
    session: CeremonySession | None = None,
) -> ExtractedPrivateKey:
    """Run partial supply, securing and fetching against the two daemons.

    The partial key is checked before anything is sent to the PKPO, and the
    secured reply before unblinding.  Nothing is persisted on failure.
    """
    session = session or CeremonySession()
    if params is None:
        params = fetch_params(pkg_addr, timeout)
    b = params.backend
    try:
        reply = request(pkg_addr, PartialKeyRequest(user.identity, user.usk_pub), b, timeout)
        if not isinstance(reply, PartialKeyReplyMsg):
            raise ProtocolError("unexpected-message", type(reply).__name__)
        partial = PartialKeyReply(reply.q_pkg, reply.t_pkg)
        if not verify_partial(params, partial):
            raise VerificationError("partial", "PKG reply failed verification; PKPO not contacted")
        session.partial = partial
        session.advance(SessionState.AWAITING_SECURE)

        reply = request(pkpo_addr, SecureRequest(user.identity, user.usk_pub, partial.q_pkg, partial.t_pkg), b, timeout)
        if not isinstance(reply, SecureReplyMsg):
            raise ProtocolError("unexpected-message", type(reply).__name__)
        secured = SecuredKeyReply(reply.q_pkpo, reply.t_pkpo)
        if not verify_secured(params, secured):
            raise VerificationError("secured", "PKPO reply failed verification")
        session.secured = secured
        key = key_fetching(user, params, secured)
    except Exception as exc:
        session.fail(getattr(exc, "stage", None) or type(exc).__name__)
        raise
    session.advance(SessionState.DONE)
    return key
