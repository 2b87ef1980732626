"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MibeError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(MibeError, ValueError):
    """Bytes that do not decode to a valid element, key or message."""


class InvalidElementError(MibeError, ValueError):
    """A group element or scalar that is not valid for the active backend."""


class BackendError(MibeError):
    """Backend initialisation failed or the backend is not allowed here."""


class EmptyIdentityError(MibeError, ValueError):
    pass


class LengthMismatchError(MibeError, ValueError):
    pass


class ExpiredIdentityError(MibeError):
    """Refusal to encrypt towards an identity whose expiry date has passed."""


class IdentityRejectedError(MibeError):
    """The identity-vetting hook refused to issue a partial key."""


class VerificationError(MibeError):
    """A ceremony reply or an unblinded key failed its pairing check."""

    def __init__(self, stage: str, message: str | None = None):
        self.stage = stage
        super().__init__(message or f"{stage} verification failed")


class ProtocolError(MibeError):
    """Malformed frame or message on the wire."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class TransportError(MibeError):
    """Connection failure while talking to an authority daemon."""


class RemoteError(MibeError):
    """An authority daemon answered with an ErrorReply."""

    def __init__(self, code: int, text: str):
        self.code = code
        self.text = text
        super().__init__(f"remote error {code}: {text}")


class KeyFileError(MibeError):
    """Key file with a bad checksum, wrong role or unsupported version."""
