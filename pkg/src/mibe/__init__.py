"""Identity-based encryption with the key-issuing trust split between a PKG and a PKPO."""

from mibe.backend import get_backend, production, toy
from mibe.ceremony import (
    ExtractedPrivateKey,
    SystemParams,
    court_recover,
    run_ceremony,
    setup,
    user_keygen,
    validate_private_key,
)
from mibe.schemes import decrypt_basic, decrypt_full, encrypt_basic, encrypt_full

__version__ = "0.1.0"

__all__ = [
    "ExtractedPrivateKey",
    "SystemParams",
    "court_recover",
    "decrypt_basic",
    "decrypt_full",
    "encrypt_basic",
    "encrypt_full",
    "get_backend",
    "production",
    "run_ceremony",
    "setup",
    "toy",
    "user_keygen",
    "validate_private_key",
]
