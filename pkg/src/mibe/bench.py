"""Metered runs of key issuing, encryption and decryption for each scheme."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from mibe import ceremony, schemes
from mibe.backend import Backend
from mibe.metering import OpCounter, ProfileRow, metered_run, profile_report

SCHEME_LABELS = {"mibe": "M-IBE", "bf": "BF-baseline"}


@dataclass
class PhaseStats:
    counter: OpCounter
    invariant: bool = True
    seconds: list[float] = field(default_factory=list)

    @property
    def mean_ms(self) -> float:
        return 1000 * sum(self.seconds) / len(self.seconds) if self.seconds else 0.0


def _timed(phase: str, thunk):
    t0 = time.perf_counter()
    result, counter = metered_run(phase, thunk)
    return result, counter, time.perf_counter() - t0


def _merge(stats: dict[str, PhaseStats], phase: str, counter: OpCounter, dt: float) -> None:
    s = stats.get(phase)
    if s is None:
        stats[phase] = PhaseStats(counter, True, [dt])
        return
    s.seconds.append(dt)
    if counter.as_dict() != s.counter.as_dict():
        s.invariant = False


def profile_scheme(scheme: str, trials: int, backend: Backend, rng) -> dict[str, PhaseStats]:
    """Meter ``trials`` full key-issue/encrypt/decrypt rounds of one scheme."""
    if scheme not in SCHEME_LABELS:
        raise ValueError(f"unknown scheme {scheme!r}")
    stats: dict[str, PhaseStats] = {}
    for i in range(trials):
        identity = f"bench-{i}@example.org"
        if scheme == "mibe":
            params, pkg, pkpo = ceremony.setup(rng, backend)
            user = ceremony.user_keygen(rng, params, identity)
            (key, _), c, dt = _timed("keygen", lambda: ceremony.run_ceremony(params, pkg, pkpo, user))
            encrypt, decrypt = schemes.encrypt_full, schemes.decrypt_full
        else:
            params, master = schemes.bf_setup(rng, backend)
            key, c, dt = _timed("keygen", lambda: schemes.bf_extract(master, params, identity))
            encrypt, decrypt = schemes.bf_baseline_encrypt, schemes.bf_baseline_decrypt
        _merge(stats, "keygen", c, dt)
        m = rng.randbytes(params.hash_config.n_bytes)
        ct, c, dt = _timed("encrypt", lambda: encrypt(params, identity, m, rng))
        _merge(stats, "encrypt", c, dt)
        out, c, dt = _timed("decrypt", lambda: decrypt(params, key, ct))
        if out != m:
            raise AssertionError(f"{scheme} roundtrip failed during profiling")
        _merge(stats, "decrypt", c, dt)
    return stats


def build_report(results: dict[str, dict[str, PhaseStats]]) -> list[ProfileRow]:
    pairs = []
    for scheme, stats in results.items():
        for phase in ("keygen", "encrypt", "decrypt"):
            if phase in stats:
                pairs.append((SCHEME_LABELS[scheme], stats[phase].counter))
    rows = profile_report(pairs)
    for row in rows:
        key = next(k for k, v in SCHEME_LABELS.items() if v == row.scheme)
        if not results[key][row.phase].invariant and row.status == "MATCH":
            row.status = "MISMATCH"
    return rows
