"""Indistinguishability games with Type I / Type II adversary rules.

This harness runs concrete adversary strategies against the implemented
schemes and estimates their advantage ``2 * (Pr[b' = b] - 1/2)``.  It is an
empirical sanity check of the built-in strategies only; it proves nothing
about adversaries in general.

A trial proceeds as: fresh setup, phase 1 oracle queries, challenge
``(M0, M1, ID_ch)``, phase 2 queries, guess.  Every oracle call lands in an
:class:`OracleLedger`; a forbidden call forfeits the trial (scored as a loss)
even if the adversary swallows the :class:`RuleViolation`.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from mibe import schemes
from mibe.backend import Backend, Mirrored, production
from mibe.ceremony import (
    ExtractedPrivateKey,
    PartialKeyReply,
    SecuredKeyReply,
    SystemParams,
    court_recover,
    key_securing,
    partial_key_supply,
    setup,
    user_keygen,
)
from mibe.errors import BackendError, MibeError

SCHEMES = ("basic", "full")


class RuleViolation(MibeError):
    def __init__(self, rule: str, detail: str = ""):
        self.rule = rule
        super().__init__(f"{rule}: {detail}" if detail else rule)


@dataclass(frozen=True)
class AdversaryRules:
    adv_type: str
    forbidden: frozenset[str]

    @property
    def master_key_provided(self) -> bool:
        return self.adv_type == "II"

    @classmethod
    def for_type(cls, adv_type: str) -> "AdversaryRules":
        if adv_type == "I":
            return TYPE_I
        if adv_type == "II":
            return TYPE_II
        raise ValueError(f"adversary type must be 'I' or 'II', not {adv_type!r}")


TYPE_I = AdversaryRules(
    "I",
    frozenset(
        {
            "extract-challenge-identity",
            "extract-after-replace",
            "replace-and-partial-extract-challenge-identity",
            "decrypt-challenge-ciphertext",
        }
    ),
)
TYPE_II = AdversaryRules(
    "II",
    frozenset(
        {
            "replace-public-key",
            "extract-challenge-identity",
            "decrypt-challenge-ciphertext",
        }
    ),
)


@dataclass
class LedgerEntry:
    phase: str
    oracle: str
    args: dict[str, Any]
    violation: str | None = None


@dataclass
class OracleLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def log(self, phase: str, oracle: str, **args: Any) -> LedgerEntry:
        entry = LedgerEntry(phase, oracle, args)
        self.entries.append(entry)
        return entry

    @property
    def violations(self) -> list[str]:
        return [e.violation for e in self.entries if e.violation]

    @property
    def violated(self) -> bool:
        return any(e.violation for e in self.entries)

    def calls(self, oracle: str, identity: str | None = None, phase: str | None = None) -> list[LedgerEntry]:
        return [
            e
            for e in self.entries
            if e.oracle == oracle
            and (identity is None or e.args.get("identity") == identity)
            and (phase is None or e.phase == phase)
        ]


@dataclass
class Challenge:
    identity: str
    ciphertext: Any
    m0: bytes
    m1: bytes


class GameContext:
    """What the adversary sees during one trial."""

    def __init__(
        self,
        params: SystemParams,
        rules: AdversaryRules,
        scheme: str,
        secrets: tuple,
        rng: random.Random,
        challenger_rng: random.Random,
    ):
        self.params = params
        self.rules = rules
        self.scheme = scheme
        self.rng = rng
        self.ledger = OracleLedger()
        self.phase = "phase1"
        self.challenge: Challenge | None = None
        self.leaked: dict[str, Any] = {}
        self._pkg, self._pkpo = secrets
        self._crng = challenger_rng
        self._users: dict[str, Any] = {}
        self._replaced: dict[str, Mirrored] = {}
        self.master_key = self._pkg if rules.master_key_provided else None

    @property
    def block_bytes(self) -> int:
        cfg = self.params.hash_config
        return cfg.l_bytes if self.scheme == "basic" else cfg.n_bytes

    def _deny(self, entry: LedgerEntry, rule: str, detail: str = "") -> None:
        entry.violation = rule
        raise RuleViolation(rule, detail)

    def _user(self, identity: str):
        user = self._users.get(identity)
        if user is None:
            user = user_keygen(self._crng, self.params, identity)
            self._users[identity] = user
        return user

    def _usk_pub(self, identity: str) -> Mirrored:
        return self._replaced.get(identity) or self._user(identity).usk_pub

    def _is_challenge_id(self, identity: str) -> bool:
        return self.challenge is not None and self.challenge.identity == identity

    # -- oracles ------------------------------------------------------------

    def request_pk(self, identity: str) -> Mirrored:
        self.ledger.log(self.phase, "request_pk", identity=identity)
        return self._usk_pub(identity)

    def replace_pk(self, identity: str, usk_pub: Mirrored) -> None:
        entry = self.ledger.log(self.phase, "replace_pk", identity=identity)
        if "replace-public-key" in self.rules.forbidden:
            self._deny(entry, "replace-public-key", "this adversary type may not substitute public keys")
        self._replaced[identity] = usk_pub

    def partial_extract(self, identity: str) -> PartialKeyReply:
        entry = self.ledger.log(self.phase, "partial_extract", identity=identity)
        if (
            "replace-and-partial-extract-challenge-identity" in self.rules.forbidden
            and self._is_challenge_id(identity)
            and identity in self._replaced
        ):
            self._deny(entry, "replace-and-partial-extract-challenge-identity")
        return partial_key_supply(self._pkg, self.params, identity, self._usk_pub(identity))

    def secure_extract(self, identity: str) -> SecuredKeyReply:
        """Partial key followed by the PKPO's securing stage."""
        self.ledger.log(self.phase, "secure_extract", identity=identity)
        usk_pub = self._usk_pub(identity)
        partial = partial_key_supply(self._pkg, self.params, identity, usk_pub)
        return key_securing(self._pkpo, self.params, identity, usk_pub, partial)

    def extract(self, identity: str) -> ExtractedPrivateKey:
        entry = self.ledger.log(self.phase, "extract", identity=identity)
        if self._is_challenge_id(identity):
            self._deny(entry, "extract-challenge-identity")
        if "extract-after-replace" in self.rules.forbidden and identity in self._replaced:
            self._deny(entry, "extract-after-replace", "public key was substituted")
        self._user(identity)
        return court_recover(self._pkg, self._pkpo, self.params, identity)

    def decrypt(self, identity: str, ciphertext: Any) -> bytes | None:
        entry = self.ledger.log(self.phase, "decrypt", identity=identity)
        if self.scheme != "full":
            self._deny(entry, "decrypt-in-cpa-game", "no decryption oracle in the CPA game")
        c = self.challenge
        if (
            self.phase == "phase2"
            and c is not None
            and identity == c.identity
            and _same_ciphertext(self.params.backend, ciphertext, c.ciphertext)
        ):
            self._deny(entry, "decrypt-challenge-ciphertext")
        key = court_recover(self._pkg, self._pkpo, self.params, identity)
        return schemes.decrypt_full(self.params, key, ciphertext)

    # -- challenger side ----------------------------------------------------

    def _check_challenge_identity(self, identity: str) -> None:
        entry = self.ledger.log("challenge", "challenge", identity=identity)
        if self.ledger.calls("extract", identity):
            self._deny(entry, "extract-challenge-identity")
        if (
            "replace-and-partial-extract-challenge-identity" in self.rules.forbidden
            and identity in self._replaced
            and self.ledger.calls("partial_extract", identity)
        ):
            self._deny(entry, "replace-and-partial-extract-challenge-identity")


def _same_ciphertext(backend: Backend, a: Any, b: Any) -> bool:
    try:
        return a.to_bytes(backend) == b.to_bytes(backend)
    except Exception:
        return False


class Adversary:
    """Callback protocol: phase1 -> choose -> phase2 -> guess.

    ``leaks`` names out-of-band gifts from the challenger, delivered into
    ``ctx.leaked`` right after the challenge ciphertext is fixed:
    ``"target_key"`` (D_ID of the challenge identity) and
    ``"pkpo_secret"``.  They model compromise, not oracle access.
    """

    name = "adversary"
    adv_type = "I"
    leaks: tuple[str, ...] = ()

    def phase1(self, ctx: GameContext) -> None:
        pass

    def choose(self, ctx: GameContext) -> tuple[bytes, bytes, str]:
        n = ctx.block_bytes
        m0 = ctx.rng.randbytes(n)
        m1 = ctx.rng.randbytes(n)
        while m1 == m0:
            m1 = ctx.rng.randbytes(n)
        return m0, m1, f"challenge-{ctx.rng.getrandbits(32):08x}@example.org"

    def phase2(self, ctx: GameContext, challenge: Challenge) -> None:
        pass

    def guess(self, ctx: GameContext, challenge: Challenge) -> int:
        raise NotImplementedError


def _decrypt_with(ctx: GameContext, d_id: Any, challenge: Challenge) -> bytes | None:
    key = ExtractedPrivateKey(challenge.identity, d_id)
    if ctx.scheme == "basic":
        return schemes.decrypt_basic(ctx.params, key, challenge.ciphertext)
    return schemes.decrypt_full(ctx.params, key, challenge.ciphertext)


def _match_guess(ctx: GameContext, plain: bytes | None, challenge: Challenge) -> int:
    if plain == challenge.m0:
        return 0
    if plain == challenge.m1:
        return 1
    return ctx.rng.getrandbits(1)


class RandomGuesser(Adversary):
    name = "random-guesser"

    def guess(self, ctx, challenge):
        return ctx.rng.getrandbits(1)


class KeyThief(Adversary):
    """Handed the target's private key out of band; a perfect distinguisher."""

    name = "key-thief"
    leaks = ("target_key",)

    def guess(self, ctx, challenge):
        return _match_guess(ctx, _decrypt_with(ctx, ctx.leaked["target_key"].d_id, challenge), challenge)


class MasterKeyHolder(Adversary):
    """Type II: forms ``pkg_pr * Q_ID`` (all a lone PKG can) and tries it."""

    name = "master-key-holder"
    adv_type = "II"

    def candidate_key(self, ctx: GameContext, identity: str) -> Any:
        b = ctx.params.backend
        if ctx.master_key is None:
            return None
        k = ctx.master_key.pkg_pr
        if "pkpo_secret" in ctx.leaked:
            k = k * ctx.leaked["pkpo_secret"].pkpo_pr
        return b.scalar_mul(k, ctx.params.q_id(identity))

    def guess(self, ctx, challenge):
        d_id = self.candidate_key(ctx, challenge.identity)
        if d_id is None:
            return ctx.rng.getrandbits(1)
        return _match_guess(ctx, _decrypt_with(ctx, d_id, challenge), challenge)


class ColludingMasterKeyHolder(MasterKeyHolder):
    """Master key plus the PKPO secret: the court-recovery path."""

    name = "master-key-holder+pkpo"
    leaks = ("pkpo_secret",)


class ReplayAttacker(Adversary):
    """Resubmits the challenge ciphertext to the phase-2 decryption oracle."""

    name = "replay-attacker"

    def phase2(self, ctx, challenge):
        plain = ctx.decrypt(challenge.identity, challenge.ciphertext)
        self._plain = plain

    def guess(self, ctx, challenge):
        return _match_guess(ctx, getattr(self, "_plain", None), challenge)


def builtin_adversaries() -> dict[str, type[Adversary]]:
    return {
        cls.name: cls
        for cls in (RandomGuesser, KeyThief, MasterKeyHolder, ColludingMasterKeyHolder, ReplayAttacker)
    }


@dataclass
class GameOutcome:
    trials: int
    wins: int
    forfeits: int
    advantage: float
    half_width: float
    adversary: str = ""
    adv_type: str = ""
    scheme: str = ""
    violations: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, trials: int, wins: int, forfeits: int = 0, **meta: Any) -> "GameOutcome":
        p = wins / trials
        # Normal-approximation 95% interval on 2p - 1.
        half = 2 * 1.96 * math.sqrt(p * (1 - p) / trials)
        return cls(trials, wins, forfeits, 2 * (p - 0.5), half, **meta)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrialResult:
    won: bool
    forfeited: bool
    ledger: OracleLedger


def play_trial(
    scheme: str,
    rules: AdversaryRules,
    adversary: Adversary,
    backend: Backend,
    rng: random.Random,
) -> TrialResult:
    """One complete game.  ``rng`` seeds separate challenger and adversary streams."""
    crng = random.Random(rng.getrandbits(128))
    arng = random.Random(rng.getrandbits(128))
    params, pkg, pkpo = setup(crng, backend)
    ctx = GameContext(params, rules, scheme, (pkg, pkpo), arng, crng)
    try:
        adversary.phase1(ctx)
        ctx.phase = "challenge"
        m0, m1, identity = adversary.choose(ctx)
        ctx._check_challenge_identity(identity)
        if len(m0) != ctx.block_bytes or len(m1) != ctx.block_bytes:
            # Encryption yields reject on malformed messages: the adversary loses.
            return TrialResult(False, False, ctx.ledger)
        b = crng.getrandbits(1)
        mb = m1 if b else m0
        if scheme == "basic":
            ct = schemes.encrypt_basic(params, identity, mb, crng)
        else:
            ct = schemes.encrypt_full(params, identity, mb, crng)
        challenge = Challenge(identity, ct, m0, m1)
        ctx.challenge = challenge
        if "target_key" in adversary.leaks:
            ctx.leaked["target_key"] = court_recover(pkg, pkpo, params, identity)
        if "pkpo_secret" in adversary.leaks:
            ctx.leaked["pkpo_secret"] = pkpo
        ctx.phase = "phase2"
        adversary.phase2(ctx, challenge)
        ctx.phase = "guess"
        guess = adversary.guess(ctx, challenge)
    except RuleViolation:
        return TrialResult(False, True, ctx.ledger)
    if ctx.ledger.violated:
        return TrialResult(False, True, ctx.ledger)
    return TrialResult(guess in (0, 1) and guess == b, False, ctx.ledger)


def run_game(
    scheme: str,
    rules: AdversaryRules,
    adversary: Callable[[], Adversary],
    trials: int,
    rng: random.Random | int,
    backend: Backend | None = None,
) -> GameOutcome:
    """Play ``trials`` independent games and estimate the advantage.

    ``adversary`` is a zero-argument factory (an :class:`Adversary` subclass
    works); each trial gets a fresh instance.  Integer ``rng`` values are
    treated as seeds; trial ``i`` derives its own stream from the seed so runs
    are reproducible.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if trials < 1:
        raise ValueError("need at least one trial")
    backend = backend or production()
    if backend.is_toy:
        raise BackendError("advantage estimation is refused on the toy backend")
    seed = rng if isinstance(rng, int) else rng.getrandbits(64)
    wins = forfeits = 0
    violations: dict[str, int] = {}
    name = ""
    for i in range(trials):
        adv = adversary()
        name = adv.name
        result = play_trial(scheme, rules, adv, backend, random.Random(f"mibe-game/{seed}/{i}"))
        wins += result.won
        forfeits += result.forfeited
        for v in result.ledger.violations:
            violations[v] = violations.get(v, 0) + 1
    return GameOutcome.from_counts(
        trials, wins, forfeits, adversary=name, adv_type=rules.adv_type, scheme=scheme, violations=violations
    )
