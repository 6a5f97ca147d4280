"""Scenario configuration: one dataclass, JSON round-trip, content hash.

A scenario fully determines a run: identical configs (seed included)
produce byte-identical metrics output. Unknown keys are rejected so a
typo in a scenario file fails loudly instead of silently running the
default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .adversary import AttackKind
from .view import ProtocolParams


class ConfigInvalid(Exception):
    """Raised for out-of-range or unknown scenario fields."""


@dataclass(slots=True)
class ChurnEvent:
    """One scheduled membership change at the start of a cycle."""

    cycle: int
    fail_count: int = 0
    fail_fraction: float = 0.0
    fail_malicious: bool = False  # coordinated departure of the whole party
    join_count: int = 0


@dataclass(slots=True)
class ScenarioConfig:
    n: int = 1000
    view_len: int = 20
    swap_len: int = 3
    redemption_cache_len: int = 5
    cycles: int = 100
    seed: int = 1
    mode: str = "secure"              # "legacy" | "secure"
    titfortat: bool = True
    attack: str = "none"              # none | hub | deplete | clone | freq_spam
    attack_start: int = 50
    malicious_fraction: float = 0.0
    clone_age: int = 12
    spam_rate: int = 2
    honor_titfortat: bool = True
    message_loss: float = 0.0
    max_skew_ms: int = 0
    period_ms: int = 10_000
    sample_ttl: int = 0               # 0 -> 2 * view_len
    redemption_ttl: int = 6
    proofs_per_gossip: int = 16
    nonswap_swap_cap: int = 0         # 0 -> swap_len (cap disabled)
    join_links: int = 5
    flood_hop_budget: int = 0         # 0 -> unlimited within the cycle
    churn: list[ChurnEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        try:
            ProtocolParams(self.n, self.view_len, self.swap_len,
                           self.redemption_cache_len, self.period_ms)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        if self.mode not in ("legacy", "secure"):
            raise ConfigInvalid(f"unknown mode {self.mode!r}")
        try:
            AttackKind(self.attack)
        except ValueError as exc:
            raise ConfigInvalid(f"unknown attack {self.attack!r}") from exc
        if not 0.0 <= self.malicious_fraction < 1.0:
            raise ConfigInvalid("malicious_fraction must be in [0, 1)")
        if not 0.0 <= self.message_loss < 1.0:
            raise ConfigInvalid("message_loss must be in [0, 1)")
        if self.cycles <= 0:
            raise ConfigInvalid("cycles must be positive")
        if self.spam_rate < 1:
            raise ConfigInvalid("spam_rate must be >= 1")
        if self.max_skew_ms < 0 or self.max_skew_ms > self.period_ms:
            raise ConfigInvalid("max_skew_ms must be in [0, period_ms]")
        if self.clone_age < 0:
            raise ConfigInvalid("clone_age must be >= 0")
        if self.join_links < 0:
            raise ConfigInvalid("join_links must be >= 0")
        for ev in self.churn:
            if ev.cycle < 0:
                raise ConfigInvalid("churn cycle must be >= 0")
            if ev.fail_count < 0 or ev.join_count < 0 or not 0.0 <= ev.fail_fraction <= 1.0:
                raise ConfigInvalid("bad churn event")

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(self.n, self.view_len, self.swap_len,
                              self.redemption_cache_len, self.period_ms)

    @property
    def malicious_count(self) -> int:
        return int(round(self.n * self.malicious_fraction))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["churn"] = [asdict(ev) for ev in self.churn]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown scenario keys: {sorted(unknown)}")
        payload = dict(data)
        churn_raw = payload.pop("churn", [])
        churn = []
        churn_keys = {f.name for f in fields(ChurnEvent)}
        for ev in churn_raw:
            bad = set(ev) - churn_keys
            if bad:
                raise ConfigInvalid(f"unknown churn keys: {sorted(bad)}")
            churn.append(ChurnEvent(**ev))
        try:
            return cls(churn=churn, **payload)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("scenario must be a JSON object")
        return cls.from_dict(data)

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()
