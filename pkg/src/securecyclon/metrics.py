"""Per-cycle measurement and the analytical network-cost model.

Everything here is computed by an omniscient instrumenter that knows the
malicious roster; protocol nodes never see it. All passes are read-only
over node state.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from io import StringIO

from .secure import NodeState

CSV_SCHEMA = "securecyclon-metrics v1"
CSV_COLUMNS = [
    "cycle",
    "malicious_link_fraction",
    "nonswappable_fraction",
    "eclipsed",
    "blacklisted",
    "indegree_mean",
    "indegree_std",
    "blacklisted_all",
    "alive_correct",
    "alive_malicious",
    "dead_link_fraction",
    "redeemed_chain_mean",
    "clones_total",
    "clones_detected",
]


@dataclass(slots=True)
class CycleSnapshot:
    cycle: int
    malicious_link_fraction: float
    nonswappable_fraction: float
    eclipsed: int
    blacklisted: int            # accused known to at least one correct node
    indegree_mean: float
    indegree_std: float
    blacklisted_all: int        # accused known to every alive correct node
    alive_correct: int
    alive_malicious: int
    dead_link_fraction: float
    redeemed_chain_mean: float  # mean transfer count of this cycle's redemptions
    clones_total: int
    clones_detected: int
    indegree_hist: dict[int, int] = field(default_factory=dict)

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass(slots=True)
class MetricsSeries:
    config: dict
    config_hash: str
    seed: int
    snapshots: list[CycleSnapshot] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [getattr(s, name) for s in self.snapshots]

    def to_csv(self) -> str:
        out = StringIO()
        out.write(f"# {CSV_SCHEMA}\n")
        out.write(f"# config_hash={self.config_hash} seed={self.seed}\n")
        out.write(",".join(CSV_COLUMNS) + "\n")
        for snap in self.snapshots:
            out.write(",".join(_fmt(v) for v in snap.row()) + "\n")
        return out.getvalue()

    def to_json(self) -> str:
        payload = {
            "schema": CSV_SCHEMA,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "cycles": [
                {**{c: getattr(s, c) for c in CSV_COLUMNS},
                 "indegree_hist": {str(k): v for k, v in sorted(s.indegree_hist.items())}}
                for s in self.snapshots
            ],
        }
        return json.dumps(payload, indent=1, sort_keys=True)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6f")
    return str(v)


# -- graph measurements --------------------------------------------------------


def _alive(states: dict, ids: list) -> list:
    return [i for i in ids if states[i].alive]


def malicious_link_fraction(states: dict, order: list, malicious: set[bytes]) -> float:
    """Links from correct views to malicious creators, over all their links."""
    total = bad = 0
    for node_id in order:
        st: NodeState = states[node_id]
        if not st.alive or node_id.value in malicious:
            continue
        for e in st.view:
            total += 1
            if e.descriptor.core.creator.value in malicious:
                bad += 1
    return bad / total if total else 0.0


def indegree_distribution(states: dict, order: list) -> dict[int, int]:
    """indegree -> node count, over alive nodes and alive nodes' views."""
    indeg = {node_id: 0 for node_id in order if states[node_id].alive}
    for node_id in order:
        st = states[node_id]
        if not st.alive:
            continue
        for e in st.view:
            creator = e.descriptor.core.creator
            if creator in indeg:
                indeg[creator] += 1
    hist: dict[int, int] = {}
    for count in indeg.values():
        hist[count] = hist.get(count, 0) + 1
    return hist


def indegree_stats(hist: dict[int, int]) -> tuple[float, float]:
    values: list[int] = []
    for k, c in hist.items():
        values.extend([k] * c)
    if not values:
        return 0.0, 0.0
    mean = statistics.fmean(values)
    std = statistics.pstdev(values) if len(values) > 1 else 0.0
    return mean, std


def nonswappable_fraction(states: dict, order: list, malicious: set[bytes]) -> float:
    """Non-swappable entries over all entries, across correct views."""
    total = marked = 0
    for node_id in order:
        st = states[node_id]
        if not st.alive or node_id.value in malicious:
            continue
        for e in st.view:
            total += 1
            if not e.swappable:
                marked += 1
    return marked / total if total else 0.0


def eclipsed_count(states: dict, order: list, malicious: set[bytes]) -> int:
    """Correct nodes with a non-empty view pointing only at malicious nodes."""
    count = 0
    for node_id in order:
        st = states[node_id]
        if not st.alive or node_id.value in malicious:
            continue
        if len(st.view) == 0:
            continue
        if all(e.descriptor.core.creator.value in malicious for e in st.view):
            count += 1
    return count


def dead_link_fraction(states: dict, order: list) -> float:
    """Entries pointing at failed nodes, over all entries in alive views."""
    total = dead = 0
    for node_id in order:
        st = states[node_id]
        if not st.alive:
            continue
        for e in st.view:
            total += 1
            target = states.get(e.descriptor.core.creator)
            if target is None or not target.alive:
                dead += 1
    return dead / total if total else 0.0


# -- detection accounting --------------------------------------------------------


def detection_ratio(clone_events, convicted_keys, bucket_edges: list[int] | None = None
                    ) -> dict[tuple[int, int], tuple[int, int]]:
    """(age_lo, age_hi) -> (detected, total) over completed clone events.

    Buckets with no clones are simply absent.
    """
    if bucket_edges is None:
        bucket_edges = [0, 3, 6, 9, 12, 15, 18, 21]
    buckets: dict[tuple[int, int], list[int]] = {}
    for ev in clone_events:
        if ev.completed_cycle is None:
            continue
        lo = 0
        for edge in bucket_edges:
            if ev.age_at_clone >= edge:
                lo = edge
        hi = min((e for e in bucket_edges if e > lo), default=lo + 1000)
        slot = buckets.setdefault((lo, hi), [0, 0])
        slot[1] += 1
        if ev.key in convicted_keys:
            slot[0] += 1
    return {k: (v[0], v[1]) for k, v in sorted(buckets.items())}


# -- analytical cost model ---------------------------------------------------------


DESCRIPTOR_BASE_BITS = 368       # id 256 + ip 32 + port 16 + timestamp 64
DESCRIPTOR_LINK_BITS = 512       # owner id 256 + signature 256


def descriptor_bits(transfer_count: float) -> float:
    """Serialized size in bits after ``transfer_count`` ownership transfers."""
    return DESCRIPTOR_BASE_BITS + DESCRIPTOR_LINK_BITS * transfer_count


def cost_model(view_len: int, swap_len: int, redemption_cache_len: int,
               t_avg: float) -> float:
    """Bytes shipped per gossip direction: (view + cache) descriptors.

    ``t_avg`` is the mean transfer count; in steady state a descriptor is
    transferred about twice the swap length times over its life, which is
    what the simulator's measured chain lengths are checked against.
    """
    if t_avg < 0:
        raise ValueError("t_avg must be >= 0")
    per_descriptor = descriptor_bits(t_avg) / 8
    return (view_len + redemption_cache_len) * per_descriptor


def expected_transfers(swap_len: int) -> int:
    """Steady-state average ownership transfers in a descriptor's lifetime."""
    return 2 * swap_len
