"""Descriptor sample cache and redemption cache.

Samples are cached copies held without ownership, kept purely to
cross-check future descriptors for frequency and cloning conflicts. The
cache is TTL-bounded (default 2x view length; a descriptor's natural
lifetime is about one view length of cycles, so the window retains nearly
all detection power at bounded memory).

The redemption cache keeps the last few descriptors the node itself
redeemed. Those are precisely the descriptors that died too fast to
circulate, so re-sharing them as samples for a few more cycles is what
catches clones made at high age.
"""

from __future__ import annotations

from .descriptor import ChainRelation, Descriptor, DescriptorKey, chain_relation


class SampleCache:
    """Longest-chain-per-key sample store with a timestamp witness index.

    The frequency index keeps one witness descriptor per (creator, period
    bucket). Two timestamps in one bucket are always closer than a period,
    so a second distinct creation in the same or an adjacent bucket is
    found by probing three buckets. Witnesses are compact (one per creator
    per period) and survive sample eviction, since a proof needs the
    witness object itself.
    """

    __slots__ = ("ttl", "_samples", "_freq")

    def __init__(self, ttl_cycles: int):
        self.ttl = ttl_cycles
        # key -> [descriptor, last_seen_cycle]; kept in last-seen order so
        # eviction only ever inspects the front.
        self._samples: dict[DescriptorKey, list] = {}
        # (creator bytes, timestamp // period) -> witness descriptor
        self._freq: dict[tuple[bytes, int], Descriptor] = {}

    def __len__(self) -> int:
        return len(self._samples)

    def get(self, key: DescriptorKey) -> Descriptor | None:
        slot = self._samples.get(key)
        return slot[0] if slot else None

    def refresh_if_same(self, d: Descriptor, cycle: int) -> bool:
        """Fast path: this exact object is already cached; bump its recency.

        Views change slowly, so some sample traffic repeats copies the
        receiver vetted in earlier cycles. Re-running the checks on the
        identical object cannot change the outcome: any conflict with
        newer material is raised when that newer descriptor is admitted.
        """
        slot = self._samples.get(d.key)
        if slot is None or slot[0] is not d:
            return False
        del self._samples[d.key]
        slot[1] = cycle
        self._samples[d.key] = slot
        return True

    def frequency_conflict(self, d: Descriptor, period_ms: int) -> Descriptor | None:
        """A seen same-creator descriptor with a different key within one period."""
        creator = d.core.creator.value
        ts = d.core.timestamp
        key = d.key
        center = ts // period_ms
        freq = self._freq
        for b in (center - 1, center, center + 1):
            witness = freq.get((creator, b))
            if witness is not None and witness.key != key \
                    and abs(witness.core.timestamp - ts) < period_ms:
                return witness
        return None

    def store(self, d: Descriptor, cycle: int, period_ms: int) -> None:
        """Cache d, keeping the longest chain seen for its key."""
        slot = self._samples.pop(d.key, None)
        if slot is None:
            self._index(d.key, d, period_ms)
            self._samples[d.key] = [d, cycle]
            return
        kept = slot[0]
        if d.transfer_count > kept.transfer_count:
            relation = chain_relation(kept, d).relation
            if relation in (ChainRelation.PREFIX_OF, ChainRelation.IDENTICAL):
                kept = d
        # re-insert at the back: dict order doubles as the eviction queue
        self._samples[d.key] = [kept, cycle]

    def evict_expired(self, cycle: int) -> None:
        """Drop entries not seen for ttl cycles (front of the order only)."""
        samples = self._samples
        while samples:
            key = next(iter(samples))
            if cycle - samples[key][1] <= self.ttl:
                break
            del samples[key]

    def _index(self, key: DescriptorKey, d: Descriptor, period_ms: int) -> None:
        slot = (key.creator.value, key.timestamp // period_ms)
        if slot not in self._freq:
            self._freq[slot] = d

    def witness_count(self) -> int:
        return len(self._freq)


class RedemptionCache:
    """Ring of the node's last ``capacity`` redeemed descriptors."""

    __slots__ = ("capacity", "ttl", "_entries")

    def __init__(self, capacity: int, ttl_cycles: int = 6):
        self.capacity = capacity
        self.ttl = ttl_cycles
        self._entries: list[tuple[Descriptor, int]] = []

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, d: Descriptor, cycle: int) -> None:
        if self.capacity == 0:
            return
        self._entries.append((d, cycle))
        if len(self._entries) > self.capacity:
            self._entries.pop(0)

    def evict_expired(self, cycle: int) -> None:
        self._entries = [(d, c) for d, c in self._entries if cycle - c <= self.ttl]

    def descriptors(self) -> list[Descriptor]:
        return [d for d, _ in self._entries]
