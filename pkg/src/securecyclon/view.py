"""Partial views: fixed-capacity neighbor lists with per-entry age.

The view is the node's only handle on the overlay. Entries age by one per
cycle; gossip always redeems the oldest entry (ties broken by smallest
creator id so runs are reproducible). Secure mode additionally marks some
entries non-swappable: usable to initiate gossip but never traded away.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .descriptor import Descriptor, DescriptorKey
from .identity import NodeId


class EmptyView(Exception):
    """Raised when an operation needs a non-empty view."""


@dataclass(slots=True)
class ProtocolParams:
    """Gossip parameters shared by every node in a run."""

    n: int
    view_len: int          # capacity of each view
    swap_len: int          # descriptors exchanged per direction per gossip
    redemption_cache_len: int = 5
    period_ms: int = 10_000  # one cycle of wall-clock time

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need at least two nodes")
        if not 1 <= self.swap_len <= self.view_len:
            raise ValueError("swap length must satisfy 1 <= s <= view length")
        if self.redemption_cache_len < 0:
            raise ValueError("redemption cache size must be >= 0")
        if self.period_ms <= 0:
            raise ValueError("gossip period must be positive")


@dataclass(slots=True)
class ViewEntry:
    descriptor: Descriptor
    age: int = 0
    swappable: bool = True


class View:
    """Owned descriptors of other nodes, at most ``capacity`` of them.

    A key set mirrors the entry list so duplicate checks are O(1); every
    mutation must go through the methods here to keep the two in sync.
    """

    __slots__ = ("owner", "capacity", "entries", "_keys")

    def __init__(self, owner: NodeId, capacity: int):
        self.owner = owner
        self.capacity = capacity
        self.entries: list[ViewEntry] = []
        self._keys: set[DescriptorKey] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def free_slots(self) -> int:
        return self.capacity - len(self.entries)

    def contains_key(self, key: DescriptorKey) -> bool:
        return key in self._keys

    def age_all(self) -> None:
        for e in self.entries:
            e.age += 1

    def insert(self, descriptor: Descriptor, age: int = 0, swappable: bool = True) -> bool:
        """Add an entry if it is not a self-link, duplicate, or overflow."""
        if descriptor.core.creator == self.owner:
            return False
        if len(self.entries) >= self.capacity:
            return False
        if descriptor.key in self._keys:
            return False
        self.entries.append(ViewEntry(descriptor, age, swappable))
        self._keys.add(descriptor.key)
        return True

    def append_unchecked(self, descriptor: Descriptor, age: int = 0,
                         swappable: bool = True) -> None:
        """Append when the caller has already screened the entry."""
        self.entries.append(ViewEntry(descriptor, age, swappable))
        self._keys.add(descriptor.key)

    def remove_entry(self, entry: ViewEntry) -> None:
        self.entries.remove(entry)
        self._keys.discard(entry.descriptor.key)

    def pop_oldest(self) -> ViewEntry:
        """Remove and return the max-age entry; ties go to the smallest id."""
        if not self.entries:
            raise EmptyView(f"view of {self.owner} is empty")
        best = self.entries[0]
        for e in self.entries[1:]:
            if e.age > best.age or (e.age == best.age and
                                    e.descriptor.core.creator.value < best.descriptor.core.creator.value):
                best = e
        self.remove_entry(best)
        return best

    def take_random(self, count: int, rng: Random, swappable_only: bool = False,
                    exclude_creator: NodeId | None = None) -> list[ViewEntry]:
        """Remove and return up to ``count`` uniformly chosen entries.

        ``exclude_creator`` skips entries pointing at the exchange partner,
        which would die as self-links on arrival anyway.
        """
        excl = exclude_creator.value if exclude_creator is not None else None
        pool = [e for e in self.entries
                if (not swappable_only or e.swappable)
                and (excl is None or e.descriptor.core.creator.value != excl)]
        if not pool:
            return []
        if count == 1:
            picked = [pool[rng.randrange(len(pool))]]
        else:
            picked = rng.sample(pool, min(count, len(pool)))
        for e in picked:
            self.remove_entry(e)
        return picked

    def remove_creator(self, creator: NodeId) -> int:
        """Drop every entry created by ``creator``; returns how many."""
        doomed = [e for e in self.entries if e.descriptor.core.creator == creator]
        for e in doomed:
            self.remove_entry(e)
        return len(doomed)

    def creators(self) -> list[NodeId]:
        """Distinct link targets, in view order."""
        seen: dict[NodeId, None] = {}
        for e in self.entries:
            seen.setdefault(e.descriptor.core.creator)
        return list(seen)


def select_partner(view: View) -> tuple[NodeId, Descriptor, ViewEntry]:
    """Redeem the oldest entry: returns its creator (the gossip partner)."""
    entry = view.pop_oldest()
    return entry.descriptor.core.creator, entry.descriptor, entry


def age_view(view: View) -> View:
    """Advance every entry's age by one cycle."""
    view.age_all()
    return view
