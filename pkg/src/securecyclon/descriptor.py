"""Node descriptors carrying a signed chain of ownership.

A descriptor advertises its creator (id + network address + creation
timestamp) and records every ownership transfer since creation as a signed
link. The byte layout is canonical and fixed:

    core:  creator id (32) | ipv4 (4) | port (2) | timestamp ms, i64 BE (8)
    link:  new owner id (32) | signature by previous owner (sig_size)

Each link's signature covers the full serialized prefix (core plus all
earlier links) concatenated with the new owner's id, so no prefix of an
honest chain can be altered or re-spliced without invalidating a
signature. With the default 256-bit scheme a descriptor serializes to
exactly 368 + 512*t bits after t transfers.

Descriptors are immutable values: transferring ownership returns a new
descriptor and leaves the old one intact (the old value is exactly what a
node retains when it keeps a non-swappable copy).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

from .identity import NODE_ID_SIZE, KeyPair, NodeId, SignatureScheme

CORE_SIZE = NODE_ID_SIZE + 4 + 2 + 8  # 46 bytes == 368 bits


class NotOwner(Exception):
    """Raised when a node tries to transfer a descriptor it does not own."""


class KeyMismatch(Exception):
    """Raised when two descriptors of different creation events are compared."""


class MalformedBytes(Exception):
    """Raised when descriptor (or proof) bytes cannot be decoded."""


@dataclass(frozen=True, slots=True)
class Address:
    """IPv4 host + port, the 48-bit locator part of a descriptor."""

    ip: int
    port: int

    def __post_init__(self) -> None:
        if not 0 <= self.ip <= 0xFFFFFFFF:
            raise ValueError("ip out of u32 range")
        if not 0 <= self.port <= 0xFFFF:
            raise ValueError("port out of u16 range")

    def __str__(self) -> str:
        return f"{self.ip >> 24 & 255}.{self.ip >> 16 & 255}.{self.ip >> 8 & 255}.{self.ip & 255}:{self.port}"


@dataclass(frozen=True, slots=True)
class DescriptorCore:
    """Immutable creation record: who, where, and when."""

    creator: NodeId
    address: Address
    timestamp: int  # wall-clock milliseconds

    def to_bytes(self) -> bytes:
        return self.creator.value + struct.pack(">IHq", self.address.ip, self.address.port, self.timestamp)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DescriptorCore":
        if len(data) != CORE_SIZE:
            raise MalformedBytes(f"descriptor core must be {CORE_SIZE} bytes")
        ip, port, ts = struct.unpack(">IHq", data[NODE_ID_SIZE:])
        return cls(NodeId(data[:NODE_ID_SIZE]), Address(ip, port), ts)


class DescriptorKey:
    """(creator, timestamp): identifies one creation event across copies."""

    __slots__ = ("creator", "timestamp", "_h")

    def __init__(self, creator: NodeId, timestamp: int):
        self.creator = creator
        self.timestamp = timestamp
        self._h = hash((creator.value, timestamp))

    def __eq__(self, other) -> bool:
        return (isinstance(other, DescriptorKey)
                and self.timestamp == other.timestamp
                and self.creator.value == other.creator.value)

    def __hash__(self) -> int:
        return self._h

    def __repr__(self) -> str:
        return f"DescriptorKey({self.creator.short()}, {self.timestamp})"


@dataclass(frozen=True, slots=True)
class OwnershipLink:
    """One transfer: the new owner, signed by the previous owner."""

    new_owner: NodeId
    signature: bytes


class Descriptor:
    """A descriptor core plus its ordered chain of ownership links."""

    __slots__ = ("core", "chain", "_wire", "_owners", "_valid", "_key")

    def __init__(self, core: DescriptorCore, chain: tuple[OwnershipLink, ...],
                 wire: bytes, valid: bool | None):
        self.core = core
        self.chain = chain
        self._wire = wire
        self._owners: tuple[NodeId, ...] | None = None
        self._valid = valid  # None: not yet checked against a scheme
        self._key: DescriptorKey | None = None

    @classmethod
    def raw(cls, core: DescriptorCore, chain: tuple[OwnershipLink, ...] = ()) -> "Descriptor":
        """Assemble a descriptor from parts without trusting its chain."""
        buf = core.to_bytes()
        for link in chain:
            buf += link.new_owner.value + link.signature
        return cls(core, chain, buf, valid=None)

    # -- identity ----------------------------------------------------------

    @property
    def key(self) -> DescriptorKey:
        if self._key is None:
            self._key = DescriptorKey(self.core.creator, self.core.timestamp)
        return self._key

    @property
    def owners(self) -> tuple[NodeId, ...]:
        """Owner sequence from the creator through every transfer."""
        if self._owners is None:
            self._owners = (self.core.creator,) + tuple(l.new_owner for l in self.chain)
        return self._owners

    @property
    def current_owner(self) -> NodeId:
        return self.chain[-1].new_owner if self.chain else self.core.creator

    @property
    def transfer_count(self) -> int:
        return len(self.chain)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Descriptor) and self._wire == other._wire

    def __hash__(self) -> int:
        return hash(self._wire)

    def __repr__(self) -> str:
        path = "->".join(o.short() for o in self.owners)
        return f"Descriptor({path}, t={self.core.timestamp})"


def create_descriptor(creator: KeyPair, address: Address, now_ms: int) -> Descriptor:
    """Mint a fresh descriptor: empty chain, owned by its creator."""
    core = DescriptorCore(creator.node_id, address, now_ms)
    return Descriptor(core, (), core.to_bytes(), valid=True)


def transfer_ownership(d: Descriptor, from_key: KeyPair, to: NodeId,
                       scheme: SignatureScheme) -> Descriptor:
    """Extend the chain by one link; the original descriptor is unchanged."""
    if d.current_owner != from_key.node_id:
        raise NotOwner(f"{from_key.node_id} does not own {d!r}")
    payload = d._wire + to.value
    sig = scheme.sign(from_key, payload)
    # A chain extended from a verified prefix with a just-made signature is
    # verified by construction; anything else stays lazy.
    valid = True if d._valid is True else None
    child = Descriptor(d.core, d.chain + (OwnershipLink(to, sig),), payload + sig, valid)
    child._key = d._key  # same creation event
    return child


def verify_chain(d: Descriptor, scheme: SignatureScheme) -> bool:
    """Check every link's signature back to the creator. Never raises."""
    if d._valid is None:
        d._valid = _verify_walk(d, scheme)
    return d._valid


def _verify_walk(d: Descriptor, scheme: SignatureScheme) -> bool:
    buf = d.core.to_bytes()
    prev = d.core.creator
    for link in d.chain:
        payload = buf + link.new_owner.value
        if not scheme.verify(prev, payload, link.signature):
            return False
        buf = payload + link.signature
        prev = link.new_owner
    return True


class ChainRelation(Enum):
    IDENTICAL = "identical"
    PREFIX_OF = "prefix_of"  # first chain is a proper prefix of the second
    EXTENDS = "extends"      # first chain properly extends the second
    CONFLICT = "conflict"


@dataclass(frozen=True, slots=True)
class RelationResult:
    relation: ChainRelation
    violator: NodeId | None = None  # fork point: last common owner, on CONFLICT


def chain_relation(a: Descriptor, b: Descriptor) -> RelationResult:
    """Compare the owner sequences of two copies of one descriptor.

    Compatible copies are identical or one a prefix of the other. Anything
    else is a fork: the last common owner transferred the descriptor twice
    and is named as the violator.
    """
    if a.key != b.key:
        raise KeyMismatch(f"{a.key} vs {b.key}")
    sa, sb = a.owners, b.owners
    n = min(len(sa), len(sb))
    for i in range(n):
        if sa[i] != sb[i]:
            # i >= 1 always: position 0 is the shared creator.
            return RelationResult(ChainRelation.CONFLICT, violator=sa[i - 1])
    if len(sa) == len(sb):
        return RelationResult(ChainRelation.IDENTICAL)
    if len(sa) < len(sb):
        return RelationResult(ChainRelation.PREFIX_OF)
    return RelationResult(ChainRelation.EXTENDS)


# -- wire format -----------------------------------------------------------


def serialize(d: Descriptor) -> bytes:
    """Canonical encoding; 368 + (256 + sig bits) * t bits long."""
    return d._wire


def deserialize(data: bytes, signature_size: int = 32) -> Descriptor:
    """Decode a descriptor; the chain is verified lazily, not here."""
    if len(data) < CORE_SIZE:
        raise MalformedBytes("shorter than a descriptor core")
    core = DescriptorCore.from_bytes(data[:CORE_SIZE])
    link_size = NODE_ID_SIZE + signature_size
    body = data[CORE_SIZE:]
    if len(body) % link_size != 0:
        raise MalformedBytes(f"chain bytes not a multiple of {link_size}")
    chain = []
    for off in range(0, len(body), link_size):
        owner = NodeId(body[off:off + NODE_ID_SIZE])
        sig = body[off + NODE_ID_SIZE:off + link_size]
        chain.append(OwnershipLink(owner, sig))
    return Descriptor(core, tuple(chain), bytes(data), valid=None)


def hex_dump(d: Descriptor) -> str:
    """Readable hex of the canonical encoding, one field per line."""
    lines = [
        f"creator   {d.core.creator.hex()}",
        f"address   {d.core.address}",
        f"timestamp {d.core.timestamp}",
    ]
    for i, link in enumerate(d.chain):
        lines.append(f"link[{i}]   owner={link.new_owner.hex()} sig={link.signature.hex()}")
    return "\n".join(lines)
