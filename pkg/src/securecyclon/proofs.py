"""Self-certifying violation proofs: two conflicting descriptors.

A proof convicts a node using nothing but material that node signed
itself, so any third party can validate it with no additional context:

* ``FREQUENCY``: two distinct descriptors by one creator whose timestamps
  lie closer together than the gossip period.
* ``CLONING``: two copies of one descriptor whose ownership chains fork;
  the fork point (last common owner) transferred it twice.

Evidence descriptors must each carry at least one ownership link: the
first link's signature is what binds the creator to the core fields, an
unsigned bare core would let anyone fabricate "evidence".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

from .descriptor import (
    ChainRelation,
    Descriptor,
    MalformedBytes,
    chain_relation,
    deserialize,
    serialize,
    verify_chain,
)
from .identity import NODE_ID_SIZE, NodeId, SignatureScheme


class ViolationKind(Enum):
    FREQUENCY = 1
    CLONING = 2


@dataclass(frozen=True, slots=True)
class ViolationProof:
    kind: ViolationKind
    accused: NodeId
    evidence: tuple[Descriptor, Descriptor]

    def __repr__(self) -> str:
        return f"ViolationProof({self.kind.name}, accused={self.accused.short()})"


def make_proof(kind: ViolationKind, accused: NodeId,
               d1: Descriptor, d2: Descriptor) -> ViolationProof:
    """Build a proof with evidence in canonical (byte-sorted) order."""
    if serialize(d2) < serialize(d1):
        d1, d2 = d2, d1
    return ViolationProof(kind, accused, (d1, d2))


def validate_proof(proof: ViolationProof, scheme: SignatureScheme, period_ms: int) -> bool:
    """Re-derive the accusation from the evidence alone. Never raises."""
    d1, d2 = proof.evidence
    if not d1.chain or not d2.chain:
        return False  # bare cores are unsigned and prove nothing
    if not (verify_chain(d1, scheme) and verify_chain(d2, scheme)):
        return False
    if proof.kind is ViolationKind.FREQUENCY:
        if d1.core.creator != d2.core.creator:
            return False
        if d1.core.creator != proof.accused:
            return False
        if d1.key == d2.key:
            return False
        return abs(d1.core.timestamp - d2.core.timestamp) < period_ms
    if proof.kind is ViolationKind.CLONING:
        if d1.key != d2.key:
            return False
        result = chain_relation(d1, d2)
        return result.relation is ChainRelation.CONFLICT and result.violator == proof.accused
    return False


# -- canonical encoding ------------------------------------------------------
# kind u8 | accused (32) | len(d1) u32 BE | d1 | len(d2) u32 BE | d2


def encode_proof(proof: ViolationProof) -> bytes:
    b1 = serialize(proof.evidence[0])
    b2 = serialize(proof.evidence[1])
    return (bytes([proof.kind.value]) + proof.accused.value
            + struct.pack(">I", len(b1)) + b1
            + struct.pack(">I", len(b2)) + b2)


def decode_proof(data: bytes, signature_size: int = 32) -> ViolationProof:
    if len(data) < 1 + NODE_ID_SIZE + 4:
        raise MalformedBytes("proof too short")
    try:
        kind = ViolationKind(data[0])
    except ValueError as exc:
        raise MalformedBytes(f"unknown proof kind {data[0]}") from exc
    accused = NodeId(data[1:1 + NODE_ID_SIZE])
    off = 1 + NODE_ID_SIZE
    descriptors = []
    for _ in range(2):
        if len(data) < off + 4:
            raise MalformedBytes("truncated proof")
        (length,) = struct.unpack(">I", data[off:off + 4])
        off += 4
        if len(data) < off + length:
            raise MalformedBytes("truncated proof evidence")
        descriptors.append(deserialize(data[off:off + length], signature_size))
        off += length
    if off != len(data):
        raise MalformedBytes("trailing bytes after proof")
    return ViolationProof(kind, accused, (descriptors[0], descriptors[1]))
