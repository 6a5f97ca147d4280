"""Node identities, signature schemes, and simulated clocks.

A node's identifier *is* its public verification key (256 bits). Two
signature back-ends implement one interface:

* ``HashMacScheme`` -- a keyed-hash stand-in with 256-bit signatures. It is
  the simulator default: it preserves the observable security properties
  (only the key holder can produce a signature that verifies, any message
  or key mismatch fails) at microsecond cost, which matters when thousands
  of nodes sign every ownership transfer every cycle.
* ``Ed25519Scheme`` -- real asymmetric signatures, used to validate that
  the protocol logic holds under an actual cryptosystem.

Both are deterministic: the same seed yields the same key sequence and the
same signatures, which the simulation kernel relies on for reproducibility.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from random import Random

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

NODE_ID_SIZE = 32  # bytes (256 bits); fixed by the descriptor wire format


class NodeId:
    """Public-key bytes doubling as the node's unique identifier.

    Plain slotted class with hand-rolled eq/hash/order: identity
    comparisons sit on the simulator's hottest paths.
    """

    __slots__ = ("value", "_h")

    def __init__(self, value: bytes):
        if len(value) != NODE_ID_SIZE:
            raise ValueError(f"NodeId must be {NODE_ID_SIZE} bytes, got {len(value)}")
        self.value = value
        self._h = hash(value)

    def __eq__(self, other) -> bool:
        return isinstance(other, NodeId) and self.value == other.value

    def __hash__(self) -> int:
        return self._h

    def __lt__(self, other: "NodeId") -> bool:
        return self.value < other.value

    def __le__(self, other: "NodeId") -> bool:
        return self.value <= other.value

    def hex(self) -> str:
        return self.value.hex()

    def short(self) -> str:
        return self.value[:4].hex()

    def __repr__(self) -> str:  # keep logs readable
        return f"NodeId({self.short()})"


@dataclass(frozen=True, slots=True)
class KeyPair:
    """A node's identity: public id plus the opaque signing secret."""

    node_id: NodeId
    signing_key: bytes


class SignatureScheme:
    """Interface shared by the keyed-hash and Ed25519 back-ends."""

    name: str = "abstract"
    signature_size: int = 32  # bytes

    def generate(self, rng: Random) -> KeyPair:
        raise NotImplementedError

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, node_id: NodeId, message: bytes, signature: bytes) -> bool:
        raise NotImplementedError


class HashMacScheme(SignatureScheme):
    """Keyed-hash signatures with a per-run key registry.

    The registry maps public ids to the secret MAC keys, standing in for
    the public verifiability of a real asymmetric scheme. Signing requires
    the KeyPair (i.e. the secret); verification recomputes the MAC from the
    registry, so a tampered message, truncated signature, or foreign id all
    fail exactly as they would under real signatures.
    """

    name = "hashmac"
    signature_size = 32

    def __init__(self) -> None:
        self._secrets: dict[bytes, bytes] = {}

    def generate(self, rng: Random) -> KeyPair:
        sk = rng.randbytes(32)
        pk = hashlib.sha256(b"securecyclon-pub" + sk).digest()
        self._secrets[pk] = sk
        return KeyPair(NodeId(pk), sk)

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        return hashlib.blake2b(message, key=key.signing_key, digest_size=32).digest()

    def verify(self, node_id: NodeId, message: bytes, signature: bytes) -> bool:
        sk = self._secrets.get(node_id.value)
        if sk is None:
            return False
        expected = hashlib.blake2b(message, key=sk, digest_size=32).digest()
        return expected == signature


class Ed25519Scheme(SignatureScheme):
    """Real asymmetric signatures (64-byte); for correctness testing."""

    name = "ed25519"
    signature_size = 64

    def generate(self, rng: Random) -> KeyPair:
        seed = rng.randbytes(32)
        private = Ed25519PrivateKey.from_private_bytes(seed)
        pk = private.public_key().public_bytes_raw()
        return KeyPair(NodeId(pk), seed)

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(key.signing_key).sign(message)

    def verify(self, node_id: NodeId, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(node_id.value).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


def generate_identity(scheme: SignatureScheme, rng: Random) -> KeyPair:
    """Draw a fresh identity from the scheme's seeded key stream."""
    return scheme.generate(rng)


@dataclass(slots=True)
class Clock:
    """Per-node wall clock: shared simulation time plus a constant skew.

    Skew is drawn once at node creation from [-max_skew, +max_skew] and
    never changes, so a node's clock is monotone as long as simulation
    time is.
    """

    skew_ms: int = 0
    now_ms: int = field(default=0)

    def advance_to(self, sim_time_ms: int) -> None:
        new = sim_time_ms + self.skew_ms
        if new > self.now_ms:
            self.now_ms = new
