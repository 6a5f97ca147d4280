"""The unmodified gossip baseline the hardened protocol extends.

Descriptors here are plain advertisements: no ownership transfers, no
certificates, no checks. Each cycle a node redeems its oldest link,
pushes a fresh self-descriptor plus s-1 random links, and receives s
random links back. This is the substrate the attack-demonstration
experiments run against.
"""

from __future__ import annotations

from random import Random

from .descriptor import Descriptor, create_descriptor
from .secure import NodeState
from .view import ProtocolParams, ViewEntry


def legacy_initiate(node: NodeState, params: ProtocolParams, now_ms: int,
                    rng: Random) -> tuple[list[Descriptor], list[ViewEntry]]:
    """Build the initiator's batch: fresh self-descriptor plus s-1 picks."""
    fresh = create_descriptor(node.keypair, node.address, now_ms)
    picks = node.view.take_random(params.swap_len - 1, rng)
    return [fresh] + [p.descriptor for p in picks], picks


def legacy_respond(node: NodeState, received: list[Descriptor], params: ProtocolParams,
                   rng: Random) -> tuple[list[Descriptor], list[ViewEntry]]:
    """Responder removes s random links, then absorbs the received batch."""
    picks = node.view.take_random(params.swap_len, rng)
    legacy_absorb(node, received, picks, redeemed=None)
    return [p.descriptor for p in picks], picks


def legacy_absorb(node: NodeState, received: list[Descriptor], sent: list[ViewEntry],
                  redeemed: Descriptor | None) -> None:
    """Insert received links, then refill leftover gaps with sent copies.

    Self-links and duplicates are dropped. If slots stay empty the node
    retains what it sent (original ages); the initiator may finally fall
    back to the descriptor it redeemed, which only matters in degenerate
    two-node overlays where the partner's reply necessarily points back
    at the receiver.
    """
    for d in received:
        node.view.insert(d)
    for entry in sent:
        if node.view.free_slots == 0:
            return
        node.view.insert(entry.descriptor, age=entry.age)
    if redeemed is not None and node.view.free_slots > 0:
        node.view.insert(redeemed, age=0)


def legacy_exchange(initiator: NodeState, partner: NodeState, redeemed: Descriptor,
                    params: ProtocolParams, now_ms: int, rng: Random) -> None:
    """One complete fail-free exchange between two correct nodes.

    The caller has already redeemed ``redeemed`` out of the initiator's
    view (that is what selected the partner).
    """
    outbound, sent_entries = legacy_initiate(initiator, params, now_ms, rng)
    inbound, _ = legacy_respond(partner, outbound, params, rng)
    legacy_absorb(initiator, inbound, sent_entries, redeemed)
