"""Colluding malicious-node strategies.

All members of the malicious party run under one operator: they share
every descriptor they mint (the pool), share signing keys, and forge
ownership chains for each other on demand. Forged chains are always
signature-valid; the point of the attacks is overrepresentation and
asymmetry, not (detectable) bad cryptography.

Strategies:

* ``HUB``        -- present fake views and swap batches drawn uniformly
                    from the shared pool, flooding victims with links to
                    party members.
* ``DEPLETE``    -- accept incoming ownerships and return an empty reply,
                    draining victims' swappable links.
* ``CLONE``      -- behave correctly, but transfer one owned descriptor of
                    a chosen age to two different partners.
* ``FREQ_SPAM``  -- initiate several exchanges per cycle, minting a fresh
                    self-descriptor each time inside one gossip period.

Before ``start_cycle`` every member behaves exactly like a correct node
(minus the security bookkeeping, which is invisible to others).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from random import Random

from .descriptor import Descriptor, DescriptorKey, create_descriptor, transfer_ownership
from .identity import KeyPair, NodeId, SignatureScheme
from .secure import (
    ExchangeSession,
    GossipReply,
    GossipRequest,
    NodeState,
    Role,
)
from .view import ProtocolParams


class AttackKind(Enum):
    NONE = "none"
    HUB = "hub"
    DEPLETE = "deplete"
    CLONE = "clone"
    FREQ_SPAM = "freq_spam"


@dataclass(slots=True)
class AttackPlan:
    kind: AttackKind = AttackKind.NONE
    start_cycle: int = 50
    malicious_fraction: float = 0.0
    clone_age: int = 12
    spam_rate: int = 2
    honor_titfortat: bool = True
    pool_window: int = 0  # 0 -> view length

    def active(self, cycle: int) -> bool:
        return self.kind is not AttackKind.NONE and cycle >= self.start_cycle


@dataclass(slots=True)
class CloneEvent:
    """Instrumentation record of one double-transfer of a descriptor."""

    key: DescriptorKey
    cloner: NodeId
    age_at_clone: int
    staged_cycle: int
    completed_cycle: int | None = None


class MaliciousParty:
    """Shared state of the colluding operator."""

    def __init__(self, plan: AttackPlan, params: ProtocolParams):
        self.plan = plan
        self.params = params
        self.members: list[NodeId] = []
        self.member_set: set[bytes] = set()
        self.keypairs: dict[NodeId, KeyPair] = {}
        self.pool: list[tuple[Descriptor, int]] = []  # (fresh descriptor, birth cycle)
        self.clone_events: list[CloneEvent] = []

    def register_member(self, keypair: KeyPair) -> None:
        self.members.append(keypair.node_id)
        self.member_set.add(keypair.node_id.value)
        self.keypairs[keypair.node_id] = keypair

    def is_member(self, node_id: NodeId) -> bool:
        return node_id.value in self.member_set

    def register_creation(self, fresh: Descriptor, cycle: int) -> None:
        """Every descriptor a member mints lands in the shared pool."""
        self.pool.append((fresh, cycle))

    def prune_pool(self, cycle: int) -> None:
        window = self.plan.pool_window or self.params.view_len
        self.pool = [(d, c) for d, c in self.pool if cycle - c <= window]

    def pool_pick(self, count: int, rng: Random) -> list[Descriptor]:
        if not self.pool:
            return []
        picks = rng.sample(self.pool, min(count, len(self.pool)))
        return [d for d, _ in picks]


@dataclass(slots=True)
class MaliciousLocal:
    """Per-member strategy scratchpad."""

    plan: AttackPlan
    pending_clone: tuple[Descriptor, CloneEvent] | None = None
    first_clone_recipient: NodeId | None = None


# -- chain forging -------------------------------------------------------------


def forge_presentation(party: MaliciousParty, base: Descriptor, presenter: NodeId,
                       scheme: SignatureScheme, rng: Random) -> Descriptor:
    """A pool descriptor dressed up as owned by ``presenter`` (sample form)."""
    creator = base.core.creator
    holder = presenter
    if creator == presenter:
        others = [m for m in party.members if m != creator]
        if not others:
            return base
        holder = others[rng.randrange(len(others))]
    return transfer_ownership(base, party.keypairs[creator], holder, scheme)


def forge_transfer(party: MaliciousParty, base: Descriptor, presenter: NodeId,
                   victim: NodeId, scheme: SignatureScheme, rng: Random) -> Descriptor:
    """A pool descriptor with ownership signed over to ``victim``.

    The chain runs creator -> member -> victim: two links, so the victim
    never treats it as a fresh creation (which would pin its timestamp
    against the local clock).
    """
    staged = forge_presentation(party, base, presenter, scheme, rng)
    return transfer_ownership(staged, party.keypairs[staged.current_owner], victim, scheme)


def hub_attack_view(party: MaliciousParty, presenter: NodeState, count: int,
                    cycle: int, scheme: SignatureScheme, rng: Random) -> list[Descriptor]:
    """Uniform pool picks presented as the member's (fake) view samples."""
    bases = party.pool_pick(count, rng)
    if not bases:
        fresh = create_descriptor(presenter.keypair, presenter.address, presenter.clock.now_ms)
        party.register_creation(fresh, cycle)
        bases = [fresh]
    return [forge_presentation(party, b, presenter.node_id, scheme, rng) for b in bases]


def hub_swap_batch(party: MaliciousParty, presenter: NodeState, victim: NodeId, count: int,
                   scheme: SignatureScheme, rng: Random) -> list[Descriptor]:
    """Pool picks with forged ownership handed to the victim as swaps."""
    bases = party.pool_pick(count, rng)
    return [forge_transfer(party, b, presenter.node_id, victim, scheme, rng) for b in bases]


# -- clone staging -------------------------------------------------------------


def stage_clone(node: NodeState, local: MaliciousLocal, cycle: int) -> CloneEvent | None:
    """Pull an owned entry of the target age out of the view for cloning."""
    if local.pending_clone is not None:
        return None
    candidates = [e for e in node.view if e.swappable and e.age >= local.plan.clone_age]
    if not candidates:
        return None
    entry = max(candidates, key=lambda e: e.age)
    node.view.remove_entry(entry)
    event = CloneEvent(entry.descriptor.key, node.node_id, entry.age, cycle)
    local.pending_clone = (entry.descriptor, event)
    local.first_clone_recipient = None
    return event


def clone_transfer(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                   partner: NodeId, cycle: int, scheme: SignatureScheme) -> Descriptor | None:
    """Hand the staged descriptor to ``partner``; completes on the second hand-off.

    Both transfers extend the same pre-clone value, so the two recipients
    end up holding chains that fork at this node.
    """
    if local.pending_clone is None or party.is_member(partner):
        return None
    base, event = local.pending_clone
    if local.first_clone_recipient is None:
        local.first_clone_recipient = partner
        return transfer_ownership(base, node.keypair, partner, scheme)
    if partner == local.first_clone_recipient:
        return None
    event.completed_cycle = cycle
    party.clone_events.append(event)
    local.pending_clone = None
    local.first_clone_recipient = None
    return transfer_ownership(base, node.keypair, partner, scheme)


# -- exchange behavior ----------------------------------------------------------


def _honest_pick(node: NodeState, session: ExchangeSession,
                 scheme: SignatureScheme, rng: Random) -> Descriptor | None:
    picked = node.view.take_random(1, rng, swappable_only=True,
                                   exclude_creator=session.partner)
    if not picked:
        return None
    session.record_sent(picked[0])
    return transfer_ownership(picked[0].descriptor, node.keypair, session.partner, scheme)


def malicious_swap_out(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                       session: ExchangeSession, cycle: int, scheme: SignatureScheme,
                       rng: Random) -> Descriptor | None:
    """One outgoing ownership transfer, according to the active strategy."""
    plan = local.plan
    attacking = plan.active(cycle)
    if attacking and plan.kind is AttackKind.HUB:
        batch = hub_swap_batch(party, node, session.partner, 1, scheme, rng)
        if batch:
            session.sent += 1
            return batch[0]
        return _honest_pick(node, session, scheme, rng)
    if attacking and plan.kind is AttackKind.DEPLETE:
        return None
    if attacking and plan.kind is AttackKind.CLONE:
        cloned = clone_transfer(node, local, party, session.partner, cycle, scheme)
        if cloned is not None:
            session.sent += 1
            return cloned
    return _honest_pick(node, session, scheme, rng)


def malicious_samples(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                      cycle: int, scheme: SignatureScheme, rng: Random) -> tuple[Descriptor, ...]:
    plan = local.plan
    if plan.active(cycle) and plan.kind is AttackKind.HUB:
        return tuple(hub_attack_view(party, node, node.view.capacity, cycle, scheme, rng))
    if plan.active(cycle) and plan.kind is AttackKind.DEPLETE:
        return ()
    return tuple(e.descriptor for e in node.view if e.swappable)


def malicious_absorb(node: NodeState, descriptors: tuple[Descriptor, ...]) -> None:
    """Members keep what they are given (certificates!) but never check it."""
    for d in descriptors:
        node.view.insert(d)


def choose_initiation(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                      cycle: int, rng: Random) -> tuple[NodeId, Descriptor, bool] | None:
    """Pick the redemption certificate for this cycle's initiation.

    Correct behavior redeems the oldest entry. A hub attacker instead
    redeems a uniformly chosen certificate issued by a non-member, which
    is what lets it keep hammering victims.
    """
    plan = local.plan
    if plan.active(cycle) and plan.kind is AttackKind.HUB:
        eligible = [e for e in node.view.entries if not party.is_member(e.descriptor.core.creator)]
        if not eligible:
            return None
        entry = eligible[rng.randrange(len(eligible))]
        node.view.remove_entry(entry)
        return entry.descriptor.core.creator, entry.descriptor, not entry.swappable
    if len(node.view) == 0:
        return None
    entry = node.view.pop_oldest()
    return entry.descriptor.core.creator, entry.descriptor, not entry.swappable


def build_malicious_request(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                            cycle: int, fresh_timestamp: int, swap_len: int, titfortat: bool,
                            scheme: SignatureScheme, rng: Random
                            ) -> tuple[ExchangeSession, GossipRequest] | None:
    """Open an exchange as a (possibly attacking) member."""
    picked = choose_initiation(node, local, party, cycle, rng)
    if picked is None:
        return None
    partner, redeemed, nonswap = picked
    session = ExchangeSession(Role.INITIATOR, partner,
                              max_rounds=swap_len, titfortat=titfortat)
    fresh = create_descriptor(node.keypair, node.address, fresh_timestamp)
    party.register_creation(fresh, cycle)
    transfers = [transfer_ownership(fresh, node.keypair, partner, scheme)]
    session.sent += 1
    if not titfortat:
        while session.sent < session.max_rounds:
            out = malicious_swap_out(node, local, party, session, cycle, scheme, rng)
            if out is None:
                break
            transfers.append(out)
    samples = malicious_samples(node, local, party, cycle, scheme, rng)
    request = GossipRequest(node.node_id, redeemed, nonswap,
                            tuple(transfers), samples, proofs=())
    return session, request


def build_malicious_reply(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                          request: GossipRequest, cycle: int, swap_len: int,
                          titfortat: bool, scheme: SignatureScheme,
                          rng: Random) -> tuple[ExchangeSession, GossipReply]:
    """Answer a gossip request; members accept any certificate blindly."""
    session = ExchangeSession(Role.RESPONDER, request.initiator,
                              max_rounds=swap_len, titfortat=titfortat)
    malicious_absorb(node, request.transfers)
    replies: list[Descriptor] = []
    plan = local.plan
    depleting = plan.active(cycle) and plan.kind is AttackKind.DEPLETE
    if not depleting:
        budget = 1 if titfortat else swap_len
        for _ in range(budget):
            out = malicious_swap_out(node, local, party, session, cycle, scheme, rng)
            if out is None:
                break
            replies.append(out)
    samples = malicious_samples(node, local, party, cycle, scheme, rng)
    reply = GossipReply(node.node_id, tuple(replies), samples, proofs=())
    return session, reply


def malicious_handle_reply(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                           session: ExchangeSession, reply, cycle: int,
                           scheme: SignatureScheme, rng: Random) -> Descriptor | None:
    """Initiator-side reply processing for a member."""
    if not isinstance(reply, GossipReply):
        session.closed = True
        return None
    malicious_absorb(node, reply.transfers)
    session.received += len(reply.transfers)
    if not session.titfortat:
        session.closed = True
        return None
    plan = local.plan
    if not reply.transfers or (plan.active(cycle) and plan.kind is AttackKind.DEPLETE):
        # depletion initiators quit right after receiving round one
        session.closed = True
        return None
    if session.sent >= session.max_rounds:
        session.closed = True
        return None
    out = malicious_swap_out(node, local, party, session, cycle, scheme, rng)
    if out is None:
        session.closed = True
    return out


def malicious_step(node: NodeState, local: MaliciousLocal, party: MaliciousParty,
                   session: ExchangeSession, incoming: Descriptor | None, cycle: int,
                   scheme: SignatureScheme, rng: Random) -> Descriptor | None:
    """Tit-for-tat round for a member: absorb, then answer per strategy."""
    if session.closed or incoming is None:
        session.closed = True
        return None
    session.received += 1
    malicious_absorb(node, (incoming,))
    plan = local.plan
    attacking = plan.active(cycle)
    if attacking and (plan.kind is AttackKind.DEPLETE or not plan.honor_titfortat):
        session.closed = True
        return None
    if session.sent >= session.max_rounds:
        session.closed = True
        return None
    out = malicious_swap_out(node, local, party, session, cycle, scheme, rng)
    if out is None:
        session.closed = True
    return out


def spam_timestamps(base_now: int, rate: int, period_ms: int) -> list[int]:
    """Distinct in-period timestamps for one cycle's worth of spam."""
    step = max(1, period_ms // max(rate, 1))
    return [base_now + i * step for i in range(rate)]
