"""Correct-node protocol logic for the hardened gossip exchange.

A gossip exchange is granted only against a redemption certificate: a
descriptor the initiator currently owns and the responder once created.
Every received descriptor (owned or sample) passes the frequency check and
the ownership check; a failed check yields a self-certifying violation
proof that is flooded and piggybacked until the whole network has
blacklisted the offender.

Ownership transfers run tit-for-tat (one descriptor per round-trip,
initiator first) unless configured for single-shot bulk swaps, which is
the legacy-style behavior the link-depletion experiments compare against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from random import Random

from .caches import RedemptionCache, SampleCache
from .descriptor import (
    Address,
    ChainRelation,
    Descriptor,
    DescriptorKey,
    chain_relation,
    create_descriptor,
    transfer_ownership,
    verify_chain,
)
from .identity import Clock, KeyPair, NodeId, SignatureScheme
from .proofs import ViolationKind, ViolationProof, make_proof, validate_proof
from .view import EmptyView, ProtocolParams, View, ViewEntry, select_partner


@dataclass(slots=True)
class SecureSettings:
    """Run-wide knobs for the hardened protocol."""

    params: ProtocolParams
    titfortat: bool = True
    sample_ttl: int = 0            # 0 -> 2 * view_len
    redemption_ttl: int = 6
    proofs_per_gossip: int = 16
    nonswap_swap_cap: int = 0      # 0 -> swap_len (cap disabled)
    max_fresh_skew_ms: int = 0     # 0 -> 2 * period

    def __post_init__(self) -> None:
        if self.sample_ttl <= 0:
            self.sample_ttl = 2 * self.params.view_len
        if self.nonswap_swap_cap <= 0:
            self.nonswap_swap_cap = self.params.swap_len
        if self.max_fresh_skew_ms <= 0:
            self.max_fresh_skew_ms = 2 * self.params.period_ms


class NodeState:
    """Full per-node protocol state, mutated only by the simulation loop."""

    __slots__ = ("keypair", "address", "clock", "view", "sample_cache",
                 "redemption_cache", "blacklist", "redeemed_keys",
                 "nonswap_redeemed_keys", "nonswap_cycle", "alive")

    def __init__(self, keypair: KeyPair, address: Address, settings: SecureSettings,
                 clock: Clock | None = None):
        self.keypair = keypair
        self.address = address
        self.clock = clock or Clock()
        self.view = View(keypair.node_id, settings.params.view_len)
        self.sample_cache = SampleCache(settings.sample_ttl)
        self.redemption_cache = RedemptionCache(
            settings.params.redemption_cache_len, settings.redemption_ttl)
        # accused -> convicting proof; insertion order doubles as learn order
        self.blacklist: dict[NodeId, ViolationProof] = {}
        # replay guards for redemptions of descriptors this node created
        self.redeemed_keys: set[DescriptorKey] = set()
        self.nonswap_redeemed_keys: set[DescriptorKey] = set()
        self.nonswap_cycle: int = -1
        self.alive = True

    @property
    def node_id(self) -> NodeId:
        return self.keypair.node_id

    def begin_cycle(self, cycle: int, sim_time_ms: int) -> None:
        """Per-cycle housekeeping: aging and cache expiry."""
        self.view.age_all()
        self.clock.advance_to(sim_time_ms)
        self.sample_cache.evict_expired(cycle)
        self.redemption_cache.evict_expired(cycle)


# -- violation checks --------------------------------------------------------


def frequency_check(cache: SampleCache, d: Descriptor, period_ms: int) -> ViolationProof | None:
    """Convict d's creator if it minted two descriptors within one period."""
    witness = cache.frequency_conflict(d, period_ms)
    if witness is None:
        return None
    return make_proof(ViolationKind.FREQUENCY, d.core.creator, witness, d)


def ownership_check(cache: SampleCache, d: Descriptor, cycle: int,
                    period_ms: int) -> ViolationProof | None:
    """Convict the fork owner if d's chain conflicts with a cached copy.

    Compatible copies update the cache (longest chain retained).
    """
    cached = cache.get(d.key)
    if cached is not None:
        result = chain_relation(cached, d)
        if result.relation is ChainRelation.CONFLICT:
            return make_proof(ViolationKind.CLONING, result.violator, cached, d)
    cache.store(d, cycle, period_ms)
    return None


class AdmitStatus(Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    VIOLATION = "violation"


class Context(Enum):
    OWNED = "owned"
    SAMPLE = "sample"


@dataclass(frozen=True, slots=True)
class AdmitOutcome:
    status: AdmitStatus
    reason: str | None = None
    proof: ViolationProof | None = None


_ACCEPTED = AdmitOutcome(AdmitStatus.ACCEPTED)
_REJ_BLACKLISTED = AdmitOutcome(AdmitStatus.REJECTED, "blacklisted-creator")
_REJ_CHAIN = AdmitOutcome(AdmitStatus.REJECTED, "invalid-chain")
_REJ_STALE = AdmitOutcome(AdmitStatus.REJECTED, "timestamp-deviation")
_REJ_SELF = AdmitOutcome(AdmitStatus.REJECTED, "self-link")
_REJ_DUP = AdmitOutcome(AdmitStatus.REJECTED, "duplicate")
_REJ_FULL = AdmitOutcome(AdmitStatus.REJECTED, "view-full")


def _screen(node: NodeState, d: Descriptor, cycle: int, settings: SecureSettings,
            scheme: SignatureScheme, from_creator: bool) -> AdmitOutcome:
    """Shared screening: blacklist, chain, timestamp, frequency, ownership.

    Fuses the two violation checks with the cache bookkeeping; this runs
    tens of thousands of times per simulated cycle, so it trades a little
    readability for flat control flow. Behavior is pinned to the
    standalone check functions by a property test.
    """
    creator = d.core.creator
    if creator in node.blacklist:
        return _REJ_BLACKLISTED
    cache = node.sample_cache
    samples = cache._samples
    key = d.key
    slot = samples.get(key)
    if slot is not None and slot[0] is d:
        # exact object vetted earlier; just bump recency
        del samples[key]
        slot[1] = cycle
        samples[key] = slot
        return _ACCEPTED
    valid = d._valid
    if valid is None:
        valid = verify_chain(d, scheme)
    if not valid:
        return _REJ_CHAIN
    if from_creator and abs(d.core.timestamp - node.clock.now_ms) > settings.max_fresh_skew_ms:
        return _REJ_STALE
    period = settings.params.period_ms
    freq = cache._freq
    creator_bytes = creator.value
    ts = d.core.timestamp
    center = ts // period
    for b in (center - 1, center, center + 1):
        witness = freq.get((creator_bytes, b))
        if witness is not None and witness.key != key \
                and abs(witness.core.timestamp - ts) < period:
            return AdmitOutcome(
                AdmitStatus.VIOLATION, "frequency",
                make_proof(ViolationKind.FREQUENCY, creator, witness, d))
    if slot is None:
        fslot = (creator_bytes, center)
        if fslot not in freq:
            freq[fslot] = d
        samples[key] = [d, cycle]
    else:
        cached = slot[0]
        relation = chain_relation(cached, d)
        if relation.relation is ChainRelation.CONFLICT:
            return AdmitOutcome(
                AdmitStatus.VIOLATION, "cloning",
                make_proof(ViolationKind.CLONING, relation.violator, cached, d))
        if relation.relation is ChainRelation.PREFIX_OF:
            slot[0] = d  # longer chain supersedes
        del samples[key]
        slot[1] = cycle
        samples[key] = slot
    return _ACCEPTED


def admit_descriptor(node: NodeState, d: Descriptor, context: Context, cycle: int,
                     settings: SecureSettings, scheme: SignatureScheme,
                     from_creator: bool = False) -> AdmitOutcome:
    """Screen one received descriptor and, if owned, place it in the view.

    ``from_creator`` marks a transfer received directly from the
    descriptor's creator (the only moment its timestamp can be judged
    against the local clock).
    """
    outcome = _screen(node, d, cycle, settings, scheme, from_creator)
    if outcome.status is not AdmitStatus.ACCEPTED or context is Context.SAMPLE:
        return outcome
    view = node.view
    if d.core.creator == node.node_id:
        return _REJ_SELF
    if d.key in view._keys:
        return _REJ_DUP
    if view.capacity <= len(view.entries):
        return _REJ_FULL
    view.append_unchecked(d)
    return _ACCEPTED


def screen_samples(node: NodeState, descriptors: tuple[Descriptor, ...], cycle: int,
                   settings: SecureSettings, scheme: SignatureScheme
                   ) -> ViolationProof | None:
    """Screen a batch of samples; stops at (and returns) the first violation.

    Inlined copy of ``_screen``'s sample path with all lookups hoisted:
    sample batches are by far the simulator's hottest loop. Rejected
    samples are simply skipped (a sample has no placement side effects).
    """
    blacklist = node.blacklist
    cache = node.sample_cache
    samples = cache._samples
    freq = cache._freq
    period = settings.params.period_ms
    for d in descriptors:
        creator = d.core.creator
        if creator in blacklist:
            continue
        key = d.key
        slot = samples.get(key)
        if slot is not None and slot[0] is d:
            del samples[key]
            slot[1] = cycle
            samples[key] = slot
            continue
        valid = d._valid
        if valid is None:
            valid = verify_chain(d, scheme)
        if not valid:
            continue
        creator_bytes = creator.value
        ts = d.core.timestamp
        center = ts // period
        for b in (center - 1, center, center + 1):
            witness = freq.get((creator_bytes, b))
            if witness is not None and witness.key != key \
                    and abs(witness.core.timestamp - ts) < period:
                return make_proof(ViolationKind.FREQUENCY, creator, witness, d)
        if slot is None:
            fslot = (creator_bytes, center)
            if fslot not in freq:
                freq[fslot] = d
            samples[key] = [d, cycle]
        else:
            cached = slot[0]
            relation = chain_relation(cached, d)
            if relation.relation is ChainRelation.CONFLICT:
                return make_proof(ViolationKind.CLONING, relation.violator, cached, d)
            if relation.relation is ChainRelation.PREFIX_OF:
                slot[0] = d
            del samples[key]
            slot[1] = cycle
            samples[key] = slot
    return None


# -- blacklist and proof handling ---------------------------------------------


def apply_blacklist(node: NodeState, proof: ViolationProof) -> int:
    """Record a conviction and drop every view link created by the accused."""
    node.blacklist[proof.accused] = proof
    return node.view.remove_creator(proof.accused)


def learn_proof(node: NodeState, proof: ViolationProof, settings: SecureSettings,
                scheme: SignatureScheme) -> bool:
    """Adopt a proof if it is new and valid; True means re-flood it."""
    if proof.accused in node.blacklist:
        return False
    if not validate_proof(proof, scheme, settings.params.period_ms):
        return False
    apply_blacklist(node, proof)
    return True


def piggyback_proofs(node: NodeState, cycle: int, limit: int) -> tuple[ViolationProof, ...]:
    """Select up to ``limit`` known proofs, rotating the window by cycle.

    Rotation guarantees that a node holding more proofs than fit in one
    message still gets every conviction across to lagging peers within a
    few exchanges.
    """
    proofs = list(node.blacklist.values())
    if len(proofs) <= limit:
        return tuple(proofs)
    start = (cycle * limit) % len(proofs)
    return tuple(proofs[(start + i) % len(proofs)] for i in range(limit))


def flood_targets(node: NodeState) -> list[NodeId]:
    """Current neighbors a discovered proof is pushed to."""
    return node.view.creators()


# -- exchange messages ---------------------------------------------------------


@dataclass(slots=True)
class GossipRequest:
    initiator: NodeId
    redeemed: Descriptor            # certificate: created by the responder
    nonswappable: bool
    transfers: tuple[Descriptor, ...]   # ownership transfers, initiator first
    samples: tuple[Descriptor, ...]
    proofs: tuple[ViolationProof, ...]


@dataclass(slots=True)
class GossipReply:
    responder: NodeId
    transfers: tuple[Descriptor, ...]
    samples: tuple[Descriptor, ...]
    proofs: tuple[ViolationProof, ...]


@dataclass(slots=True)
class GossipReject:
    responder: NodeId
    reason: str


class Role(Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


@dataclass(slots=True)
class ExchangeSession:
    """Per-exchange bookkeeping for the tit-for-tat loss bounds.

    Swap candidates are removed from the view up front (``pending``); each
    round signs one over to the partner. Whatever is still pending when
    the session ends was never signed away and goes straight back into
    the view.
    """

    role: Role
    partner: NodeId
    max_rounds: int
    titfortat: bool
    sent: int = 0
    received: int = 0
    closed: bool = False
    pending: list[ViewEntry] = field(default_factory=list)
    sent_entries: list[ViewEntry] = field(default_factory=list)

    def record_sent(self, entry: ViewEntry | None) -> None:
        self.sent += 1
        if entry is not None:
            self.sent_entries.append(entry)


@dataclass(slots=True)
class StepResult:
    outgoing: Descriptor | None
    new_proofs: list[ViolationProof]
    aborted: bool = False


def _next_transfer(node: NodeState, session: ExchangeSession,
                   scheme: SignatureScheme) -> Descriptor | None:
    """Sign the next pending swap candidate over to the partner."""
    if not session.pending:
        return None
    entry = session.pending.pop(0)
    session.record_sent(entry)
    return transfer_ownership(entry.descriptor, node.keypair, session.partner, scheme)


def initiate_exchange(node: NodeState, cycle: int, settings: SecureSettings,
                      scheme: SignatureScheme, rng: Random
                      ) -> tuple[ExchangeSession, GossipRequest]:
    """Redeem the oldest link and open an exchange with its creator.

    The redeemed descriptor moves to the redemption cache; the request
    carries the fresh self-descriptor (round one of tit-for-tat, or the
    first of the bulk swaps), view samples, redemption-cache samples, and
    piggybacked proofs. Swap candidates are drawn up front and excluded
    from the samples; entries pointing at the partner are never drawn
    (they would die there as self-links).
    """
    if len(node.view) == 0:
        raise EmptyView(f"{node.node_id} has no links to redeem")
    partner, redeemed, entry = select_partner(node.view)
    node.redemption_cache.add(redeemed, cycle)

    session = ExchangeSession(Role.INITIATOR, partner,
                              max_rounds=settings.params.swap_len,
                              titfortat=settings.titfortat)
    session.pending = node.view.take_random(settings.params.swap_len - 1, rng,
                                            swappable_only=True,
                                            exclude_creator=partner)
    fresh = create_descriptor(node.keypair, node.address, node.clock.now_ms)
    transfers = [transfer_ownership(fresh, node.keypair, partner, scheme)]
    session.record_sent(None)  # the fresh self-descriptor is not retainable
    if not settings.titfortat:
        while session.sent < session.max_rounds:
            t = _next_transfer(node, session, scheme)
            if t is None:
                break
            transfers.append(t)

    samples = tuple(e.descriptor for e in node.view.entries if e.swappable) \
        + tuple(node.redemption_cache.descriptors())
    request = GossipRequest(
        initiator=node.node_id,
        redeemed=redeemed,
        nonswappable=not entry.swappable,
        transfers=tuple(transfers),
        samples=samples,
        proofs=piggyback_proofs(node, cycle, settings.proofs_per_gossip),
    )
    return session, request


def check_nonswap_redemption(node: NodeState, key: DescriptorKey, cycle: int) -> bool:
    """At most one non-swappable redemption per key ever, one per cycle."""
    if key in node.nonswap_redeemed_keys:
        return False
    if node.nonswap_cycle == cycle:
        return False
    node.nonswap_redeemed_keys.add(key)
    node.nonswap_cycle = cycle
    return True


@dataclass(slots=True)
class ResponderDecision:
    session: ExchangeSession | None
    reply: GossipReply | GossipReject
    new_proofs: list[ViolationProof]


def accept_exchange(node: NodeState, request: GossipRequest, cycle: int,
                    settings: SecureSettings, scheme: SignatureScheme,
                    rng: Random) -> ResponderDecision:
    """Validate a redemption certificate and answer the opening message."""
    new_proofs: list[ViolationProof] = []
    for proof in request.proofs:
        if learn_proof(node, proof, settings, scheme):
            new_proofs.append(proof)

    def reject(reason: str) -> ResponderDecision:
        return ResponderDecision(None, GossipReject(node.node_id, reason), new_proofs)

    if request.initiator in node.blacklist:
        return reject("initiator-blacklisted")
    redeemed = request.redeemed
    if redeemed.core.creator != node.node_id:
        return reject("certificate-not-mine")
    if redeemed.current_owner != request.initiator:
        return reject("certificate-not-owned")
    if not verify_chain(redeemed, scheme):
        return reject("certificate-invalid")
    if request.nonswappable:
        if not check_nonswap_redemption(node, redeemed.key, cycle):
            return reject("nonswap-limit")
    else:
        if redeemed.key in node.redeemed_keys:
            return reject("already-redeemed")
        node.redeemed_keys.add(redeemed.key)

    session = ExchangeSession(
        Role.RESPONDER, request.initiator,
        max_rounds=settings.nonswap_swap_cap if request.nonswappable else settings.params.swap_len,
        titfortat=settings.titfortat)

    # The redeemed descriptor is received material like any other: cache it
    # so late clones of it can be convicted.
    outcome = admit_descriptor(node, redeemed, Context.SAMPLE, cycle, settings, scheme)
    if outcome.status is AdmitStatus.VIOLATION:
        new_proofs.extend(_adopt(node, outcome.proof, settings, scheme))
        return reject("violation")

    # Draw swap candidates up front: opens view slots before inserting and
    # keeps them out of the sample batch.
    session.pending = node.view.take_random(session.max_rounds, rng,
                                            swappable_only=True,
                                            exclude_creator=request.initiator)
    replies: list[Descriptor] = []
    budget = 1 if settings.titfortat else session.max_rounds
    while session.sent < budget:
        t = _next_transfer(node, session, scheme)
        if t is None:
            break
        replies.append(t)

    aborted = False
    for d in request.transfers:
        session.received += 1
        outcome = admit_descriptor(node, d, Context.OWNED, cycle, settings, scheme,
                                   from_creator=d.transfer_count == 1)
        if outcome.status is AdmitStatus.VIOLATION:
            new_proofs.extend(_adopt(node, outcome.proof, settings, scheme))
            aborted = True
            break
    if not aborted:
        proof = screen_samples(node, request.samples, cycle, settings, scheme)
        if proof is not None:
            new_proofs.extend(_adopt(node, proof, settings, scheme))
            aborted = True
    if aborted:
        # Evidence of a violation aborts the exchange; picks already made
        # come back as non-swappable copies via finish_exchange.
        session.closed = True
        finish_exchange(node, session)
        return ResponderDecision(None, GossipReject(node.node_id, "violation"), new_proofs)

    samples = tuple(e.descriptor for e in node.view.entries if e.swappable) \
        + tuple(node.redemption_cache.descriptors())
    reply = GossipReply(node.node_id, tuple(replies), samples,
                        piggyback_proofs(node, cycle, settings.proofs_per_gossip))
    return ResponderDecision(session, reply, new_proofs)


def _adopt(node: NodeState, proof: ViolationProof, settings: SecureSettings,
           scheme: SignatureScheme) -> list[ViolationProof]:
    return [proof] if learn_proof(node, proof, settings, scheme) else []


@dataclass(slots=True)
class ReplyProgress:
    next_swap: Descriptor | None
    new_proofs: list[ViolationProof]
    aborted: bool = False


def handle_reply(node: NodeState, session: ExchangeSession, reply: GossipReply | GossipReject,
                 cycle: int, settings: SecureSettings, scheme: SignatureScheme,
                 rng: Random) -> ReplyProgress:
    """Initiator-side processing of the responder's opening message."""
    if isinstance(reply, GossipReject):
        session.closed = True
        return ReplyProgress(None, [], aborted=True)

    new_proofs: list[ViolationProof] = []
    for proof in reply.proofs:
        if learn_proof(node, proof, settings, scheme):
            new_proofs.append(proof)

    for d in reply.transfers:
        session.received += 1
        outcome = admit_descriptor(node, d, Context.OWNED, cycle, settings, scheme,
                                   from_creator=d.transfer_count == 1)
        if outcome.status is AdmitStatus.VIOLATION:
            new_proofs.extend(_adopt(node, outcome.proof, settings, scheme))
            session.closed = True
            return ReplyProgress(None, new_proofs, aborted=True)
    proof = screen_samples(node, reply.samples, cycle, settings, scheme)
    if proof is not None:
        new_proofs.extend(_adopt(node, proof, settings, scheme))
        session.closed = True
        return ReplyProgress(None, new_proofs, aborted=True)

    next_swap = None
    if not session.titfortat:
        session.closed = True
    elif not reply.transfers:
        # Partner sent nothing back: quit, do not transfer any more.
        session.closed = True
    elif session.sent < session.max_rounds:
        next_swap = _next_transfer(node, session, scheme)
        if next_swap is None:
            session.closed = True
    else:
        session.closed = True
    return ReplyProgress(next_swap, new_proofs)


def titfortat_step(node: NodeState, session: ExchangeSession, incoming: Descriptor | None,
                   cycle: int, settings: SecureSettings, scheme: SignatureScheme,
                   rng: Random) -> StepResult:
    """Admit one incoming transfer and answer with at most one of our own.

    A silent or quitting partner closes the session: the initiator risks
    one descriptor (its fresh one), the responder risks none.
    """
    if session.closed:
        return StepResult(None, [])
    if incoming is None:
        session.closed = True
        return StepResult(None, [])

    session.received += 1
    new_proofs: list[ViolationProof] = []
    outgoing: Descriptor | None = None

    if session.role is Role.RESPONDER:
        if session.sent < min(session.max_rounds, session.received):
            outgoing = _next_transfer(node, session, scheme)

    outcome = admit_descriptor(node, incoming, Context.OWNED, cycle, settings, scheme,
                               from_creator=incoming.transfer_count == 1)
    if outcome.status is AdmitStatus.VIOLATION:
        new_proofs.extend(_adopt(node, outcome.proof, settings, scheme))
        session.closed = True
        return StepResult(None, new_proofs, aborted=True)

    if session.role is Role.INITIATOR and session.sent < session.max_rounds:
        outgoing = _next_transfer(node, session, scheme)

    if outgoing is None:
        session.closed = True
    return StepResult(outgoing, new_proofs)


def mark_nonswappable(node: NodeState, session: ExchangeSession) -> int:
    """Fill empty view slots with non-swappable copies of sent descriptors."""
    filled = 0
    for entry in session.sent_entries:
        if node.view.free_slots == 0:
            break
        d = entry.descriptor
        if d.core.creator in node.blacklist or node.view.contains_key(d.key):
            continue
        if node.view.insert(d, age=entry.age, swappable=False):
            filled += 1
    session.sent_entries.clear()  # idempotent across repeated finishes
    return filled


def finish_exchange(node: NodeState, session: ExchangeSession) -> int:
    """Close out a session (normally or after an abort).

    Pending swap candidates that were never signed over go back into the
    view untouched; descriptors whose ownership did leave may stay only
    as non-swappable copies.
    """
    session.closed = True
    if session.pending:
        for entry in session.pending:
            node.view.insert(entry.descriptor, age=entry.age, swappable=entry.swappable)
        session.pending.clear()
    return mark_nonswappable(node, session)
