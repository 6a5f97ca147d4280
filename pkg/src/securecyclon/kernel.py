"""Deterministic cycle-driven simulation kernel.

One cycle: age views and caches, apply scheduled churn, then every alive
node initiates at most one exchange in a seeded permutation order
(frequency spammers initiate more, through their explicit attack path).
Discovered violation proofs flood hop-by-hop within the cycle. A metrics
snapshot closes the cycle.

A run is a pure function of its config: same config (seed included),
same bytes out.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from random import Random

from .adversary import (
    AttackKind,
    AttackPlan,
    MaliciousLocal,
    MaliciousParty,
    build_malicious_reply,
    build_malicious_request,
    malicious_handle_reply,
    malicious_step,
    spam_timestamps,
    stage_clone,
)
from .config import ScenarioConfig
from .descriptor import Address, Descriptor, DescriptorKey, create_descriptor, transfer_ownership
from .identity import Clock, HashMacScheme, NodeId, SignatureScheme
from .legacy import legacy_absorb, legacy_exchange, legacy_initiate, legacy_respond
from .metrics import CycleSnapshot, MetricsSeries, indegree_stats
from .proofs import ViolationKind, ViolationProof
from .secure import (
    GossipReject,
    NodeState,
    SecureSettings,
    accept_exchange,
    finish_exchange,
    flood_targets,
    handle_reply,
    initiate_exchange,
    learn_proof,
    titfortat_step,
)
from .view import select_partner

SIM_EPOCH_MS = 1_600_000_000_000  # keeps backdated bootstrap timestamps positive


@dataclass(slots=True)
class RunStats:
    """Omniscient instrumentation, outside the protocol."""

    first_convictions: dict[NodeId, tuple[int, str]] = field(default_factory=dict)
    convicted_keys: set[DescriptorKey] = field(default_factory=set)
    proof_adoptions: int = 0
    violations_discovered: int = 0
    failed_contacts: int = 0
    redemptions_total: int = 0
    redeemed_transfer_sum: int = 0


class Simulation:
    """One seeded run of a scenario."""

    def __init__(self, config: ScenarioConfig, scheme: SignatureScheme | None = None):
        self.config = config
        self.params = config.params
        self.settings = SecureSettings(
            self.params,
            titfortat=config.titfortat,
            sample_ttl=config.sample_ttl,
            redemption_ttl=config.redemption_ttl,
            proofs_per_gossip=config.proofs_per_gossip,
            nonswap_swap_cap=config.nonswap_swap_cap,
        )
        self.scheme = scheme or HashMacScheme()
        self.rng = Random(config.seed)
        self.secure_mode = config.mode == "secure"

        self.states: dict[NodeId, NodeState] = {}
        self.order: list[NodeId] = []
        self.malicious: set[bytes] = set()
        self.plan = AttackPlan(
            kind=AttackKind(config.attack),
            start_cycle=config.attack_start,
            malicious_fraction=config.malicious_fraction,
            clone_age=config.clone_age,
            spam_rate=config.spam_rate,
            honor_titfortat=config.honor_titfortat,
        )
        self.party = MaliciousParty(self.plan, self.params)
        self.locals: dict[NodeId, MaliciousLocal] = {}

        self.flood_queue: deque = deque()
        self.blacklist_counts: dict[NodeId, int] = {}
        self.stats = RunStats()
        self.cycle = 0
        self._cycle_redeemed: list[int] = []
        self._alive_correct: list[NodeId] = []
        self._next_index = 0
        self._boot_counts: dict[NodeId, int] = {}

    # -- setup -----------------------------------------------------------------

    def _new_node(self, now_ms: int) -> NodeState:
        kp = self.scheme.generate(self.rng)
        address = Address(0x0A000000 + self._next_index, 9000)
        self._next_index += 1
        skew = self.rng.randint(-self.config.max_skew_ms, self.config.max_skew_ms) \
            if self.config.max_skew_ms else 0
        state = NodeState(kp, address, self.settings, Clock(skew))
        state.clock.advance_to(now_ms)
        self.states[kp.node_id] = state
        self.order.append(kp.node_id)
        return state

    def bootstrap(self) -> None:
        """Mint identities, pick the malicious roster, seed random views."""
        for _ in range(self.config.n):
            self._new_node(SIM_EPOCH_MS)
        roster = self.rng.sample(self.order, self.config.malicious_count)
        for node_id in roster:
            self.malicious.add(node_id.value)
            self.party.register_member(self.states[node_id].keypair)
            self.locals[node_id] = MaliciousLocal(self.plan)

        n = len(self.order)
        for i, node_id in enumerate(self.order):
            state = self.states[node_id]
            picks = self.rng.sample(range(n - 1), min(self.params.view_len, n - 1))
            for j in picks:
                creator_id = self.order[j if j < i else j + 1]
                state.view.insert(self._bootstrap_link(creator_id, node_id), age=0)

    def _bootstrap_link(self, creator_id: NodeId, holder_id: NodeId) -> Descriptor:
        """A pre-aged descriptor, already transferred once to its holder.

        Timestamps are backdated one period per descriptor the creator has
        issued, so bootstrap material can never trip the frequency check.
        """
        creator = self.states[creator_id]
        k = self._boot_counts.get(creator_id, 0) + 1
        self._boot_counts[creator_id] = k
        ts = SIM_EPOCH_MS + creator.clock.skew_ms - k * self.params.period_ms
        d = create_descriptor(creator.keypair, creator.address, ts)
        return transfer_ownership(d, creator.keypair, holder_id, self.scheme)

    # -- run loop ----------------------------------------------------------------

    def run(self) -> MetricsSeries:
        if not self.states:
            self.bootstrap()
        series = MetricsSeries(self.config.to_dict(), self.config.content_hash(),
                               self.config.seed)
        for cycle in range(self.config.cycles):
            self.cycle = cycle
            sim_time = SIM_EPOCH_MS + cycle * self.params.period_ms
            for node_id in self.order:
                state = self.states[node_id]
                if state.alive:
                    state.begin_cycle(cycle, sim_time)
            self._apply_churn(cycle)
            self.party.prune_pool(cycle)
            if self.plan.kind is AttackKind.CLONE and self.plan.active(cycle):
                for member in self.party.members:
                    if self.states[member].alive:
                        stage_clone(self.states[member], self.locals[member], cycle)

            alive_ids = [i for i in self.order if self.states[i].alive]
            self._alive_correct = [i for i in alive_ids if i.value not in self.malicious]
            self._cycle_redeemed = []
            for node_id in self.rng.sample(alive_ids, len(alive_ids)):
                state = self.states[node_id]
                if not state.alive:
                    continue
                if node_id.value in self.malicious:
                    self._initiate_malicious(node_id, cycle)
                else:
                    self._initiate_correct(node_id, cycle)
                self._drain_floods()
            series.snapshots.append(self._snapshot(cycle))
        return series

    # -- correct-node exchanges -----------------------------------------------------

    def _contact_fails(self, partner: NodeState | None) -> bool:
        if partner is None or not partner.alive:
            return True
        if self.config.message_loss and self.rng.random() < self.config.message_loss:
            return True
        return False

    def _initiate_correct(self, node_id: NodeId, cycle: int) -> None:
        if not self.secure_mode:
            self._initiate_correct_legacy(node_id, cycle)
            return
        state = self.states[node_id]
        if len(state.view) == 0:
            return
        session, request = initiate_exchange(state, cycle, self.settings, self.scheme, self.rng)
        partner_id = request.redeemed.core.creator
        partner = self.states.get(partner_id)
        if self._contact_fails(partner):
            self.stats.failed_contacts += 1
            finish_exchange(state, session)
            return

        if partner_id.value in self.malicious:
            msession, reply = build_malicious_reply(
                partner, self.locals[partner_id], self.party, request, cycle,
                self.params.swap_len, self.settings.titfortat, self.scheme, self.rng)
            progress = handle_reply(state, session, reply, cycle, self.settings,
                                    self.scheme, self.rng)
            self._queue_proofs(node_id, progress.new_proofs)
            swap = progress.next_swap
            while swap is not None:
                out = malicious_step(partner, self.locals[partner_id], self.party,
                                     msession, swap, cycle, self.scheme, self.rng)
                if out is None:
                    titfortat_step(state, session, None, cycle, self.settings,
                                   self.scheme, self.rng)
                    break
                result = titfortat_step(state, session, out, cycle, self.settings,
                                        self.scheme, self.rng)
                self._queue_proofs(node_id, result.new_proofs)
                swap = result.outgoing
            finish_exchange(state, session)
            return

        decision = accept_exchange(partner, request, cycle, self.settings,
                                   self.scheme, self.rng)
        self._queue_proofs(partner_id, decision.new_proofs)
        if isinstance(decision.reply, GossipReject):
            handle_reply(state, session, decision.reply, cycle, self.settings,
                         self.scheme, self.rng)
            finish_exchange(state, session)
            return
        self._record_redemption(request.redeemed)
        progress = handle_reply(state, session, decision.reply, cycle, self.settings,
                                self.scheme, self.rng)
        self._queue_proofs(node_id, progress.new_proofs)
        psession = decision.session
        swap = progress.next_swap
        while swap is not None and psession is not None:
            result_p = titfortat_step(partner, psession, swap, cycle, self.settings,
                                      self.scheme, self.rng)
            self._queue_proofs(partner_id, result_p.new_proofs)
            if result_p.outgoing is None:
                titfortat_step(state, session, None, cycle, self.settings,
                               self.scheme, self.rng)
                break
            result_i = titfortat_step(state, session, result_p.outgoing, cycle,
                                      self.settings, self.scheme, self.rng)
            self._queue_proofs(node_id, result_i.new_proofs)
            swap = result_i.outgoing
        finish_exchange(state, session)
        if psession is not None:
            finish_exchange(partner, psession)

    def _initiate_correct_legacy(self, node_id: NodeId, cycle: int) -> None:
        state = self.states[node_id]
        if len(state.view) == 0:
            return
        partner_id, redeemed, _entry = select_partner(state.view)
        partner = self.states.get(partner_id)
        if self._contact_fails(partner):
            self.stats.failed_contacts += 1
            return
        now = state.clock.now_ms
        if partner_id.value in self.malicious and self.plan.active(cycle) \
                and self.plan.kind is AttackKind.HUB:
            outbound, sent_entries = legacy_initiate(state, self.params, now, self.rng)
            for d in outbound:
                partner.view.insert(d)
            batch = self.party.pool_pick(self.params.swap_len, self.rng)
            legacy_absorb(state, batch, sent_entries, redeemed)
        else:
            legacy_exchange(state, partner, redeemed, self.params, now, self.rng)

    # -- malicious-node exchanges ------------------------------------------------------

    def _initiate_malicious(self, node_id: NodeId, cycle: int) -> None:
        state = self.states[node_id]
        local = self.locals[node_id]
        if not self.secure_mode:
            self._initiate_malicious_legacy(node_id, cycle)
            return
        if self.plan.kind is AttackKind.FREQ_SPAM and self.plan.active(cycle):
            stamps = spam_timestamps(state.clock.now_ms, self.plan.spam_rate,
                                     self.params.period_ms)
        else:
            stamps = [state.clock.now_ms]
        for ts in stamps:
            self._malicious_exchange(node_id, state, local, cycle, ts)

    def _malicious_exchange(self, node_id: NodeId, state: NodeState,
                            local: MaliciousLocal, cycle: int, fresh_ts: int) -> None:
        built = build_malicious_request(state, local, self.party, cycle, fresh_ts,
                                        self.params.swap_len, self.settings.titfortat,
                                        self.scheme, self.rng)
        if built is None:
            return
        session, request = built
        partner_id = request.redeemed.core.creator
        partner = self.states.get(partner_id)
        if self._contact_fails(partner):
            return

        if partner_id.value in self.malicious:
            msession, reply = build_malicious_reply(
                partner, self.locals[partner_id], self.party, request, cycle,
                self.params.swap_len, self.settings.titfortat, self.scheme, self.rng)
            swap = malicious_handle_reply(state, local, self.party, session, reply,
                                          cycle, self.scheme, self.rng)
            while swap is not None:
                out = malicious_step(partner, self.locals[partner_id], self.party,
                                     msession, swap, cycle, self.scheme, self.rng)
                if out is None:
                    break
                swap = malicious_step(state, local, self.party, session, out,
                                      cycle, self.scheme, self.rng)
            return

        decision = accept_exchange(partner, request, cycle, self.settings,
                                   self.scheme, self.rng)
        self._queue_proofs(partner_id, decision.new_proofs)
        if isinstance(decision.reply, GossipReject):
            return
        self._record_redemption(request.redeemed)
        psession = decision.session
        swap = malicious_handle_reply(state, local, self.party, session, decision.reply,
                                      cycle, self.scheme, self.rng)
        while swap is not None and psession is not None:
            result_p = titfortat_step(partner, psession, swap, cycle, self.settings,
                                      self.scheme, self.rng)
            self._queue_proofs(partner_id, result_p.new_proofs)
            if result_p.outgoing is None:
                break
            swap = malicious_step(state, local, self.party, session, result_p.outgoing,
                                  cycle, self.scheme, self.rng)
        if psession is not None:
            if psession.titfortat and not psession.closed:
                titfortat_step(partner, psession, None, cycle, self.settings,
                               self.scheme, self.rng)
            finish_exchange(partner, psession)

    def _initiate_malicious_legacy(self, node_id: NodeId, cycle: int) -> None:
        state = self.states[node_id]
        now = state.clock.now_ms
        attacking = self.plan.active(cycle) and self.plan.kind is AttackKind.HUB
        if attacking:
            fresh = create_descriptor(state.keypair, state.address, now)
            self.party.register_creation(fresh, cycle)
            if not self._alive_correct:
                return
            victim_id = self._alive_correct[self.rng.randrange(len(self._alive_correct))]
            victim = self.states[victim_id]
            if self.config.message_loss and self.rng.random() < self.config.message_loss:
                return
            batch = self.party.pool_pick(self.params.swap_len, self.rng)
            legacy_respond(victim, batch, self.params, self.rng)
            return
        # stealth phase: plain correct behavior, but creations feed the pool
        if len(state.view) == 0:
            return
        partner_id, redeemed, _entry = select_partner(state.view)
        partner = self.states.get(partner_id)
        if self._contact_fails(partner):
            return
        outbound, sent_entries = legacy_initiate(state, self.params, now, self.rng)
        self.party.register_creation(outbound[0], cycle)
        inbound, _ = legacy_respond(partner, outbound, self.params, self.rng)
        legacy_absorb(state, inbound, sent_entries, redeemed)

    # -- churn -------------------------------------------------------------------

    def _apply_churn(self, cycle: int) -> None:
        for ev in self.config.churn:
            if ev.cycle != cycle:
                continue
            victims: list[NodeId] = []
            if ev.fail_malicious:
                victims.extend(m for m in self.party.members if self.states[m].alive)
            alive = [i for i in self.order
                     if self.states[i].alive and i not in victims]
            n_fail = ev.fail_count + int(round(ev.fail_fraction * len(alive)))
            if n_fail:
                victims.extend(self.rng.sample(alive, min(n_fail, len(alive))))
            for node_id in victims:
                state = self.states[node_id]
                state.alive = False
                for accused in state.blacklist:
                    self.blacklist_counts[accused] = self.blacklist_counts.get(accused, 1) - 1
            for _ in range(ev.join_count):
                self._join_node(cycle)

    def _join_node(self, cycle: int) -> None:
        """Bootstrap a latecomer with a few non-swappable links."""
        now = SIM_EPOCH_MS + cycle * self.params.period_ms
        state = self._new_node(now)
        contacts = [i for i in self.order[:-1]
                    if self.states[i].alive and i.value not in self.malicious
                    and len(self.states[i].view) > 0]
        if not contacts:
            return
        contact = self.states[contacts[self.rng.randrange(len(contacts))]]
        entries = contact.view.take_random(self.config.join_links, self.rng,
                                           swappable_only=True)
        for entry in entries:
            if entry.descriptor.core.creator == state.node_id:
                continue
            handed = transfer_ownership(entry.descriptor, contact.keypair,
                                        state.node_id, self.scheme)
            state.view.insert(handed, age=0, swappable=False)
            # the contact transferred ownership away; it may keep marked copies
            contact.view.insert(entry.descriptor, age=entry.age, swappable=False)

    # -- proofs and metrics ------------------------------------------------------------

    def _queue_proofs(self, origin: NodeId, proofs: list[ViolationProof]) -> None:
        for proof in proofs:
            self._record_adoption(origin, proof, discovered=True)
            self.flood_queue.append((origin, proof, 0))

    def _record_adoption(self, node_id: NodeId, proof: ViolationProof,
                         discovered: bool = False) -> None:
        self.stats.proof_adoptions += 1
        self.blacklist_counts[proof.accused] = self.blacklist_counts.get(proof.accused, 0) + 1
        if proof.accused not in self.stats.first_convictions:
            self.stats.first_convictions[proof.accused] = (self.cycle, proof.kind.name)
            if discovered:
                self.stats.violations_discovered += 1
        if proof.kind is ViolationKind.CLONING:
            self.stats.convicted_keys.add(proof.evidence[0].key)

    def _drain_floods(self) -> None:
        budget = self.config.flood_hop_budget
        while self.flood_queue:
            sender_id, proof, hops = self.flood_queue.popleft()
            if budget and hops >= budget:
                continue
            sender = self.states.get(sender_id)
            if sender is None:
                continue
            for target_id in flood_targets(sender):
                target = self.states.get(target_id)
                if target is None or not target.alive:
                    continue
                if target_id.value in self.malicious:
                    continue  # members swallow proofs
                if learn_proof(target, proof, self.settings, self.scheme):
                    self._record_adoption(target_id, proof)
                    self.flood_queue.append((target_id, proof, hops + 1))

    def _record_redemption(self, redeemed: Descriptor) -> None:
        self._cycle_redeemed.append(redeemed.transfer_count)
        self.stats.redemptions_total += 1
        self.stats.redeemed_transfer_sum += redeemed.transfer_count

    def _snapshot(self, cycle: int) -> CycleSnapshot:
        """All per-cycle measurements in a single pass over the views."""
        malicious = self.malicious
        states = self.states
        indeg: dict[NodeId, int] = {}
        alive_correct = alive_malicious = 0
        links = bad_links = nonswap = eclipsed = 0
        total_entries = dead_entries = 0
        for node_id in self.order:
            if states[node_id].alive:
                indeg[node_id] = 0
                if node_id.value in malicious:
                    alive_malicious += 1
                else:
                    alive_correct += 1
        for node_id in self.order:
            state = states[node_id]
            if not state.alive:
                continue
            correct = node_id.value not in malicious
            all_bad = len(state.view.entries) > 0
            for e in state.view.entries:
                creator = e.descriptor.core.creator
                total_entries += 1
                if creator in indeg:
                    indeg[creator] += 1
                else:
                    dead_entries += 1
                if correct:
                    links += 1
                    if creator.value in malicious:
                        bad_links += 1
                    else:
                        all_bad = False
                    if not e.swappable:
                        nonswap += 1
            if correct and all_bad:
                eclipsed += 1
        hist: dict[int, int] = {}
        for count in indeg.values():
            hist[count] = hist.get(count, 0) + 1
        mean, std = indegree_stats(hist)

        completed = [ev for ev in self.party.clone_events if ev.completed_cycle is not None]
        redeemed_mean = (sum(self._cycle_redeemed) / len(self._cycle_redeemed)
                         if self._cycle_redeemed else 0.0)
        blacklisted_all = sum(1 for cnt in self.blacklist_counts.values()
                              if cnt >= alive_correct > 0)
        return CycleSnapshot(
            cycle=cycle,
            malicious_link_fraction=bad_links / links if links else 0.0,
            nonswappable_fraction=nonswap / links if links else 0.0,
            eclipsed=eclipsed,
            blacklisted=len(self.stats.first_convictions),
            indegree_mean=mean,
            indegree_std=std,
            blacklisted_all=blacklisted_all,
            alive_correct=alive_correct,
            alive_malicious=alive_malicious,
            dead_link_fraction=dead_entries / total_entries if total_entries else 0.0,
            redeemed_chain_mean=redeemed_mean,
            clones_total=len(completed),
            clones_detected=sum(1 for ev in completed
                                if ev.key in self.stats.convicted_keys),
            indegree_hist=hist,
        )


def run(config: ScenarioConfig) -> MetricsSeries:
    """Execute one scenario; the one public entry point for experiments."""
    return Simulation(config).run()
