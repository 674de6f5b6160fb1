"""Message-passing execution of the two-sweep control law.

Each node is an isolated unit holding only its own parameter slice,
its own measurements, and two neighbor links.  A control round runs the
upstream (delta) and downstream (mu) chains concurrently under a
randomized scheduler; decisions must be independent of the interleaving
and bit-identical to the sequential controller, which uses the same
per-node kernels.

This is an in-process simulation with explicit queues, not network I/O:
isolation and neighbor-only communication are enforced by construction
and audited through the message log.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .controller import (
    combine_delta,
    combine_mu,
    local_flow,
    local_phi,
    local_pi,
    local_production,
)
from .errors import RoundAbortError
from .ledger import (
    DisturbancePlan,
    LedgerMessage,
    advance_time,
    apply_plan_updates,
    init_shifted_sums,
)
from .model import ControlDecision, GraphSpec, PlantState, plant_step, stage_cost
from .synthesis import ControllerParams, NodeParams


@dataclass
class Message:
    round: int
    src: int
    dst: int
    kind: str  # "delta" | "mu" | "D-shift" | "D-update"
    value: float


@dataclass
class MessageLog:
    records: list[Message] = field(default_factory=list)

    def append(self, msg: Message) -> None:
        self.records.append(msg)

    def of_kind(self, *kinds: str) -> list[Message]:
        return [m for m in self.records if m.kind in kinds]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "from", "to", "kind", "value"])
            for m in self.records:
                writer.writerow([m.round, m.src, m.dst, m.kind, repr(m.value)])


@dataclass
class NodeUnit:
    """One controller node: local parameter slice and local measurements."""

    params: NodeParams
    z: float = 0.0
    uvals: np.ndarray | None = None
    dwin: np.ndarray | None = None
    d: float = 0.0
    # sweep intermediates
    phi_val: float | None = None
    pi_val: float | None = None
    delta: float | None = None
    mu: float | None = None
    delta_prev: float | None = None
    mu_next: float | None = None

    @property
    def index(self) -> int:
        return self.params.index

    def reset(self, z: float, uvals: np.ndarray, dwin: np.ndarray, d: float) -> None:
        self.z = float(z)
        self.uvals = np.asarray(uvals, dtype=float)
        self.dwin = np.asarray(dwin, dtype=float)
        self.d = float(d)
        self.phi_val = self.pi_val = self.delta = self.mu = None
        self.delta_prev = 0.0 if self.index == 1 else None
        self.mu_next = None  # set to 0.0 for the last node by the network

    def outputs(self) -> tuple[float | None, float]:
        """(flow released downstream or None for node 1, production)."""
        v = local_production(self.params, self.delta_prev, self.mu)
        if self.index == 1:
            return None, v
        u = local_flow(
            self.params, self.z, float(self.uvals[0]), float(self.dwin[0]),
            self.delta_prev, self.mu, self.d,
        )
        return u, v


class Network:
    """A path of node units with failable neighbor links."""

    def __init__(self, spec: GraphSpec, params: ControllerParams):
        self.spec = spec
        self.n = spec.n
        self.nodes = [NodeUnit(params=params.node_slice(k)) for k in range(spec.n)]
        self.failed_links: set[frozenset] = set()
        self.round = 0

    def fail_link(self, a: int, b: int) -> None:
        self.failed_links.add(frozenset((a, b)))

    def restore_links(self) -> None:
        self.failed_links.clear()

    def _check_link(self, src: int, dst: int) -> None:
        if abs(src - dst) != 1:
            raise RoundAbortError(f"non-neighbor send {src} -> {dst}")
        if frozenset((src, dst)) in self.failed_links:
            raise RoundAbortError(f"link {src} <-> {dst} is down; round aborted")


def run_control_round(
    network: Network,
    measurements: Iterable[tuple[float, np.ndarray, np.ndarray, float]],
    log: MessageLog | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[ControlDecision, MessageLog]:
    """One sample period: both sweeps, then local outputs.

    `measurements` supplies per node (z_i, in-transit flows oldest first,
    shifted-disturbance slice, current local disturbance).  The scheduler
    interleaves all ready tasks in random order when an rng is given;
    decisions do not depend on the interleaving.
    """
    if log is None:
        log = MessageLog()
    nodes = network.nodes
    n = network.n
    rnd = network.round
    for node, (z, uvals, dwin, d) in zip(nodes, measurements):
        node.reset(z, uvals, dwin, d)
    nodes[-1].mu_next = 0.0

    def send(src: int, dst: int, kind: str, value: float) -> None:
        network._check_link(src, dst)
        log.append(Message(round=rnd, src=src, dst=dst, kind=kind, value=value))
        node = nodes[dst - 1]
        if kind == "delta":
            node.delta_prev = value
        else:
            node.mu_next = value

    # Task list: every local computation and every send, each enabled by
    # its data dependencies only.  The two chains share nothing.
    def ready():
        tasks = []
        for k, node in enumerate(nodes):
            if node.phi_val is None:
                tasks.append(("phi", k))
            elif node.delta is None and node.delta_prev is not None:
                tasks.append(("delta", k))
            if node.pi_val is None:
                tasks.append(("pi", k))
            elif node.mu is None and node.mu_next is not None:
                tasks.append(("mu", k))
        return tasks

    while True:
        tasks = ready()
        if not tasks:
            break
        if rng is not None:
            task = tasks[int(rng.integers(len(tasks)))]
        else:
            task = tasks[0]
        kind, k = task
        node = nodes[k]
        if kind == "phi":
            node.phi_val = local_phi(node.params, node.z, node.uvals, node.dwin)
        elif kind == "pi":
            node.pi_val = local_pi(node.params, node.z, node.uvals, node.dwin)
        elif kind == "delta":
            node.delta = combine_delta(node.params, node.phi_val, node.delta_prev)
            if k + 1 < n:
                send(k + 1, k + 2, "delta", node.delta)
        elif kind == "mu":
            node.mu = combine_mu(node.params, node.pi_val, node.mu_next)
            if k > 0:
                send(k + 1, k, "mu", node.mu)

    u = np.zeros(max(n - 1, 0))
    v = np.empty(n)
    for k, node in enumerate(nodes):
        flow, prod = node.outputs()
        v[k] = prod
        if flow is not None:
            u[k - 1] = flow
    network.round += 1
    return ControlDecision(u=u, v=v), log


@dataclass
class AuditReport:
    ok: bool
    violations: list[str] = field(default_factory=list)


def audit_message_log(log: MessageLog, spec: GraphSpec) -> AuditReport:
    """Check neighbor-only links and sweep causality on a message log."""
    violations = []
    for m in log.records:
        if abs(m.src - m.dst) != 1:
            violations.append(f"non-neighbor message {m.src} -> {m.dst} ({m.kind})")
    sweep = [m for m in log.records if m.kind in ("delta", "mu")]
    by_round: dict[int, list[Message]] = {}
    for m in sweep:
        by_round.setdefault(m.round, []).append(m)
    for rnd, msgs in by_round.items():
        delta_pos = {m.src: i for i, m in enumerate(msgs) if m.kind == "delta"}
        mu_pos = {m.src: i for i, m in enumerate(msgs) if m.kind == "mu"}
        for src, pos in delta_pos.items():
            if src >= 2 and delta_pos.get(src - 1, -1) > pos:
                violations.append(
                    f"round {rnd}: delta from {src} before delta from {src - 1}"
                )
        for src, pos in mu_pos.items():
            if src <= spec.n - 1 and mu_pos.get(src + 1, -1) > pos:
                violations.append(
                    f"round {rnd}: mu from {src} before mu from {src + 1}"
                )
    return AuditReport(ok=not violations, violations=violations)


def _ledger_to_messages(msgs: list[LedgerMessage], rnd: int) -> list[Message]:
    return [
        Message(round=rnd, src=m.src, dst=m.dst, kind=m.kind, value=m.value)
        for m in msgs
    ]


def run_closed_loop(
    spec: GraphSpec,
    params: ControllerParams,
    plan: DisturbancePlan,
    steps: int,
    z0=None,
    pipelines0=None,
    rng: np.random.Generator | None = None,
) -> tuple[list[ControlDecision], MessageLog, float]:
    """Full message-passing closed loop, logging sweep and ledger traffic."""
    network = Network(spec, params)
    state = PlantState.initial(spec, z0, pipelines0)
    windows = init_shifted_sums(plan, spec, now=0)
    log = MessageLog()
    total = 0.0
    decisions = []
    for t in range(steps):
        meas = []
        for k in range(spec.n):
            uvals = (
                state.pipelines[k]
                if k < spec.n - 1
                else np.zeros(params.tau_eff[k])
            )
            meas.append(
                (state.z[k], uvals, windows.slice(k + 1, params.tau_eff[k]),
                 plan.get(k + 1, t))
            )
        decision, _ = run_control_round(network, meas, log=log, rng=rng)
        decisions.append(decision)
        total += stage_cost(spec, state.z, decision.v)
        state = plant_step(state, decision, plan.d_now(spec, t), spec)
        for m in _ledger_to_messages(advance_time(windows, plan), network.round):
            log.append(m)
    return decisions, log, total
