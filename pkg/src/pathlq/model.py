"""Problem instances, delayed plant dynamics, and cost accounting.

The plant is a path graph of N nodes.  Flow on edge i moves quantity from
node i+1 to node i with a transport delay of tau_i steps.  Each node can
also produce or consume locally (v), and is subject to planned external
injections (d).  Levels z and all flows are deviations from equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SpecError


def aggregate_delays(tau: Sequence[int]) -> list[int]:
    """Cumulative delays sigma_1..sigma_N for a delay list of length N-1.

    sigma_k is the total transport delay from node k down to node 1, so
    sigma_1 = 0 and sigma_N is the sum of all edge delays.
    """
    sigma = [0]
    for k, t in enumerate(tau):
        if int(t) != t or t < 1:
            raise SpecError(f"edge delay tau_{k + 1} = {t} must be an integer >= 1")
        sigma.append(sigma[-1] + int(t))
    return sigma


@dataclass(frozen=True)
class GraphSpec:
    """Immutable problem instance: sizes, delays, weights, planning horizon."""

    n: int
    tau: tuple[int, ...]
    q: tuple[float, ...]
    r: tuple[float, ...]
    horizon: int
    sigma: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(aggregate_delays(self.tau)))

    @property
    def sigma_total(self) -> int:
        return self.sigma[-1]


def validate_spec(raw: Mapping) -> GraphSpec:
    """Build a GraphSpec from a raw mapping, checking every invariant."""
    try:
        n = int(raw["n"])
        tau = [int(t) for t in raw["tau"]]
        q = [float(x) for x in raw["q"]]
        r = [float(x) for x in raw["r"]]
        horizon = int(raw["horizon"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed spec: {exc}") from exc

    if n < 1:
        raise SpecError(f"node count n = {n} must be >= 1")
    if len(tau) != n - 1:
        raise SpecError(f"tau has {len(tau)} entries, expected n-1 = {n - 1}")
    if len(q) != n or len(r) != n:
        raise SpecError(f"q and r must each have n = {n} entries")
    for name, w in (("q", q), ("r", r)):
        for i, x in enumerate(w):
            if not (x > 0.0) or not np.isfinite(x):
                raise SpecError(f"{name}_{i + 1} = {x} must be strictly positive")
    if horizon < 0:
        raise SpecError(f"horizon H = {horizon} must be >= 0")
    return GraphSpec(n=n, tau=tuple(tau), q=tuple(q), r=tuple(r), horizon=horizon)


@dataclass(frozen=True)
class PlantState:
    """Node levels plus per-edge in-transit buffers at absolute time t.

    pipelines[e] holds the flows already sent on edge e+1 but not yet
    arrived, oldest first: pipelines[e][k] = u_{e+1}[t - tau_{e+1} + k].
    """

    t: int
    z: np.ndarray
    pipelines: tuple[np.ndarray, ...]

    @staticmethod
    def initial(spec: GraphSpec, z0=None, pipelines0=None) -> "PlantState":
        z = np.zeros(spec.n) if z0 is None else np.asarray(z0, dtype=float).copy()
        if z.shape != (spec.n,):
            raise SpecError(f"initial z has shape {z.shape}, expected ({spec.n},)")
        if pipelines0 is None:
            pipes = tuple(np.zeros(t) for t in spec.tau)
        else:
            pipes = tuple(np.asarray(p, dtype=float).copy() for p in pipelines0)
            if len(pipes) != spec.n - 1 or any(
                p.shape != (t,) for p, t in zip(pipes, spec.tau)
            ):
                raise SpecError("initial pipelines do not match edge delays")
        return PlantState(t=0, z=z, pipelines=pipes)


@dataclass(frozen=True)
class ControlDecision:
    """Applied flows u_1..u_{N-1} and productions v_1..v_N for one step."""

    u: np.ndarray
    v: np.ndarray


def plant_step(
    state: PlantState, action: ControlDecision, d: np.ndarray, spec: GraphSpec
) -> PlantState:
    """Advance the plant one step under the given action and disturbance.

    z_i[t+1] = z_i[t] - u_{i-1}[t] + u_i[t - tau_i] + v_i[t] + d_i[t],
    with the boundary conventions u_0 = u_N = 0.  Each pipeline shifts by
    one slot and admits the newly sent flow.
    """
    n = spec.n
    u = np.asarray(action.u, dtype=float)
    v = np.asarray(action.v, dtype=float)
    d = np.asarray(d, dtype=float)
    if u.shape != (n - 1,) or v.shape != (n,) or d.shape != (n,):
        raise SpecError(
            f"action/disturbance shapes {u.shape}, {v.shape}, {d.shape} do not "
            f"match n = {n}"
        )
    arrivals = np.zeros(n)
    for e in range(n - 1):
        arrivals[e] = state.pipelines[e][0]  # u_{e+1}[t - tau_{e+1}]
    departures = np.zeros(n)
    departures[1:] = u  # node i loses u_{i-1}[t]
    z_next = state.z + arrivals - departures + v + d
    pipes_next = tuple(
        np.concatenate([state.pipelines[e][1:], [u[e]]]) for e in range(n - 1)
    )
    return PlantState(t=state.t + 1, z=z_next, pipelines=pipes_next)


@dataclass
class CostLedger:
    """Running quadratic cost: sum over time of q_i z_i^2 + r_i v_i^2."""

    accumulated: float = 0.0
    per_step: list = field(default_factory=list)

    def add(self, spec: GraphSpec, z: np.ndarray, v: np.ndarray) -> float:
        step = float(np.dot(spec.q, np.square(z)) + np.dot(spec.r, np.square(v)))
        self.accumulated += step
        self.per_step.append(step)
        return step


def accumulate_cost(
    ledger: CostLedger, spec: GraphSpec, state: PlantState, action: ControlDecision
) -> CostLedger:
    """Add the current step's stage cost to the ledger and return it."""
    ledger.add(spec, state.z, action.v)
    return ledger


def stage_cost(spec: GraphSpec, z: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(spec.q, np.square(z)) + np.dot(spec.r, np.square(v)))


@dataclass
class Trajectory:
    """A closed- or open-loop run of T steps.

    z has T+1 rows (levels before and after every step); u, v, d have T
    rows.  init_pipelines keeps the pre-run in-transit flows so shifted
    sums over early times can reach back before t = 0.
    """

    spec: GraphSpec
    z: np.ndarray  # (T+1, N)
    u: np.ndarray  # (T, N-1)
    v: np.ndarray  # (T, N)
    d: np.ndarray  # (T, N)
    init_pipelines: tuple[np.ndarray, ...]
    step_costs: np.ndarray  # (T,)

    @property
    def steps(self) -> int:
        return self.u.shape[0]

    def flow(self, edge: int, t: int) -> float:
        """u_edge[t], reaching into the initial pipeline for t < 0."""
        tau = self.spec.tau[edge - 1]
        if t >= 0:
            return float(self.u[t, edge - 1])
        if t >= -tau:
            return float(self.init_pipelines[edge - 1][tau + t])
        return 0.0

    def total_cost(self) -> float:
        return float(self.step_costs.sum())

    def final_plant_state(self) -> PlantState:
        """The plant state at the end of the run, pipelines included."""
        T = self.steps
        pipes = tuple(
            np.array([self.flow(e + 1, T - self.spec.tau[e] + k)
                      for k in range(self.spec.tau[e])])
            for e in range(self.spec.n - 1)
        )
        return PlantState(t=T, z=self.z[T].copy(), pipelines=pipes)
