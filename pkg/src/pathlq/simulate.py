"""Closed-loop simulation of the structured controller.

Supports three disturbance-information modes:
  * full plan known from the start,
  * receding-horizon announcement (entries become known a fixed number
    of steps ahead and are folded in through incremental ledger updates),
  * blind (the controller never sees the plan; the plant still does).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import ZeroWindows, control_step
from .ledger import (
    DisturbancePlan,
    ShiftedWindows,
    advance_time,
    apply_plan_updates,
    init_shifted_sums,
    validate_horizon,
)
from .model import (
    ControlDecision,
    GraphSpec,
    PlantState,
    Trajectory,
    plant_step,
    stage_cost,
)
from .synthesis import ControllerParams


@dataclass
class SimulationResult:
    trajectory: Trajectory
    total_cost: float  # stage costs over the run only
    decisions: list[ControlDecision]


def closed_loop(
    spec: GraphSpec,
    params: ControllerParams,
    plan: DisturbancePlan,
    steps: int,
    z0=None,
    pipelines0=None,
    announce: int | None = None,
    blind: bool = False,
) -> SimulationResult:
    """Run the two-sweep controller for `steps` steps.

    With announce=None the whole plan is known at time zero (it must then
    satisfy the horizon bound outright).  With announce=h, entry d_i[s]
    becomes known at time s - h and enters the ledger incrementally.
    """
    state = PlantState.initial(spec, z0, pipelines0)
    n = spec.n

    if blind:
        windows = ZeroWindows(spec)
        known = DisturbancePlan()
    elif announce is None:
        validate_horizon(plan, spec, now=0)
        known = plan.copy()
        windows = init_shifted_sums(known, spec, now=0)
    else:
        if announce > spec.horizon:
            raise ValueError(
                f"announcement horizon {announce} exceeds the synthesis "
                f"horizon H = {spec.horizon}"
            )
        known = DisturbancePlan()
        initial = {
            (i, s): val for (i, s), val in plan.entries.items() if 0 <= s <= announce
        }
        windows = init_shifted_sums(known, spec, now=0)
        apply_plan_updates(windows, known, initial)

    z_hist = np.zeros((steps + 1, n))
    u_hist = np.zeros((steps, max(n - 1, 0)))
    v_hist = np.zeros((steps, n))
    d_hist = np.zeros((steps, n))
    costs = np.zeros(steps)
    z_hist[0] = state.z
    init_pipes = tuple(p.copy() for p in state.pipelines)
    decisions = []

    for t in range(steps):
        if not blind and announce is not None and t > 0:
            fresh = {
                (i, s): val
                for (i, s), val in plan.entries.items()
                if s == t + announce
            }
            apply_plan_updates(windows, known, fresh)

        d_true = plan.d_now(spec, t)
        d_seen = known.d_now(spec, t) if not blind else np.zeros(n)
        decision, _ = control_step(state, windows, d_seen, params)
        costs[t] = stage_cost(spec, state.z, decision.v)
        u_hist[t] = decision.u
        v_hist[t] = decision.v
        d_hist[t] = d_true
        decisions.append(decision)

        state = plant_step(state, decision, d_true, spec)
        z_hist[t + 1] = state.z
        if not blind:
            advance_time(windows, known)
        else:
            windows.now += 1

    traj = Trajectory(
        spec=spec,
        z=z_hist,
        u=u_hist,
        v=v_hist,
        d=d_hist,
        init_pipelines=init_pipes,
        step_costs=costs,
    )
    return SimulationResult(
        trajectory=traj, total_cost=float(costs.sum()), decisions=decisions
    )
