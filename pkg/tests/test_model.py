import numpy as np
import pytest

from pathlq import (
    ControlDecision,
    CostLedger,
    GraphSpec,
    PlantState,
    SpecError,
    accumulate_cost,
    aggregate_delays,
    plant_step,
    validate_spec,
)


class TestAggregateDelays:
    def test_five_node(self):
        assert aggregate_delays([3, 2, 5, 4]) == [0, 3, 5, 10, 14]

    def test_three_node(self):
        assert aggregate_delays([2, 2]) == [0, 2, 4]

    def test_single_node(self):
        assert aggregate_delays([]) == [0]

    def test_strictly_increasing(self, rng):
        tau = rng.integers(1, 6, size=8).tolist()
        sigma = aggregate_delays(tau)
        assert sigma[0] == 0
        assert all(b > a for a, b in zip(sigma, sigma[1:]))

    @pytest.mark.parametrize("bad", [[0], [2, -1], [1.5]])
    def test_invalid_delay(self, bad):
        with pytest.raises(SpecError):
            aggregate_delays(bad)


class TestValidateSpec:
    def test_well_formed(self):
        spec = validate_spec(
            {"n": 5, "tau": [3, 2, 5, 4], "q": [1] * 5, "r": [1] * 5, "horizon": 4}
        )
        assert spec.sigma == (0, 3, 5, 10, 14)

    def test_zero_weight_rejected(self):
        with pytest.raises(SpecError, match="positive"):
            validate_spec({"n": 2, "tau": [1], "q": [1, 0], "r": [1, 1], "horizon": 0})

    def test_zero_nodes_rejected(self):
        with pytest.raises(SpecError, match="n ="):
            validate_spec({"n": 0, "tau": [], "q": [], "r": [], "horizon": 0})

    def test_tau_shape_rejected(self):
        with pytest.raises(SpecError, match="tau"):
            validate_spec({"n": 3, "tau": [1], "q": [1] * 3, "r": [1] * 3, "horizon": 0})


def _zero_action(spec):
    return ControlDecision(u=np.zeros(spec.n - 1), v=np.zeros(spec.n))


class TestPlantStep:
    def test_equilibrium_fixed_point(self, five_node_spec):
        spec = five_node_spec
        state = PlantState.initial(spec)
        nxt = plant_step(state, _zero_action(spec), np.zeros(spec.n), spec)
        assert nxt.t == 1
        assert np.all(nxt.z == 0)
        assert all(np.all(p == 0) for p in nxt.pipelines)

    def test_single_node_disturbance(self):
        spec = GraphSpec(n=1, tau=(), q=(1.0,), r=(1.0,), horizon=0)
        state = PlantState.initial(spec)
        nxt = plant_step(state, _zero_action(spec), np.array([-1.0]), spec)
        assert nxt.z == pytest.approx([-1.0])

    def test_two_node_transport(self):
        spec = GraphSpec(n=2, tau=(1,), q=(1.0, 1.0), r=(1.0, 1.0), horizon=0)
        state = PlantState.initial(spec, z0=[1.0, 2.0], pipelines0=[[0.3]])
        action = ControlDecision(u=np.array([0.5]), v=np.zeros(2))
        nxt = plant_step(state, action, np.zeros(2), spec)
        # Node 1 receives the in-transit 0.3; node 2 releases 0.5.
        assert nxt.z == pytest.approx([1.3, 1.5])
        assert nxt.pipelines[0] == pytest.approx([0.5])

    def test_dimension_mismatch(self, five_node_spec):
        spec = five_node_spec
        state = PlantState.initial(spec)
        bad = ControlDecision(u=np.zeros(2), v=np.zeros(spec.n))
        with pytest.raises(SpecError):
            plant_step(state, bad, np.zeros(spec.n), spec)

    def test_pure_transport_conserves_quantity(self, rng):
        spec = GraphSpec(n=4, tau=(2, 3, 1), q=(1.0,) * 4, r=(1.0,) * 4, horizon=0)
        state = PlantState.initial(
            spec,
            z0=rng.standard_normal(4),
            pipelines0=[rng.standard_normal(t) for t in spec.tau],
        )
        total0 = state.z.sum() + sum(p.sum() for p in state.pipelines)
        for _ in range(10):
            action = ControlDecision(u=rng.standard_normal(3), v=np.zeros(4))
            state = plant_step(state, action, np.zeros(4), spec)
            total = state.z.sum() + sum(p.sum() for p in state.pipelines)
            assert total == pytest.approx(total0, abs=1e-12)

    def test_linearity(self, rng):
        spec = GraphSpec(n=3, tau=(2, 1), q=(1.0,) * 3, r=(1.0,) * 3, horizon=0)

        def rand_triple():
            state = PlantState.initial(
                spec,
                z0=rng.standard_normal(3),
                pipelines0=[rng.standard_normal(t) for t in spec.tau],
            )
            action = ControlDecision(
                u=rng.standard_normal(2), v=rng.standard_normal(3)
            )
            return state, action, rng.standard_normal(3)

        (s1, a1, d1), (s2, a2, d2) = rand_triple(), rand_triple()
        lam = 0.37
        mix_state = PlantState(
            t=0,
            z=lam * s1.z + (1 - lam) * s2.z,
            pipelines=tuple(
                lam * p + (1 - lam) * q_ for p, q_ in zip(s1.pipelines, s2.pipelines)
            ),
        )
        mix_action = ControlDecision(
            u=lam * a1.u + (1 - lam) * a2.u, v=lam * a1.v + (1 - lam) * a2.v
        )
        mixed = plant_step(mix_state, mix_action, lam * d1 + (1 - lam) * d2, spec)
        r1 = plant_step(s1, a1, d1, spec)
        r2 = plant_step(s2, a2, d2, spec)
        assert np.allclose(mixed.z, lam * r1.z + (1 - lam) * r2.z, atol=1e-12)
        for pm, p1, p2 in zip(mixed.pipelines, r1.pipelines, r2.pipelines):
            assert np.allclose(pm, lam * p1 + (1 - lam) * p2, atol=1e-12)


class TestCostLedger:
    def test_zero_step_adds_nothing(self, five_node_spec):
        spec = five_node_spec
        ledger = CostLedger()
        accumulate_cost(ledger, spec, PlantState.initial(spec), _zero_action(spec))
        assert ledger.accumulated == 0.0

    def test_single_node_value(self):
        spec = GraphSpec(n=1, tau=(), q=(1.0,), r=(10.0,), horizon=0)
        ledger = CostLedger()
        state = PlantState.initial(spec, z0=[2.0])
        action = ControlDecision(u=np.zeros(0), v=np.array([1.0]))
        accumulate_cost(ledger, spec, state, action)
        assert ledger.accumulated == pytest.approx(14.0)

    def test_non_decreasing(self, rng, five_node_spec):
        spec = five_node_spec
        ledger = CostLedger()
        prev = 0.0
        for _ in range(20):
            state = PlantState.initial(spec, z0=rng.standard_normal(spec.n))
            action = ControlDecision(
                u=rng.standard_normal(spec.n - 1), v=rng.standard_normal(spec.n)
            )
            accumulate_cost(ledger, spec, state, action)
            assert ledger.accumulated >= prev
            prev = ledger.accumulated
