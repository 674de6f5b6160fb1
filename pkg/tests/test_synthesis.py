import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from pathlq import GraphSpec, synthesize
from pathlq.synthesis import (
    sweep_gamma_rho,
    terminal_riccati,
)
from pathlq.verify import make_random_instance


class TestGammaRhoSweep:
    def test_harmonic_of_ones(self):
        gamma, _ = sweep_gamma_rho([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
        assert gamma == pytest.approx([1.0, 0.5, 1.0 / 3.0])

    def test_pair(self):
        gamma, _ = sweep_gamma_rho([2.0, 2.0], [1.0, 1.0])
        assert gamma == pytest.approx([2.0, 1.0])

    def test_first_entry_is_first_weight(self, rng):
        q = rng.uniform(0.1, 10, 6)
        r = rng.uniform(0.1, 10, 6)
        gamma, rho = sweep_gamma_rho(q, r)
        assert gamma[0] == q[0] and rho[0] == r[0]

    def test_harmonic_identity(self, rng):
        for _ in range(20):
            q = rng.uniform(0.1, 10, 7)
            r = rng.uniform(0.1, 10, 7)
            gamma, rho = sweep_gamma_rho(q, r)
            for k in range(7):
                assert abs(1 / gamma[k] - np.sum(1 / q[: k + 1])) < 1e-12
                assert abs(1 / rho[k] - np.sum(1 / r[: k + 1])) < 1e-12


class TestTerminalRiccati:
    def test_golden_ratio(self):
        assert terminal_riccati(1.0, 1.0) == pytest.approx(
            (math.sqrt(5) - 1) / 2, abs=1e-12
        )

    def test_exact_value(self):
        assert terminal_riccati(1.0, 2.0) == pytest.approx(1.0, abs=1e-14)

    def test_fixed_point_residual(self, rng):
        for _ in range(50):
            g, p = rng.uniform(0.05, 20, 2)
            x = terminal_riccati(g, p)
            y = x + g  # the fixed-point variable
            assert abs(y - (y - y**2 / (p + y) + g)) < 1e-10
            assert x > 0


class TestTables:
    def test_tau_one_P_is_single_entry(self):
        spec = GraphSpec(n=2, tau=(1,), q=(1.0, 2.0), r=(3.0, 4.0), horizon=0)
        params = synthesize(spec)
        assert params.P[0].shape == (1, 1)
        assert params.P[0][0, 0] == pytest.approx(params.X[0][0] / params.rho[0])

    def test_simple_substitution(self):
        # One scalar recursion step with X = gamma = rho = 1 gives 2/3, and
        # the corresponding gain value X/(X+gamma) = 1/2.
        from pathlq.synthesis import _riccati_step

        assert _riccati_step(1.0, 1.0, 1.0) == pytest.approx(2.0 / 3.0)
        assert 1.0 / (1.0 + 1.0) == 0.5

    def test_monotone_riccati_convergence(self, rng):
        spec = GraphSpec(
            n=3, tau=(2, 3), q=tuple(rng.uniform(0.1, 10, 3)),
            r=tuple(rng.uniform(0.1, 10, 3)), horizon=12,
        )
        params = synthesize(spec)
        xN = params.X[-1]
        diffs = np.abs(np.diff(xN[::-1]))
        assert np.all(np.diff(diffs) <= 1e-15)  # shrinking updates
        fixed = terminal_riccati(params.gamma[-1], params.rho[-1])
        assert abs(xN[0] - fixed) <= abs(xN[-1] - fixed) + 1e-15

    def test_X_and_g_match_scalar_numeric_dp(self, rng):
        """The X/g tables against stagewise numerical quadratic minimization."""
        for _ in range(5):
            inst = make_random_instance(rng, n_range=(4, 4))
            params = synthesize(inst.spec)
            for k in range(inst.spec.n):
                gamma, rho = params.gamma[k], params.rho[k]
                xk = params.X[k]
                for j in range(len(xk) - 1, 0, -1):
                    # min_x (X(j) + gamma)(a + x)^2 + rho x^2 evaluated at a=1
                    res = minimize_scalar(
                        lambda x: (xk[j] + gamma) * (1 + x) ** 2 + rho * x**2,
                        method="golden",
                    )
                    assert res.fun == pytest.approx(xk[j - 1], abs=1e-8)
                for j in range(2, params.tau_eff[k] + 1):
                    assert params.g[k][j] == pytest.approx(
                        xk[j - 1] / (xk[j - 1] + gamma), abs=1e-14
                    )

    def test_g_and_P_in_unit_interval(self, rng):
        for _ in range(25):
            inst = make_random_instance(rng)
            params = synthesize(inst.spec)
            for k in range(inst.spec.n):
                te = params.tau_eff[k]
                gvals = params.g[k][2 : te + 1]
                assert np.all((gvals > 0) & (gvals < 1))
                assert np.all((params.P[k] > 0) & (params.P[k] < 1))
                assert np.all(params.X[k] > 0)
            assert np.all(params.gamma > 0) and np.all(params.rho > 0)


class TestHSweep:
    def test_h0_is_zero(self, rng):
        inst = make_random_instance(rng)
        params = synthesize(inst.spec)
        assert params.h[0] == 0.0

    def test_single_edge_formula(self, rng):
        spec = GraphSpec(
            n=2, tau=(3,), q=tuple(rng.uniform(0.5, 2, 2)),
            r=tuple(rng.uniform(0.5, 2, 2)), horizon=2,
        )
        params = synthesize(spec)
        te = spec.tau[0]
        expected = params.P[0][te - 1, te - 1] * params.g_cross[0]
        assert params.h[1] == pytest.approx(expected, abs=1e-15)


class TestSynthesize:
    def test_single_node_degenerate(self):
        spec = GraphSpec(n=1, tau=(), q=(2.0,), r=(3.0,), horizon=4)
        params = synthesize(spec)
        assert params.gamma[0] == 2.0 and params.rho[0] == 3.0
        assert len(params.X[0]) == spec.horizon + 2
        assert params.b.size == 0 and params.g_cross.size == 0
        assert params.h == pytest.approx([0.0])

    def test_deterministic(self, rng):
        inst = make_random_instance(rng)
        p1 = synthesize(inst.spec)
        p2 = synthesize(inst.spec)
        assert np.array_equal(p1.gamma, p2.gamma)
        assert all(np.array_equal(a, b) for a, b in zip(p1.X, p2.X))
        assert all(np.array_equal(a, b, equal_nan=True) for a, b in zip(p1.phi, p2.phi))
        assert np.array_equal(p1.h, p2.h)

    def test_serialization_roundtrip_keys(self, five_node_spec):
        import json

        from pathlq.synthesis import params_to_document

        doc = json.loads(params_to_document(synthesize(five_node_spec)))
        assert doc["n"] == 5
        assert len(doc["nodes"]) == 5
        node1 = doc["nodes"][0]
        assert node1["tau_eff"] == 3
        assert "3" in node1["X"] and "2,1" in node1["P"]
