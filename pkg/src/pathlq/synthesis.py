"""Offline controller synthesis: three sweeps over the path graph.

The first sweep (downstream node 1 up to node N) computes the harmonic
aggregates gamma_i and rho_i.  The second sweep (node N down to node 1)
runs scalar cost-to-go recursions producing the X, g, b and P tables.
The third sweep (node 1 up again) computes the h coefficients, after
which each node finalizes its local phi, a and c parameters.

Index conventions: arrays are stored 0-based per node k = i - 1.  The
last node has no incoming edge; it uses an effective delay of H + 1 so
that its tables cover the whole planning horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import GraphSpec

# The product upper limit inside phi_i(Delta): "delta" uses prod_{j=2}^{Delta},
# which is the variant consistent with the table sizes and confirmed against
# the dense oracle; "delta+1" uses prod_{j=2}^{Delta+1} capped at the table
# end, kept only for the differential experiment that froze the default.
PHI_VARIANT_DEFAULT = "delta"


@dataclass(frozen=True)
class NodeParams:
    """The slice of the controller parameters one node needs locally."""

    index: int  # 1-based node index
    tau_eff: int
    gamma: float
    q: float
    r: float
    x1: float  # X_i(1)
    p_tau_1: float  # P_i(tau_i, 1)
    b: float  # 0.0 for the last node (never used there)
    h_prev: float  # h_{i-1}
    a: float
    c: float
    phi: np.ndarray  # phi[Delta] for Delta = 1..tau_eff (index 0 unused)
    gprod: np.ndarray  # gprod[m] = prod_{j=2}^{m} g_i(j), m = 1..tau_eff


@dataclass(frozen=True)
class ControllerParams:
    """All synthesized parameters, indexed per node."""

    n: int
    horizon: int
    tau_eff: tuple[int, ...]
    gamma: np.ndarray
    rho: np.ndarray
    X: tuple[np.ndarray, ...]  # X[k][j-1]; last node has H+2 entries
    g: tuple[np.ndarray, ...]  # g[k][j] for j = 2..tau_eff (indices 0,1 unused)
    g_cross: np.ndarray  # g_cross[k] = g_{i+1}(1) stored at node i = k+1 < N
    gprod: tuple[np.ndarray, ...]
    b: np.ndarray  # b_i for i = 1..N-1
    P: tuple[np.ndarray, ...]  # P[k][l-1, m-1], shape (tau_eff, tau_eff)
    h: np.ndarray  # h[i] = h_i for i = 0..N-1, h[0] = 0
    phi: tuple[np.ndarray, ...]
    a: np.ndarray
    c: np.ndarray
    phi_variant: str

    def node_slice(self, k: int) -> NodeParams:
        """Local parameters for node k+1 (everything its unit may hold)."""
        return NodeParams(
            index=k + 1,
            tau_eff=self.tau_eff[k],
            gamma=float(self.gamma[k]),
            q=float(self._q[k]),
            r=float(self._r[k]),
            x1=float(self.X[k][0]),
            p_tau_1=float(self.P[k][self.tau_eff[k] - 1, 0]),
            b=float(self.b[k]) if k < self.n - 1 else 0.0,
            h_prev=float(self.h[k]),
            a=float(self.a[k]),
            c=float(self.c[k]),
            phi=self.phi[k],
            gprod=self.gprod[k],
        )

    # q and r are carried along for the local output formulas.
    _q: np.ndarray = None
    _r: np.ndarray = None


def sweep_gamma_rho(q, r) -> tuple[np.ndarray, np.ndarray]:
    """First sweep: harmonic aggregates of the level and production weights."""
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    gamma = np.empty_like(q)
    rho = np.empty_like(r)
    gamma[0] = q[0]
    rho[0] = r[0]
    for i in range(1, len(q)):
        gamma[i] = gamma[i - 1] * q[i] / (gamma[i - 1] + q[i])
        rho[i] = rho[i - 1] * r[i] / (rho[i - 1] + r[i])
    return gamma, rho


def terminal_riccati(gamma_n: float, rho_n: float) -> float:
    """Stationary cost-to-go seed for the last node's scalar recursion."""
    return -gamma_n / 2.0 + math.sqrt(gamma_n * rho_n + gamma_n**2 / 4.0)


def _riccati_step(x: float, gamma: float, rho: float) -> float:
    return rho * (x + gamma) / (x + gamma + rho)


def sweep_X_g_b_P(spec: GraphSpec, gamma, rho, x_terminal: float):
    """Second sweep, node N down to node 1: X, g, b and P tables."""
    n = spec.n
    tau_eff = list(spec.tau) + [spec.horizon + 1]
    X: list[np.ndarray] = [None] * n
    g: list[np.ndarray] = [None] * n
    gprod: list[np.ndarray] = [None] * n
    P: list[np.ndarray] = [None] * n
    g_cross = np.zeros(max(n - 1, 0))
    b = np.zeros(max(n - 1, 0))

    for k in range(n - 1, -1, -1):
        te = tau_eff[k]
        if k == n - 1:
            xk = np.empty(te + 1)  # X_N(1..H+2)
            xk[te] = x_terminal
        else:
            xk = np.empty(te)
            xk[te - 1] = _riccati_step(X[k + 1][0], gamma[k], rho[k])
        for j in range(len(xk) - 1, 0, -1):
            xk[j - 1] = _riccati_step(xk[j], gamma[k], rho[k])
        X[k] = xk

        gk = np.full(te + 1, np.nan)
        for j in range(2, te + 1):
            gk[j] = xk[j - 1] / (xk[j - 1] + gamma[k])
        g[k] = gk
        if k < n - 1:
            g_cross[k] = X[k + 1][0] / (X[k + 1][0] + gamma[k])

        gp = np.full(te + 1, np.nan)
        gp[1] = 1.0
        for m in range(2, te + 1):
            gp[m] = gp[m - 1] * gk[m]
        gprod[k] = gp
        if k < n - 1:
            b[k] = g_cross[k] * gp[te]

        pk = np.empty((te, te))
        w = xk[0] / rho[k]
        pk[0, :] = w
        for l in range(2, te + 1):
            wl = xk[l - 1] / rho[k]
            for m in range(1, te + 1):
                if l <= m:
                    pk[l - 1, m - 1] = (1.0 - wl) * gk[l] * pk[l - 2, m - 1] + wl
                else:
                    pk[l - 1, m - 1] = (1.0 - wl) * pk[l - 2, m - 1] + wl
        P[k] = pk

    return tuple(X), tuple(g), g_cross, tuple(gprod), b, tuple(P), tuple(tau_eff)


def sweep_h_and_finalize(
    spec: GraphSpec, tau_eff, gamma, rho, X, g_cross, gprod, b, P,
    phi_variant: str = PHI_VARIANT_DEFAULT,
):
    """Third sweep and the final per-node parameters h, phi, a, c."""
    n = spec.n
    h = np.zeros(n)  # h[i] = h_i, i = 0..N-1; h_0 = 0
    for i in range(1, n):
        k = i - 1
        te = tau_eff[k]
        h[i] = (1.0 - P[k][te - 1, 0]) * b[k] * h[i - 1] + P[k][te - 1, te - 1] * g_cross[k]

    phi: list[np.ndarray] = []
    a = np.empty(n)
    c = np.empty(n)
    for k in range(n):
        te = tau_eff[k]
        h_prev = h[k]  # h_{i-1} for node i = k+1
        pk = P[k]
        phik = np.full(te + 1, np.nan)
        for dlt in range(1, te + 1):
            if phi_variant == "delta":
                lim = dlt
            elif phi_variant == "delta+1":
                lim = min(dlt + 1, te)
            else:
                raise ValueError(f"unknown phi variant {phi_variant!r}")
            phik[dlt] = 1.0 - pk[te - 1, dlt - 1] - (
                1.0 - pk[te - 1, 0]
            ) * h_prev * gprod[k][lim]
        phi.append(phik)
        x1 = X[k][0]
        a[k] = x1 / spec.r[k] + gamma[k] / spec.q[k] * (1.0 - x1 / rho[k])
        c[k] = (
            -(x1 / spec.r[k] - gamma[k] * x1 / (spec.q[k] * rho[k])) * (1.0 - h_prev)
            + gamma[k] / spec.q[k] * h_prev
        )
    return h, tuple(phi), a, c


def synthesize(spec: GraphSpec, phi_variant: str = PHI_VARIANT_DEFAULT) -> ControllerParams:
    """Run all three sweeps and finalize every controller parameter."""
    gamma, rho = sweep_gamma_rho(spec.q, spec.r)
    x_term = terminal_riccati(gamma[-1], rho[-1])
    X, g, g_cross, gprod, b, P, tau_eff = sweep_X_g_b_P(spec, gamma, rho, x_term)
    h, phi, a, c = sweep_h_and_finalize(
        spec, tau_eff, gamma, rho, X, g_cross, gprod, b, P, phi_variant
    )
    return ControllerParams(
        n=spec.n,
        horizon=spec.horizon,
        tau_eff=tau_eff,
        gamma=gamma,
        rho=rho,
        X=X,
        g=g,
        g_cross=g_cross,
        gprod=gprod,
        b=b,
        P=P,
        h=h,
        phi=phi,
        a=a,
        c=c,
        phi_variant=phi_variant,
        _q=np.asarray(spec.q, dtype=float),
        _r=np.asarray(spec.r, dtype=float),
    )


def params_to_document(params: ControllerParams) -> str:
    """Serialize the parameters to a flat structured-text document."""
    doc = {
        "n": params.n,
        "horizon": params.horizon,
        "phi_variant": params.phi_variant,
        "nodes": [],
    }
    for k in range(params.n):
        te = params.tau_eff[k]
        node = {
            "node": k + 1,
            "tau_eff": te,
            "gamma": params.gamma[k],
            "rho": params.rho[k],
            "X": {str(j): params.X[k][j - 1] for j in range(1, len(params.X[k]) + 1)},
            "g": {str(j): params.g[k][j] for j in range(2, te + 1)},
            "P": {
                f"{l},{m}": params.P[k][l - 1, m - 1]
                for l in range(1, te + 1)
                for m in range(1, te + 1)
            },
            "phi": {str(d): params.phi[k][d] for d in range(1, te + 1)},
            "a": params.a[k],
            "c": params.c[k],
            "h_prev": params.h[k],
        }
        if k < params.n - 1:
            node["g_next_1"] = params.g_cross[k]
            node["b"] = params.b[k]
        doc["nodes"].append(node)
    return json.dumps(doc, indent=2)
