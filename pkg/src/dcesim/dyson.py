"""Dyson expansion of the switched-coupling evolution from |g>|0>.

The order-j term, mapped back to the Schroedinger picture, is

    psi_j(tau) = sum over paths s_0 -> s_1 -> ... -> s_j of
                 [exp(tau B)]_{j,0},   s_0 = |g, 0>,

where B is the (j+1) x (j+1) lower-bidiagonal matrix with -i E_{s_i} on the
diagonal and -i <s_i|H_I|s_{i-1}> below it.  That matrix exponential is the
divided difference of exp(-i E tau) over the path energies, i.e. the nested
time integrals in closed form; repeated energies (the resonant case) need no
special handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.linalg import expm

from .fock import G, JointState, field_state
from .model import ModelParams, build_h0, build_interaction
from .threshold import DEFAULT_EPSILON, DEFAULT_RESOLUTION, ThresholdResult, locate_threshold
from .wigner import DEFAULT_STEP, field_negativity

MAX_ORDER = 4
# joint basis states populated up to second order: |g,0>, |e,1>, |g,2>
INTERFERING_ORDER = 2


@dataclass(frozen=True, eq=False)
class DysonOrder:
    k: int
    terms: np.ndarray  # terms[j] = order-j contribution, j = 0..k

    def __post_init__(self):
        if self.terms.shape[0] != self.k + 1:
            raise ValueError("need one term per order 0..k")


@dataclass(frozen=True, eq=False)
class DysonState:
    params: ModelParams
    tau: float
    series: DysonOrder

    @property
    def k(self) -> int:
        return self.series.k

    @property
    def vector(self) -> np.ndarray:
        return self.series.terms.sum(axis=0)

    @property
    def norm(self) -> float:
        """Norm of the truncated (unnormalized) series."""
        return float(np.linalg.norm(self.vector))

    def restricted(self, support: np.ndarray) -> np.ndarray:
        v = np.zeros_like(self.vector)
        v[support] = self.vector[support]
        return v

    def normalized(self, support: np.ndarray | None = None) -> JointState:
        v = self.vector if support is None else self.restricted(support)
        return JointState.from_vector(self.params.basis, v, self.tau)

    def report(self) -> dict:
        return {"order": self.k, "tau": self.tau, "norm": self.norm,
                "order_norms": [float(np.linalg.norm(t)) for t in self.series.terms]}


def _check(params: ModelParams, k: int) -> None:
    if not 0 <= k <= MAX_ORDER:
        raise ValueError(f"Dyson order {k} unsupported (0..{MAX_ORDER})")
    if params.rwa:
        raise ValueError("the Dyson expansion is defined for the full (non-RWA) coupling")
    if params.n_max < k:
        raise ValueError(f"n_max={params.n_max} cannot hold order-{k} terms")


def dyson_terms(params: ModelParams, k: int, tau: float) -> np.ndarray:
    """Order-by-order contributions, shape (k + 1, joint_dim), from |g, 0>."""
    _check(params, k)
    energies = np.real(np.diag(build_h0(params)))
    coupling = build_interaction(params)
    start = params.basis.index(G, 0)
    terms = np.zeros((k + 1, params.basis.joint_dim), dtype=complex)
    terms[0, start] = np.exp(-1j * energies[start] * tau)

    def walk(path: list[int], couplings: list[complex]) -> None:
        j = len(path)
        if j > k:
            return
        src = path[-1]
        for dst in np.nonzero(coupling[:, src])[0]:
            p = path + [int(dst)]
            c = couplings + [coupling[dst, src]]
            b = np.diag(-1j * energies[p]) + np.diag(-1j * np.asarray(c), -1)
            terms[j, dst] += expm(tau * b)[j, 0]
            walk(p, c)

    walk([start], [])
    return terms


def dyson_state(params: ModelParams, k: int, tau: float | None = None) -> DysonState:
    tau = params.tau if tau is None else float(tau)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return DysonState(params, tau, DysonOrder(k, dyson_terms(params, k, tau)))


def interfering_support(params: ModelParams) -> np.ndarray:
    """Joint-basis indices reached from |g,0> within second order."""
    reach = {params.basis.index(G, 0)}
    coupling = build_interaction(params.with_(rwa=False, g=1.0))
    frontier = set(reach)
    for _ in range(INTERFERING_ORDER):
        frontier = {int(i) for s in frontier for i in np.nonzero(coupling[:, s])[0]}
        reach |= frontier
    return np.array(sorted(reach))


def dyson_negativity(params: ModelParams, k: int, tau: float, support: str = "interfering",
                     condition: str | None = None, step: float = DEFAULT_STEP,
                     extent="auto") -> float:
    """Negativity of the normalized order-k state.

    ``support="full"`` keeps every amplitude of the truncated series;
    ``support="interfering"`` keeps only |g,0>, |e,1>, |g,2> (each carried to
    order k), the components whose interference produces the first negative
    region.  The two coincide for k <= 2.
    """
    if support not in ("full", "interfering"):
        raise ValueError(f"unknown support {support!r}")
    state = dyson_state(params, k, tau)
    sup = None if support == "full" else interfering_support(params)
    field = field_state(state.normalized(sup), condition)
    return field_negativity(field, extent, step).delta


def perturbative_threshold(params: ModelParams, k: int, tau_search=(0.3 * math.pi, 0.9 * math.pi),
                           epsilon: float = DEFAULT_EPSILON,
                           resolution: float = DEFAULT_RESOLUTION, support: str = "interfering",
                           scan_step: float | None = None, step: float = DEFAULT_STEP,
                           ) -> ThresholdResult:
    """First tau in ``tau_search`` where the order-k state turns non-classical."""
    if k not in (2, 4):
        raise ValueError("perturbative thresholds are defined for k in (2, 4)")
    _check(params, k)
    lo, hi = tau_search
    fn = partial(_delta_at, params, k, support, step)
    return locate_threshold(fn, lo, hi, epsilon=epsilon, resolution=resolution,
                            scan_step=scan_step, parameter="tau", order=str(k))


def _delta_at(params, k, support, step, tau):
    return dyson_negativity(params, k, tau, support=support, step=step)
