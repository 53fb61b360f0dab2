"""Locating the onset of Wigner negativity along one parameter axis."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

DEFAULT_EPSILON = 1e-10
DEFAULT_RESOLUTION = 1e-3 * math.pi

FOUND = "found"
NO_TRANSITION = "no_transition"  # indicator never exceeds epsilon in the interval
ABOVE_AT_START = "above_at_start"  # already non-classical at the lower end


@dataclass
class ThresholdResult:
    parameter: str
    critical_value: float | None
    bracket: list
    epsilon: float
    delta_below: float | None
    delta_above: float | None
    order: str
    status: str = FOUND
    evaluations: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.status == FOUND

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def locate_threshold(delta: Callable[[float], float], lo: float, hi: float, *,
                     epsilon: float = DEFAULT_EPSILON, resolution: float = DEFAULT_RESOLUTION,
                     scan_step: float | None = None, parameter: str = "tau",
                     order: str = "exact") -> ThresholdResult:
    """Smallest value in [lo, hi] where ``delta(value) > epsilon``.

    A uniform scan with spacing ``scan_step`` (default 10 x resolution) finds
    the first sample above epsilon; bisection then shrinks the bracket below
    ``resolution``.  A crossing narrower than the scan spacing can be missed.
    """
    if not hi > lo:
        raise ValueError("search interval must satisfy lo < hi")
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    evals: list[tuple[float, float]] = []

    def f(v: float) -> float:
        d = float(delta(v))
        evals.append((float(v), d))
        return d

    def result(status, value, bracket, below, above):
        return ThresholdResult(parameter, value, bracket, epsilon, below, above, order,
                               status, sorted(evals))

    d_lo = f(lo)
    if d_lo > epsilon:
        return result(ABOVE_AT_START, None, [lo, lo], None, d_lo)

    scan_step = scan_step or 10 * resolution
    n = max(1, int(math.ceil((hi - lo) / scan_step - 1e-9)))
    points = np.linspace(lo, hi, n + 1)
    a, d_a = lo, d_lo
    b = d_b = None
    for v in points[1:]:
        d = f(v)
        if d > epsilon:
            b, d_b = float(v), d
            break
        a, d_a = float(v), d
    if b is None:
        return result(NO_TRANSITION, None, [lo, hi], d_a, None)

    while b - a > resolution:
        mid = 0.5 * (a + b)
        d = f(mid)
        if d > epsilon:
            b, d_b = mid, d
        else:
            a, d_a = mid, d
    return result(FOUND, 0.5 * (a + b), [a, b], d_a, d_b)
