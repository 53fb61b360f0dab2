"""Wigner function of a field density matrix and its negative volume.

Convention: hbar = 1, x = (a + a^dagger)/sqrt(2), p = (a - a^dagger)/(i sqrt(2)).
The vacuum is W = exp(-(x^2 + p^2))/pi, so W(0, 0) = 1/pi for |0><0| and
pi W(0, 0) equals the photon-number parity in general.

For m = n + k >= n the Wigner function of the operator |m><n| is

    (-1)^n / pi * sqrt(n!/m!) * (sqrt(2) (x - i p))^k * exp(-r^2) * L_n^k(2 r^2)

with r^2 = x^2 + p^2.  The Laguerre factor is generated by an upward
recurrence already scaled by sqrt(n!/(n+k)!), so no factorial is formed.
"""

from __future__ import annotations

import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import RectBivariateSpline
from scipy.ndimage import binary_dilation
from scipy.special import gammaln

from .fock import FieldState

log = logging.getLogger(__name__)

CONVENTION = "hbar=1; x=(a+a^dagger)/sqrt(2); p=(a-a^dagger)/(i sqrt(2))"
DEFAULT_STEP = 0.05
DEFAULT_REFINE = 16
BOUNDARY_TOL = 1e-8
CUMULATIVE_TOL = 1e-8
# populations below this are dropped before summing kernels; |rho_mn| <= sqrt(p_m p_n)
TRIM_POPULATION = 1e-32
MAX_EXTENSIONS = 6
# round-off level negatives in the tails do not trigger refinement
NEGATIVE_FLOOR = 1e-15
EDGE_REFINE = 8
LINE_TOL = 1e-10


class BoundaryWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class WignerGrid:
    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray  # values[i, j] = W(xs[i], ps[j])
    step: float
    convention: str = CONVENTION
    meta: dict = field(default_factory=dict)

    @property
    def x_min(self) -> float:
        return float(self.xs[0])

    @property
    def x_max(self) -> float:
        return float(self.xs[-1])

    @property
    def p_min(self) -> float:
        return float(self.ps[0])

    @property
    def p_max(self) -> float:
        return float(self.ps[-1])

    @property
    def extent(self) -> float:
        return max(abs(self.x_min), self.x_max, abs(self.p_min), self.p_max)

    def integrate(self, f: np.ndarray | None = None) -> float:
        """Composite Simpson integral of ``f`` (default W) over the grid."""
        f = self.values if f is None else f
        return float(simpson(simpson(f, x=self.ps, axis=1), x=self.xs))

    def norm(self) -> float:
        return self.integrate()

    def boundary_max(self) -> float:
        w = self.values
        return float(max(np.abs(w[0]).max(), np.abs(w[-1]).max(),
                         np.abs(w[:, 0]).max(), np.abs(w[:, -1]).max()))

    def at_origin(self) -> float:
        i = int(np.argmin(np.abs(self.xs)))
        j = int(np.argmin(np.abs(self.ps)))
        return float(self.values[i, j])


@dataclass(frozen=True)
class NegativityResult:
    delta: float
    negative_mass: float
    extent: float
    step: float
    norm: float

    def to_dict(self) -> dict:
        return {"delta": self.delta, "negative_mass": self.negative_mass,
                "extent": self.extent, "step": self.step, "norm": self.norm}


def auto_extent(field: FieldState) -> float:
    """Half-width of a square grid that holds the state's phase-space support."""
    pops = np.real(np.diag(field.matrix))
    cum = np.cumsum(pops) / pops.sum()
    n_eff = int(np.argmax(cum >= 1.0 - CUMULATIVE_TOL))
    return math.sqrt(2 * n_eff + 1) + 3.0


def _trimmed(rho: np.ndarray) -> np.ndarray:
    pops = np.real(np.diag(rho))
    keep = np.nonzero(pops > TRIM_POPULATION)[0]
    top = int(keep[-1]) + 1 if keep.size else 1
    return rho[:top, :top]


def wigner_values(rho: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """W at the points (x, p) (broadcast arrays) for a Hermitian density matrix ``rho``."""
    rho = _trimmed(np.asarray(rho, dtype=complex))
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    r2 = x * x + p * p
    u = 2.0 * r2
    theta = np.arctan2(p, x)
    with np.errstate(divide="ignore"):
        log_r = 0.5 * np.log(2.0 * r2)  # log |sqrt(2)(x - ip)|
    d = rho.shape[0]
    signs = (-1.0) ** np.arange(d)
    total = np.zeros_like(r2)
    for k in range(d):
        coeffs = signs[: d - k] * np.diagonal(rho, offset=-k)  # rho[n + k, n]
        if not np.any(coeffs):
            continue
        l_prev = np.zeros_like(u)
        l_cur = np.ones_like(u)
        acc = coeffs[0] * l_cur
        for n in range(d - k - 1):
            l_next = ((2 * n + 1 + k - u) * l_cur - math.sqrt(n * (n + k)) * l_prev) \
                / math.sqrt((n + 1) * (n + 1 + k))
            l_prev, l_cur = l_cur, l_next
            acc = acc + coeffs[n + 1] * l_cur
        if k == 0:
            total += np.real(acc) * np.exp(-r2)
        else:
            with np.errstate(invalid="ignore", under="ignore"):
                pref = np.exp(-r2 + k * log_r - 0.5 * gammaln(k + 1))
            pref = np.where(r2 > 0, pref, 0.0)
            total += 2.0 * np.real(acc * pref * np.exp(-1j * k * theta))
    return total / math.pi


def _axis(extent: float, step: float) -> np.ndarray:
    half = int(math.ceil(extent / step - 1e-9))
    return step * np.arange(-half, half + 1)  # 2*half + 1 points, odd by construction


def wigner_function(field: FieldState, extent: float | str = "auto",
                    step: float = DEFAULT_STEP) -> WignerGrid:
    """Sample W on the square grid [-L, L]^2 with spacing ``step``.

    With ``extent="auto"`` the half-width starts at :func:`auto_extent` and
    grows by one unit until |W| on the boundary is below 1e-8.  A fixed
    extent that clips the state only triggers a :class:`BoundaryWarning`.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    auto = extent == "auto"
    size = auto_extent(field) if auto else float(extent)
    if not size > 0:
        raise ValueError("extent must be > 0")
    for attempt in range(MAX_EXTENSIONS + 1):
        xs = _axis(size, step)
        X, P = np.meshgrid(xs, xs, indexing="ij")
        grid = WignerGrid(xs, xs.copy(), wigner_values(field.matrix, X, P), float(step),
                          meta={"kind": field.kind.value})
        edge = grid.boundary_max()
        if edge <= BOUNDARY_TOL:
            return grid
        if not auto or attempt == MAX_EXTENSIONS:
            warnings.warn(f"|W| = {edge:.2e} on the grid boundary (extent {size:g})",
                          BoundaryWarning, stacklevel=2)
            return grid
        log.debug("extending Wigner grid from %g (boundary |W| = %.2e)", size, edge)
        size += 1.0
    return grid


def _simpson_weights(m: int) -> np.ndarray:
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _cell_positive_parts(f: np.ndarray) -> np.ndarray:
    """Integral of max(c, 0) over each unit cell of a sampled line, c the local cubic.

    ``f`` has shape (..., k + 3): k cells plus one extra node on each side.
    The cubic through four neighbouring nodes is integrated exactly on its
    positive part, with the root of a sign-changing cell found by Newton.
    """
    f0, f1, f2, f3 = f[..., :-3], f[..., 1:-2], f[..., 2:-1], f[..., 3:]
    a0 = f1
    a1 = -f0 / 3 - f1 / 2 + f2 - f3 / 6
    a2 = f0 / 2 - f1 + f2 / 2
    a3 = (f3 - f0) / 6 + (f1 - f2) / 2

    def prim(s):
        return s * (a0 + s * (a1 / 2 + s * (a2 / 3 + s * a3 / 4)))

    full = prim(1.0)
    out = np.where((f1 > 0) & (f2 > 0), full, 0.0)
    cross = (f1 > 0) != (f2 > 0)
    if np.any(cross):
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(cross, f1 / (f1 - f2), 0.5)
            for _ in range(4):
                val = a0 + s * (a1 + s * (a2 + s * a3))
                der = a1 + s * (2 * a2 + s * 3 * a3)
                s = np.clip(s - np.where(der != 0, val / der, 0.0), 0.0, 1.0)
        part = np.where(f1 > 0, prim(s), full - prim(s))
        out = np.where(cross, part, out)
    return out


def _refinement_correction(grid: WignerGrid, refine: int) -> float:
    """Change in the Simpson value of |W| - W when panels near W < 0 are re-integrated finer.

    The integrand has a kink on the nodal line, which limits plain Simpson to
    O(h^2) there, and unlike the plane-wide integral of W its O(h^4) interior
    error does not cancel.  Panels of 3x3 nodes touching the negative region
    are resampled at step h / refine from a quintic spline of W (W is
    analytic, so the spline is accurate to O(h^6)).  Each sub-grid line is
    integrated cell by cell with local cubics cut at the nodal line, and the
    lines are combined with Simpson.
    """
    w = grid.values
    nx, np_ = w.shape
    if nx < 7 or np_ < 7 or nx % 2 == 0 or np_ % 2 == 0:
        return 0.0
    blocks = np.lib.stride_tricks.sliding_window_view(w, (3, 3))[::2, ::2]
    # the nodal line can clip a panel corner without changing sign at its nodes
    touched = binary_dilation(blocks.min(axis=(2, 3)) < -NEGATIVE_FLOOR, structure=np.ones((3, 3), bool))
    pi_, pj = np.nonzero(touched)
    if pi_.size == 0:
        return 0.0
    h = grid.step
    coarse_w = np.outer(_simpson_weights(3), _simpson_weights(3)) * h * h
    sel = blocks[pi_, pj]
    coarse = np.sum((np.abs(sel) - sel) * coarse_w, axis=(1, 2))
    m = 2 * refine + 1
    spline = RectBivariateSpline(grid.xs, grid.ps, w, kx=5, ky=5, s=0)
    # runs of vertically adjacent panels within one column
    starts = np.flatnonzero(np.r_[True, (np.diff(pi_) != 0) | (np.diff(pj) != 1)])
    runs = list(zip(starts, np.r_[starts[1:], pi_.size]))
    x0, p0 = grid.xs[2 * pi_], grid.ps[2 * pj]
    lines, crossings = _panel_lines(spline, x0, p0, runs, h, m, m)
    # Summed over a run the line integrals are smooth except where the nodal
    # line is tangent to the lines or crosses itself: there they pick up
    # (x - x0)^(3/2) or x log x terms and Simpson across lines needs a finer
    # spacing.  Such runs are caught by a change in the number of nodal
    # crossings or by disagreement with Simpson on every other line.
    hl = 2 * h / (m - 1)
    fine = 2.0 * hl * (lines @ _simpson_weights(m))
    half = (2.0 * 2 * hl * (lines[:, ::2] @ _simpson_weights(refine + 1))
            if refine % 2 == 0 else fine)
    suspect = []
    for lo, hi in runs:
        changes = np.any(np.diff(crossings[lo:hi].sum(axis=0)) != 0)
        if changes or abs(np.sum(fine[lo:hi] - half[lo:hi])) > LINE_TOL:
            suspect.append((lo, hi))
    if suspect:
        mx = EDGE_REFINE * (m - 1) + 1
        sub, _ = _panel_lines(spline, x0, p0, suspect, h, m, mx)
        for lo, hi in suspect:
            fine[lo:hi] = 2.0 * (2 * h / (mx - 1)) * (sub[lo:hi] @ _simpson_weights(mx))
    return float(np.sum(fine - coarse))


def _panel_lines(spline, x0, p0, runs, h, m, m_lines):
    """Integrals of max(-W, 0) along ``m_lines`` lines of constant x per panel.

    Panel k spans [x0[k], x0[k] + 2h] x [p0[k], p0[k] + 2h] and is sampled at
    p-step 2h / (m - 1); each line is integrated with local cubics cut at the
    nodal line.  Only panels inside ``runs`` (slices of vertically adjacent
    panels) are filled.  Also returns the number of sign changes per line.
    """
    hc = 2 * h / (m - 1)
    lines = np.zeros((x0.size, m_lines))
    crossings = np.zeros((x0.size, m_lines), dtype=int)
    loffs = np.linspace(0.0, 2 * h, m_lines)
    window = np.arange(m + 2)
    for lo, hi in runs:
        n = hi - lo
        ps = p0[lo] + hc * np.arange(-1, n * (m - 1) + 2)
        neg = -spline(x0[lo] + loffs, ps)
        neg = neg[:, (m - 1) * np.arange(n)[:, None] + window].transpose(1, 0, 2)
        inside = neg[..., 1:-1] > 0
        crossings[lo:hi] = np.count_nonzero(inside[..., 1:] != inside[..., :-1], axis=2)
        lines[lo:hi] = _cell_positive_parts(neg).sum(axis=2) * hc
    return lines, crossings


def negativity(grid: WignerGrid, refine: int = DEFAULT_REFINE) -> NegativityResult:
    """Integral of |W| - W over the grid, i.e. twice the negative volume.

    Composite Simpson on the uniform grid; with ``refine > 1`` the panels
    around the negative region are integrated on a ``refine``-times finer
    sub-grid (see :func:`_refinement_correction`).
    """
    w = grid.values
    delta = grid.integrate(np.abs(w) - w)
    if refine > 1:
        delta += _refinement_correction(grid, refine)
    delta = max(delta, 0.0)
    return NegativityResult(delta=delta, negative_mass=0.5 * delta,
                            extent=grid.extent, step=grid.step, norm=grid.norm())


def field_negativity(field: FieldState, extent: float | str = "auto",
                     step: float = DEFAULT_STEP, refine: int = DEFAULT_REFINE) -> NegativityResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        return negativity(wigner_function(field, extent, step), refine)


def _header(provenance: dict | None) -> str:
    if not provenance:
        return ""
    return "# provenance: " + json.dumps(provenance, sort_keys=True) + "\n"


def grid_to_csv(grid: WignerGrid, provenance: dict | None = None) -> str:
    """CSV text: optional '# provenance' line, header 'x,p,w', rows x-major then p."""
    buf = io.StringIO()
    buf.write(_header(provenance))
    buf.write("x,p,w\n")
    X, P = np.meshgrid(grid.xs, grid.ps, indexing="ij")
    np.savetxt(buf, np.column_stack([X.ravel(), P.ravel(), grid.values.ravel()]),
               fmt="%.17g", delimiter=",")
    return buf.getvalue()


def grid_from_csv(text: str) -> WignerGrid:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if lines[0].strip() != "x,p,w":
        raise ValueError("missing 'x,p,w' header")
    rows = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    xs = np.unique(rows[:, 0])
    ps = np.unique(rows[:, 1])
    values = rows[:, 2].reshape(xs.size, ps.size)
    step = float(xs[1] - xs[0]) if xs.size > 1 else 0.0
    return WignerGrid(xs, ps, values, step)


def grids_to_gnuplot(grids, provenance: dict | None = None) -> str:
    """Gnuplot ``matrix`` text: one line per x holding W over p; grids separated by two blank lines."""
    buf = io.StringIO()
    buf.write(_header(provenance))
    for i, grid in enumerate(grids):
        if i:
            buf.write("\n\n")
        buf.write(f"# x in [{grid.x_min:.17g}, {grid.x_max:.17g}], "
                  f"p in [{grid.p_min:.17g}, {grid.p_max:.17g}], step {grid.step:.17g}\n")
        np.savetxt(buf, grid.values, fmt="%.17g", delimiter=" ")
    return buf.getvalue()
