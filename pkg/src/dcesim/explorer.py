"""Parameter sweeps over (g, tau), exact transition points and figure datasets."""

from __future__ import annotations

import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fock import ConditioningError, JointState, TruncationError, field_state, populations
from .model import ModelParams, tau_from_units
from .propagator import evolve_series, simulate, spectral_cache
from .threshold import (DEFAULT_EPSILON, DEFAULT_RESOLUTION, ThresholdResult,
                        locate_threshold)
from .wigner import (DEFAULT_REFINE, DEFAULT_STEP, field_negativity, grid_to_csv,
                     negativity, wigner_function)

log = logging.getLogger(__name__)

__all__ = ["SweepSpec", "ThresholdResult", "negativity_surface", "exact_threshold",
           "figure_dataset", "surface_to_csv", "point_negativity"]

CONDITIONS = ("none", "g", "e")

# (g, tau in units of pi/2g) for the four rows of the Wigner-function figure
FIG1_ROWS = ((0.5, 1.0), (1.5, 1.0), (1.0, 0.75), (1.0, 1.5))
FIG2_COUPLINGS = (0.5, 1.5)


@dataclass(frozen=True)
class SweepSpec:
    g_values: tuple
    tau_values: tuple
    tau_units: str = "abs"
    conditioning: str = "none"
    step: float = DEFAULT_STEP
    extent: float | str = "auto"
    refine: int = DEFAULT_REFINE

    def __post_init__(self):
        for name in ("g_values", "tau_values"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.ndim != 1 or vals.size == 0:
                raise ValueError(f"{name} must be a non-empty 1-d sequence")
            if np.any(np.diff(vals) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, tuple(float(v) for v in vals))
        if self.tau_units not in ("abs", "pi-over-2g"):
            raise ValueError(f"unknown tau units {self.tau_units!r}")
        if self.conditioning not in CONDITIONS:
            raise ValueError(f"conditioning must be one of {CONDITIONS}")

    def taus_for(self, g: float) -> np.ndarray:
        return np.array([tau_from_units(t, self.tau_units, g) for t in self.tau_values])


def point_negativity(params: ModelParams, condition: str = "none", step: float = DEFAULT_STEP,
                     extent="auto", refine: int = DEFAULT_REFINE) -> float:
    """Negativity of the field after one switched-coupling run from |g>|0>."""
    state = simulate(params)
    return field_negativity(field_state(state, condition), extent, step, refine).delta


def _state_negativity(state: JointState, spec: SweepSpec) -> tuple[float, str]:
    try:
        state.check_truncation()
        f = field_state(state, spec.conditioning)
    except TruncationError as exc:
        return math.nan, f"truncation: tail mass {exc.tail_mass:.3e}"
    except ConditioningError:
        return math.nan, "undefined"
    return field_negativity(f, spec.extent, spec.step, spec.refine).delta, "ok"


def _sweep_one_g(params: ModelParams, spec: SweepSpec, g: float) -> list[dict]:
    p = params.with_(g=g)
    try:
        taus = spec.taus_for(g)
    except ValueError as exc:
        return [{"g": g, "tau": math.nan, "delta": math.nan, "status": str(exc)}
                for _ in spec.tau_values]
    order = np.argsort(taus, kind="stable")
    psi0 = JointState.product(p.basis)
    states = evolve_series(psi0, spectral_cache(p), taus[order], tail_tol=None)
    rows = []
    for tau, state in zip(taus[order], states):
        delta, status = _state_negativity(state, spec)
        rows.append({"g": g, "tau": float(tau), "delta": delta, "status": status})
    return rows


def negativity_surface(spec: SweepSpec, params: ModelParams | None = None,
                       jobs: int = 1) -> list[dict]:
    """One negativity value per (g, tau) node; rows sorted by (g, tau).

    Each g gets one diagonalization shared by all its tau values.  Failing
    points carry a status string instead of aborting the sweep.
    """
    params = params or ModelParams()
    if jobs > 1 and len(spec.g_values) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_one_g, [params] * len(spec.g_values),
                                   [spec] * len(spec.g_values), spec.g_values))
    else:
        chunks = [_sweep_one_g(params, spec, g) for g in spec.g_values]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["g"], r["tau"]))
    return rows


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _provenance_line(provenance: dict | None) -> str:
    if not provenance:
        return ""
    return "# provenance: " + json.dumps(provenance, sort_keys=True) + "\n"


def surface_to_csv(rows: list[dict], provenance: dict | None = None) -> str:
    """Header 'g,tau,delta'; rows whose evaluation failed are written as comments."""
    buf = io.StringIO()
    buf.write(_provenance_line(provenance))
    buf.write("g,tau,delta\n")
    for r in rows:
        line = ",".join(_fmt(float(r[c])) for c in ("g", "tau", "delta"))
        if r.get("status", "ok") != "ok":
            buf.write(f"# {line} status={r['status']}\n")
        else:
            buf.write(line + "\n")
    return buf.getvalue()


def exact_threshold(params: ModelParams, axis: str = "tau", search=(0.3 * math.pi, 0.8 * math.pi),
                    epsilon: float = DEFAULT_EPSILON, resolution: float | None = None,
                    condition: str = "none", scan_step: float | None = None,
                    step: float = DEFAULT_STEP) -> ThresholdResult:
    """Onset of negativity of the exact evolved field along ``axis`` ('tau' or 'g').

    The search bracket must straddle the crossing: if the lower end is
    already above epsilon, or nothing in the interval is, the result carries
    an explicit status instead of a critical value.
    """
    if axis not in ("tau", "g"):
        raise ValueError("axis must be 'tau' or 'g'")
    resolution = resolution or (DEFAULT_RESOLUTION if axis == "tau" else 1e-3)
    lo, hi = search

    def delta(v: float) -> float:
        p = params.with_(**{axis: float(v)})
        return point_negativity(p, condition, step=step)

    return locate_threshold(delta, lo, hi, epsilon=epsilon, resolution=resolution,
                            scan_step=scan_step, parameter=axis, order="exact")


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _conditioned_fields(state: JointState) -> dict:
    out = {"rho": field_state(state, "none")}
    for q in ("g", "e"):
        try:
            out[f"rho_{q}"] = field_state(state, q)
        except ConditioningError:
            log.warning("P(%s) ~ 0 at tau=%g, skipping conditional state", q, state.time)
    return out


def _fig1(outdir: Path, params: ModelParams, step: float, provenance) -> list[Path]:
    written, summary = [], []
    for row, (g, units) in enumerate(FIG1_ROWS, start=1):
        tau = tau_from_units(units, "pi-over-2g", g)
        state = simulate(params.with_(g=g, tau=tau))
        for name, f in _conditioned_fields(state).items():
            grid = wigner_function(f, "auto", step)
            neg = negativity(grid)
            prov = dict(provenance or {}, g=g, tau=tau, state=name)
            written.append(_write(outdir / f"fig1_row{row}_{name}.csv", grid_to_csv(grid, prov)))
            summary.append({"row": row, "g": g, "tau": tau, "tau_over_pi_over_2g": units,
                            "state": name, **neg.to_dict()})
    written.append(_write(outdir / "fig1_summary.json",
                          json.dumps({"provenance": provenance, "panels": summary}, indent=1)))
    return written


def _fig2(outdir: Path, params: ModelParams, provenance) -> list[Path]:
    written, summary = [], []
    for g in FIG2_COUPLINGS:
        tau = math.pi / (2 * g)
        state = simulate(params.with_(g=g, tau=tau))
        for name, f in _conditioned_fields(state).items():
            pops = populations(f)
            buf = io.StringIO()
            buf.write(_provenance_line(dict(provenance or {}, g=g, tau=tau, state=name)))
            buf.write("n,population\n")
            for n, p in enumerate(pops):
                buf.write(f"{n},{p:.17g}\n")
            written.append(_write(outdir / f"fig2_g{g:g}_{name}.csv", buf.getvalue()))
            summary.append({"g": g, "tau": tau, "state": name, "populations": pops.tolist()})
    written.append(_write(outdir / "fig2_summary.json",
                          json.dumps({"provenance": provenance, "states": summary}, indent=1)))
    return written


def default_fig3_spec(step: float = 0.1) -> SweepSpec:
    return SweepSpec(tuple(np.round(np.arange(0.1, 1.51, 0.1), 10)),
                     tuple(np.round(np.arange(0.05, 1.501, 0.05), 10) * math.pi),
                     step=step)


def default_fig4_taus() -> np.ndarray:
    return np.round(np.arange(0.0, 1.2 + 1e-9, 0.005), 10) * math.pi


def _fig4(outdir: Path, params: ModelParams, step: float, taus, provenance) -> list[Path]:
    spec = SweepSpec((0.4,), tuple(taus), step=step)
    rows = negativity_surface(spec, params)
    buf = io.StringIO()
    buf.write(_provenance_line(provenance))
    buf.write("tau,tau_over_pi,delta,log10_delta\n")
    for r in rows:
        d = r["delta"]
        log_d = math.log10(d) if d > 0 else -math.inf
        buf.write(f"{r['tau']:.17g},{r['tau'] / math.pi:.17g},{d:.17g},{log_d:.17g}\n")
    return [_write(outdir / "fig4_delta_vs_tau_g0.4.csv", buf.getvalue())]


def figure_dataset(which: str, outdir, params: ModelParams | None = None, *,
                   spec: SweepSpec | None = None, step: float = DEFAULT_STEP,
                   taus=None, jobs: int = 1, provenance: dict | None = None) -> list[Path]:
    """Write the data files needed to re-plot one figure; returns the paths written."""
    outdir = Path(outdir)
    params = params or ModelParams()
    provenance = dict(provenance or {}, figure=which, model=params.to_dict())
    if which == "fig1":
        return _fig1(outdir, params, step, provenance)
    if which == "fig2":
        return _fig2(outdir, params, provenance)
    if which == "fig3":
        spec = spec or default_fig3_spec()
        provenance["sweep"] = asdict(spec)
        rows = negativity_surface(spec, params, jobs)
        return [_write(outdir / "fig3_surface.csv", surface_to_csv(rows, provenance))]
    if which == "fig4":
        return _fig4(outdir, params, step, default_fig4_taus() if taus is None else taus,
                     provenance)
    raise ValueError(f"unknown figure {which!r}")


def output_dir(default: str | os.PathLike = ".") -> Path:
    """Output directory, overridable through DCESIM_OUTPUT_DIR."""
    return Path(os.environ.get("DCESIM_OUTPUT_DIR", default))
