"""Command-line front end.

Exit codes: 0 success (a search that finds no transition still succeeds),
2 usage or configuration error, 3 numerical failure such as an exhausted
Fock truncation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dyson import dyson_negativity, dyson_state, interfering_support, perturbative_threshold
from .explorer import (SweepSpec, exact_threshold, figure_dataset, negativity_surface,
                       output_dir, surface_to_csv)
from .fock import (ConditioningError, FieldState, FockBasis, JointState, TruncationError,
                   condition_on_qubit, field_state, load_state, parity_expectation, populations)
from .model import DEFAULT_N_MAX, ModelParams, tau_from_units
from .propagator import simulate
from .wigner import (DEFAULT_REFINE, DEFAULT_STEP, grid_to_csv, grids_to_gnuplot, negativity,
                     wigner_function)

EXIT_USAGE = 2
EXIT_NUMERIC = 3

log = logging.getLogger("dcesim")

DEFAULTS = {
    "omega": 1.0, "omega_a": 1.0, "g": 0.0, "tau": 0.0, "tau_units": "abs",
    "n_max": DEFAULT_N_MAX, "rwa": False, "switching": "step", "condition": "none",
    "initial": "g0", "step": DEFAULT_STEP, "extent": "auto", "refine": DEFAULT_REFINE,
    "epsilon": 1e-10, "order": "exact", "axis": "tau", "resolution": None,
    "scan_step": None, "support": "interfering", "jobs": 1,
    "g_range": None, "tau_range": None, "search": None,
}
MODEL_KEYS = ("omega", "omega_a", "g", "tau", "n_max", "rwa", "switching")

_PI_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


class UsageError(ValueError):
    pass


def parse_value(text) -> float:
    """Float, optionally in units of pi: '0.56pi', 'pi', '1.5*pi'."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _PI_RE.match(str(text))
    if m:
        return float(m.group(1) or 1.0) * math.pi
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"cannot parse number {text!r}") from None


def parse_range(text: str) -> np.ndarray:
    """'start:stop:step', inclusive of stop (within rounding)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be start:stop:step, got {text!r}")
    start, stop, step = (parse_value(p) for p in parts)
    if stop < start:
        raise UsageError(f"range {text!r} has stop < start")
    if step <= 0:
        raise UsageError(f"range {text!r} needs a positive step")
    n = int(math.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1)


def parse_interval(text: str) -> tuple[float, float]:
    parts = str(text).split(":")
    if len(parts) != 2:
        raise UsageError(f"interval must be lo:hi, got {text!r}")
    lo, hi = (parse_value(p) for p in parts)
    if not hi > lo:
        raise UsageError(f"interval {text!r} needs lo < hi")
    return lo, hi


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--g", help="coupling strength")
    p.add_argument("--tau", help="interaction time (accepts e.g. 0.56pi)")
    p.add_argument("--tau-units", choices=["abs", "pi-over-2g"])
    p.add_argument("--nmax", dest="n_max", type=int, help="Fock truncation (default 60)")
    p.add_argument("--omega")
    p.add_argument("--omega-a", dest="omega_a")
    p.add_argument("--rwa", action="store_const", const=True, default=None,
                   help="drop the counter-rotating terms")


def _add_wigner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step", help=f"phase-space grid step (default {DEFAULT_STEP})")
    p.add_argument("--extent", help="grid half-width or 'auto'")
    p.add_argument("--refine", type=int, help="sub-grid refinement near W < 0 (1 disables)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcesim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run one switched-coupling evolution")
    _add_model_flags(p)
    p.add_argument("--condition", choices=["none", "g", "e"])
    p.add_argument("--initial", choices=["g0", "e0"], help="initial product state")
    p.add_argument("--out", required=True)

    p = sub.add_parser("wigner", help="Wigner grid and negativity of a field state")
    _add_model_flags(p)
    _add_wigner_flags(p)
    p.add_argument("--state", help="state JSON written by 'evolve'")
    p.add_argument("--fock", type=int, help="use the Fock state |n> instead of a simulation")
    p.add_argument("--condition", choices=["none", "g", "e"])
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--gnuplot", help="gnuplot matrix output path")

    p = sub.add_parser("sweep", help="negativity over a (g, tau) grid")
    _add_model_flags(p)
    _add_wigner_flags(p)
    p.add_argument("--g-range", dest="g_range", help="start:stop:step")
    p.add_argument("--tau-range", dest="tau_range", help="start:stop:step")
    p.add_argument("--condition", choices=["none", "g", "e"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("threshold", help="locate the onset of negativity")
    _add_model_flags(p)
    p.add_argument("--step", help=f"phase-space grid step (default {DEFAULT_STEP})")
    p.add_argument("--axis", choices=["tau", "g"])
    p.add_argument("--order", choices=["exact", "2", "4"])
    p.add_argument("--search", help="lo:hi (default 0.3pi:0.8pi for tau)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--resolution")
    p.add_argument("--scan-step", dest="scan_step")
    p.add_argument("--support", choices=["interfering", "full"],
                   help="amplitudes kept in the order-4 state")
    p.add_argument("--condition", choices=["none", "g", "e"])
    p.add_argument("--out")

    p = sub.add_parser("dyson", help="perturbative state versus exact evolution")
    _add_model_flags(p)
    p.add_argument("--step", help=f"phase-space grid step (default {DEFAULT_STEP})")
    p.add_argument("--order", choices=["0", "1", "2", "3", "4"])
    p.add_argument("--support", choices=["interfering", "full"])
    p.add_argument("--out")

    p = sub.add_parser("figures", help="data files for re-plotting the figures")
    p.add_argument("--config")
    p.add_argument("--which", nargs="+", choices=["fig1", "fig2", "fig3", "fig4"],
                   default=["fig1", "fig2", "fig3", "fig4"])
    p.add_argument("--nmax", dest="n_max", type=int)
    p.add_argument("--step")
    p.add_argument("--jobs", type=int)
    p.add_argument("--outdir", default="figures")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config key(s): {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, val in vars(args).items():
        if key in DEFAULTS and val is not None:
            cfg[key] = val
    return cfg


def model_params(cfg: dict) -> ModelParams:
    try:
        g = parse_value(cfg["g"])
        tau = tau_from_units(parse_value(cfg["tau"]), cfg["tau_units"], g)
        return ModelParams(omega=parse_value(cfg["omega"]), omega_a=parse_value(cfg["omega_a"]),
                           g=g, tau=tau, basis=FockBasis(int(cfg["n_max"])),
                           rwa=bool(cfg["rwa"]), switching=cfg["switching"])
    except UsageError:
        raise
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _provenance(command: str, cfg: dict) -> dict:
    return {"command": command, "version": __version__,
            "config": {k: v for k, v in sorted(cfg.items()) if v is not None}}


def _out_path(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else output_dir() / p


def _write(path: str, text: str) -> Path:
    target = _out_path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)
    return target


def _extent(cfg) -> float | str:
    return "auto" if str(cfg["extent"]) == "auto" else parse_value(cfg["extent"])


def _initial(cfg) -> tuple[int, int]:
    return {"g0": (0, 0), "e0": (1, 0)}[cfg["initial"]]


def cmd_evolve(args, cfg) -> int:
    params = model_params(cfg)
    state = simulate(params, initial=_initial(cfg))
    doc = {"provenance": _provenance("evolve", cfg), "model": params.to_dict(),
           "state": state.to_dict(), "parity": parity_expectation(state)}
    cond = cfg["condition"]
    if cond == "none":
        field = field_state(state)
    else:
        prob, field = condition_on_qubit(state, cond)
        doc["probability"] = prob
    doc["condition"] = cond
    doc["field"] = field.to_dict()
    doc["populations"] = populations(field).tolist()
    _write(args.out, json.dumps(doc))
    return 0


def _field_for_wigner(cfg, args) -> FieldState:
    if args.state:
        doc = json.loads(Path(args.state).read_text())
        if "field" in doc and args.condition is None:
            return FieldState.from_dict(doc["field"])
        state = load_state(doc.get("state", doc))
        if isinstance(state, FieldState):
            return state
        return field_state(state, cfg["condition"])
    if args.fock is not None:
        n_max = max(int(cfg["n_max"]), args.fock + 1)
        return FieldState.fock(FockBasis(n_max), args.fock)
    state = simulate(model_params(cfg), initial=_initial(cfg))
    return field_state(state, cfg["condition"])


def cmd_wigner(args, cfg) -> int:
    field = _field_for_wigner(cfg, args)
    grid = wigner_function(field, _extent(cfg), parse_value(cfg["step"]))
    neg = negativity(grid, int(cfg["refine"]))
    prov = _provenance("wigner", cfg)
    if args.out:
        _write(args.out, grid_to_csv(grid, prov))
    if args.gnuplot:
        _write(args.gnuplot, grids_to_gnuplot([grid], prov))
    print(json.dumps(neg.to_dict()))
    return 0


def cmd_sweep(args, cfg) -> int:
    if cfg["g_range"] is None or cfg["tau_range"] is None:
        raise UsageError("sweep needs --g-range and --tau-range")
    try:
        spec = SweepSpec(tuple(parse_range(cfg["g_range"])), tuple(parse_range(cfg["tau_range"])),
                         tau_units=cfg["tau_units"], conditioning=cfg["condition"],
                         step=parse_value(cfg["step"]), extent=_extent(cfg),
                         refine=int(cfg["refine"]))
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = negativity_surface(spec, model_params(cfg), jobs=int(cfg["jobs"]))
    _write(args.out, surface_to_csv(rows, _provenance("sweep", cfg)))
    return 0


def cmd_threshold(args, cfg) -> int:
    params = model_params(cfg)
    axis = cfg["axis"]
    if cfg["search"]:
        search = parse_interval(cfg["search"])
    elif axis == "tau":
        search = (0.3 * math.pi, 0.8 * math.pi) if cfg["order"] == "exact" else (0.3 * math.pi, 0.9 * math.pi)
    else:
        search = (0.05, 2.0)
    kw = {"epsilon": float(cfg["epsilon"]), "step": parse_value(cfg["step"])}
    if cfg["resolution"] is not None:
        kw["resolution"] = parse_value(cfg["resolution"])
    if cfg["scan_step"] is not None:
        kw["scan_step"] = parse_value(cfg["scan_step"])
    if cfg["order"] == "exact":
        result = exact_threshold(params, axis, search, condition=cfg["condition"], **kw)
    else:
        if axis != "tau" or cfg["condition"] != "none":
            raise UsageError("perturbative thresholds run along tau for the unconditional state")
        result = perturbative_threshold(params, int(cfg["order"]), search,
                                        support=cfg["support"], **kw)
    doc = dict(result.to_dict(), provenance=_provenance("threshold", cfg))
    if args.out:
        _write(args.out, json.dumps(doc))
    print(result.to_json())
    return 0


def cmd_dyson(args, cfg) -> int:
    params = model_params(cfg)
    k = int(cfg["order"]) if cfg["order"] != "exact" else 2
    dstate = dyson_state(params, k)
    exact = simulate(params)
    sup = None if cfg["support"] == "full" else interfering_support(params)
    approx = dstate.normalized(sup)
    step = parse_value(cfg["step"])
    doc = {
        "provenance": _provenance("dyson", cfg),
        **dstate.report(),
        "support": cfg["support"],
        "distance_to_exact": float(np.linalg.norm(dstate.vector - exact.amplitudes)),
        "fidelity_normalized": float(abs(np.vdot(exact.amplitudes, approx.amplitudes)) ** 2),
        "delta_dyson": dyson_negativity(params, k, params.tau, cfg["support"], step=step),
        "delta_exact": negativity(wigner_function(field_state(exact), "auto", step)).delta,
        "terms": [[[float(z.real), float(z.imag)] for z in t] for t in dstate.series.terms],
    }
    if args.out:
        _write(args.out, json.dumps(doc))
    print(json.dumps({k_: v for k_, v in doc.items() if k_ not in ("terms", "provenance")}))
    return 0


def cmd_figures(args, cfg) -> int:
    params = ModelParams(basis=FockBasis(int(cfg["n_max"])))
    step = parse_value(cfg["step"])
    outdir = _out_path(args.outdir)
    for which in args.which:
        kw = {"jobs": int(cfg["jobs"]), "provenance": _provenance("figures", cfg)}
        if which != "fig3":
            kw["step"] = step
        for path in figure_dataset(which, outdir, params, **kw):
            print(path)
    return 0


COMMANDS = {"evolve": cmd_evolve, "wigner": cmd_wigner, "sweep": cmd_sweep,
            "threshold": cmd_threshold, "dyson": cmd_dyson, "figures": cmd_figures}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"dcesim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TruncationError, ConditioningError) as exc:
        print(f"dcesim {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
