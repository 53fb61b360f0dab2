import json
import math

import numpy as np
import pytest

from dcesim.explorer import (SweepSpec, exact_threshold, figure_dataset, negativity_surface,
                             output_dir, point_negativity, surface_to_csv)
from dcesim.fock import FockBasis
from dcesim.model import ModelParams
from dcesim.threshold import ABOVE_AT_START, NO_TRANSITION, locate_threshold

PI = math.pi


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec((), (1.0,))
    with pytest.raises(ValueError):
        SweepSpec((0.1, 0.1), (1.0,))
    with pytest.raises(ValueError):
        SweepSpec((0.1,), (2.0, 1.0))
    with pytest.raises(ValueError):
        SweepSpec((0.1,), (1.0,), tau_units="fortnights")
    with pytest.raises(ValueError):
        SweepSpec((0.1,), (1.0,), conditioning="x")
    spec = SweepSpec((0.5,), (1.0, 2.0), tau_units="pi-over-2g")
    np.testing.assert_allclose(spec.taus_for(0.5), [PI, 2 * PI])


def test_zero_coupling_column_is_classical():
    spec = SweepSpec((0.0,), tuple(np.linspace(0.1, 3.0, 6)), step=0.1)
    rows = negativity_surface(spec)
    assert all(r["status"] == "ok" and r["delta"] == 0.0 for r in rows)


def test_onset_along_tau():
    p = ModelParams(g=0.4)
    assert point_negativity(p.with_(tau=0.5 * PI)) < 1e-10
    assert point_negativity(p.with_(tau=0.6 * PI)) > 0


def test_sweep_matches_single_shot_and_is_deterministic():
    spec = SweepSpec((0.4, 1.0), (0.3 * PI, 0.6 * PI, 1.1 * PI), step=0.1)
    rows = negativity_surface(spec)
    assert [(r["g"], r["tau"]) for r in rows] == sorted((r["g"], r["tau"]) for r in rows)
    for r in rows:
        single = point_negativity(ModelParams(g=r["g"], tau=r["tau"]), step=0.1)
        assert abs(single - r["delta"]) < 1e-12
    again = negativity_surface(spec)
    assert surface_to_csv(rows) == surface_to_csv(again)
    parallel = negativity_surface(spec, jobs=2)
    assert surface_to_csv(parallel) == surface_to_csv(rows)


def test_failures_are_reported_per_point():
    spec = SweepSpec((0.5, 1.5), (0.5 * PI, 1.2 * PI), step=0.2)
    rows = negativity_surface(spec, ModelParams(basis=FockBasis(12)))
    statuses = {(r["g"], round(r["tau"] / PI, 3)): r["status"] for r in rows}
    assert statuses[(1.5, 1.2)].startswith("truncation")
    assert statuses[(0.5, 0.5)] == "ok"
    text = surface_to_csv(rows)
    assert "status=truncation" in text
    assert sum(1 for ln in text.splitlines() if not ln.startswith("#")) == 1 + sum(
        r["status"] == "ok" for r in rows)


def test_conditioned_sweep_reports_undefined():
    # P(e) = 0 exactly at tau = 0
    rows = negativity_surface(SweepSpec((0.4,), (0.0, 0.5), conditioning="e", step=0.2))
    assert rows[0]["status"] == "undefined" and math.isnan(rows[0]["delta"])
    assert rows[1]["status"] == "ok"


def test_locate_threshold_on_step_function():
    res = locate_threshold(lambda v: 0.0 if v < 0.4321 else 1.0, 0.0, 1.0, resolution=1e-4)
    assert res.found
    lo, hi = res.bracket
    assert hi - lo <= 1e-4 and lo < 0.4321 <= hi
    assert res.delta_below <= res.epsilon < res.delta_above
    assert locate_threshold(lambda v: 0.0, 0, 1).status == NO_TRANSITION
    assert locate_threshold(lambda v: 1.0, 0, 1).status == ABOVE_AT_START
    with pytest.raises(ValueError):
        locate_threshold(lambda v: 0.0, 1, 0)
    json.loads(res.to_json())


def test_exact_threshold_postconditions():
    res = exact_threshold(ModelParams(g=0.4), search=(0.45 * PI, 0.65 * PI))
    assert res.found
    lo, hi = res.bracket
    assert hi - lo <= 1e-3 * PI
    assert res.delta_below <= 1e-10 < res.delta_above
    assert 0.5 * PI < res.critical_value < 0.6 * PI


def test_threshold_without_crossing():
    res = exact_threshold(ModelParams(g=0.0), search=(0.3 * PI, 0.8 * PI))
    assert res.status == NO_TRANSITION and res.critical_value is None
    res = exact_threshold(ModelParams(g=0.4), search=(0.7 * PI, 0.8 * PI))
    assert res.status == ABOVE_AT_START


def test_g_axis_threshold_exists():
    tau = PI / 2 / 0.4
    res = exact_threshold(ModelParams(tau=tau), axis="g", search=(0.05, 0.6))
    assert res.found
    assert 0.05 < res.critical_value < 0.6
    assert res.bracket[1] - res.bracket[0] <= 1e-3


def test_figure_datasets_reduced(tmp_path):
    paths = figure_dataset("fig2", tmp_path)
    assert len([p for p in paths if p.suffix == ".csv"]) == 6
    odd = (tmp_path / "fig2_g1.5_rho_e.csv").read_text().splitlines()
    assert odd[0].startswith("# provenance:") and odd[1] == "n,population"
    pops = np.array([float(ln.split(",")[1]) for ln in odd[2:]])
    assert np.all(pops[0::2] < 1e-14) and pops[1::2].sum() == pytest.approx(1.0)

    spec = SweepSpec((0.2, 0.8), (0.5 * PI, 1.0 * PI), step=0.2)
    (surface,) = figure_dataset("fig3", tmp_path, spec=spec)
    assert surface.read_text().splitlines()[1] == "g,tau,delta"

    (line,) = figure_dataset("fig4", tmp_path, taus=[0.0, 0.5 * PI, 0.6 * PI], step=0.1)
    rows = [ln.split(",") for ln in line.read_text().splitlines()[2:]]
    assert float(rows[1][2]) < 1e-10 and float(rows[2][2]) > 0
    assert rows[0][3] == "-inf"

    with pytest.raises(ValueError):
        figure_dataset("fig9", tmp_path)


@pytest.mark.slow
def test_figure1_dataset(tmp_path):
    paths = figure_dataset("fig1", tmp_path, step=0.1)
    grids = [p for p in paths if p.suffix == ".csv"]
    assert len(grids) == 12
    summary = json.loads((tmp_path / "fig1_summary.json").read_text())
    row1 = [panel for panel in summary["panels"] if panel["row"] == 1]
    assert len(row1) == 3 and all(panel["delta"] > 0 for panel in row1)


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("DCESIM_OUTPUT_DIR", str(tmp_path))
    assert output_dir() == tmp_path
    monkeypatch.delenv("DCESIM_OUTPUT_DIR")
    assert str(output_dir()) == "."
