import math

import numpy as np
import pytest

from dcesim.dyson import (dyson_negativity, dyson_state, dyson_terms, interfering_support,
                          perturbative_threshold)
from dcesim.fock import E, G, FockBasis, parity_expectation
from dcesim.model import ModelParams, build_h0, build_interaction
from dcesim.propagator import simulate
from dcesim.threshold import NO_TRANSITION

from oracles import dyson_block_expm, dyson_hierarchy_ode


def small(g=0.4, n_max=8):
    return ModelParams(g=g, basis=FockBasis(n_max))


def test_order_zero_is_free_phase():
    for tau in (0.0, 0.7, 5.0):
        st = dyson_state(small(), 0, tau)
        v = st.vector
        idx = st.params.basis.index(G, 0)
        assert abs(abs(v[idx]) - 1) < 1e-15
        assert np.count_nonzero(v) == 1
        assert v[idx] == pytest.approx(np.exp(-1j * 0.0 * tau))  # E_g0 = -1/2 + 1/2 = 0


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("tau", [0.5, math.pi, 2.6])
def test_closed_form_matches_block_exponential(k, tau):
    p = small(0.7)
    psi0 = np.zeros(p.basis.joint_dim, complex)
    psi0[0] = 1
    ref = dyson_block_expm(build_h0(p), build_interaction(p), k, tau, psi0)
    assert np.max(np.abs(dyson_terms(p, k, tau) - ref)) < 1e-12


def test_closed_form_matches_hierarchy_ode_off_resonance():
    p = ModelParams(g=0.3, omega_a=1.4, basis=FockBasis(6))
    psi0 = np.zeros(p.basis.joint_dim, complex)
    psi0[0] = 1
    ref = dyson_hierarchy_ode(build_h0(p), build_interaction(p), 4, 2.0, psi0)
    assert np.max(np.abs(dyson_terms(p, 4, 2.0) - ref)) < 1e-10


def test_total_parity_conserved_by_series():
    st = dyson_state(small(0.9), 4, 1.3)
    assert parity_expectation(st.normalized()) == pytest.approx(1.0, abs=1e-12)


def test_parity_sectors():
    p = small(0.9)
    terms = dyson_terms(p, 4, 1.3)
    n = np.tile(np.arange(p.basis.dim), 2)
    parity = (-1) ** n
    for j, t in enumerate(terms):
        wrong = parity != (1 if j % 2 == 0 else -1)
        assert np.max(np.abs(t[wrong])) < 1e-12
    b = p.basis
    assert set(np.nonzero(np.abs(terms[1]) > 1e-14)[0]) == {b.index(E, 1)}
    assert set(np.nonzero(np.abs(terms[2]) > 1e-14)[0]) == {b.index(G, 0), b.index(G, 2)}


def test_second_order_populates_g2():
    st = dyson_state(small(0.4), 2, 0.5 * math.pi)
    assert abs(st.vector[st.params.basis.index(G, 2)]) > 1e-2


def test_first_order_error_is_third_order():
    g = 0.1
    ratios = []
    for tau in (0.125, 0.25, 0.5):
        p = ModelParams(g=g, tau=tau, basis=FockBasis(10))
        i = p.basis.index(E, 1)
        diff = abs(simulate(p).amplitudes[i] - dyson_state(p, 1).vector[i])
        ratios.append(diff / (g * tau) ** 3)
    assert max(ratios) < 1.0 and np.ptp(ratios) < 0.1


def test_first_order_matches_exact_at_weak_coupling():
    g = 0.1
    for tau in (0.25, 0.5, 1.0):
        p = ModelParams(g=g, tau=tau, basis=FockBasis(10))
        exact = simulate(p).amplitudes[p.basis.index(E, 1)]
        approx = dyson_state(p, 1).vector[p.basis.index(E, 1)]
        assert abs(exact - approx) < 1e-4


def test_weak_coupling_error_scaling():
    gs = np.array([0.0125, 0.025, 0.05])
    errs = []
    for g in gs:
        p = ModelParams(g=g, tau=math.pi, basis=FockBasis(10))
        errs.append(np.linalg.norm(simulate(p).amplitudes - dyson_state(p, 2).vector))
    slope = np.polyfit(np.log(gs), np.log(errs), 1)[0]
    assert slope >= 2.7


def test_norm_report():
    st = dyson_state(small(0.4), 4, 1.0)
    rep = st.report()
    assert rep["order"] == 4 and len(rep["order_norms"]) == 5
    assert rep["norm"] == pytest.approx(np.linalg.norm(st.vector))
    assert st.normalized().amplitudes.dtype == complex


def test_interfering_support():
    p = small()
    b = p.basis
    assert interfering_support(p).tolist() == sorted([b.index(G, 0), b.index(E, 1), b.index(G, 2)])


def test_supports_coincide_up_to_second_order():
    p = ModelParams(g=0.4)
    for tau in (0.4 * math.pi, 0.7 * math.pi):
        a = dyson_negativity(p, 2, tau, support="full")
        b = dyson_negativity(p, 2, tau, support="interfering")
        assert a == pytest.approx(b, abs=1e-14)


def test_errors():
    with pytest.raises(ValueError):
        dyson_state(small(), 5, 1.0)
    with pytest.raises(ValueError):
        dyson_state(ModelParams(g=0.4, rwa=True, basis=FockBasis(8)), 2, 1.0)
    with pytest.raises(ValueError):
        dyson_state(small(), 2, -1.0)
    with pytest.raises(ValueError):
        perturbative_threshold(small(), 3)
    with pytest.raises(ValueError):
        dyson_negativity(small(), 2, 1.0, support="nope")


def test_zero_coupling_has_no_transition():
    res = perturbative_threshold(ModelParams(g=0.0), 2)
    assert res.status == NO_TRANSITION
    assert res.critical_value is None


def test_threshold_postconditions():
    res = perturbative_threshold(ModelParams(g=0.4), 2)
    assert res.found
    lo, hi = res.bracket
    assert hi - lo <= 1e-3 * math.pi
    assert res.delta_below <= res.epsilon < res.delta_above
    assert lo <= res.critical_value <= hi
