import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obscost.critical import CriticalLengthError
from obscost.epsilon import (EpsilonDomainError, c_next, delta_from_dtilde, epsilon0,
                             small_length_constant, theorem_constant)
from obscost.flow import FlowDomainError, f_constants, scales
from obscost.sobolev import build_table
from obscost.xreal import xr


@pytest.fixture(scope="module")
def setup4():
    sob = build_table()
    fc = f_constants(4.0, sob)
    sc = scales(4.0, fc.k0, fc, sob)
    return sob, fc, sc


def run(setup, gamma, B, **kw):
    sob, fc, sc = setup
    return epsilon0(4.0, fc.k0, gamma, fc, sc.covering, sobolev=sob, b_override=B, **kw)


def test_c_next_hand_values():
    # n = 0: 24/g^2 (d^2 K^2 + c/d^2)
    assert float(c_next(0, 1e-6, 0.1, 0.5, 2.0)) == pytest.approx(24 / 0.25 * (0.01 * 4 + 1e-6 / 0.01))
    assert float(c_next(1, 1e-6, 0.1, 0.5, 2.0)) == pytest.approx(
        16 * (24 * 0.01 * 4 + 192 * 1e-6 / 0.01 + 16 * 4 * 1e-6))
    assert float(c_next(4, 1e-6, 0.1, 0.5, 2.0)) == pytest.approx(
        16 * 5 * (6 * 4 * 0.01 + 12 * 1e-6 / 0.01 + 4 * 4 * 1e-6))


def test_c_next_domain():
    with pytest.raises(EpsilonDomainError):
        c_next(0, 1e-6, 0.3, 0.5, 2.0, t1=0.2)
    with pytest.raises(EpsilonDomainError):
        c_next(-1, 1e-6, 0.1, 0.5, 2.0)


def test_dual_path_b20(setup4):
    rep, _ = run(setup4, 1e-2, 20)
    assert rep.mode == "exact"
    rel = abs(float(rep.log_eps0 - rep.closed_form)) / abs(float(rep.closed_form))
    assert rel <= 1e-10
    assert rep.dn_slack > 0 and rep.dn_lhs < rep.dn_rhs


def test_monotone_in_gamma(setup4):
    vals = [run(setup4, g, 20)[0].log_eps0 for g in (1e-3, 1e-2, 1e-1)]
    assert vals[0] < vals[1] < vals[2]


def test_trace_recursion_and_schedule(setup4):
    rep, trace = run(setup4, 1e-2, 8)
    g, k = rep.gamma, rep.ktilde
    steps = trace.steps
    q = {0: 48, 1: 1536}
    for (n, d, D), (_, _, Dn) in zip(steps, steps[1:]):
        qn = q.get(n, 96 * (n + 1))
        ref = 2 * ((g * g * Dn / (qn * k)).log_abs())
        assert float(D.log_abs()) == pytest.approx(float(ref), rel=1e-12)
        assert float(d.log_abs()) == pytest.approx(float(delta_from_dtilde(D, k).log_abs()), rel=1e-12)
        # the schedule makes the budget recursion close: C(n, D~_n, delta_{n+1}) <= D~_{n+1}
        assert float(c_next(n, D, d, g, k).log_abs()) <= float(Dn.log_abs()) + 1e-12 * abs(float(Dn.log_abs()))


def test_T0(setup4):
    rep, _ = run(setup4, 1e-2, 20)
    assert float(rep.T0) == pytest.approx(59 * float(rep.t1))


def test_asymptotic_bracket_contains_exact(setup4):
    ex, _ = run(setup4, 1e-2, 3000, mode="exact")
    asy, _ = run(setup4, 1e-2, 3000, mode="asymptotic")
    lo, hi = asy.bracket
    assert lo <= ex.log_eps0 <= hi
    assert float(hi - lo) <= 1e-12 * abs(float(ex.log_eps0))


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 60), st.floats(1e-4, 0.5))
def test_exact_matches_closed_form_property(setup4_cached, B, g):
    rep, _ = run(setup4_cached, g, B)
    assert abs(float(rep.log_eps0 - rep.closed_form)) <= 1e-10 * abs(float(rep.closed_form))


@pytest.fixture(scope="module")
def setup4_cached(setup4):
    return setup4


def test_override_validation(setup4):
    with pytest.raises(EpsilonDomainError):
        run(setup4, 1e-2, 2)
    with pytest.raises(EpsilonDomainError):
        run(setup4, -1.0, 20)


def test_theorem_chain_headline():
    chain = theorem_constant(4.0)
    h = chain.epsilon.log_neg_log_eps0
    assert h.depth == 2 and h.sign == 1
    assert 150 < h.mantissa < 250
    assert chain.epsilon.mode == "asymptotic"
    assert chain.to_json() == theorem_constant(4.0).to_json()


def test_theorem_chain_domain():
    with pytest.raises(CriticalLengthError):
        theorem_constant(2 * math.pi)
    with pytest.raises(FlowDomainError):
        theorem_constant(3.0)


def test_small_length_constant():
    assert small_length_constant(1, 1) == pytest.approx(1 - 2 / (3 * math.pi ** 2))
    assert small_length_constant(1, 1) == pytest.approx(0.932450, abs=5e-6)  # quoted to 6 digits
    with pytest.raises(EpsilonDomainError):
        small_length_constant(5, 1)
