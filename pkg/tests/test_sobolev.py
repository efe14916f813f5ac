import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from obscost.sobolev import (MAX_ORDER, SobolevDomainError, build_table, e_exact, e_table_iterative,
                             g_exact, interpolation_bound, parse_lambda_profile, resolve_profile,
                             stein_lambda)
from obscost.xreal import xr


def oracle(n, m):
    """Plain recursion, written independently (no caching)."""
    if m == n + 1:
        return 42 if n == 1 else (84 ** n) * oracle(n - 1, n) ** n
    return oracle(n, n + 1) * (oracle(n + 1, m) + 1)


def test_base_values():
    assert e_exact(1, 2) == 42
    assert e_exact(2, 3) == 12_446_784
    assert e_exact(1, 3) == 522_764_970


def test_against_oracle_small():
    for m in range(2, 6):
        for n in range(1, m):
            assert e_exact(n, m) == oracle(n, m)


def test_iterative_table_agrees():
    t = e_table_iterative()
    assert all(t[(n, m)] == e_exact(n, m) for m in range(2, MAX_ORDER + 1) for n in range(1, m))


@pytest.mark.parametrize("n,m", [(0, 2), (3, 3), (1, 8), (2.0, 3)])
def test_bad_indices(n, m):
    with pytest.raises(SobolevDomainError):
        e_exact(n, m)


def test_subdiagonal_identity_all_indices():
    for m in range(3, MAX_ORDER + 1):
        for k in range(2, m):
            assert e_exact(k - 1, m) == e_exact(k - 1, k) * (e_exact(k, m) + 1)


def test_g_constants():
    assert g_exact(0) == 1 and g_exact(1) == 1
    assert g_exact(2) == 1 + 2 * 42


def test_table_exposes_xreal_and_json():
    tab = build_table("unit")
    assert tab.E(1, 2) == xr(42)
    assert tab.lam_(3) == xr(1)
    js = tab.to_json()
    assert "E[1][2]" in js and "G[7]" in js and "lambda[0]" in js


def test_profiles(monkeypatch):
    assert stein_lambda(2, "default") == xr(12)
    name, vals, prov = parse_lambda_profile("custom:1,1,2,2,3,3,4,4")
    assert vals[7] == 4 and "custom" in prov
    with pytest.raises(SobolevDomainError):
        parse_lambda_profile("custom:1,2")
    with pytest.raises(SobolevDomainError):
        parse_lambda_profile("custom:0.5,1,1,1,1,1,1,1")
    with pytest.raises(SobolevDomainError):
        parse_lambda_profile("nope")
    monkeypatch.setenv("OBSCOST_LAMBDA_PROFILE", "unit")
    assert resolve_profile() == "unit"
    assert resolve_profile("default") == "default"


@given(st.integers(2, MAX_ORDER).flatmap(lambda m: st.tuples(st.integers(1, m - 1), st.just(m))),
       st.floats(0.01, 100), st.floats(1.0, 100))
def test_interpolation_bound_dominates_lower_norm(nm, l2, ratio):
    n, m = nm
    hm = l2 * ratio  # ||f||_{H^m} >= ||f||_{L2}
    b = interpolation_bound(n, m, l2, hm)
    # the bound is at least (2E+1) times the L2 norm squared
    assert float(b.log_abs()) >= math.log(2 * e_exact(n, m) + 1) + 2 * math.log(l2) - 1e-9
