import math
from fractions import Fraction

import mpmath
import pytest

from obscost.flow import FlowDomainError, covering, f_constants, scales
from obscost.sobolev import build_table
from obscost.xreal import xr


def test_stub_covering_exact():
    cov = covering(4.0, 1, stub_e13=6)
    assert cov.M_c == 4 and cov.N_c == 20
    assert cov.B_int == 9 ** 19 and cov.exact


def test_true_covering_log10B_against_mpmath():
    sob = build_table()
    fc = f_constants(4.0, sob)
    cov = covering(4.0, fc.k0, sob)
    with mpmath.workdps(60):
        K = mpmath.exp(mpmath.mpf(fc.k0.log_abs().mantissa)) if fc.k0.depth else mpmath.mpf(fc.k0.mantissa)
        e13 = sob.e_int[(1, 3)]
        Mc = mpmath.ceil(K * 4 * mpmath.sqrt(mpmath.mpf(e13) / 6))
        Nc = mpmath.ceil(2 * K * 4 * mpmath.sqrt(e13))
        ref = (Nc - 1) * mpmath.log10(2 * Mc + 1)
    got = float(cov.log10_B)
    assert abs(got - float(ref)) / float(ref) < 1e-9


def test_length_assumption():
    with pytest.raises(FlowDomainError):
        f_constants(3.9)
    with pytest.raises(FlowDomainError):
        covering(4.0, 0.5)


def test_flow_constants_structure():
    fc = f_constants(4.0, build_table("unit"))
    assert fc.f0[0] == xr(1)
    assert math.isclose(float(fc.f1[0]), math.sqrt(4.0 * 5 / 3))
    assert all(fc.fs[k] > 0 for k in range(1, 7))
    assert fc.k0 == 2 * fc.fs[3]
    # smoothing constants grow with order
    assert all(fc.fs[k + 1] > fc.fs[k] for k in range(1, 6))


def test_profile_dependence():
    a = f_constants(4.0, build_table("unit"))
    b = f_constants(4.0, build_table("default"))
    assert a.f0[3] == b.f0[3]  # closed form
    assert b.f0[1] > a.f0[1]  # interpolated


def test_scales_thresholds():
    sob = build_table()
    fc = f_constants(4.0, sob)
    sc = scales(4.0, fc.k0, fc, sob)
    assert math.isclose(float(sc.t1), 1.0)
    with pytest.raises(FlowDomainError):
        scales(4.0, 1.0, fc, sob)
    assert sc.k1 > sc.ktilde or sc.k1 > 0
