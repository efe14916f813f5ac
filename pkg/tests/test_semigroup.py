import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obscost.semigroup import (Grid, ObservationParams, SemigroupError, Stepper, build_operator,
                               discrete_norm, energy_identity_residual, evolve, observation_checks,
                               read_snapshot, rough_state, smoothing_rate_fit, space_time_h1,
                               write_csv, write_snapshot, zero_operator)


def sin2_state(grid):
    u = np.sin(math.pi * grid.x / grid.L) ** 2
    return u / grid.norm(u)


def test_grid_validation():
    g = Grid(5.5, 100)
    assert g.h * (g.N + 1) == pytest.approx(5.5, rel=1e-15)
    with pytest.raises(SemigroupError):
        Grid(5.5, 8)
    with pytest.raises(SemigroupError):
        Grid(-1.0, 64)


def test_dense_matches_apply(op_55):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(op_55.N)
    assert np.allclose(op_55.dense() @ v, op_55.apply(v), rtol=1e-13, atol=1e-9)
    V = rng.standard_normal((op_55.N, 3))
    assert np.allclose(op_55.dense() @ V, op_55.apply(V.copy()), rtol=1e-13, atol=1e-9)
    assert not np.any(op_55.apply(np.zeros(op_55.N)))


def test_second_order_consistency_on_sine():
    errs = []
    for N in (100, 200, 400):
        g = Grid(5.5, N)
        op = build_operator(g)
        k = math.pi / g.L
        u = np.sin(k * g.x)
        exact = -k * np.cos(k * g.x) + k ** 3 * np.cos(k * g.x)
        errs.append(np.max(np.abs(op.apply(u) - exact)[3:-3]))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_energy_identity_of_operator(op_55):
    rng = np.random.default_rng(7)
    for _ in range(100):
        v = rng.standard_normal(op_55.N)
        scale = op_55.grid.inner(op_55.apply(v), v) ** 2 + op_55.grid.norm(v) ** 4 / op_55.h ** 6
        assert abs(op_55.energy_defect(v)) <= 1e-12 * math.sqrt(scale)


def test_dissipative_on_compatible_states(op_55):
    # beta(v) <= 0 when v_2 = 2 v_1 (one-sided u_xx(0) consistent) and v_N = 0
    rng = np.random.default_rng(3)
    for _ in range(100):
        v = rng.standard_normal(op_55.N)
        v[1] = 2 * v[0]
        v[-1] = 0.0
        assert op_55.dissipativity_slack(v) >= -1e-9 * op_55.grid.norm(v) ** 2 / op_55.h ** 3


def test_flux_is_one_sided_second_order():
    g = Grid(5.5, 400)
    op = build_operator(g)
    k = math.pi / g.L
    assert float(op.flux(np.sin(k * g.x))) == pytest.approx(k, rel=1e-4)
    assert np.allclose(op.flux_functional() @ np.sin(k * g.x), op.flux(np.sin(k * g.x)))


def test_adjoint_step_is_transpose(op_55):
    rng = np.random.default_rng(1)
    for scheme in ("trapezoidal", "implicit-euler"):
        stp = Stepper(op_55, 1e-3, scheme)
        u, z = rng.standard_normal(op_55.N), rng.standard_normal(op_55.N)
        assert np.dot(stp.step(u), z) == pytest.approx(np.dot(u, stp.step_adjoint(z)), rel=1e-11)


def test_bad_scheme_and_steps(op_55):
    with pytest.raises(SemigroupError):
        Stepper(op_55, 1e-3, "rk4")
    with pytest.raises(SemigroupError):
        evolve(op_55, np.zeros(op_55.N), 0.01, 0.003)
    with pytest.raises(SemigroupError):
        evolve(op_55, np.zeros(op_55.N + 1), 0.01, 0.001)


def test_zero_data_zero_trajectory(op_55):
    tr = evolve(op_55, np.zeros(op_55.N), 0.1, 1e-3)
    assert not np.any(tr.states) and not np.any(tr.flux)


def test_semigroup_property(op_55):
    u0 = sin2_state(op_55.grid)
    whole = evolve(op_55, u0, 0.3, 1e-3).final()
    part = evolve(op_55, evolve(op_55, u0, 0.1, 1e-3).final(), 0.2, 1e-3).final()
    assert np.max(np.abs(whole - part)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2 ** 16))
def test_linearity(a, b, seed):
    op = build_operator(Grid(5.5, 48))
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(op.N), rng.standard_normal(op.N)
    lhs = evolve(op, a * u + b * v, 0.05, 1e-3, check_law=False).final()
    rhs = a * evolve(op, u, 0.05, 1e-3, check_law=False).final() + b * evolve(op, v, 0.05, 1e-3, check_law=False).final()
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + abs(a) + abs(b)) * max(1.0, np.max(np.abs(lhs)))


def test_discrete_energy_law_and_monotone_norm(op_55):
    tr = evolve(op_55, sin2_state(op_55.grid), 0.5, 1e-3)
    assert tr.law_residual <= 1e-8
    n = tr.norms(0)
    assert np.all(np.diff(n) <= 1e-6)


def test_energy_identity_converges():
    r = []
    for N in (64, 128):
        g = Grid(5.5, N)
        op = build_operator(g)
        r.append(energy_identity_residual(evolve(op, sin2_state(g), 1.0, 1e-3, store_every=1000)))
    assert r[1] <= 1e-3
    assert r[0] / r[1] >= 3


def test_space_time_h1_bound(op_55):
    g = op_55.grid
    tr = evolve(op_55, sin2_state(g), 1.0, 1e-3, store_every=10)
    assert space_time_h1(tr) <= 1.05 * (1.0 + g.L) / 3


def test_discrete_norm_examples():
    g = Grid(5.5, 400)
    u = np.sin(math.pi * g.x / g.L)
    assert discrete_norm(np.zeros(g.N), 2, g) == 0.0
    assert discrete_norm(u, 0, g) == pytest.approx(math.sqrt(g.L / 2), rel=1e-4)
    k = math.pi / g.L
    assert discrete_norm(u, 1, g) == pytest.approx(math.sqrt(g.L / 2 * (1 + k * k)), rel=1e-4)
    assert discrete_norm(u, 3, g) == pytest.approx(math.sqrt(g.L / 2 * (1 + k ** 6)), rel=1e-3)
    with pytest.raises(SemigroupError):
        discrete_norm(u, 4, g)
    with pytest.raises(SemigroupError):
        discrete_norm(u[:-1], 1, g)


def test_snapshot_round_trip(tmp_path):
    u = np.random.default_rng(0).standard_normal(33)
    p = tmp_path / "s.bin"
    write_snapshot(u, p)
    data = p.read_bytes()
    assert data[:4] == b"KDVS" and len(data) == 16 + 8 * 33
    assert np.array_equal(read_snapshot(p), u)
    p.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(SemigroupError):
        read_snapshot(p)
    p.write_bytes(data[:-8])
    with pytest.raises(SemigroupError):
        read_snapshot(p)


def test_csv_columns(tmp_path, op_55):
    tr = evolve(op_55, sin2_state(op_55.grid), 0.01, 1e-3, store_every=5)
    p = tmp_path / "t.csv"
    write_csv(tr, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,flux,l2_norm,h1_norm,h3_norm"
    assert len(lines) == 1 + len(tr.times)


def test_smoothing_window_validation(op_55):
    u0 = rough_state(op_55.grid)
    with pytest.raises(SemigroupError):
        smoothing_rate_fit(op_55, u0, 1, (1e-3, 5e-3))
    with pytest.raises(SemigroupError):
        smoothing_rate_fit(op_55, 2 * u0, 1, (1e-3, 1e-2))


def test_smoothing_k0_energy_only():
    op = build_operator(Grid(5.5, 256))
    fit = smoothing_rate_fit(op, rough_state(op.grid), 0, (1e-3, 1e-1), dt=1e-5)
    assert -0.1 <= fit.slope <= 0.0


def test_observation_checks_pass(op_55):
    g = op_55.grid
    f0 = sin2_state(g)
    g0 = np.sin(2 * math.pi * g.x / g.L)
    g0 = g0 - f0 * g.inner(g0, f0)
    g0 /= g.norm(g0)
    rep = observation_checks(op_55, f0, g0, ObservationParams(T=0.5, dt=1e-4))
    assert rep.ok, [r.to_json() for r in rep.results if not r.passed]
    assert {r.name for r in rep.results} == {"ii", "iii", "iv", "v", "vi", "vii"}
    assert rep.get("vii").lhs <= rep.get("vii").rhs


def test_zero_operator_is_identity_flow():
    g = Grid(3.0, 32)
    op = zero_operator(g)
    u = sin2_state(g)
    tr = evolve(op, u, 0.1, 1e-2)
    assert np.allclose(tr.final(), u) and not np.any(tr.flux)
