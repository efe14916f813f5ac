import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import obscost.observability as obs
from obscost.observability import (ObservabilityError, ResourceError, assemble_gramian, b_gamma_check,
                                   flux_quadrature, gram_schmidt_procedure, mgs_reorth,
                                   restricted_constant, uncontrollable_subspace)
from obscost.semigroup import Grid, build_operator, zero_operator
from obscost.xreal import xr


@pytest.fixture(scope="module")
def op64():
    return build_operator(Grid(5.5, 64))


@pytest.fixture(scope="module")
def gram64(op64):
    return assemble_gramian(op64, 0.5, 1e-3, basis="full")


@pytest.fixture(scope="module")
def op_2pi():
    return build_operator(Grid(2 * math.pi, 128))


def test_single_sample_gramian_has_rank_one(op64):
    gr = assemble_gramian(op64, 0.0, 1e-3, basis="full")
    s = np.linalg.svd(gr.G, compute_uv=False)
    assert np.sum(s > 1e-10 * s[0]) <= 1


def test_gramian_symmetric_psd(gram64):
    assert gram64.symmetry_error() <= 1e-12 * np.max(np.abs(gram64.G))
    assert gram64.eigenvalues[0] >= gram64.psd_floor()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 16))
def test_gramian_flux_consistency(gram64, op64, seed):
    rng = np.random.default_rng(seed)
    u0 = rng.standard_normal(op64.N)
    q = gram64.quadratic(u0)
    ref = flux_quadrature(op64, u0, 0.5, 1e-3)
    assert q == pytest.approx(ref, rel=1e-10)


def test_filtered_gramian_consistency(op64):
    gr = assemble_gramian(op64, 0.5, 1e-3)
    u0 = gr.basis @ np.arange(1.0, gr.basis.shape[1] + 1)
    assert gr.quadratic(u0) == pytest.approx(flux_quadrature(op64, u0, 0.5, 1e-3), rel=1e-10)
    assert gr.basis.shape[1] == 64 // 8


def test_parallel_assembly_matches_serial(op64, gram64):
    par = assemble_gramian(op64, 0.5, 1e-3, basis="full", jobs=4)
    assert np.array_equal(par.G, gram64.G)


def test_resource_guard(op64):
    with pytest.raises(ResourceError):
        assemble_gramian(op64, 1.0, 1e-3, basis="full", budget=1e3)
    with pytest.raises(ObservabilityError):
        assemble_gramian(op64, -1.0, 1e-3)
    with pytest.raises(ObservabilityError):
        assemble_gramian(op64, 1.0, 1e-3, basis="wavelet")


def test_empty_m_restricted_equals_c_num(gram64, op64):
    m = uncontrollable_subspace(op64, tol=1e-3)
    assert m.dim == 0
    assert restricted_constant(gram64, m) == gram64.c_num


def test_full_m_is_domain_error(gram64, op64):
    m = uncontrollable_subspace(zero_operator(op64.grid))
    with pytest.raises(ObservabilityError):
        restricted_constant(gram64, m)


def test_dimension_mismatch(gram64):
    m = uncontrollable_subspace(build_operator(Grid(5.5, 32)), tol=1e-3)
    with pytest.raises(ObservabilityError):
        restricted_constant(gram64, m)


def test_deflation_monotone(op_2pi):
    gr = assemble_gramian(op_2pi, 1.0, 1e-3)
    m = uncontrollable_subspace(op_2pi)
    assert restricted_constant(gr, m) >= gr.c_num


def test_zero_operator_every_vector_qualifies():
    g = Grid(3.0, 24)
    m = uncontrollable_subspace(zero_operator(g))
    assert m.dim == g.N
    assert m.orthonormality_error() <= 1e-10


def test_m_empty_at_noncritical_length():
    assert uncontrollable_subspace(build_operator(Grid(4.0, 128)), tol=1e-3).dim == 0


def test_m_at_two_pi(op_2pi):
    m = uncontrollable_subspace(op_2pi)
    assert m.dim >= 1
    assert m.orthonormality_error() <= 1e-10
    assert np.all(np.abs(m.eigenvalues.real) < 1e-2) and np.all(m.fluxes < 1e-2)
    for j in range(m.dim):
        assert flux_quadrature(op_2pi, m.basis[:, j], 2.0, 1e-3) <= 1e-4
    # the continuum member is 1 - cos x with eigenvalue 0
    x = op_2pi.grid.x
    ref = 1 - np.cos(x)
    ref /= op_2pi.grid.norm(ref)
    assert abs(op_2pi.grid.inner(ref, m.basis[:, 0])) == pytest.approx(1.0, abs=1e-3)


def test_mgs_orthonormal():
    g = Grid(5.5, 50)
    V = np.random.default_rng(2).standard_normal((50, 6))
    V[:, 5] = V[:, 4] + 1e-9 * V[:, 5]
    Y, R = mgs_reorth(g, V)
    assert np.max(np.abs(g.h * Y.T @ Y - np.eye(6))) <= 1e-10
    assert np.allclose(Y @ R, V, atol=1e-12)
    assert np.allclose(R, np.triu(R))


def test_b_gamma_zero_state_fails(op64):
    d = b_gamma_check(np.zeros(op64.N), 0.0, op64, 10, 1e-2)
    assert not d.conditions["normalized"] and not d.ok


def test_b_gamma_eigenfunction():
    op = build_operator(Grid(2 * math.pi, 256))
    m = uncontrollable_subspace(op)
    v = m.eigenvectors[:, 0]
    d = b_gamma_check(v.real / op.grid.norm(v.real), m.eigenvalues[0].real, op, xr(10) ** 9, 1e-2)
    assert d.conditions["residual"] and d.conditions["flux"]


def test_huge_gamma_stops_at_level_one(op64):
    u = op64.grid.sine_mode(1)
    run = gram_schmidt_procedure(op64, u, 1e6, 10.0, dt=1e-3)
    assert run.stop_reason == "residual-below-gamma/2" and len(run.levels) == 1
    assert run.candidate_residual < 10.0
    assert run.levels[0].orthonormality_error <= 1e-10


def test_level_cap_is_an_outcome(op64):
    run = gram_schmidt_procedure(op64, op64.grid.sine_mode(1), 1e6, 1.0, level_cap=3, dt=1e-3)
    assert run.stop_reason == "level-cap" and len(run.levels) == 3
    assert all(lv.orthonormality_error <= 1e-10 for lv in run.levels)
    assert all(lv.projection_contraction for lv in run.levels[1:])
    # budgets follow the flux recursion
    for prev, lv in zip(run.levels, run.levels[1:]):
        ref = obs.c_next(lv.level - 2, xr(prev.budget), lv.delta, run.gamma, run.ktilde)
        assert lv.budget == pytest.approx(float(ref), rel=1e-12)


def test_budget_exceeded_stops_run(op64, monkeypatch):
    monkeypatch.setattr(obs, "c_next", lambda *a, **k: xr(1e-12))
    run = gram_schmidt_procedure(op64, op64.grid.sine_mode(1), 1e6, 1.0, level_cap=3, dt=1e-3)
    assert run.stop_reason == "budget-exceeded" and len(run.levels) == 2


def test_gram_schmidt_validation(op64):
    u = op64.grid.sine_mode(1)
    with pytest.raises(ObservabilityError):
        gram_schmidt_procedure(op64, 2 * u, 1, 1.0)
    with pytest.raises(ObservabilityError):
        gram_schmidt_procedure(op64, u, 1, 0.0)
    with pytest.raises(ObservabilityError):
        gram_schmidt_procedure(op64, u, 1, 1.0, level_cap=10 ** 4)
