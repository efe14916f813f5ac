"""Acceptance criteria 1-10; each test records one PASS/FAIL line in the terminal summary."""
import json
import math
import time
from contextlib import contextmanager

import mpmath
import numpy as np
import pytest

from obscost.cli import main
from obscost.critical import spectral_gap
from obscost.epsilon import epsilon0, small_length_constant
from obscost.flow import covering, f_constants, scales
from obscost.gamma import compute_gamma, verify_certificate
from obscost.observability import (assemble_gramian, b_gamma_check, gram_schmidt_procedure,
                                   restricted_constant, uncontrollable_subspace)
from obscost.semigroup import (Grid, build_operator, energy_identity_residual, evolve, rough_state,
                               smoothing_rate_fit)
from obscost.sobolev import MAX_ORDER, build_table, e_exact, e_table_iterative
from obscost.xreal import xr


@contextmanager
def criterion(log, n, title, runtime_limit):
    details = {}
    t0 = time.perf_counter()
    ok = False
    try:
        yield details
        ok = True
    finally:
        dt = time.perf_counter() - t0
        ok = ok and dt < runtime_limit
        info = ", ".join(f"{k}={v}" for k, v in details.items())
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {title} [{dt:.2f}s < {runtime_limit}s] {info}"
        log.append(line)
        print(line)
    assert dt < runtime_limit, f"criterion {n} took {dt:.1f}s"


def oracle_e(n, m):
    if m == n + 1:
        return 42 if n == 1 else (84 ** n) * oracle_e(n - 1, n) ** n
    return oracle_e(n, n + 1) * (oracle_e(n + 1, m) + 1)


def test_criterion_1_constant_recursions(acceptance_log):
    with criterion(acceptance_log, 1, "Sobolev constant recursions", 1.0) as d:
        assert e_exact(1, 2) == 42
        assert e_exact(2, 3) == oracle_e(2, 3) == 12_446_784
        assert e_exact(1, 3) == oracle_e(1, 3) == 522_764_970
        table = e_table_iterative(MAX_ORDER)
        for m in range(3, MAX_ORDER + 1):
            for k in range(2, m):
                assert table[(k - 1, m)] == table[(k - 1, k)] * (table[(k, m)] + 1)
        d["max_order"] = MAX_ORDER


def test_criterion_2_covering(acceptance_log):
    with criterion(acceptance_log, 2, "covering arithmetic", 1.0) as d:
        stub = covering(4.0, 1, stub_e13=6)
        assert (stub.M_c, stub.N_c, stub.B_int) == (4, 20, 9 ** 19)
        sob = build_table()
        fc = f_constants(4.0, sob)
        cov = covering(4.0, fc.k0, sob)
        with mpmath.workdps(60):
            K = mpmath.exp(mpmath.mpf(fc.k0.log_abs().mantissa)) if fc.k0.depth else mpmath.mpf(fc.k0.mantissa)
            e13 = mpmath.mpf(sob.e_int[(1, 3)])
            Mc = mpmath.ceil(K * 4 * mpmath.sqrt(e13 / 6))
            Nc = mpmath.ceil(2 * K * 4 * mpmath.sqrt(e13))
            ref = float((Nc - 1) * mpmath.log10(2 * Mc + 1))
        rel = abs(float(cov.log10_B) - ref) / ref
        d["log10B_rel_err"] = f"{rel:.1e}"
        assert rel <= 1e-9


def test_criterion_3_small_length_bound(acceptance_log):
    with criterion(acceptance_log, 3, "small-length lower bound", 180.0) as d:
        op = build_operator(Grid(1.0, 200))
        gr = assemble_gramian(op, 1.0, 5e-4)
        bound = 0.9 * small_length_constant(1.0, 1.0)
        d["c_num"] = f"{gr.c_num:.5f}"
        d["bound"] = f"{bound:.5f}"
        assert gr.c_num >= bound


def test_criterion_4_critical_signature(acceptance_log):
    with criterion(acceptance_log, 4, "critical-length signature", 600.0) as d:
        ratios = []
        for N in (200, 400):
            c55 = assemble_gramian(build_operator(Grid(5.5, N)), 2.0, 5e-4).c_num
            op = build_operator(Grid(2 * math.pi, N))
            g2 = assemble_gramian(op, 2.0, 5e-4)
            ratios.append(g2.c_num / c55)
            restricted = restricted_constant(g2, uncontrollable_subspace(op))
            d[f"ratio_N{N}"] = f"{ratios[-1]:.2e}"
            d[f"gain_N{N}"] = f"{restricted / g2.c_num:.1e}"
            assert restricted >= 100 * g2.c_num
        assert ratios[0] <= 1e-2
        assert ratios[1] < ratios[0]


def _sin2(grid):
    u = np.sin(math.pi * grid.x / grid.L) ** 2
    return u / grid.norm(u)


def test_criterion_5_energy_identity(acceptance_log):
    with criterion(acceptance_log, 5, "energy identity", 120.0) as d:
        res = []
        for N in (256, 513):  # h = L/(N+1) halves from N = 256 to N = 513
            g = Grid(5.5, N)
            tr = evolve(build_operator(g), _sin2(g), 1.0, 1e-4, store_every=10_000)
            res.append(energy_identity_residual(tr))
            assert tr.law_residual <= 1e-8
        d["residual_N256"] = f"{res[0]:.2e}"
        d["drop"] = f"{res[0] / res[1]:.2f}x"
        assert res[0] <= 1e-4
        assert res[0] / res[1] >= 3


def test_criterion_6_smoothing(acceptance_log):
    with criterion(acceptance_log, 6, "smoothing rate", 120.0) as d:
        sob = build_table()
        fc = f_constants(5.5, sob)
        op = build_operator(Grid(5.5, 256))
        fit = smoothing_rate_fit(op, rough_state(op.grid, seed=1), 1, (1e-3, 1e-1), dt=1e-5,
                                 fs_bound=fc.fs[1])
        d["slope"] = f"{fit.slope:.3f}"
        assert -0.75 <= fit.slope <= -0.25
        assert fit.below_bound


def test_criterion_7_gamma_certificate(acceptance_log):
    with criterion(acceptance_log, 7, "gamma certificate", 1.0) as d:
        d4 = spectral_gap(4.0)
        gammas = []
        for K1 in (1, 10):
            cert = compute_gamma(4.0, K1, d4)
            assert all(b.slack > 0 for b in cert.bounds)
            rep = verify_certificate(cert)
            assert rep.ok
            assert rep.log_gamma_relative_change <= 1e-9
            gammas.append(cert.gamma)
            d[f"ln_gamma_K{K1}"] = f"{float(cert.gamma.log_abs()):.6g}"
        assert gammas[0] >= gammas[1]


def test_criterion_8_epsilon_dual_path(acceptance_log):
    with criterion(acceptance_log, 8, "eps0 dual path", 1.0) as d:
        sob = build_table()
        fc = f_constants(4.0, sob)
        sc = scales(4.0, fc.k0, fc, sob)
        logs = []
        for g in (1e-3, 1e-2, 1e-1):
            rep, _ = epsilon0(4.0, fc.k0, g, fc, sc.covering, sobolev=sob, b_override=20)
            rel = abs(float(rep.log_eps0 - rep.closed_form)) / abs(float(rep.closed_form))
            assert rel <= 1e-10
            assert rep.dn_slack > 0
            logs.append(rep.log_eps0)
            d[f"rel_g{g:g}"] = f"{rel:.1e}"
        assert logs[0] < logs[1] < logs[2]


def test_criterion_9_gram_schmidt(acceptance_log):
    with criterion(acceptance_log, 9, "Gram-Schmidt run on M", 600.0) as d:
        op = build_operator(Grid(2 * math.pi, 256))
        m = uncontrollable_subspace(op)
        assert m.dim >= 1
        seed = m.basis[:, 0]
        run = gram_schmidt_procedure(op, seed, 10.0, 1e-2)
        d["stop"] = run.stop_reason
        d["levels"] = len(run.levels)
        assert run.stop_reason == "residual-below-gamma/2"
        dist = np.min(np.abs(m.eigenvalues - run.candidate_lambda))
        d["lambda_dist"] = f"{dist:.1e}"
        assert dist <= 1e-2
        diag = b_gamma_check(run.candidate, run.candidate_lambda, op, run.K, run.gamma)
        assert diag.ok, diag.conditions
        assert run.diagnostics.ok
        for lv in run.levels:
            assert lv.orthonormality_error <= 1e-10
            assert max(lv.remaining_flux) <= 2 * lv.budget
        assert run.levels[0].budget == pytest.approx(run.c0)


def test_criterion_10_determinism(acceptance_log, tmp_path, monkeypatch):
    with criterion(acceptance_log, 10, "end-to-end determinism", 5.0) as d:
        outs = []
        for i in range(2):
            wd = tmp_path / str(i)
            wd.mkdir()
            monkeypatch.chdir(wd)
            assert main(["cost", "--length", "4", "--out", "report.json"]) == 0
            outs.append((wd / "report.json").read_bytes())
        assert outs[0] == outs[1]
        head = json.loads(outs[0])["result"]["epsilon"]["log_neg_log_eps0"]
        assert head["depth"] == 2
        d["headline"] = f"depth {head['depth']} mantissa {head['mantissa']:.6f}"
