"""Regularity and smoothing constants of the boundary-value flow, covering numbers and scales.

For the semigroup ``S(t)`` of ``u_t = -u_x - u_xxx`` on (0, L) with
``u(0) = u(L) = u_x(L) = 0``:

* ``F_0^k`` bounds ``sup_t ||S(t)f||_{H^k}`` and ``F_1^k`` bounds
  ``||S f||_{L^2(0,T; H^{k+1})}`` in terms of ``||f||_{H^k}`` (T <= L);
* ``F_s^k`` is the smoothing constant ``||S(t)f||_{H^k} <= F_s^k t^{-k/2} ||f||``.

The orders 0, 3 and 6 have closed forms; 1, 2, 4, 5 are interpolated and
depend on the extension-operator norms ``lambda_m`` (hence on the chosen
lambda profile).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

import mpmath

from .mpconv import mp_to_xreal, xreal_to_mp
from .sobolev import SobolevTable, build_table
from .xreal import XReal, xr

MIN_LENGTH = 4.0
PROFILE_DEPENDENT_ORDERS = (1, 2, 4, 5)
# Largest B kept as an exact integer (bits).
EXACT_B_BITS = 1 << 16


class FlowDomainError(ValueError):
    """Input outside the standing assumptions (L >= 4, K >= K0, ...)."""


def _check_length(L: float) -> None:
    if not (isinstance(L, (int, float)) and math.isfinite(L)) or L < MIN_LENGTH:
        raise FlowDomainError(f"length L={L!r} violates the standing assumption L >= {MIN_LENGTH}")


@dataclass(frozen=True)
class FlowConstantSet:
    L: float
    f0: Tuple[XReal, ...]  # k = 0..6
    f1: Tuple[XReal, ...]  # k = 0..6
    fs: Dict[int, XReal]  # k = 1..6
    k0: XReal
    profile: str
    provenance: str

    def ktilde(self, K, sobolev: SobolevTable) -> XReal:
        """``K^2 F_s^6 (1 + 2 sqrt(E^4_6)) / (4 (F_s^3)^2) + K sqrt(E^2_3) / 2``."""
        K = xr(K)
        first = K * K * self.fs[6] * (1 + 2 * sobolev.E(4, 6).sqrt()) / (4 * self.fs[3] * self.fs[3])
        return first + K * sobolev.E(2, 3).sqrt() / 2

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "profile": self.profile,
            "provenance": self.provenance,
            "f0": [v.to_json() for v in self.f0],
            "f1": [v.to_json() for v in self.f1],
            "fs": {str(k): v.to_json() for k, v in sorted(self.fs.items())},
            "k0": self.k0.to_json(),
            "profile_dependent_orders": list(PROFILE_DEPENDENT_ORDERS),
        }


def _closed_form_sum3(E13: XReal) -> XReal:
    return 2 * (1 + E13.sqrt()) + 2 * (4 * E13) ** 0.75


def _closed_form_sum6(E46: XReal, E26: XReal) -> XReal:
    return 8 * E46.sqrt() + 4 * E26.sqrt() + 128 * E46 ** 1.5 + 8 * E26 ** 0.75


def f_constants(L: float, sobolev: Optional[SobolevTable] = None) -> FlowConstantSet:
    """All ``F_0^k, F_1^k`` (k = 0..6) and ``F_s^k`` (k = 1..6) for length L."""
    _check_length(L)
    sob = sobolev if sobolev is not None else build_table()
    Lx = xr(float(L))
    c = (Lx * 2 / 3).sqrt()
    sqrtL = Lx.sqrt()
    E13, E46, E26 = sob.E(1, 3), sob.E(4, 6), sob.E(2, 6)
    G, lam = sob.G, sob.lam_

    f0: Dict[int, XReal] = {0: xr(1), 3: _closed_form_sum3(E13) + 1, 6: _closed_form_sum6(E46, E26) + 1}
    f1: Dict[int, XReal] = {
        0: (Lx * 5 / 3).sqrt(),
        3: c * _closed_form_sum3(E13) + sqrtL,
        6: c * _closed_form_sum6(E46, E26) + sqrtL,
    }
    # interpolated orders: (low order, high order, weight on the high factor)
    a0 = lam(0) * f0[0] * G(0)
    a3 = lam(3) * f0[3] * G(3)
    a6 = lam(6) * f0[6] * G(6)
    b0 = lam(1) * f1[0] * G(1)
    b3 = lam(4) * f1[3] * G(4)
    b6 = lam(7) * f1[6] * G(7)
    third, two_thirds = 1.0 / 3.0, 2.0 / 3.0
    f0[1] = G(1) * a0 ** two_thirds * a3 ** third
    f1[1] = G(1) * b0 ** two_thirds * b3 ** third
    f0[2] = G(2) * a0 ** third * a3 ** two_thirds
    f1[2] = G(2) * b0 ** third * b3 ** two_thirds
    f0[4] = G(4) * a3 ** two_thirds * a6 ** third
    f1[4] = G(4) * b3 ** two_thirds * b6 ** third
    f0[5] = G(5) * a3 ** third * a6 ** two_thirds
    f1[5] = G(5) * b3 ** third * b6 ** two_thirds

    fs: Dict[int, XReal] = {}
    for k in range(1, 7):
        prod = xr(2) ** k * xr(k) ** (k / 2.0)
        for i in range(k):
            prod = prod * f1[i] * f0[i + 1]
        fs[k] = prod
    return FlowConstantSet(
        L=float(L),
        f0=tuple(f0[k] for k in range(7)),
        f1=tuple(f1[k] for k in range(7)),
        fs=fs,
        k0=2 * fs[3],
        profile=sob.profile,
        provenance=sob.provenance,
    )


@dataclass(frozen=True)
class CoveringParams:
    L: float
    K: XReal
    M_c: Union[int, XReal]
    N_c: Union[int, XReal]
    B: XReal
    B_int: Optional[int]
    log_B: XReal
    K1: XReal
    exact: bool
    stub_e13: Optional[float] = None

    @property
    def log10_B(self) -> XReal:
        return self.log_B * (1.0 / math.log(10.0))

    def to_json(self) -> dict:
        def enc(v):
            return str(v) if isinstance(v, int) else v.to_json()

        return {
            "L": self.L,
            "K": self.K.to_json(),
            "M_c": enc(self.M_c),
            "N_c": enc(self.N_c),
            "B": self.B.to_json(),
            "B_exact": str(self.B_int) if self.B_int is not None else None,
            "log_B": self.log_B.to_json(),
            "log10_B": self.log10_B.to_json(),
            "K1": self.K1.to_json(),
            "exact": self.exact,
            "stub_e13": self.stub_e13,
        }


def _ceil_cover(K: XReal, L: float, radicand: Fraction) -> Union[int, XReal]:
    """``ceil(K * L * sqrt(radicand))`` with the argument rounded upward."""
    if K.depth == 0:
        # exact integer test when every input is an exact rational
        sq = Fraction(K.mantissa) ** 2 * Fraction(L) ** 2 * radicand
        n = math.isqrt(sq.numerator // sq.denominator)
        for cand in (n, n + 1):
            if Fraction(cand) ** 2 == sq:
                return cand
    log_arg = K.log_abs() + math.log(L) + 0.5 * math.log(float(radicand))
    if log_arg.depth > 0 or log_arg.mantissa > EXACT_B_BITS * math.log(2):
        # beyond exact-integer range: XReal upper bound arg * (1 + 1e-12) + 1
        return XReal.from_log(log_arg + 1e-12) + 1
    bits = max(0, int(log_arg.mantissa / math.log(2))) + 128
    with mpmath.workprec(bits):
        rad = mpmath.mpf(radicand.numerator) / radicand.denominator
        arg = xreal_to_mp(K) * mpmath.mpf(L) * mpmath.sqrt(rad)
        arg_up = arg * (1 + mpmath.ldexp(1, -(bits - 16)))
        return int(mpmath.ceil(arg_up))


def covering(L: float, K, sobolev: Optional[SobolevTable] = None,
             stub_e13: Optional[float] = None) -> CoveringParams:
    """Covering number ``B(L, K) = (2 M_c + 1)^{N_c - 1}`` and ``K1 = sqrt(B) K``.

    ``stub_e13`` replaces ``E^1_3`` (test mode for hand-checkable arithmetic).
    """
    _check_length(L)
    K = xr(K)
    if K < 1:
        raise FlowDomainError(f"covering radius K must be >= 1, got {K}")
    if stub_e13 is not None:
        if not stub_e13 > 0:
            raise FlowDomainError("stub E^1_3 must be positive")
        e13 = Fraction(stub_e13)
    else:
        sob = sobolev if sobolev is not None else build_table()
        e13 = Fraction(sob.e_int[(1, 3)])
    M_c = _ceil_cover(K, L, e13 / 6)  # ceil(K L sqrt(E13 / 6))
    N_c = _ceil_cover(K, L, e13 * 4)  # ceil(2 K L sqrt(E13))
    exact = isinstance(M_c, int) and isinstance(N_c, int)
    B_int: Optional[int] = None
    if exact:
        with mpmath.workprec(256):
            log_B_mp = (N_c - 1) * mpmath.log(2 * M_c + 1)
        log_B = mp_to_xreal(log_B_mp)
        if (N_c - 1) * math.log2(2 * M_c + 1) <= EXACT_B_BITS:
            B_int = (2 * M_c + 1) ** (N_c - 1)
            B = xr(B_int)
        else:
            B = XReal.from_log(log_B)
    else:
        log_B = (xr(N_c) - 1) * (2 * xr(M_c) + 1).log_abs()
        B = XReal.from_log(log_B)
    K1 = XReal.from_log(log_B * 0.5 + K.log_abs())
    return CoveringParams(L=float(L), K=K, M_c=M_c, N_c=N_c, B=B, B_int=B_int,
                          log_B=log_B, K1=K1, exact=exact,
                          stub_e13=float(stub_e13) if stub_e13 is not None else None)


@dataclass(frozen=True)
class Scales:
    t1: XReal
    k0: XReal
    ktilde: XReal
    k1: XReal
    covering: CoveringParams

    def to_json(self) -> dict:
        return {"t1": self.t1.to_json(), "k0": self.k0.to_json(),
                "ktilde": self.ktilde.to_json(), "k1": self.k1.to_json(),
                "covering": self.covering.to_json()}


def scales(L: float, K, fc: FlowConstantSet, sobolev: Optional[SobolevTable] = None,
           stub_e13: Optional[float] = None) -> Scales:
    """``t1 = (2 F_s^3 / K)^{2/3}``, ``K0 = 2 F_s^3``, ``K~`` and ``K1 = sqrt(B) K``."""
    _check_length(L)
    sob = sobolev if sobolev is not None else build_table(fc.profile)
    K = xr(K)
    if K < fc.k0:
        raise FlowDomainError(f"K={K} is below the smoothing threshold K0={fc.k0}")
    t1 = (fc.k0 / K) ** (2.0 / 3.0)
    cov = covering(L, K, sob, stub_e13=stub_e13)
    return Scales(t1=t1, k0=fc.k0, ktilde=fc.ktilde(K, sob), k1=cov.K1, covering=cov)
