"""Explicit gamma(L, K1) such that no near-eigenfunction with small boundary flux exists.

Given the H^3 radius ``K1`` and the spectral gap ``d(L)``, the admissible
gamma is read off a system of six scalar inequalities (each linear or
quadratic in gamma), together with a root-perturbation radius ``r``:

    K2 = 1 + (1 + sqrt(E^1_3)) K1,   R = (1 + 3 K2 / 2)^{1/3},
    alpha* = (81 e^{6LR} / (169 R^5) + 54/245)^{-1/2},
    r < pi / (8L),   56 L^2 (R + 1) r < d(L),
    (a) (8R (27/(52R^2) + 9 L^{1/2} e^{3LR}/(52 R^3))^2 + 171/196) gamma^2 <= 2 pi - 1
    (b) gamma (R + L^{1/2} e^{LR}) <= alpha*/6
    (c) gamma (1 + (L^3/3)^{1/2} e^{LR}) < (alpha* L / 3) e^{-LR}
    (d) gamma (R + L^{1/2} e^{LR}) <= alpha* L r / 288
    (e) 288 gamma (96 e^{LR} (R + L^{1/2} e^{LR})/(alpha* L r)
                   + (1 + (L^3/3)^{1/2} e^{LR})/(alpha* L)) < 1
    (f) 3 gamma L <= ln(4/3)

Proof-internal symbols (for readers of the certificate): ``lambda`` is the
spectral parameter with ``p = i lambda``; ``alpha = u''(0)``,
``beta = u''(L)`` and ``delta = u'(0)`` are the boundary data entering the
Fourier-Laplace representation of ``u``; ``mu`` and ``xi_0, xi_1, xi_2``
are roots of ``p - xi + xi^3 = 0`` inside the disc ``D_R``.  None of them is
runtime data: they only explain where each inequality comes from.

Every exponential is handled in the log domain via :class:`XReal`; the
verifier re-derives all bounds independently with mpmath logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import mpmath

from .critical import CriticalLengthError
from .flow import MIN_LENGTH, FlowDomainError
from .mpconv import xreal_log_to_mp
from .sobolev import SobolevTable, build_table
from .xreal import XReal, xr, xmin

SAFETY = 0.99
BOUND_NAMES = ("a", "b", "c", "d", "e", "f")
BOUND_TEXT = {
    "a": "(8R(27/(52R^2)+9L^(1/2)e^(3LR)/(52R^3))^2+171/196) gamma^2 <= 2pi-1",
    "b": "gamma (R + L^(1/2) e^(LR)) <= alpha*/6",
    "c": "gamma (1 + (L^3/3)^(1/2) e^(LR)) < (alpha* L/3) e^(-LR)",
    "d": "gamma (R + L^(1/2) e^(LR)) <= alpha* L r/288",
    "e": "288 gamma (96 e^(LR)(R+L^(1/2)e^(LR))/(alpha* L r) + (1+(L^3/3)^(1/2)e^(LR))/(alpha* L)) < 1",
    "f": "3 gamma L <= ln(4/3)",
    "r_range": "r < pi/(8L)",
    "r_gap": "56 L^2 (R+1) r < d(L)",
}


@dataclass(frozen=True)
class NamedBound:
    name: str
    lhs: XReal
    rhs: XReal
    slack: XReal

    def to_json(self) -> dict:
        return {"name": self.name, "inequality": BOUND_TEXT[self.name], "lhs": self.lhs.to_json(),
                "rhs": self.rhs.to_json(), "slack": self.slack.to_json()}


@dataclass(frozen=True)
class GammaCertificate:
    L: float
    K1: XReal
    K2: XReal
    R: XReal
    alpha_star: XReal
    dL: XReal
    r: XReal
    gamma: XReal
    gamma_bounds: Dict[str, XReal]
    bounds: Tuple[NamedBound, ...]
    safety: float = SAFETY
    e13: int = 0
    provenance: str = ""

    def slack(self, name: str) -> XReal:
        for b in self.bounds:
            if b.name == name:
                return b.slack
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "K1": self.K1.to_json(),
            "K2": self.K2.to_json(),
            "R": self.R.to_json(),
            "alpha_star": self.alpha_star.to_json(),
            "dL": self.dL.to_json(),
            "r": self.r.to_json(),
            "gamma": self.gamma.to_json(),
            "gamma_bounds": {k: v.to_json() for k, v in sorted(self.gamma_bounds.items())},
            "bounds": [b.to_json() for b in self.bounds],
            "safety": self.safety,
            "E13": str(self.e13),
            "provenance": self.provenance,
        }


def _margin(bound: XReal, smallest: XReal) -> XReal:
    """``bound - SAFETY * smallest`` written as a sum of non-negative parts.

    Computing it this way keeps the slack visibly positive even when the two
    magnitudes agree to every digit of a saturated XReal.
    """
    return (bound - smallest) + (1.0 - SAFETY) * smallest


def compute_gamma(L: float, K1, dL, sobolev: Optional[SobolevTable] = None) -> GammaCertificate:
    if not math.isfinite(L) or L < MIN_LENGTH:
        raise FlowDomainError(f"length L={L!r} violates the standing assumption L >= {MIN_LENGTH}")
    K1, dL = xr(K1), xr(dL)
    if dL <= 0:
        raise CriticalLengthError(f"critical length: d(L) = {dL} leaves no admissible r")
    if K1 < 1:
        raise FlowDomainError(f"K1 must be >= 1, got {K1}")
    sob = sobolev if sobolev is not None else build_table()
    e13 = sob.e_int[(1, 3)]
    Lx = xr(float(L))

    K2 = 1 + (1 + xr(e13).sqrt()) * K1
    R = (1 + 1.5 * K2) ** (1.0 / 3.0)
    LR = Lx * R
    eLR, e3LR, e6LR = XReal.from_log(LR), XReal.from_log(3 * LR), XReal.from_log(6 * LR)
    alpha = (81 * e6LR / (169 * R ** 5) + xr(54) / 245) ** -0.5
    sqrtL, c3 = Lx.sqrt(), (Lx ** 3 / 3).sqrt()

    r_cap = xr(math.pi / (8 * L))
    r_gap = dL / (56 * Lx * Lx * (R + 1))
    r_min = xmin(r_cap, r_gap)
    r = SAFETY * r_min

    S1 = R + sqrtL * eLR
    S2 = 1 + c3 * eLR
    coef = {
        "a": 8 * R * (27 / (52 * R * R) + 9 * sqrtL * e3LR / (52 * R ** 3)) ** 2 + xr(171) / 196,
        "b": S1,
        "c": S2,
        "d": S1,
        "e": 288 * (96 * eLR * S1 / (alpha * Lx * r) + S2 / (alpha * Lx)),
        "f": 3 * Lx,
    }
    rhs = {
        "a": xr(2 * math.pi - 1),
        "b": alpha / 6,
        "c": alpha * Lx / 3 / eLR,
        "d": alpha * Lx * r / 288,
        "e": xr(1),
        "f": xr(math.log(4.0 / 3.0)),
    }
    gb = {k: rhs[k] / coef[k] for k in BOUND_NAMES}
    gb["a"] = gb["a"].sqrt()
    smallest = xmin(*gb.values())
    gamma = SAFETY * smallest

    bounds: List[NamedBound] = []
    for k in BOUND_NAMES:
        diff = _margin(gb[k], smallest)
        if k == "a":
            lhs = coef[k] * gamma * gamma
            slack = coef[k] * diff * (gb[k] + gamma)
        else:
            lhs = coef[k] * gamma
            slack = coef[k] * diff
        bounds.append(NamedBound(k, lhs, rhs[k], slack))
    bounds.append(NamedBound("r_range", r, r_cap, _margin(r_cap, r_min)))
    gap_coef = 56 * Lx * Lx * (R + 1)
    bounds.append(NamedBound("r_gap", gap_coef * r, dL, gap_coef * _margin(r_gap, r_min)))

    return GammaCertificate(L=float(L), K1=K1, K2=K2, R=R, alpha_star=alpha, dL=dL, r=r,
                            gamma=gamma, gamma_bounds=gb, bounds=tuple(bounds), e13=e13,
                            provenance="E^1_3 from the exact Sobolev table")


# ---------------------------------------------------------------- verification
def _lse(a, b):
    """ln(e^a + e^b) without forming the exponentials."""
    hi, lo = (a, b) if a >= b else (b, a)
    d = lo - hi
    if d < -4 * mpmath.mp.prec:
        return hi
    return hi + mpmath.log1p(mpmath.exp(d))


@dataclass
class VerificationReport:
    ok: bool
    checks: Dict[str, str] = field(default_factory=dict)  # name -> pass | fail | unresolved
    margins: Dict[str, float] = field(default_factory=dict)  # log-margins (rhs over lhs)
    log_gamma_recomputed: Optional[float] = None
    log_gamma_relative_change: Optional[float] = None
    precision_bits: int = 0

    @property
    def failed(self) -> List[str]:
        return [k for k, v in self.checks.items() if v != "pass"]

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": dict(sorted(self.checks.items())),
                "log_margins": {k: v for k, v in sorted(self.margins.items())},
                "log_gamma_recomputed": self.log_gamma_recomputed,
                "log_gamma_relative_change": self.log_gamma_relative_change,
                "precision_bits": self.precision_bits}


def _resolution(log_value) -> float:
    """Absolute uncertainty of a double-precision XReal's logarithm."""
    a = abs(float(log_value)) if abs(log_value) < mpmath.mpf(1e300) else 1e300
    return 64 * 2.0**-52 * max(1.0, a) * max(1.0, math.log1p(a))


def log_bounds_mp(L: float, K1: XReal, dL: XReal, e13: int, r: Optional[XReal] = None):
    """All quantities in natural-log form at the current mpmath precision."""
    mp = mpmath
    lnL = mp.log(mp.mpf(L))
    lnK1 = xreal_log_to_mp(K1)
    lnE13 = mp.log(mp.mpf(e13))
    lnK2 = _lse(mp.mpf(0), _lse(mp.mpf(0), lnE13 / 2) + lnK1)
    lnR = _lse(mp.mpf(0), mp.log(mp.mpf(1.5)) + lnK2) / 3
    LR = mp.exp(lnL + lnR)
    ln_alpha = -_lse(mp.log(81) + 6 * LR - mp.log(169) - 5 * lnR, mp.log(mp.mpf(54) / 245)) / 2
    ln_rcap = mp.log(mp.pi / (8 * mp.mpf(L)))
    ln_rgap = xreal_log_to_mp(dL) - mp.log(56) - 2 * lnL - _lse(lnR, mp.mpf(0))
    ln_r = xreal_log_to_mp(r) if r is not None else mp.log(mp.mpf(SAFETY)) + min(ln_rcap, ln_rgap)
    lnS1 = _lse(lnR, lnL / 2 + LR)
    lnS2 = _lse(mp.mpf(0), (3 * lnL - mp.log(3)) / 2 + LR)
    ln_coef_a = _lse(
        mp.log(8) + lnR + 2 * _lse(mp.log(mp.mpf(27) / 52) - 2 * lnR,
                                   mp.log(9) + lnL / 2 + 3 * LR - mp.log(52) - 3 * lnR),
        mp.log(mp.mpf(171) / 196))
    lb = {
        "a": (mp.log(2 * mp.pi - 1) - ln_coef_a) / 2,
        "b": ln_alpha - mp.log(6) - lnS1,
        "c": ln_alpha + lnL - mp.log(3) - LR - lnS2,
        "d": ln_alpha + lnL + ln_r - mp.log(288) - lnS1,
        "e": -(mp.log(288) + _lse(mp.log(96) + LR + lnS1 - ln_alpha - lnL - ln_r, lnS2 - ln_alpha - lnL)),
        "f": mp.log(mp.log(mp.mpf(4) / 3) / (3 * mp.mpf(L))),
    }
    return {"bounds": lb, "ln_r": ln_r, "ln_rcap": ln_rcap, "ln_rgap": ln_rgap,
            "lnK2": lnK2, "lnR": lnR, "ln_alpha": ln_alpha}


def verify_certificate(cert: GammaCertificate, precision_bits: int = 106) -> VerificationReport:
    """Re-evaluate every inequality from the certificate's inputs at higher precision."""
    rep = VerificationReport(ok=False, precision_bits=precision_bits)
    try:
        with mpmath.workprec(precision_bits):
            q = log_bounds_mp(cert.L, cert.K1, cert.dL, cert.e13, r=cert.r)
            ln_gamma = xreal_log_to_mp(cert.gamma)
            res = _resolution(ln_gamma)
            tests = {k: (q["bounds"][k], ln_gamma) for k in BOUND_NAMES}
            tests["r_range"] = (q["ln_rcap"], q["ln_r"])
            tests["r_gap"] = (q["ln_rgap"], q["ln_r"])
            for name, (ln_rhs, ln_lhs) in tests.items():
                m = ln_rhs - ln_lhs
                rep.margins[name] = float(m)
                if m > res:
                    rep.checks[name] = "pass"
                elif m < -res:
                    rep.checks[name] = "fail"
                else:
                    rep.checks[name] = "unresolved"
            # independent recomputation of gamma itself (with the recomputed r)
            q2 = log_bounds_mp(cert.L, cert.K1, cert.dL, cert.e13)
            lg = mpmath.log(mpmath.mpf(SAFETY)) + min(q2["bounds"].values())
            rep.log_gamma_recomputed = float(lg)
            rep.log_gamma_relative_change = float(abs(lg - ln_gamma) / abs(lg)) if lg != 0 else 0.0
    except (OverflowError, ValueError) as exc:  # reported, never raised
        rep.checks["evaluation"] = f"fail: {exc}"
        return rep
    rep.ok = all(v == "pass" for v in rep.checks.values())
    return rep


def with_gamma(cert: GammaCertificate, gamma) -> GammaCertificate:
    """Copy of ``cert`` with a different gamma (for negative tests and audits)."""
    return replace(cert, gamma=xr(gamma))


def with_r(cert: GammaCertificate, r) -> GammaCertificate:
    return replace(cert, r=xr(r))
