"""The flux threshold eps0(L, gamma, K), the observation time T0 and the full constant chain.

Flux budgets grow along the flow-based Gram-Schmidt levels as

    C_1     = 24/gamma^2 (delta_1^2 K~^2 + eps / delta_1^2)
    C_2     = (2/gamma)^2 (24 delta_2^2 K~^2 + 192 C_1 / delta_2^2 + 16 K~^2 C_1)
    C_{n+1} = (2/gamma)^2 (n+1) (6 K~^2 delta_{n+1}^2 + 12 C_n / delta_{n+1}^2 + 4 K~^2 C_n)

and the schedule ``delta_{n+1} = (D~_n / K~^2)^{1/4}`` turns this into the
backward recursion

    D~_n = (gamma^2 D~_{n+1} / (96 (n+1) K~))^2       (n >= 2)
    D~_1 = (gamma^2 D~_2 / (1536 K~))^2,   D~_0 = (gamma^2 D~_1 / (48 K~))^2

started from the largest ``D~_B`` meeting the stopping rule
``(3/2) sqrt((B+1) D~_B / t1) < gamma / sqrt(B)``.  Then ``eps0 = D~_0``,
a power tower: only ``ln eps0`` (depth 2) is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .critical import CriticalLengthError, classify
from .flow import (MIN_LENGTH, CoveringParams, FlowConstantSet, FlowDomainError, Scales,
                   f_constants, scales)
from .gamma import GammaCertificate, compute_gamma
from .sobolev import ASSUMPTIONS, SobolevTable, build_table
from .xreal import ONE, XReal, xr, xsum

SAFETY = 0.99
DEFAULT_EXACT_THRESHOLD = 100_000
# explicit terms of the tail sum sum_j 2^{-j} ln(B - j) in asymptotic mode
ASYMPTOTIC_TERMS = 80

Q0_COEF = 48
Q1_COEF = 1536
QN_COEF = 96


class EpsilonDomainError(ValueError):
    pass


class Cancelled(RuntimeError):
    """Raised when a caller-supplied cancellation token fires."""


def c_next(n: int, c_n, delta, gamma, ktilde, t1=None) -> XReal:
    """Next flux budget ``C_{n+1}`` from ``C_n`` (``c_0`` is the flux threshold eps).

    ``delta`` must lie in ``(0, min(1/2, t1))``; that range is enforced when
    ``t1`` is supplied (the bare algebraic identity is usable without it).
    """
    if n < 0:
        raise EpsilonDomainError("level index must be >= 0")
    c, d, g, k = xr(c_n), xr(delta), xr(gamma), xr(ktilde)
    if d <= 0 or g <= 0 or k <= 0 or c < 0:
        raise EpsilonDomainError("delta, gamma, ktilde must be positive and c_n non-negative")
    if t1 is not None:
        cap = min(xr(0.5), xr(t1))
        if not d < cap:
            raise EpsilonDomainError(f"delta={d} outside (0, min(1/2, t1)={cap})")
    d2, k2 = d * d, k * k
    if n == 0:
        return 24 / (g * g) * (d2 * k2 + c / d2)
    pref = (2 / g) ** 2
    if n == 1:
        return pref * (24 * d2 * k2 + 192 * c / d2 + 16 * k2 * c)
    return pref * (n + 1) * (6 * k2 * d2 + 12 * c / d2 + 4 * k2 * c)


def delta_from_dtilde(dtilde, ktilde) -> XReal:
    """``delta_{n+1} = (D~_n / K~^2)^{1/4}``."""
    return (xr(dtilde) / (xr(ktilde) ** 2)) ** 0.25


@dataclass
class RecursionTrace:
    # (n, delta_{n+1}, D~_n) for the recorded levels, n ascending
    steps: List[Tuple[int, XReal, XReal]] = field(default_factory=list)
    truncated: bool = False

    def to_json(self, limit: Optional[int] = None) -> dict:
        steps = self.steps if limit is None else self.steps[:limit]
        return {
            "steps": [{"n": n, "delta_next": d.to_json(), "dtilde": v.to_json()} for n, d, v in steps],
            "truncated": self.truncated or (limit is not None and len(self.steps) > limit),
        }


@dataclass(frozen=True)
class EpsilonReport:
    L: float
    K: XReal
    gamma: XReal
    B: XReal
    B_int: Optional[int]
    ktilde: XReal
    t1: XReal
    dTildeB: XReal
    log_eps0: XReal
    bracket: Tuple[XReal, XReal]
    T0: XReal
    mode: str
    dn_lhs: XReal
    dn_rhs: XReal
    dn_slack: XReal
    stub_unit_coefficients: bool = False
    closed_form: Optional[XReal] = None  # product-formula value (exact mode)

    @property
    def log_neg_log_eps0(self) -> XReal:
        """Headline number ``ln(-ln eps0)``."""
        return (-self.log_eps0).log_abs()

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "K": self.K.to_json(),
            "gamma": self.gamma.to_json(),
            "B": self.B.to_json(),
            "B_exact": str(self.B_int) if self.B_int is not None else None,
            "ktilde": self.ktilde.to_json(),
            "t1": self.t1.to_json(),
            "dTildeB": self.dTildeB.to_json(),
            "log_eps0": self.log_eps0.to_json(),
            "log_neg_log_eps0": self.log_neg_log_eps0.to_json(),
            "bracket": [self.bracket[0].to_json(), self.bracket[1].to_json()],
            "T0": self.T0.to_json(),
            "mode": self.mode,
            "stopping_rule": {"lhs": self.dn_lhs.to_json(), "rhs": self.dn_rhs.to_json(),
                              "slack": self.dn_slack.to_json()},
            "stub_unit_coefficients": self.stub_unit_coefficients,
            "log_eps0_closed_form": self.closed_form.to_json() if self.closed_form is not None else None,
        }


def _log_q(n: int, a: XReal, unit: bool) -> XReal:
    """``ln q_n`` with ``q_0 = 48 K~/g^2``, ``q_1 = 1536 K~/g^2``, ``q_n = 96 (n+1) K~/g^2``.

    ``a = ln(96 K~ / g^2)``.
    """
    if unit:
        return xr(0)
    if n == 0:
        return a + math.log(Q0_COEF / QN_COEF)
    if n == 1:
        return a + math.log(Q1_COEF / QN_COEF)
    return a + math.log(n + 1)


def _pow2(e: int) -> XReal:
    return XReal.from_log(xr(e * math.log(2.0)))


def _check_cancel(cancel) -> None:
    if cancel is not None and cancel.is_set():
        raise Cancelled("epsilon0 iteration cancelled")


def exact_log_eps0(B: int, log_dB: XReal, a: XReal, unit: bool = False,
                   ktilde: Optional[XReal] = None, trace: Optional[RecursionTrace] = None,
                   trace_limit: int = 4096, cancel=None) -> XReal:
    """Backward recursion ``ln D~_n = 2 ln D~_{n+1} - 2 ln q_n`` down to ``ln D~_0``.

    Iterates the scaled logarithms ``u_n = ln D~_n / 2^(B-n)`` so that nothing
    overflows for B up to the exact threshold:
    ``u_n = u_{n+1} - 2^(n+1-B) ln q_n``.
    """
    if B < 2:
        raise EpsilonDomainError("B must be >= 2")
    record = trace is not None and B + 1 <= trace_limit
    logs: List[Optional[XReal]] = [None] * (B + 1) if record else []
    if record:
        logs[B] = log_dB
    u = log_dB
    for n in range(B - 1, -1, -1):
        if (n & 1023) == 0:
            _check_cancel(cancel)
        u = u - _log_q(n, a, unit) * _pow2(n + 1 - B)
        if record:
            logs[n] = u * _pow2(B - n)
    if trace is not None:
        if record:
            kt_log = (ktilde if ktilde is not None else ONE).log_abs()
            trace.steps = [(n, XReal.from_log((logs[n] - 2 * kt_log) * 0.25), XReal.from_log(logs[n]))
                           for n in range(B + 1)]
        else:
            trace.truncated = True
    return u * _pow2(B)


def closed_form_log_eps0(B: int, log_dB: XReal, a: XReal, unit: bool = False) -> XReal:
    """Direct evaluation of the product formula (independent of the recursion)."""
    head = _pow2(B) * log_dB
    terms = [_pow2(k + 1) * _log_q(k, a, unit)
             for k in range(2, B)]
    return head - xsum(terms) - 4 * _log_q(1, a, unit) - 2 * _log_q(0, a, unit)


def asymptotic_log_eps0(B: XReal, log_dB: XReal, a: XReal, terms: int = ASYMPTOTIC_TERMS,
                        unit: bool = False) -> Tuple[XReal, XReal]:
    """Certified bracket (lower, upper) for ``ln eps0`` valid for any B >= 3.

    Uses ``sum_{k=2}^{B-1} 2^{k+1} ln q_k = 2^B [a (2 - 2^{3-B}) + S]`` with
    ``S = sum_{j=0}^{B-3} 2^{-j} ln(B - j)``; the first ``terms`` entries of S
    are summed explicitly and the geometric tail is bounded by
    ``[ln 3 (2^{-J} - 2^{3-B}), 2^{-J} ln B]``.
    """
    B = xr(B)
    if B < 3:
        raise EpsilonDomainError("asymptotic mode needs B >= 3")
    two_B = XReal.from_log(B * math.log(2.0))
    if unit:
        v = two_B * log_dB
        return v, v
    small_B = B.depth == 0 and B.mantissa <= 2**52
    Bi = int(B.mantissa) if small_B else None
    J = min(terms, Bi - 3) if small_B else terms
    s_explicit = xsum((B - j).log_abs() * (2.0 ** -j) for j in range(J + 1))
    if small_B:
        pow_tail = 2.0 ** -J - 2.0 ** (3 - Bi)
        a_coef = 2.0 - 2.0 ** (3 - Bi)
    else:
        pow_tail = 2.0 ** -J
        a_coef = 2.0
    tail_lo = xr(math.log(3.0) * max(pow_tail, 0.0))
    tail_hi = B.log_abs() * max(pow_tail, 0.0)
    inner_base = log_dB - a * a_coef - s_explicit
    rest = -4 * _log_q(1, a, False) - 2 * _log_q(0, a, False)
    upper = two_B * (inner_base - tail_lo) + rest
    lower = two_B * (inner_base - tail_hi) + rest
    return lower, upper


def epsilon0(L: float, K, gamma, consts: FlowConstantSet, cov: CoveringParams,
             exact_threshold: int = DEFAULT_EXACT_THRESHOLD, *,
             sobolev: Optional[SobolevTable] = None, b_override: Optional[int] = None,
             unit_coefficients: bool = False, mode: Optional[str] = None,
             margin: float = SAFETY, cancel=None,
             trace_limit: int = 4096) -> Tuple[EpsilonReport, RecursionTrace]:
    """Flux threshold ``ln eps0`` by exact recursion (B <= threshold) or certified bracket.

    ``b_override`` replaces B(L, K) (test-only); ``unit_coefficients`` stubs
    every ``q_n`` to 1 (test-only); ``mode`` forces "exact" or "asymptotic";
    ``margin`` is the safety factor applied to the maximal admissible D~_B.
    """
    K = xr(K)
    g = xr(gamma)
    if g <= 0:
        raise EpsilonDomainError("gamma must be positive")
    if K < consts.k0:
        raise FlowDomainError(f"K={K} is below the smoothing threshold K0={consts.k0}")
    if not 0 < margin < 1:
        raise EpsilonDomainError("margin must lie in (0, 1)")
    sob = sobolev if sobolev is not None else build_table(consts.profile)
    ktilde = consts.ktilde(K, sob)
    t1 = (consts.k0 / K) ** (2.0 / 3.0)
    if b_override is not None:
        if int(b_override) < 3:
            raise EpsilonDomainError("b_override must be >= 3")
        B_int: Optional[int] = int(b_override)
        B = xr(B_int)
    else:
        B_int, B = cov.B_int, cov.B
    # largest D~_B allowed by the stopping rule, shrunk by margin^2
    log_dB = (2 * math.log(margin) + math.log(4.0 / 9.0) + t1.log_abs() + 2 * g.log_abs()
              - B.log_abs() - (B + 1).log_abs())
    dB = XReal.from_log(log_dB)
    dn_rhs = g / B.sqrt()
    dn_lhs = 1.5 * ((B + 1) * dB / t1).sqrt()
    dn_slack = (1 - margin) * dn_rhs  # lhs == margin * rhs by construction
    a = (QN_COEF * ktilde / (g * g)).log_abs()

    if mode is None:
        mode = "exact" if (B_int is not None and B_int <= exact_threshold) else "asymptotic"
    trace = RecursionTrace()
    closed: Optional[XReal] = None
    if mode == "exact":
        if B_int is None or B_int > max(exact_threshold, 3):
            raise EpsilonDomainError("exact mode requires an integer B within exact_threshold")
        val = exact_log_eps0(B_int, log_dB, a, unit_coefficients, ktilde, trace, trace_limit, cancel)
        bracket = (val, val)
        closed = closed_form_log_eps0(B_int, log_dB, a, unit_coefficients)
    elif mode == "asymptotic":
        lo, hi = asymptotic_log_eps0(B, log_dB, a, unit=unit_coefficients)
        bracket = (lo, hi)
        val = (lo + hi) * 0.5
        trace.truncated = True
    else:
        raise EpsilonDomainError(f"unknown mode {mode!r}")
    T0 = (3 * B - 1) * t1
    rep = EpsilonReport(L=float(L), K=K, gamma=g, B=B, B_int=B_int, ktilde=ktilde, t1=t1,
                        dTildeB=dB, log_eps0=val, bracket=bracket, T0=T0, mode=mode,
                        dn_lhs=dn_lhs, dn_rhs=dn_rhs, dn_slack=dn_slack,
                        stub_unit_coefficients=unit_coefficients, closed_form=closed)
    return rep, trace


@dataclass(frozen=True)
class TheoremChain:
    L: float
    profile: str
    provenance: str
    sobolev: SobolevTable
    flow: FlowConstantSet
    scales: Scales
    certificate: GammaCertificate
    epsilon: EpsilonReport
    critical: dict

    @property
    def c(self) -> XReal:
        """``ln c(L)`` (c itself is a tower beyond depth 2)."""
        return self.epsilon.log_eps0

    def to_json(self) -> dict:
        eps = self.epsilon
        return {
            "L": self.L,
            "lambda_profile": self.profile,
            "lambda_provenance": self.provenance,
            "assumptions": list(ASSUMPTIONS),
            "headline": {
                "log_neg_log_c": eps.log_neg_log_eps0.to_json(),
                "log_neg_log_c_str": str(eps.log_neg_log_eps0),
                "log_c": eps.log_eps0.to_json(),
            },
            "critical": self.critical,
            "flow": self.flow.to_json(),
            "scales": self.scales.to_json(),
            "gamma_certificate": self.certificate.to_json(),
            "epsilon": eps.to_json(),
        }


def theorem_constant(L: float, profile: Optional[str] = None,
                     exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
                     K=None, cancel=None) -> TheoremChain:
    """Full chain sobolev -> flow -> covering(K0) -> K1 -> gamma -> eps0 for length L."""
    if not math.isfinite(L) or L < MIN_LENGTH:
        raise FlowDomainError(f"length L={L!r} violates the standing assumption L >= {MIN_LENGTH}")
    crit = classify(L)
    if crit.is_critical:
        raise CriticalLengthError(
            f"critical length: L={L} is within {crit.tolerance:g} (in L^2) of the critical value "
            f"for (k, l) = {crit.witness}")
    sob = build_table(profile)
    fc = f_constants(L, sob)
    K = fc.k0 if K is None else xr(K)
    sc = scales(L, K, fc, sob)
    cert = compute_gamma(L, sc.k1, crit.d, sob)
    eps, _ = epsilon0(L, K, cert.gamma, fc, sc.covering, exact_threshold, sobolev=sob, cancel=cancel)
    return TheoremChain(L=float(L), profile=sob.profile, provenance=sob.provenance, sobolev=sob,
                        flow=fc, scales=sc, certificate=cert, epsilon=eps, critical=crit.to_json())


def small_length_constant(L: float, T: float) -> float:
    """Observability constant ``c_A = (3 T pi^2 - T L^2 - L^3) / (3 T pi^2)`` for small L.

    Valid when ``L^3/(3 T pi^2) + L^2/(3 pi^2) < 1``; then
    ``int_0^T u_x(t,0)^2 dt >= c_A ||u_0||^2``.
    """
    if not (L > 0 and T > 0):
        raise EpsilonDomainError("L and T must be positive")
    p2 = math.pi ** 2
    margin = 1.0 - L ** 3 / (3 * T * p2) - L ** 2 / (3 * p2)
    if not margin > 0:
        raise EpsilonDomainError(f"small-length condition violated: 1 - L^3/(3T pi^2) - L^2/(3 pi^2) = {margin:g}")
    return (3 * T * p2 - T * L ** 2 - L ** 3) / (3 * T * p2)


def small_length_report(L: float, T: float) -> dict:
    cA = small_length_constant(L, T)
    return {"L": L, "T": T, "c_A": cA, "cost_factor": 1.0 / cA,
            "condition_margin": 1.0 - L ** 3 / (3 * T * math.pi ** 2) - L ** 2 / (3 * math.pi ** 2)}
