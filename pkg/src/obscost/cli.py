"""Command-line front end: ``obscost <command> [options]``.

Every run resolves its parameters (built-in defaults, then ``--config`` file,
then explicit flags) into a :class:`RunConfig`, dispatches to the library and
writes a JSON report that embeds that exact config.  Exit status: 0 success,
2 domain error (critical length, L < 4, bad parameters), 1 internal error or
failed verification.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .critical import CriticalLengthError, classify
from .epsilon import (DEFAULT_EXACT_THRESHOLD, EpsilonDomainError, epsilon0, small_length_report,
                      theorem_constant)
from .flow import FlowDomainError, covering, f_constants, scales
from .gamma import compute_gamma, verify_certificate
from .observability import (ObservabilityError, assemble_gramian, gram_schmidt_procedure,
                            restricted_constant, uncontrollable_subspace)
from .semigroup import (Grid, SemigroupError, build_operator, energy_identity_residual, evolve,
                        read_snapshot, rough_state, space_time_h1, write_csv, write_snapshot)
from .sobolev import SobolevDomainError, build_table, e_exact, e_table_iterative, resolve_profile
from .xreal import XReal, xr

SCHEMA_VERSION = 1
log = logging.getLogger("obscost")


class ConfigError(ValueError):
    """Invalid configuration (file, key or value)."""


DOMAIN_ERRORS = (ConfigError, CriticalLengthError, FlowDomainError, SobolevDomainError,
                 EpsilonDomainError, SemigroupError, ObservabilityError)


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Param:
    name: str
    type: Callable[[str], Any]
    default: Any
    help: str
    choices: Optional[Tuple[Any, ...]] = None


def _pos_float(s) -> float:
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError(f"expected a positive number, got {s!r}")
    return v


def _nonneg_float(s) -> float:
    v = float(s)
    if not (v >= 0 and math.isfinite(v)):
        raise ValueError(f"expected a non-negative number, got {s!r}")
    return v


def _pos_int(s) -> int:
    v = int(s)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {s!r}")
    return v


def _opt(conv):
    def f(s):
        if s is None or (isinstance(s, str) and s.lower() in ("", "none", "null")):
            return None
        return conv(s)
    f.__name__ = getattr(conv, "__name__", "value")
    return f


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


COMMON = [
    Param("lambda_profile", _opt(str), None, "lambda profile name or custom:v0,...,v7 (env OBSCOST_LAMBDA_PROFILE)"),
    Param("jobs", _pos_int, 1, "worker cap for parallel sections"),
    Param("out", _opt(str), None, "JSON report path (default: stdout)"),
    Param("csv", _opt(str), None, "CSV trace path (simulate, gramian, gramschmidt)"),
    Param("plot", _bool, False, "render a PNG figure next to the report (needs matplotlib)"),
]

LENGTH = Param("length", _pos_float, None, "interval length L")
NODES = Param("nodes", _pos_int, 200, "interior grid nodes N")
SCHEME = Param("scheme", str, "trapezoidal", "time scheme", ("trapezoidal", "implicit-euler"))

COMMANDS: Dict[str, Tuple[str, List[Param]]] = {
    "constants": ("Sobolev table, flow constants, covering number and scales", [
        LENGTH, Param("k", _opt(_pos_float), None, "covering radius K (default K0)")]),
    "gamma": ("gamma certificate and its high-precision verification", [
        LENGTH, Param("k1", _opt(_pos_float), None, "H^3 radius K1 (default: the chain's K1(L, K0))"),
        Param("precision_bits", _pos_int, 106, "verification precision")]),
    "epsilon": ("flux threshold eps0 and observation time T0", [
        LENGTH, Param("gamma", _opt(_pos_float), None, "gamma (default: the chain's certified gamma)"),
        Param("k", _opt(_pos_float), None, "covering radius K (default K0)"),
        Param("b_override", _opt(int), None, "replace B(L, K) by this integer (test mode)"),
        Param("exact_threshold", _pos_int, DEFAULT_EXACT_THRESHOLD, "largest B handled by the exact recursion"),
        Param("mode", _opt(str), None, "force exact or asymptotic", (None, "exact", "asymptotic")),
        Param("trace_limit", _pos_int, 64, "recursion levels kept in the report")]),
    "cost": ("full constant chain c(L) (headline ln(-ln c))", [
        LENGTH, Param("exact_threshold", _pos_int, DEFAULT_EXACT_THRESHOLD, "largest B handled exactly")]),
    "critical": ("nearest critical length and spectral gap d(L)", [
        LENGTH, Param("tolerance", _opt(_nonneg_float), None, "criticality tolerance on |L^2 - L_c^2|")]),
    "simulate": ("evolve an initial state, report flux and energy balance", [
        LENGTH, NODES, Param("time", _pos_float, 1.0, "final time T"), Param("dt", _pos_float, 1e-4, "time step"),
        SCHEME, Param("init", str, "sin2", "initial state", ("sin2", "sine", "rough", "file")),
        Param("init_file", _opt(str), None, "KDVS snapshot used with init=file"),
        Param("seed", int, 1, "random seed for init=rough"),
        Param("store_every", _pos_int, 100, "store every n-th state"),
        Param("snapshot", _opt(str), None, "write the final state as a KDVS snapshot")]),
    "gramian": ("observability Gramian and its minimal eigenvalue", [
        LENGTH, Param("time", _pos_float, 2.0, "observation time T"), NODES,
        Param("dt", _pos_float, 5e-4, "time step"), SCHEME,
        Param("basis", str, "filtered", "Gramian basis", ("filtered", "full")),
        Param("cutoff", _pos_float, 0.125, "fraction of sine modes kept by the filtered basis"),
        Param("budget", _pos_float, 2e10, "work budget N * steps * basis size"),
        Param("deflate", _bool, False, "also report the constant restricted to the complement of M"),
        Param("tol", _pos_float, 1e-2, "M-selection tolerance when deflating")]),
    "subspace-m": ("flux-invisible eigen-subspace M of the discrete operator", [
        LENGTH, NODES, Param("tol", _pos_float, 1e-2, "|Re lambda| tolerance"),
        Param("flux_tol", _opt(_pos_float), None, "flux tolerance (default tol)")]),
    "gramschmidt": ("flow-based Gram-Schmidt run", [
        LENGTH, Param("nodes", _pos_int, 256, "interior grid nodes N"),
        Param("seed_mode", str, "m-eigen", "seed state", ("m-eigen", "sine", "file")),
        Param("seed_file", _opt(str), None, "KDVS snapshot used with seed_mode=file"),
        Param("gamma", _pos_float, 1e-2, "gamma"), Param("k", _pos_float, 10.0, "H^3 radius K"),
        Param("level_cap", _pos_int, 8, "maximal number of levels"),
        Param("t1", _pos_float, 0.1, "smoothing time t1"), Param("dt", _pos_float, 1e-4, "time step"),
        Param("scheme", str, "implicit-euler", "time scheme", ("trapezoidal", "implicit-euler")),
        Param("delta", _opt(_pos_float), None, "constant delta schedule (default min(1/2, t1)/2)"),
        Param("tol", _pos_float, 1e-2, "M-selection tolerance for seed_mode=m-eigen")]),
    "verify": ("self-checks: exact tables, gamma certificates, eps0 dual path, energy identity", [
        LENGTH, Param("k1", _opt(str), "1,10", "comma-separated K1 values"),
        Param("b_override", _pos_int, 20, "B for the eps0 dual-path check"),
        Param("gamma", _pos_float, 1e-2, "gamma for the eps0 dual-path check"),
        Param("nodes", _pos_int, 128, "grid for the operator identity check")]),
}


def _specs(command: str) -> Dict[str, Param]:
    return {p.name: p for p in COMMANDS[command][1] + COMMON}


@dataclass
class RunConfig:
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    @property
    def lambda_profile(self) -> str:
        return resolve_profile(self.params.get("lambda_profile"))

    def to_json(self) -> dict:
        return {"schema": self.schema, "command": self.command,
                "params": {k: self.params[k] for k in sorted(self.params)}}

    @staticmethod
    def from_json(obj: dict) -> "RunConfig":
        if obj.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {obj.get('schema')!r}")
        command = obj.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        return RunConfig(command=command, params=validate(command, dict(obj.get("params", {})), "json"))


def validate(command: str, raw: Dict[str, Any], where: str) -> Dict[str, Any]:
    specs = _specs(command)
    out: Dict[str, Any] = {}
    for key, value in raw.items():
        if key not in specs:
            raise ConfigError(f"{where}: unknown key {key!r} for command {command!r}")
        p = specs[key]
        try:
            v = p.type(value) if value is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: field {key!r}: {exc}") from None
        if p.choices is not None and v not in p.choices:
            raise ConfigError(f"{where}: field {key!r} must be one of {[c for c in p.choices if c is not None]}")
        out[key] = v
    return out


def _parse_scalar(text: str):
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    return t


def read_config_file(path: str, command: str) -> Dict[str, Any]:
    """TOML-like ``key = value`` lines; ``#`` starts a comment; dashes in keys allowed."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    specs = _specs(command)
    out: Dict[str, Any] = {}
    for i, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body or (body.startswith("[") and body.endswith("]")):
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{i}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        key = key.replace("-", "_")
        if key not in specs:
            raise ConfigError(f"{path}:{i}: unknown key {key!r} for command {command!r}")
        out.update(validate(command, {key: _parse_scalar(value)}, f"{path}:{i}"))
    return out


def resolve_config(command: str, cli: Dict[str, Any], config_path: Optional[str]) -> RunConfig:
    specs = _specs(command)
    params = {name: p.default for name, p in specs.items()}
    if config_path:
        params.update(read_config_file(config_path, command))
    params.update(validate(command, {k: v for k, v in cli.items() if v is not None}, "command line"))
    if params.get("length") is None:
        raise ConfigError("field 'length' is required (--length or config file)")
    return RunConfig(command=command, params=params)


# ---------------------------------------------------------------------------
# command implementations: each returns (result dict, plot callback or None)


def _sob(cfg: RunConfig):
    return build_table(cfg.lambda_profile)


def cmd_constants(cfg: RunConfig):
    p = cfg.params
    sob = _sob(cfg)
    fc = f_constants(p["length"], sob)
    K = fc.k0 if p["k"] is None else xr(p["k"])
    sc = scales(p["length"], K, fc, sob)
    return {"sobolev": sob.to_json(), "flow": fc.to_json(), "scales": sc.to_json()}, None


def _chain_k1(L: float, sob) -> XReal:
    fc = f_constants(L, sob)
    return covering(L, fc.k0, sob).K1


def cmd_gamma(cfg: RunConfig):
    p = cfg.params
    L = p["length"]
    sob = _sob(cfg)
    crit = classify(L)
    if crit.is_critical:
        raise CriticalLengthError(f"critical length: L={L} matches (k, l) = {crit.witness}")
    K1 = _chain_k1(L, sob) if p["k1"] is None else xr(p["k1"])
    cert = compute_gamma(L, K1, crit.d, sob)
    ver = verify_certificate(cert, p["precision_bits"])
    return {"certificate": cert.to_json(), "verification": ver.to_json()}, None


def cmd_epsilon(cfg: RunConfig):
    p = cfg.params
    L = p["length"]
    sob = _sob(cfg)
    crit = classify(L)
    if crit.is_critical:
        raise CriticalLengthError(f"critical length: L={L} matches (k, l) = {crit.witness}")
    fc = f_constants(L, sob)
    K = fc.k0 if p["k"] is None else xr(p["k"])
    sc = scales(L, K, fc, sob)
    if p["gamma"] is None:
        gamma = compute_gamma(L, sc.k1, crit.d, sob).gamma
    else:
        gamma = xr(p["gamma"])
    rep, trace = epsilon0(L, K, gamma, fc, sc.covering, p["exact_threshold"], sobolev=sob,
                          b_override=p["b_override"], mode=p["mode"])
    return {"epsilon": rep.to_json(), "trace": trace.to_json(limit=p["trace_limit"])}, None


def cmd_cost(cfg: RunConfig):
    p = cfg.params
    chain = theorem_constant(p["length"], cfg.lambda_profile, p["exact_threshold"])
    return chain.to_json(), None


def cmd_critical(cfg: RunConfig):
    p = cfg.params
    return classify(p["length"], p["tolerance"]).to_json(), None


def _initial_state(kind: str, grid: Grid, seed: int, path: Optional[str]) -> np.ndarray:
    if kind == "sin2":
        v = np.sin(math.pi * grid.x / grid.L) ** 2
    elif kind == "sine":
        v = np.sin(math.pi * grid.x / grid.L)
    elif kind == "rough":
        return rough_state(grid, seed)
    else:
        if not path:
            raise ConfigError("init=file requires init_file / seed_file")
        v = read_snapshot(path)
        if v.size != grid.N:
            raise ConfigError(f"snapshot has {v.size} nodes, grid has {grid.N}")
    return v / grid.norm(v)


def cmd_simulate(cfg: RunConfig):
    p = cfg.params
    grid = Grid(p["length"], p["nodes"])
    op = build_operator(grid)
    u0 = _initial_state(p["init"], grid, p["seed"], p["init_file"])
    tr = evolve(op, u0, p["time"], p["dt"], p["scheme"], store_every=p["store_every"])
    if p["csv"]:
        write_csv(tr, p["csv"])
    if p["snapshot"]:
        write_snapshot(tr.final(), p["snapshot"])
    norms = tr.norms(0)
    res = {
        "grid": {"L": grid.L, "N": grid.N, "h": grid.h},
        "scheme": tr.scheme, "dt": tr.dt, "T": p["time"],
        "flux_integral": float(tr.flux_integral()),
        "energy_initial": grid.norm(u0) ** 2, "energy_final": grid.norm(tr.final()) ** 2,
        "energy_identity_residual": energy_identity_residual(tr),
        "energy_law_identity_defect": tr.law_residual,
        "energy_law_consistency_term": tr.law_consistency,
        "space_time_h1": space_time_h1(tr), "space_time_h1_bound": 1.05 * (p["time"] + grid.L) / 3,
        "l2_norm_monotone": bool(np.all(np.diff(norms) <= 1e-10)),
    }

    def plot(plt, fig):
        ax1, ax2 = fig.subplots(2, 1, sharex=True)
        ax1.plot(tr.flux_times, tr.flux)
        ax1.set_ylabel("u_x(t, 0)")
        ax2.plot(tr.times, norms, label="L2")
        ax2.plot(tr.times, tr.norms(1), label="H1")
        ax2.set_xlabel("t")
        ax2.legend()
    return res, plot


def cmd_gramian(cfg: RunConfig):
    p = cfg.params
    grid = Grid(p["length"], p["nodes"])
    op = build_operator(grid)
    gram = assemble_gramian(op, p["time"], p["dt"], p["scheme"], basis=p["basis"],
                            cutoff_fraction=p["cutoff"], budget=p["budget"], jobs=p["jobs"])
    res = {"gramian": gram.to_json()}
    if p["deflate"]:
        m = uncontrollable_subspace(op, p["tol"])
        res["subspace_m"] = m.to_json()
        res["restricted_constant"] = restricted_constant(gram, m)
    if p["csv"]:
        tr = evolve(op, gram.min_state, p["time"], p["dt"], p["scheme"],
                    store_every=max(1, int(round(p["time"] / p["dt"])) // 200))
        write_csv(tr, p["csv"])

    def plot(plt, fig):
        ax = fig.subplots()
        ax.semilogy(np.maximum(gram.eigenvalues, 1e-300), "o", ms=3)
        ax.set_xlabel("index")
        ax.set_ylabel("Gramian eigenvalue")
    return res, plot


def cmd_subspace_m(cfg: RunConfig):
    p = cfg.params
    op = build_operator(Grid(p["length"], p["nodes"]))
    return uncontrollable_subspace(op, p["tol"], p["flux_tol"]).to_json(), None


def cmd_gramschmidt(cfg: RunConfig):
    p = cfg.params
    grid = Grid(p["length"], p["nodes"])
    op = build_operator(grid)
    extra: Dict[str, Any] = {}
    if p["seed_mode"] == "m-eigen":
        m = uncontrollable_subspace(op, p["tol"])
        if m.dim == 0:
            raise ObservabilityError(f"no flux-invisible eigenvector at L={grid.L} (tol={p['tol']})")
        u0 = m.basis[:, 0] / grid.norm(m.basis[:, 0])
        extra["subspace_m"] = m.to_json()
    elif p["seed_mode"] == "sine":
        u0 = grid.sine_mode(1)
    else:
        u0 = _initial_state("file", grid, 0, p["seed_file"])
    schedule = None if p["delta"] is None else [p["delta"]] * p["level_cap"]
    run = gram_schmidt_procedure(op, u0, p["k"], p["gamma"], schedule, p["level_cap"], t1=p["t1"],
                                 dt=p["dt"], scheme=p["scheme"])
    if p["csv"]:
        with open(p["csv"], "w") as fh:
            fh.write("level,t_bar,family_size,residual,budget,max_remaining_flux,orthonormality_error\n")
            for lv in run.levels:
                fh.write(f"{lv.level},{lv.t_bar!r},{lv.family_size},{lv.residual!r},{lv.budget!r},"
                         f"{max(lv.remaining_flux)!r},{lv.orthonormality_error!r}\n")
    res = dict(run.to_json(), **extra)

    def plot(plt, fig):
        ax = fig.subplots()
        lv = [r.level for r in run.levels]
        ax.semilogy(lv, [r.residual for r in run.levels], "o-", label="||Pi_perp A y||")
        ax.axhline(p["gamma"] / 2, ls="--", color="k", label="gamma/2")
        ax.set_xlabel("level")
        ax.legend()
    return res, plot


def cmd_verify(cfg: RunConfig):
    p = cfg.params
    L = p["length"]
    sob = _sob(cfg)
    checks: Dict[str, Any] = {}
    table = e_table_iterative()
    table_ok = all(e_exact(n, m) == table[(n, m)] for m in range(2, 8) for n in range(1, m))
    checks["sobolev_oracle"] = {"ok": table_ok}
    crit = classify(L)
    if crit.is_critical:
        raise CriticalLengthError(f"critical length: L={L} matches (k, l) = {crit.witness}")
    k1s = [float(v) for v in str(p["k1"]).split(",") if v.strip()]
    gam = []
    for K1 in k1s:
        cert = compute_gamma(L, K1, crit.d, sob)
        ver = verify_certificate(cert)
        gam.append({"K1": K1, "gamma": cert.gamma.to_json(), "ok": ver.ok,
                    "all_slacks_positive": all(b.slack > 0 for b in cert.bounds),
                    "verification": ver.to_json()})
    checks["gamma"] = gam
    fc = f_constants(L, sob)
    sc = scales(L, fc.k0, fc, sob)
    rep, _ = epsilon0(L, fc.k0, p["gamma"], fc, sc.covering, sobolev=sob, b_override=p["b_override"])
    rel = abs(float(rep.log_eps0) - float(rep.closed_form)) / abs(float(rep.closed_form))
    checks["epsilon_dual_path"] = {"B": p["b_override"], "relative_difference": rel,
                                   "ok": rel <= 1e-10 and rep.dn_slack > 0}
    grid = Grid(L, p["nodes"])
    op = build_operator(grid)
    rng = np.random.default_rng(0)
    defects = [abs(op.energy_defect(v)) / grid.norm(v) ** 2 for v in rng.standard_normal((20, grid.N))]
    checks["operator_energy_identity"] = {"max_relative_defect": max(defects), "ok": max(defects) < 1e-9}
    ok = (table_ok and all(g["ok"] and g["all_slacks_positive"] for g in gam)
          and checks["epsilon_dual_path"]["ok"] and checks["operator_energy_identity"]["ok"])
    return {"ok": ok, "checks": checks}, None


HANDLERS = {
    "constants": cmd_constants, "gamma": cmd_gamma, "epsilon": cmd_epsilon, "cost": cmd_cost,
    "critical": cmd_critical, "simulate": cmd_simulate, "gramian": cmd_gramian,
    "subspace-m": cmd_subspace_m, "gramschmidt": cmd_gramschmidt, "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# report output


def _jsonable(obj):
    if isinstance(obj, XReal):
        return obj.to_json()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def render_report(cfg: RunConfig, result: dict) -> str:
    doc = {"schema": SCHEMA_VERSION, "version": __version__, "command": cfg.command,
           "config": cfg.to_json(), "lambda_profile": cfg.lambda_profile, "result": _jsonable(result)}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _plot_path(cfg: RunConfig) -> Path:
    out = cfg.params.get("out")
    return Path(out).with_suffix(".png") if out else Path(f"obscost-{cfg.command}.png")


def render_plot(cfg: RunConfig, draw) -> Optional[Path]:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("--plot needs matplotlib (install the 'plot' extra)") from None
    fig = plt.figure(figsize=(6.4, 4.8))
    draw(plt, fig)
    fig.suptitle(f"{cfg.command}  L={cfg.params['length']}")
    path = _plot_path(cfg)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def run(cfg: RunConfig) -> Tuple[int, str]:
    """Execute a RunConfig; return (exit status, report text).  Errors are not caught here."""
    result, draw = HANDLERS[cfg.command](cfg)
    status = 0
    if cfg.command == "verify" and not result["ok"]:
        status = 1
    if cfg.params.get("plot"):
        if draw is None:
            log.warning("command %s has no figure; --plot ignored", cfg.command)
        else:
            render_plot(cfg, draw)
    text = render_report(cfg, result)
    out = cfg.params.get("out")
    if out:
        Path(out).write_text(text)
    return status, text


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obscost", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"obscost {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    for name, (helptext, params) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, description=helptext)
        sp.add_argument("--config", default=None, help="key = value file (flags override it)")
        for p in params + COMMON:
            flag = "--" + p.name.replace("_", "-")
            if p.type is _bool:
                sp.add_argument(flag, dest=p.name, action="store_const", const=True, default=None, help=p.help)
            else:
                kw: Dict[str, Any] = {}
                if p.choices is not None:
                    kw["choices"] = [c for c in p.choices if c is not None]
                sp.add_argument(flag, dest=p.name, default=None, help=f"{p.help} (default: {p.default})", **kw)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = resolve_config(args.command, cli, args.config)
        status, text = run(cfg)
    except DOMAIN_ERRORS as exc:
        print(f"obscost {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal error
        log.debug("internal error", exc_info=True)
        print(f"obscost {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not cfg.params.get("out"):
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
