"""Command-line entry point: ``gaussprimes <command> [options]``.

Reports are JSON on stdout (or ``--out``); a one-line summary goes to stderr.
Exit codes: 0 success, 1 error, 2 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .gint import format_gint, parse_gint
from .sieve import CoverageError, build_table, describe, save_table

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2


class CliError(Exception):
    """A usage or configuration problem; reported with exit code 1."""


class ConfigError(CliError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: usage error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


# -- configuration ----------------------------------------------------------------

def load_config(path: str | None) -> dict[str, Any]:
    """Read a JSON or YAML key-value file; nested keys flatten to ``a_b`` (``phi.kind`` -> ``phi``)."""
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        if path.endswith((".yaml", ".yml")):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:  # parser-specific exception types
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a key-value mapping")
    flat: dict[str, Any] = {}
    for k, v in data.items():
        key = str(k).replace("-", "_").replace(".", "_")
        if isinstance(v, dict):
            if key == "phi" and "kind" in v:
                flat["phi"] = v["kind"]
                continue
            for k2, v2 in v.items():
                flat[f"{key}_{k2}"] = v2
        else:
            flat[key] = v
    if "phi_kind" in flat:
        flat["phi"] = flat.pop("phi_kind")
    return flat


def resolve(args: argparse.Namespace, defaults: dict[str, Any]) -> dict[str, Any]:
    """Merge with precedence flags > config file > defaults."""
    cfg = dict(defaults)
    cfg.update({k: v for k, v in load_config(getattr(args, "config", None)).items() if k in defaults or k == "seed"})
    cfg.update({k: v for k, v in vars(args).items() if v is not None and k in defaults})
    for k in ("seed", "threads"):
        if getattr(args, k, None) is not None:
            cfg[k] = getattr(args, k)
    cfg.setdefault("seed", 0)
    return cfg


def _gints(text: str):
    return [parse_gint(t) for t in str(text).split(",") if t.strip()]


def _forms(text: str):
    return [_gints(part) for part in str(text).split(";") if part.strip()]


def _interval(text: str) -> tuple[int, int]:
    lo, hi = (int(t) for t in str(text).split(","))
    return lo, hi


# -- commands ---------------------------------------------------------------------

def cmd_sieve(args) -> tuple[dict, int, str]:
    cfg = resolve(args, {"norm_bound": 100, "list": None})
    bound = int(cfg["norm_bound"])
    table = build_table(bound)
    show = cfg["list"] if cfg["list"] is not None else len(table) <= 10_000
    results = {"norm_bound": bound, "count": len(table)}
    if show:
        results["primes"] = describe(table)
    if args.out:
        save_table(table, args.out)
        results["table_file"] = args.out
    return results | {"_config": cfg}, EXIT_OK, f"{len(table)} canonical primes with norm <= {bound}"


def _weight_table(N: int, c_exponent: float, w: int):
    NR = float(N) ** (2 * c_exponent)
    return build_table(max(math.ceil(NR) + 1, w, 100))


def cmd_weight(args):
    from .gyweight import WeightConfig, mean_nu, nu

    cfg = resolve(args, {"N": 10007, "epsilon": 1 / 128, "w": 5, "c_exponent": 0.05, "phi": "smooth",
                         "b": None, "at": None, "mean": None, "mode": "auto", "samples": 200_000})
    table = _weight_table(int(cfg["N"]), float(cfg["c_exponent"]), int(cfg["w"]))
    b = parse_gint(str(cfg["b"])) if cfg["b"] is not None else None
    wc = WeightConfig.build(int(cfg["N"]), table, epsilon=float(cfg["epsilon"]), w=int(cfg["w"]),
                            c_exponent=float(cfg["c_exponent"]), phi=cfg["phi"], b=b, seed=int(cfg["seed"]))
    results: dict[str, Any] = {"parameters": wc.to_dict()}
    for pt in cfg["at"] or []:
        x, y = (int(t) for t in str(pt).split(","))
        results.setdefault("nu", []).append({"x": [x, y], "value": nu((x, y), wc, table)})
    if cfg["mean"] or not cfg["at"]:
        est = mean_nu(wc, table, mode=cfg["mode"], samples=int(cfg["samples"]), seed=int(cfg["seed"]))
        results["mean"] = est.to_dict()
    summary = f"W={wc.W} b={format_gint(wc.b)} N(R)={wc.R ** 2:.4g}"
    if "mean" in results:
        summary += f" E(nu)={results['mean']['value']:.6f}"
    return results | {"_config": cfg, "_warnings": list(wc.warnings)}, EXIT_OK, summary


def cmd_localfactors(args):
    return LOCAL[args.what](args)


def _lf_omega(args):
    from .localfactors import LinearFormFamily, omega_bruteforce, omega_crt

    cfg = resolve(args, {"forms": "1,i", "shifts": None, "moduli": "2+i", "W": 1})
    forms = _forms(cfg["forms"])
    shifts = _gints(cfg["shifts"]) if cfg["shifts"] else None
    fam = LinearFormFamily(forms, shifts)
    moduli = _gints(cfg["moduli"])
    W = int(cfg["W"])
    brute = omega_bruteforce(moduli, fam, W)
    table = build_table(max(100, max(q.norm() for q in moduli), W))
    crt = omega_crt(moduli, fam, W, table)
    ok = brute == crt
    res = {"family": fam.to_dict(), "moduli": [q.to_pair() for q in moduli], "W": W,
           "omega_bruteforce": str(brute), "omega_crt": str(crt), "agree": ok}
    return res | {"_config": cfg}, EXIT_OK if ok else EXIT_CHECK, f"omega = {brute} ({'agree' if ok else 'DISAGREE'})"


def _lf_zeta(args):
    from .localfactors import zeta_gauss_remainder

    cfg = resolve(args, {"sigma": "1.01,1.05,1.1", "cutoff": 1_000_000, "bound": 5.0})
    rows = [zeta_gauss_remainder(float(s), int(cfg["cutoff"]), float(cfg["bound"])) for s in str(cfg["sigma"]).split(",")]
    ok = all(abs(r.value) <= r.bound for r in rows)
    res = {"remainders": [r.to_dict() for r in rows], "cutoff": int(cfg["cutoff"]), "within_bound": ok}
    return res | {"_config": cfg}, EXIT_OK if ok else EXIT_CHECK, " ".join(f"{r.sigma}:{r.value:.4f}" for r in rows)


def _lf_cphi(args):
    from .localfactors import c_phi_prime, c_phi_prime_fourier

    cfg = resolve(args, {"phi": "triangle", "fourier": None, "resolution": 200})
    val = c_phi_prime(cfg["phi"], int(cfg["resolution"]))
    res = {"phi": cfg["phi"], "c_phi_prime": val}
    ok = True
    if cfg["phi"] == "triangle":
        res["closed_form"] = 64 / math.pi
        res["abs_error"] = abs(val - 64 / math.pi)
        ok = res["abs_error"] <= 1e-9
    if cfg["fourier"]:
        f = c_phi_prime_fourier(cfg["phi"])
        res["fourier"] = f
        res["fourier_rel_error"] = abs(f - val) / abs(val)
        ok = ok and res["fourier_rel_error"] <= 1e-3
    return res | {"_config": cfg}, EXIT_OK if ok else EXIT_CHECK, f"c'_phi({cfg['phi']}) = {val:.6f}"


def _lf_gycheck(args):
    from .gyweight import compute_W
    from .localfactors import LinearFormFamily, empirical_gy, gy_main_term

    cfg = resolve(args, {"N_R": 1000.0, "w": 5, "phi": "triangle", "shift": "i", "box_side": 400_000,
                         "samples": 400_000, "low": 0.8, "high": 1.25})
    NR = float(cfg["N_R"])
    table = build_table(max(math.ceil(NR) + 1, int(cfg["w"]), 100))
    W, phi_W = compute_W(int(cfg["w"]), table)
    R = math.sqrt(NR)
    fam = LinearFormFamily([[1]], [parse_gint(str(cfg["shift"]))])
    side = int(cfg["box_side"])
    emp = empirical_gy(fam, [(0, side)], R, W, cfg["phi"], table,
                       samples=int(cfg["samples"]), seed=int(cfg["seed"]), side_floor=side)
    main = gy_main_term(1, W, R, cfg["phi"], table, phi_W)
    ratio = emp.value / main
    ok = float(cfg["low"]) <= ratio <= float(cfg["high"])
    res = {"W": W, "phi_W": phi_W, "R": R, "N_R": NR, "empirical": emp.to_dict(), "main_term": main,
           "ratio": ratio, "tolerance": [float(cfg["low"]), float(cfg["high"])], "passed": ok}
    return res | {"_config": cfg, "_warnings": list(emp.warnings)}, EXIT_OK if ok else EXIT_CHECK, f"ratio {ratio:.4f}"


def _lf_corrcheck(args):
    from .gyweight import compute_W
    from .localfactors import correlation_check

    cfg = resolve(args, {"v": "1", "h": "0,1", "w": 2, "b": "i", "N_R": 100.0, "phi": "triangle",
                         "interval": "1,20001", "kappa": 1.0, "margin": 5.0})
    NR = float(cfg["N_R"])
    table = build_table(max(math.ceil(NR) + 1, int(cfg["w"]), 100))
    W, phi_W = compute_W(int(cfg["w"]), table)
    rep = correlation_check(parse_gint(str(cfg["v"])), _gints(cfg["h"]), W=W, b=parse_gint(str(cfg["b"])),
                            R=math.sqrt(NR), phi=cfg["phi"], table=table, interval=_interval(cfg["interval"]),
                            kappa=float(cfg["kappa"]), margin=float(cfg["margin"]), phi_W=phi_W)
    return rep.to_dict() | {"_config": cfg}, EXIT_OK if rep.passed else EXIT_CHECK, f"lhs {rep.lhs:.4g} vs rhs {rep.rhs:.4g}"


LOCAL = {"omega": _lf_omega, "zeta": _lf_zeta, "cphi": _lf_cphi, "gycheck": _lf_gycheck, "corrcheck": _lf_corrcheck}


def cmd_boxnorm(args):
    from .boxnorm import box_norm, box_norm_power, load_edge_function, load_system

    cfg = resolve(args, {"system": None, "edge": None, "fn": None})
    if not cfg["fn"]:
        raise CliError("--fn is required")
    f = load_edge_function(cfg["fn"])
    if cfg["edge"] is not None:
        edge = tuple(int(t) for t in str(cfg["edge"]).split(",") if t.strip())
        if tuple(sorted(edge)) != f.edge:
            raise CliError(f"--edge {edge} does not match the function's edge {f.edge}")
    if cfg["system"]:
        system = load_system(cfg["system"])
        if system.sizes_of(f.edge) != f.shape:
            raise CliError("function shape does not match the system's vertex sizes")
    res = {"edge": list(f.edge), "shape": list(f.shape), "box_norm": box_norm(f), "box_norm_power": box_norm_power(f)}
    return res | {"_config": cfg}, EXIT_OK, f"||f|| = {res['box_norm']:.6g}"


def cmd_decompose(args):
    from .boxnorm import load_edge_function
    from .decompose import random_measure, tower

    cfg = resolve(args, {"fn": None, "nu": None, "epsilon": 0.1, "sigma": 1e-3, "K_max": None,
                         "synthetic": None, "density": 0.5})
    if cfg["synthetic"]:
        n = int(cfg["synthetic"])
        rng = np.random.default_rng(int(cfg["seed"]))
        nu = random_measure((n, n), rng)
        f = nu * (rng.random((n, n)) < float(cfg["density"]))
    else:
        if not (cfg["fn"] and cfg["nu"]):
            raise CliError("give --fn and --nu, or --synthetic SIDE")
        f, nu = load_edge_function(cfg["fn"]).dense(), load_edge_function(cfg["nu"]).dense()
    K_max = int(cfg["K_max"]) if cfg["K_max"] is not None else None
    st = tower(f, nu, float(cfg["epsilon"]), float(cfg["sigma"]), K_max)
    res = st.to_dict()
    return res | {"_config": cfg}, EXIT_OK if st.terminated else EXIT_CHECK, \
        f"K={st.K} terminated={st.terminated} final norm {st.final_box_norm:.4f} <= {st.threshold:.4f}?"


def cmd_search(args):
    from .constellation import SearchStats, Shape, iter_search, normalize

    cfg = resolve(args, {"shape": "0,1", "a_bound": 20, "r_bound": 4, "unexceptional_only": None,
                         "limit": None, "negative": None})
    shape = Shape.parse(str(cfg["shape"]))
    norm_shape = normalize(shape)
    stats = SearchStats()
    out = open(args.out, "w") if args.out else sys.stdout
    limit = int(cfg["limit"]) if cfg["limit"] is not None else None
    n = 0
    try:
        for c in iter_search(shape, int(cfg["a_bound"]), int(cfg["r_bound"]), None,
                             unexceptional_only=bool(cfg["unexceptional_only"]), negative=bool(cfg["negative"]),
                             stats=stats):
            out.write(json.dumps(c.to_dict()) + "\n")
            n += 1
            if limit is not None and n >= limit:
                break
    finally:
        if out is not sys.stdout:
            out.close()
    meta = {"command": "search", "config": cfg, "shape": shape.to_dict(), "normalized": norm_shape.to_dict(),
            "found": n, "candidates": stats.candidates, "rejected_by_verifier": stats.rejected_by_verifier}
    print(json.dumps(meta), file=sys.stderr)
    return None, EXIT_OK if stats.rejected_by_verifier == 0 else EXIT_CHECK, f"{n} constellations"


# -- parser ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--threads", type=int, default=d, help="worker threads (computations here are single-threaded)")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--out", default=d, metavar="FILE")
    p.add_argument("--config", default=d, metavar="FILE", help="JSON or YAML key-value file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussprimes", description="Gaussian prime constellations at finite scale")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("sieve", cmd_sieve, "tabulate canonical Gaussian primes")
    p.add_argument("--norm-bound", type=int)
    p.add_argument("--list", action="store_true", default=None)

    p = add("weight", cmd_weight, "evaluate the majorant nu")
    p.add_argument("--N", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--w", type=int)
    p.add_argument("--c-exponent", type=float)
    p.add_argument("--phi", choices=["smooth", "triangle"])
    p.add_argument("--b")
    p.add_argument("--at", action="append", metavar="X,Y")
    p.add_argument("--mean", action="store_true", default=None)
    p.add_argument("--mode", choices=["auto", "exact", "sample"])
    p.add_argument("--samples", type=int)

    p = add("localfactors", cmd_localfactors, "local densities, zeta remainders and GY checks")
    lsub = p.add_subparsers(dest="what", required=True, parser_class=_Parser)

    def ladd(name, help_):
        q = lsub.add_parser(name, help=help_)
        _common(q, suppress=True)
        return q

    q = ladd("omega", "local density by brute force and by CRT")
    q.add_argument("--forms", help="forms separated by ';', coefficients by ','")
    q.add_argument("--shifts")
    q.add_argument("--moduli")
    q.add_argument("--W", type=int)
    q = ladd("zeta", "remainder of the Dedekind zeta of Z[i]")
    q.add_argument("--sigma", help="comma-separated values in (1, 1.5]")
    q.add_argument("--cutoff", type=int)
    q.add_argument("--bound", type=float)
    q = ladd("cphi", "the constant c'_phi")
    q.add_argument("--phi", choices=["smooth", "triangle"])
    q.add_argument("--fourier", action="store_true", default=None)
    q.add_argument("--resolution", type=int)
    q = ladd("gycheck", "empirical single-form GY ratio")
    q.add_argument("--N-R", dest="N_R", type=float)
    q.add_argument("--w", type=int)
    q.add_argument("--phi", choices=["smooth", "triangle"])
    q.add_argument("--shift")
    q.add_argument("--box-side", type=int)
    q.add_argument("--samples", type=int)
    q.add_argument("--low", type=float)
    q.add_argument("--high", type=float)
    q = ladd("corrcheck", "correlation bound along a line")
    q.add_argument("--v")
    q.add_argument("--h")
    q.add_argument("--w", type=int)
    q.add_argument("--b")
    q.add_argument("--N-R", dest="N_R", type=float)
    q.add_argument("--phi", choices=["smooth", "triangle"])
    q.add_argument("--interval", metavar="LO,HI")
    q.add_argument("--kappa", type=float)
    q.add_argument("--margin", type=float)

    p = add("boxnorm", cmd_boxnorm, "box norm of an edge function")
    p.add_argument("--system", metavar="FILE")
    p.add_argument("--edge", metavar="J1,J2,...")
    p.add_argument("--fn", metavar="FILE")

    p = add("decompose", cmd_decompose, "energy-increment tower")
    p.add_argument("--fn", metavar="FILE")
    p.add_argument("--nu", metavar="FILE")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--K-max", dest="K_max", type=int)
    p.add_argument("--synthetic", type=int, metavar="SIDE", help="random measure on SIDE x SIDE instead of files")
    p.add_argument("--density", type=float)

    p = add("search", cmd_search, "exhaustive constellation search (JSON lines)")
    p.add_argument("--shape")
    p.add_argument("--a-bound", type=int)
    p.add_argument("--r-bound", type=int)
    p.add_argument("--unexceptional-only", action="store_true", default=None)
    p.add_argument("--limit", type=int)
    p.add_argument("--negative", action="store_true", default=None)
    return parser


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        results, code, summary = args.func(args)
    except (CliError, CoverageError, ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        kind = "coverage error" if isinstance(exc, CoverageError) else \
            "config error" if isinstance(exc, ConfigError) else "error"
        print(f"gaussprimes: {kind}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if results is not None:
        cfg = results.pop("_config", {})
        warnings = results.pop("_warnings", [])
        command = args.command if args.command != "localfactors" else f"localfactors {args.what}"
        report = {"command": command, "config": cfg, "seed": cfg.get("seed", 0),
                  "results": results, "warnings": warnings,
                  "timings": {"elapsed_s": time.perf_counter() - start}}
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
        if args.out and args.command != "sieve":
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
    status = {EXIT_OK: "ok", EXIT_CHECK: "CHECK FAILED"}.get(code, "error")
    print(f"gaussprimes {args.command}: {summary} [{status}]", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
