"""Command-line entry point.

Every command produces a RunManifest: the parsed arguments, the full input
documents with digests, the result payload and timing.  `replay` re-runs a
manifest and compares payload bytes.

Exit codes:
  0 success
  1 a verification failed (or a replay differed)
  2 parse error, invalid arguments or invalid shapes
  3 exhaustive limit exceeded
  4 rank not exact while --require-exact is set
  5 regularization blocked (Unknown state)
"""
from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__
from .errors import LimitExceeded, ParseError, PolytowerError
from .serialize import (collection_from_json, collection_to_json, digest, dumps, load_json,
                        map_from_json, map_to_json, tower_from_json, tower_to_json)

MANIFEST = "polytower.manifest/1"

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_LIMIT, EXIT_INEXACT, EXIT_BLOCKED = 0, 1, 2, 3, 4, 5


class CommandResult:
    def __init__(self, payload, code=EXIT_OK, timing=None):
        self.payload = payload
        self.code = code
        self.timing = timing or {}


def _unwrap(doc):
    """Accept a manifest wherever a document is expected (use its payload)."""
    if isinstance(doc, dict) and doc.get("format") == MANIFEST:
        return doc["payload"]
    return doc


def _limit(args):
    return args.get("limit")


def _poly(docs, name="poly"):
    return map_from_json(_unwrap(docs[name]))


def _tower(docs, name="tower"):
    if name not in docs:
        return None
    return tower_from_json(_unwrap(docs[name]))


# ---------------------------------------------------------------------------
# commands: each takes (args, docs) and returns a CommandResult

def cmd_bias(args, docs):
    from .analytic import bias, monte_carlo_bias

    P = _poly(docs)
    T = _tower(docs, "on")
    if args.get("mc"):
        est = monte_carlo_bias(P, T, samples=args["mc"], seed=args.get("seed", 0),
                               t=args.get("t", 1))
        return CommandResult({"mode": "monte-carlo", **est.to_json()})
    rep = bias(P, T, t=args.get("t", 1), threads=args.get("threads", 1), limit=_limit(args))
    return CommandResult({"mode": "exact", **rep.to_json()})


def cmd_rank(args, docs):
    from .rank import (partition_rank, relative_partition_rank, relative_rank,
                       schmidt_rank, verify_certificate)
    from .serialize import certificate_from_json, certificate_to_json

    mode = args["mode"]
    P = map_from_json(_unwrap(docs["map"]))
    T = _tower(docs)
    lower = [] if T is None else list(T.maps())
    if "certificate" in docs:
        cert = certificate_from_json(_unwrap(docs["certificate"]))
        ok, reason = verify_certificate(P, lower, cert)
        return CommandResult({"certificate_check": ok, "reason": reason,
                              "claimed_rank": cert.claimed_rank},
                             EXIT_OK if ok else EXIT_FAIL)
    budget = args.get("budget")
    if mode == "schmidt":
        rb = schmidt_rank(P, budget)
    elif mode == "relative":
        if hasattr(P, "shape"):
            rb = relative_partition_rank(P, lower, budget)
        else:
            rb = relative_rank(P, lower, budget)
    elif mode == "partition":
        rb = relative_partition_rank(P, lower, budget) if lower else partition_rank(P, budget)
    else:
        raise ParseError(f"unknown mode {mode}")
    out = {"mode": mode, **rb.to_json()}
    if rb.certificate is not None:
        out["certificate"] = certificate_to_json(rb.certificate)
        out["certificate_check"] = verify_certificate(P, lower, rb.certificate)[0]
    code = EXIT_OK
    if args.get("require_exact") and rb.status != "Exact":
        code = EXIT_INEXACT
    return CommandResult(out, code)


def _reg_config(args, docs):
    from .regularize import RegularizationConfig

    base = dict(_unwrap(docs["config"])) if "config" in docs else {}
    for key, arg in (("A", "A"), ("B", "B"), ("s", "s"), ("rank_budget", "budget"),
                     ("max_iterations", "max_iterations"), ("limit", "limit")):
        if args.get(arg) is not None:
            base[key] = args[arg]
    return RegularizationConfig.from_json(base)


def cmd_regularize(args, docs):
    from .regularize import ideal_containment, regular_decomposition, verify_decomposition

    cfg = _reg_config(args, docs)
    R = collection_from_json(_unwrap(docs["maps"]))
    Q = _tower(docs, "base")
    res = regular_decomposition(Q, R, cfg)
    out = {"result": res.to_json()}
    if res.status == "Complete":
        rep = verify_decomposition(Q, R, res, cfg)
        out["verification"] = rep.to_json()
        if args.get("containment"):
            out["ideal_containment"] = ideal_containment(Q, R, res)
        code = EXIT_OK if rep.all_pass else EXIT_FAIL
    else:
        code = EXIT_BLOCKED
    return CommandResult(out, code)


def cmd_verify(args, docs):
    from . import analytic
    from .analytic import q_power

    sub = args["check"]
    lim = _limit(args)
    s = args.get("s")
    if sub == "atom-size":
        T = _tower(docs)
        rep = analytic.check_s_uniform(T, s if s is not None else 1,
                                       threads=args.get("threads", 1), limit=lim)
        out, ok = rep.to_json(), rep.passed
    elif sub == "fubini":
        T = _tower(docs)
        g = _poly(docs, "g")
        I = [int(t) - 1 for t in args.get("factors", [])]
        rep = analytic.fubini_defect(T, I, g, limit=lim)
        out = rep.to_json()
        tol = float(q_power(T.p, s)) if s is not None else 1e-9
        ok = rep.defect <= tol
        out["tolerance"] = tol
    elif sub == "rank-bias":
        P, T = _poly(docs), _tower(docs)
        rep = analytic.rank_bias_gap(P, T, args["r"], s if s is not None else 1,
                                     args.get("A") or 1, args.get("B") or 1,
                                     budget=args.get("budget"), limit=lim)
        out, ok = rep.to_json(), rep.passed
    elif sub == "fibers":
        polys = collection_from_json(_unwrap(docs["polys"]))
        rep = analytic.fiber_statistics(polys, threads=args.get("threads", 1), limit=lim)
        bound = q_power(polys[0].p, s if s is not None else 1)
        out = rep.to_json()
        out["bound"] = float(bound)
        ok = rep.passes(bound)
    elif sub == "nullstellensatz":
        from .rank import nullstellensatz_solve, verify_membership
        from .serialize import membership_to_json

        P, T = _poly(docs), _tower(docs)
        sol = nullstellensatz_solve(P, T)
        out = membership_to_json(sol)
        ok = sol.feasible and verify_membership(P, T, sol)
    elif sub == "vanishing":
        P, T = _poly(docs), _tower(docs)
        frac = analytic.vanishing_fraction(P, T, threads=args.get("threads", 1), limit=lim)
        out = {"nonvanishing_fraction": float(frac), "nonvanishing_exact": str(frac),
               "vanishes": frac == 0}
        if s is not None:
            bound = q_power(P.p, s)
            out["bound"] = float(bound)
            ok = frac <= bound
        else:
            ok = frac == 0
    elif sub == "cauchy-schwarz":
        P, T = _poly(docs), _tower(docs)
        lhs, rhs = analytic.cauchy_schwarz_gap(P, T, args.get("k", 1), limit=lim)
        slack = float(q_power(P.p, s)) if s is not None else 0.0
        out = {"lhs": lhs, "rhs": rhs, "slack": slack}
        ok = lhs <= rhs + slack + 1e-12
    elif sub == "cubes":
        P, T = _poly(docs), _tower(docs)
        rep = analytic.cube_vanishing_fraction(P, T, args.get("m", 1), sample=args.get("sample"),
                                               seed=args.get("seed", 0), limit=lim)
        out, ok = rep.to_json(), rep.bad == 0
    else:
        raise ParseError(f"unknown check {sub}")
    out = {"check": sub, **out, "pass": bool(ok)}
    return CommandResult(out, EXIT_OK if ok else EXIT_FAIL)


def _ints(text):
    if isinstance(text, list):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def cmd_random(args, docs):
    from .errors import CharacteristicTooSmall, ShapeMismatch
    from .field import SpaceShape, check_prime, make_rng
    from .multiaffine import MultiAffineMap, MultiLinearMap
    from .poly import random_poly
    from .tower import random_tower

    kind = args["kind"]
    p = check_prime(args["p"])
    rng = make_rng(args.get("seed", 0))
    density = args.get("density", 1.0)
    if kind == "poly":
        n, d = args["n"], args["d"]
        if n < 1 or d < 0:
            raise ShapeMismatch("n must be positive and d non-negative")
        if d >= p:
            raise CharacteristicTooSmall(f"degree {d} must be below p={p}")
        doc = map_to_json(random_poly(p, n, d, rng, density, args.get("homogeneous", False)))
    elif kind in ("multilinear", "multiaffine"):
        dims = tuple(_ints(args["dims"]))
        if not dims or any(x < 1 for x in dims):
            raise ShapeMismatch("dims must be positive")
        shape = SpaceShape(p, dims)
        sup = [t - 1 for t in _ints(args["support"])] if args.get("support") else range(len(dims))
        if kind == "multilinear":
            m = MultiLinearMap.random(shape, sup, rng, density, nonzero=True)
        else:
            m = MultiAffineMap.random(shape, sup, rng, density)
        doc = map_to_json(m)
    elif kind == "tower":
        degrees, sizes = _ints(args["degrees"]), _ints(args["sizes"])
        if len(degrees) != len(sizes) or args["n"] < 1:
            raise ShapeMismatch("degrees and sizes must have equal length")
        T = random_tower(p, args["n"], degrees, sizes, rng, args.get("homogeneous", False), density)
        doc = tower_to_json(T)
    elif kind == "collection":
        degrees = _ints(args["degrees"])
        if any(d >= p for d in degrees):
            raise CharacteristicTooSmall("degrees must be below p")
        doc = collection_to_json([random_poly(p, args["n"], d, rng, density) for d in degrees])
    else:
        raise ParseError(f"unknown kind {kind}")
    return CommandResult(doc)


def cmd_bench(args, docs):
    from .analytic import level_histogram
    from .field import make_rng
    from .poly import random_poly

    p, n, d = args.get("p", 5), args.get("n", 9), args.get("d", 3)
    threads = args.get("threads") or 1
    P = random_poly(p, n, d, make_rng(args.get("seed", 0)))
    t0 = time.perf_counter()
    h1 = level_histogram(P, threads=1, limit=_limit(args))
    t1 = time.perf_counter()
    hk = level_histogram(P, threads=threads, limit=_limit(args))
    t2 = time.perf_counter()
    single, multi = t1 - t0, t2 - t1
    points = p ** n
    payload = {"p": p, "n": n, "d": d, "points": points, "histogram": h1.tolist(),
               "identical": h1.tolist() == hk.tolist(), "threads": threads}
    timing = {"single_thread_seconds": single, "threaded_seconds": multi,
              "speedup": single / multi if multi > 0 else None,
              "points_per_second": points / single if single > 0 else None,
              "cpu_count": os.cpu_count()}
    return CommandResult(payload, timing=timing)


COMMANDS = {
    "bias": cmd_bias,
    "rank": cmd_rank,
    "regularize": cmd_regularize,
    "verify": cmd_verify,
    "random": cmd_random,
    "bench": cmd_bench,
}


# ---------------------------------------------------------------------------
# manifests

def run_command(command, args, docs):
    """Run one command and wrap the result in a RunManifest dict."""
    handler = COMMANDS[command]
    t0 = time.perf_counter()
    res = handler(args, docs)
    elapsed = time.perf_counter() - t0
    manifest = {
        "format": MANIFEST,
        "command": command,
        "args": args,
        "inputs": {name: {"sha256": digest(doc), "document": doc}
                   for name, doc in sorted(docs.items())},
        "config": {k: args[k] for k in ("A", "B", "s", "budget", "limit", "threads",
                                        "max_iterations") if args.get(k) is not None},
        "seed": args.get("seed"),
        "version": __version__,
        "timing": {"seconds": elapsed, **res.timing},
        "payload": res.payload,
        "payload_sha256": digest(res.payload),
        "exit_code": res.code,
    }
    return manifest, res.code


def replay(manifest):
    """Re-run a manifest; returns (identical, new_manifest)."""
    if manifest.get("format") != MANIFEST:
        raise ParseError("not a run manifest")
    docs = {name: entry["document"] for name, entry in manifest.get("inputs", {}).items()}
    for name, entry in manifest.get("inputs", {}).items():
        if digest(entry["document"]) != entry["sha256"]:
            raise ParseError(f"input {name} does not match its digest")
    new, _ = run_command(manifest["command"], manifest["args"], docs)
    same = dumps(new["payload"]).encode("utf-8") == dumps(manifest["payload"]).encode("utf-8")
    return same, new


# ---------------------------------------------------------------------------
# argument parsing

FILE_ARGS = {
    "bias": {"poly": "poly", "on": "on"},
    "rank": {"poly": "map", "ml": "map", "tower": "tower", "certificate": "certificate"},
    "regularize": {"maps": "maps", "polys": "maps", "base": "base", "config": "config"},
    "verify": {"poly": "poly", "tower": "tower", "polys": "polys", "g": "g"},
    "random": {},
    "bench": {},
}


def _common(sp, seed=True):
    sp.add_argument("--out", help="write JSON here instead of stdout")
    sp.add_argument("--format", choices=("json", "pretty"), default="pretty")
    sp.add_argument("--payload-only", action="store_true",
                    help="emit only the result payload, not the manifest")
    sp.add_argument("--limit", type=int, default=None, help="exhaustive enumeration cap")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    if seed:
        sp.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="polytower",
                                 description="Bias, rank and regular decompositions over prime fields.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bias", help="exact or Monte Carlo bias")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--on", help="tower whose zero locus is the domain")
    sp.add_argument("--t", type=int, default=1, help="character exponent")
    sp.add_argument("--mc", type=int, default=None, help="Monte Carlo sample count")
    _common(sp)

    sp = sub.add_parser("rank", help="Schmidt, partition or relative rank")
    sp.add_argument("--mode", choices=("schmidt", "partition", "relative"), required=True)
    sp.add_argument("--poly")
    sp.add_argument("--ml")
    sp.add_argument("--tower")
    sp.add_argument("--certificate", help="check this certificate instead of searching")
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--require-exact", action="store_true")
    _common(sp)

    sp = sub.add_parser("regularize", help="regular decomposition of a collection")
    sp.add_argument("--maps")
    sp.add_argument("--polys")
    sp.add_argument("--base", help="tower Q the output must be regular relative to")
    sp.add_argument("--config", help="JSON with A, B, s, rank_budget, max_iterations")
    sp.add_argument("--A", type=float, default=None)
    sp.add_argument("--B", type=float, default=None)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--max-iterations", type=int, default=None)
    sp.add_argument("--containment", action="store_true",
                    help="also check every input lies in each output ideal")
    _common(sp)

    sp = sub.add_parser("verify", help="exact checks of the analytic statements")
    sp.add_argument("check", choices=("atom-size", "fubini", "rank-bias", "fibers",
                                      "nullstellensatz", "vanishing", "cauchy-schwarz", "cubes"))
    sp.add_argument("--poly")
    sp.add_argument("--tower")
    sp.add_argument("--polys")
    sp.add_argument("--g", help="test function g (chi of this map) for fubini")
    sp.add_argument("--factors", help="comma-separated 1-based factor set I for fubini")
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--r", type=int, default=None)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--A", type=float, default=None)
    sp.add_argument("--B", type=float, default=None)
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--sample", type=int, default=None)
    _common(sp)

    sp = sub.add_parser("random", help="seeded generators in the JSON formats")
    sp.add_argument("kind", choices=("poly", "multilinear", "multiaffine", "tower", "collection"))
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--dims")
    sp.add_argument("--support")
    sp.add_argument("--degrees")
    sp.add_argument("--sizes")
    sp.add_argument("--density", type=float, default=1.0)
    sp.add_argument("--homogeneous", action="store_true")
    _common(sp)

    sp = sub.add_parser("bench", help="exhaustive histogram timing")
    sp.add_argument("--p", type=int, default=5)
    sp.add_argument("--n", type=int, default=9)
    sp.add_argument("--d", type=int, default=3)
    _common(sp)

    sp = sub.add_parser("replay", help="re-run a manifest and compare payloads")
    sp.add_argument("manifest")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("json", "pretty"), default="pretty")
    return ap


OUTPUT_KEYS = {"out", "format", "payload_only", "command", "manifest"}


def _args_dict(ns):
    files = FILE_ARGS.get(ns.command, {})
    args = {}
    for key, val in vars(ns).items():
        if key in OUTPUT_KEYS or key in files or val is None or val is False:
            continue
        args[key] = val
    if "factors" in args:
        args["factors"] = _ints(args["factors"])
    if ns.command in ("bias", "verify", "bench") and args.get("threads") is None:
        args["threads"] = os.cpu_count() or 1
    return args


def _load_docs(ns):
    docs = {}
    for flag, name in FILE_ARGS.get(ns.command, {}).items():
        path = getattr(ns, flag, None)
        if path:
            docs[name] = load_json(path)
    return docs


def _emit(obj, ns):
    text = dumps(obj, pretty=getattr(ns, "format", "pretty") == "pretty") + "\n"
    if getattr(ns, "out", None):
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(kind, exc, ns):
    _emit({"format": "polytower.error/1", "error": kind, "message": str(exc)}, ns)


def main(argv=None):
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        if ns.command == "replay":
            same, new = replay(load_json(ns.manifest))
            _emit({"format": "polytower.replay/1", "identical": same,
                   "payload_sha256": new["payload_sha256"]}, ns)
            return EXIT_OK if same else EXIT_FAIL
        if ns.command == "rank" and not (ns.poly or ns.ml):
            raise ParseError("rank needs --poly or --ml")
        if ns.command == "regularize" and not (ns.maps or ns.polys):
            raise ParseError("regularize needs --maps or --polys")
        docs = _load_docs(ns)
        args = _args_dict(ns)
        manifest, code = run_command(ns.command, args, docs)
        _emit(manifest["payload"] if ns.payload_only else manifest, ns)
        return code
    except LimitExceeded as exc:
        _error("LimitExceeded", exc, ns)
        return EXIT_LIMIT
    except (ParseError, PolytowerError, ValueError, KeyError, TypeError) as exc:
        _error(type(exc).__name__, exc, ns)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
