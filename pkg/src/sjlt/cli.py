"""``sjlt`` command line: plan, embed, verify, bench.

Exit codes: 0 ok, 1 a check failed, 2 usage or validation error,
3 the planner refuses (mode ``no_reduction``).
"""

import argparse
import json
import math
import sys
import time

import numpy as np

from . import _backend
from .randbits import BitSource
from .transform import (apply, build_embedding, expected_bits, pad_pow2, plan_for_pointset,
                        plan_l1, plan_l2)
from .vectorfile import VectorFileError, read_vectors, write_vectors
from .verify import SUITES, SHAPES, PreconditionError, _chunks, _map_ordered, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3

NO_REDUCTION_MSG = ("no useful embedding for these parameters: the sparsity k would exceed n for every "
                    "kappa, so the dimension could shrink at most proportionally")


class UsageError(Exception):
    pass


def _next_pow2(n):
    if n < 1:
        raise UsageError("--n must be >= 1")
    return 1 << (n - 1).bit_length()


def _make_plan(n, args, count=None):
    q = 1 if getattr(args, "l1", False) or getattr(args, "target", "l2") == "l1" else 2
    fail = getattr(args, "fail", None)
    points = getattr(args, "points", None)
    if fail is not None or points is not None:
        if fail is None:
            raise UsageError("--points needs --fail")
        N = points if points is not None else count
        if N is None:
            raise UsageError("--fail needs --points")
        return plan_for_pointset(n, N, args.eps, fail, q=q, kappa=args.kappa, seed=args.seed,
                                 sparse_limit=args.sparse_limit, l1_variant=args.l1_variant)
    if args.delta is None:
        raise UsageError("--delta is required (or --points/--fail)")
    if q == 1:
        return plan_l1(n, args.eps, args.delta, args.kappa, seed=args.seed, sparse_limit=args.sparse_limit)
    return plan_l2(n, args.eps, args.delta, seed=args.seed, sparse_limit=args.sparse_limit)


def _add_plan_flags(p):
    p.add_argument("--eps", type=float, required=True, help="distortion, in (0, 1)")
    p.add_argument("--delta", type=float, help="failure probability, in (0, 1/2)")
    p.add_argument("--kappa", type=float, default=0.5, help="l1 trade-off parameter (default 0.5)")
    p.add_argument("--points", type=int, help="number of points N (sets delta = fail / N^2)")
    p.add_argument("--fail", type=float, help="overall failure probability for N points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sparse-limit", choices=("n/3", "n"), default="n/3",
                   help="largest k that still uses sparse rows (default n/3)")
    p.add_argument("--l1-variant", choices=("theorem", "printed"), default="theorem",
                   help="l1 k constant for N points: (1-kappa)^2 or (1-kappa^2)")


def cmd_plan(args, out):
    n = _next_pow2(args.n)
    plan = _make_plan(n, args)
    bits = expected_bits(plan)
    pad = f" (padded from {args.n})" if n != args.n else ""
    kap = f" kappa={plan.kappa:.6g}" if plan.kappa is not None else ""
    kf = plan.provenance.get("k_formula")
    if kf is not None and kf != plan.k:
        kap += f" k_bound={kf}"
    print(f"d={plan.d} k={plan.k} mode={plan.mode} l={plan.l} q={plan.q} n={n}{pad} "
          f"eps={plan.eps:g} delta={plan.delta:.6g}{kap}", file=out)
    if bits:
        parts = " ".join(f"{c}={v:.1f}" for c, v in bits.items())
        print(f"expected bits: {parts} total={sum(bits.values()):.1f}", file=out)
    if args.json:
        print(json.dumps(plan.to_dict()), file=out)
    if plan.mode == "no_reduction":
        print(f"error: {NO_REDUCTION_MSG} ({plan.provenance.get('reason', '')})", file=sys.stderr)
        return EXIT_REFUSED
    return EXIT_OK


def embed_batch(emb, X, chunk=256):
    """Apply ``emb`` to the rows of ``X``; row order is kept whatever the scheduling."""
    parts = _map_ordered(lambda s: apply(emb, X[s[0]:s[1]]), _chunks(X.shape[0], chunk))
    return np.concatenate(parts) if parts else np.empty((0, emb.plan.d))


def cmd_embed(args, out):
    try:
        X = read_vectors(args.input, args.in_format)
    except (OSError, VectorFileError, ValueError) as e:
        raise UsageError(f"cannot read {args.input}: {e}") from None
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise UsageError(f"{args.input} holds no vectors")
    if not np.all(np.isfinite(X)):
        raise UsageError(f"{args.input} contains NaN or Inf")
    X = pad_pow2(X)
    plan = _make_plan(X.shape[1], args, count=X.shape[0])
    if plan.mode == "no_reduction":
        print(f"error: {NO_REDUCTION_MSG} ({plan.provenance.get('reason', '')})", file=sys.stderr)
        return EXIT_REFUSED
    emb = build_embedding(plan, BitSource(args.seed))
    Y = embed_batch(emb, X)
    fmt = args.out_format or ("csv" if args.output.endswith(".csv") else "f64le")
    write_vectors(args.output, Y, fmt)
    side = {"plan": plan.to_dict(), "bits": emb.report.to_dict(), "count": X.shape[0],
            "input_dim": int(X.shape[1]), "backend": _backend.active()}
    with open(args.output + ".plan.json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    print(f"embedded {X.shape[0]} vectors: n={plan.n} -> d={plan.d} mode={plan.mode} "
          f"bits={emb.report.total}", file=out)
    return EXIT_OK


def cmd_verify(args, out):
    try:
        reports = run_suite(args.suite, trials=args.trials, seed=args.seed, n=args.n, k=args.k,
                            d=args.d, delta=args.delta, eps=args.eps, alpha=args.alpha, shape=args.shape)
    except PreconditionError as e:
        raise UsageError(f"precondition violated: {e}") from None
    for r in reports:
        if args.no_timing:
            r.elapsed = 0.0
        print(r.line() if args.text else r.to_json(), file=out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_bench(args, out):
    ns = [int(x) for x in args.n.split(",")]
    epss = [float(x) for x in args.eps.split(",")]
    print("n,d,k,mode,time_us,bits", file=out)
    for n in ns:
        for eps in epss:
            n2 = _next_pow2(n)
            plan = plan_l2(n2, eps, args.delta, seed=args.seed, sparse_limit=args.sparse_limit)
            emb = build_embedding(plan, BitSource(args.seed))
            X = BitSource(args.seed, 0xBE4C).numpy_rng().standard_normal((args.batch, n2))
            apply(emb, X[:1])
            best = math.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                apply(emb, X)
                best = min(best, time.perf_counter() - t0)
            print(f"{n2},{plan.d},{plan.k},{plan.mode},{best / args.batch * 1e6:.3f},{emb.report.total}",
                  file=out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="sjlt", description="Reduced-randomness fast JL transform")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("plan", help="print planned parameters and expected bit use")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l1", action="store_true", help="plan for the l1 target norm")
    p.add_argument("--json", action="store_true", help="also print the plan as JSON")
    _add_plan_flags(p)

    p = sub.add_parser("embed", help="embed a file of vectors")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--target", choices=("l2", "l1"), default="l2")
    p.add_argument("--in-format", choices=("f64le", "csv"))
    p.add_argument("--out-format", choices=("f64le", "csv"))
    _add_plan_flags(p)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suite", help=f"one of {', '.join(SUITES + ('all',))}")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--alpha", type=float, help="sup-norm cap of the test vector (default 1/sqrt(n))")
    p.add_argument("--shape", choices=SHAPES, default="flat")
    p.add_argument("--text", action="store_true", help="human-readable lines instead of JSON")
    p.add_argument("--no-timing", action="store_true", help="report elapsed=0 for reproducible output")

    p = sub.add_parser("bench", help="time per vector and bits used (CSV)")
    p.add_argument("--n", default="1024,4096,16384", help="comma-separated dimensions")
    p.add_argument("--eps", default="0.5", help="comma-separated eps values")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--sparse-limit", choices=("n/3", "n"), default="n")
    return ap


COMMANDS = {"plan": cmd_plan, "embed": cmd_embed, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.cmd == "verify" and args.suite not in SUITES + ("all",):
        print(f"error: unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.cmd](args, out)
    except (UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
