"""Exact and Monte Carlo checks of the bounds behind the transform.

Every Monte Carlo check is a one-sided or two-sided comparison with a 4-sigma
margin and a fixed seed, so a run is deterministic.  For a frequency compared
against a probability bound ``b`` the standard error is the binomial one at
the boundary, ``sqrt(b (1 - b) / N)``; for moment-type estimates it is the
sample standard deviation over ``sqrt(N)``.

Checks on ``W = P v`` sample the rows of ``P`` directly (no ``H D``), with
``v`` taken from a :class:`TestVectorSpec`.
"""

import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import ndtr, ndtri

from . import _backend
from .kwise import build_sign_family, required_independence
from .randbits import BitSource, log2_exact
from .transform import EmbeddingPlan, apply, build_embedding

SIGMAS = 4.0
R0 = 0.1
MOMENT_BOUNDS = {4: 3.1, 6: 17.0, 8: 127.0, 10: 1283.0}
S_GRID = tuple(0.5 * i for i in range(1, 11))
SHAPES = ("spike-capped", "flat", "random-unit", "two-block")
SQRT_2_OVER_PI = math.sqrt(2 / math.pi)


class PreconditionError(ValueError):
    """A check was asked to run outside the regime its bound covers."""


# -- reports -----------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    claimed_bound: float
    observed: float
    stderr: float
    passed: bool
    trials: int
    elapsed: float = 0.0
    target: float | None = None  # set for two-sided checks
    detail: list = field(default_factory=list)

    def to_record(self) -> dict:
        rec = {"name": self.name, "bound": self.claimed_bound, "observed": self.observed,
               "stderr": self.stderr, "passed": bool(self.passed), "trials": self.trials,
               "elapsed": round(self.elapsed, 6)}
        if self.target is not None:
            rec["target"] = self.target
        if self.detail:
            rec["detail"] = self.detail
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.target is None:
            cmp = f"observed={self.observed:.6g} <= {self.claimed_bound:.6g} + {SIGMAS:g}*{self.stderr:.3g}"
        else:
            cmp = (f"|{self.observed:.6g} - {self.target:.6g}| <= "
                   f"{self.claimed_bound:.6g} + {SIGMAS:g}*{self.stderr:.3g}")
        return f"{status} {self.name}: {cmp} (trials={self.trials}, {self.elapsed:.2f}s)"


def _upper(observed, bound, stderr):
    return observed <= bound + SIGMAS * stderr


def _two_sided(observed, target, bound, stderr):
    return abs(observed - target) <= bound + SIGMAS * stderr


def _binomial_stderr(bound, trials):
    b = min(max(bound, 0.0), 1.0)
    return math.sqrt(b * (1 - b) / trials)


def _point(label, bound, observed, stderr, target=None):
    ok = _upper(observed, bound, stderr) if target is None else _two_sided(observed, target, bound, stderr)
    rec = {"at": label, "bound": bound, "observed": observed, "stderr": stderr, "passed": bool(ok)}
    if target is not None:
        rec["target"] = target
    return rec


def _summarize(name, points, trials, t0) -> CheckReport:
    """One report for a grid of points: the point with the least headroom represents it."""
    def headroom(p):
        dev = p["observed"] if "target" not in p else abs(p["observed"] - p["target"])
        return p["bound"] + SIGMAS * p["stderr"] - dev

    worst = min(points, key=headroom)
    return CheckReport(name, worst["bound"], worst["observed"], worst["stderr"],
                       all(p["passed"] for p in points), trials, time.perf_counter() - t0,
                       worst.get("target"), points)


# -- workers -----------------------------------------------------------------

def worker_count() -> int:
    env = os.environ.get("SJLT_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("SJLT_THREADS must be >= 1")
        return n
    return min(os.cpu_count() or 1, 8)


def _map_ordered(fn, chunks):
    """``[fn(c) for c in chunks]``, possibly on threads; output order is input order."""
    workers = worker_count()
    if workers == 1 or len(chunks) < 2:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, chunks))


def _chunks(total, size):
    return [(s, min(s + size, total)) for s in range(0, total, size)]


# -- test vectors ------------------------------------------------------------

@dataclass(frozen=True)
class TestVectorSpec:
    n: int
    k: int
    alpha: float
    shape: str = "flat"

    __test__ = False  # not a pytest class

    @property
    def nka(self) -> float:
        return self.n / self.k * self.alpha ** 2

    def require_nka(self):
        if self.nka > R0 * (1 + 1e-12):
            raise PreconditionError(
                f"(n/k) alpha^2 = {self.nka:.6g} exceeds r0 = {R0} (n={self.n}, k={self.k}, alpha={self.alpha:.6g})")


def _waterfill(g, alpha):
    """Unit vector ``sign(g) * min(c |g|, alpha)`` for the ``c`` that makes it unit."""
    a = np.abs(g)
    lo, hi = 0.0, alpha / a[a > 0].min()
    for _ in range(200):
        c = 0.5 * (lo + hi)
        if np.sum(np.minimum(c * a, alpha) ** 2) < 1.0:
            lo = c
        else:
            hi = c
    v = np.sign(g) * np.minimum(hi * a, alpha)
    return v / np.linalg.norm(v)


def make_vector(spec: TestVectorSpec, src: BitSource | None = None) -> np.ndarray:
    """A unit vector of the requested shape with ``||v||_inf <= alpha``."""
    n, alpha = spec.n, spec.alpha
    log2_exact(n)
    if not 1 <= spec.k <= n:
        raise ValueError("need 1 <= k <= n")
    if alpha * math.sqrt(n) < 1 - 1e-12:
        raise ValueError(f"no unit vector in dimension {n} has sup-norm <= {alpha}")
    if spec.shape == "flat":
        v = np.full(n, 1 / math.sqrt(n))
    elif spec.shape == "spike-capped":
        a = min(alpha, 1.0)
        m = min(int(math.floor(1 / a ** 2 + 1e-12)), n)
        v = np.zeros(n)
        v[:m] = a
        rest = 1.0 - m * a * a
        if rest > 1e-15 and m < n:
            v[m] = math.sqrt(rest)
        v /= np.linalg.norm(v)
    elif spec.shape == "random-unit":
        rng = (src if src is not None else BitSource(0, 0x7E57)).numpy_rng()
        g = rng.standard_normal(n)
        v = g / np.linalg.norm(g)
        if np.abs(v).max() > alpha:
            v = _waterfill(g, alpha)
    elif spec.shape == "two-block":
        q = max(n // 4, 1)
        a = min(alpha, math.sqrt(2 / n))
        v = np.empty(n)
        v[:q] = a
        v[q:] = math.sqrt(max(1 - q * a * a, 0.0) / (n - q)) if n > q else 0.0
        v /= np.linalg.norm(v)
    else:
        raise ValueError(f"unknown shape {spec.shape!r}; choose from {SHAPES}")
    if np.abs(v).max() > alpha * (1 + 1e-9):
        raise ValueError("internal: generated vector exceeds its sup-norm cap")
    return v


# -- sampling W = P v ---------------------------------------------------------

def sample_W(n, k, v, count, src: BitSource) -> np.ndarray:
    """``count`` independent coordinates ``W_i = sqrt(n/k) sum_j xi_ij eps_ij v_j``."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    keys = src.spawn(count)
    scale = math.sqrt(n / k)

    def run(span):
        a, b = span
        return _backend.kernels.sparse_rows_dot(np.ascontiguousarray(keys[a:b]), n, k, v)

    parts = _map_ordered(run, _chunks(count, 1 << 14))
    return np.concatenate(parts) * scale if parts else np.empty(0)


# -- checks ------------------------------------------------------------------

def linf_threshold(n, delta):
    return math.sqrt(2 * math.e * math.log(2 * n / delta)) / math.sqrt(n)


def check_linf_flattening(n, delta, trials, src: BitSource, vectors=None) -> CheckReport:
    """Frequency of ``||H D u||_inf >= alpha`` over fresh l-wise ``D``; bound ``delta``."""
    t0 = time.perf_counter()
    log2_exact(n)
    alpha = linf_threshold(n, delta)
    l = required_independence(n, delta)
    if vectors is None:
        e1 = np.zeros(n)
        e1[0] = 1.0
        vectors = {"e1": e1, "flat": np.full(n, 1 / math.sqrt(n)),
                   "random": make_vector(TestVectorSpec(n, 1, 1.0, "random-unit"), src.split(0xF1A7))}
    names = list(vectors)
    U = np.array([vectors[k] / np.linalg.norm(vectors[k]) for k in names])
    children = src.spawn_sources(trials)

    def run(span):
        a, b = span
        hits = np.zeros(len(names), dtype=np.int64)
        for c in children[a:b]:
            D = build_sign_family(n, l, c).signs
            V = np.ascontiguousarray(U * D)
            _backend.kernels.wht_inplace(V)
            hits += np.abs(V).max(axis=1) >= alpha
        return hits

    hits = sum(_map_ordered(run, _chunks(trials, 256)))
    se = _binomial_stderr(delta, trials)
    points = [_point(nm, delta, float(h) / trials, se) for nm, h in zip(names, hits)]
    rep = _summarize(f"linf_flattening(n={n},delta={delta})", points, trials, t0)
    for p in rep.detail:
        p["alpha"] = alpha
    return rep


def falling_ratio(n, k, a) -> Fraction:
    """``k (k-1) ... (k-a+1) / (n (n-1) ... (n-a+1))`` (zero when ``a > k``)."""
    num = den = 1
    for i in range(a):
        num *= k - i
        den *= n - i
    return Fraction(num, den)


def check_negative_correlation(n, k, budget=10 ** 6) -> CheckReport:
    """Exact ``E prod_{i in A} xi_i`` over all k-subsets, for every nonempty ``A``."""
    t0 = time.perf_counter()
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    total = math.comb(n, k)
    if total > budget or 2 ** n > budget:
        raise ValueError(f"enumeration budget exceeded: C({n},{k}) = {total}, 2^{n} sets A")
    masks = np.array([sum(1 << i for i in S) for S in itertools.combinations(range(n), k)], dtype=np.int64)
    worst_ratio = Fraction(0)
    ok = True
    by_size = {}
    for A in range(1, 1 << n):
        a = A.bit_count()
        exact = Fraction(int(np.count_nonzero((masks & A) == A)), total)
        indep = Fraction(k, n) ** a
        ok &= exact == falling_ratio(n, k, a) and exact <= indep
        worst_ratio = max(worst_ratio, exact / indep)
        by_size.setdefault(a, exact)
        ok &= by_size[a] == exact  # exchangeability: depends on |A| only
    detail = [{"size": a, "exact": str(v), "independent": str(Fraction(k, n) ** a)}
              for a, v in sorted(by_size.items())]
    return CheckReport(f"negative_correlation(n={n},k={k})", 1.0, float(worst_ratio), 0.0,
                       bool(ok and worst_ratio <= 1), total, time.perf_counter() - t0, None, detail)


def tail_bound_Wi(s, n, k, alpha):
    """``2 exp(-s^2 / (2 + (2/3) sqrt(n/k) alpha s))``."""
    return 2 * math.exp(-s * s / (2 + (2 / 3) * math.sqrt(n / k) * alpha * s))


def one_sided_bernstein(s, n, k, alpha):
    """``exp(-s^2 / (2 (k/n) sigma^2 + 2 M s))`` with ``sigma^2 = n/k``, ``M = sqrt(n/k) alpha / 3``."""
    sigma2 = n / k
    M = math.sqrt(n / k) * alpha / 3
    return math.exp(-s * s / (2 * (k / n) * sigma2 + 2 * M * s))


def check_sparse_bernstein(n, k, v: TestVectorSpec, trials, src: BitSource, s_grid=S_GRID) -> CheckReport:
    t0 = time.perf_counter()
    vec = make_vector(v, src.split(0x5EED))
    W = sample_W(n, k, vec, trials, src)
    points = []
    for s in s_grid:
        b2 = min(1.0, tail_bound_Wi(s, n, k, v.alpha))
        points.append(_point(f"|W|>={s:g}", b2, float(np.mean(np.abs(W) >= s)), _binomial_stderr(b2, trials)))
        b1 = min(1.0, one_sided_bernstein(s, n, k, v.alpha))
        points.append(_point(f"W>={s:g}", b1, float(np.mean(W >= s)), _binomial_stderr(b1, trials)))
    return _summarize(f"sparse_bernstein(n={n},k={k},{v.shape})", points, trials, t0)


def check_moment_table(n, k, v: TestVectorSpec, trials, src: BitSource) -> CheckReport:
    v.require_nka()
    t0 = time.perf_counter()
    vec = make_vector(v, src.split(0x5EED))
    W = sample_W(n, k, vec, trials, src)
    W2 = W * W
    se = lambda x: float(x.std(ddof=1) / math.sqrt(trials))  # noqa: E731
    points = [_point("E W^2", 0.0, float(W2.mean()), se(W2), target=1.0)]
    P = W2
    for p in (4, 6, 8, 10):
        P = P * W2
        points.append(_point(f"E W^{p}", MOMENT_BOUNDS[p], float(P.mean()), se(P)))
    return _summarize(f"moment_table(n={n},k={k},{v.shape})", points, trials, t0)


def wasserstein_to_normal(x) -> float:
    """Exact ``d_W`` between the empirical law of ``x`` and ``N(0, 1)``.

    Integrates ``|x_(i) - z| phi(z)`` over ``z`` in each normal quantile cell
    ``[Phi^-1((i-1)/N), Phi^-1(i/N)]`` in closed form.
    """
    x = np.sort(np.asarray(x, dtype=np.float64))
    N = x.size
    grid = ndtri(np.arange(N + 1) / N)
    a, b = grid[:-1], grid[1:]
    c = np.clip(x, a, b)
    phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
    Fa, Fb, Fc = np.arange(N) / N, np.arange(1, N + 1) / N, ndtr(c)
    below = x * (Fc - Fa) - (phi(a) - phi(c))
    above = (phi(c) - phi(b)) - x * (Fb - Fc)
    return float(np.sum(below + above))


def wasserstein_slack(x) -> float:
    """``int sqrt(F_N (1 - F_N)) dx / sqrt(N)``, the usual scale of the empirical-quantile error."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    N = x.size
    F = np.arange(1, N) / N
    return float(np.sum(np.diff(x) * np.sqrt(F * (1 - F))) / math.sqrt(N))


def stein_bound(n, k, vec) -> float:
    """``3 (k/n) sum_j (n/k)^{3/2} |v_j|^3``."""
    return 3 * (k / n) * float(np.sum((n / k) ** 1.5 * np.abs(vec) ** 3))


def check_normal_approx(n, k, v: TestVectorSpec, trials, src: BitSource) -> CheckReport:
    t0 = time.perf_counter()
    vec = make_vector(v, src.split(0x5EED))
    W = sample_W(n, k, vec, trials, src)
    A = np.abs(W)
    points = [
        _point("E|W|", 1.5 * v.alpha * math.sqrt(n / k), float(A.mean()),
               float(A.std(ddof=1) / math.sqrt(trials)), target=SQRT_2_OVER_PI),
        _point("d_W(W,G)", stein_bound(n, k, vec), wasserstein_to_normal(W), wasserstein_slack(W)),
    ]
    return _summarize(f"normal_approx(n={n},k={k},{v.shape})", points, trials, t0)


def sum_squares_upper(t, d, n, k, alpha):
    return math.exp(-t * t / (6.2 * d + 12 * t)) + math.exp(-3 * k / (4 * n * alpha ** 2) + math.log(2 * d))


def sum_squares_lower(t, d):
    return math.exp(-t * t / (6 * d))


def sum_abs_two_sided(t, d):
    return 2 * math.exp(-t * t / (2 * d + 8 * t / 3))


def check_sum_deviation(plan: EmbeddingPlan, v: TestVectorSpec, trials, src: BitSource,
                        t_fracs=(0.1, 0.25, 0.5, 0.75, 1.0), abs_fracs=(0.05, 0.1, 0.2, 0.3)) -> CheckReport:
    """Tails of ``||W||_2^2`` around ``d`` and of ``||W||_1`` around its empirical mean."""
    v.require_nka()
    t0 = time.perf_counter()
    n, k, d = plan.n, plan.k, plan.d
    vec = make_vector(v, src.split(0x5EED))
    W = sample_W(n, k, vec, trials * d, src).reshape(trials, d)
    Z2 = (W * W).sum(axis=1)
    Z1 = np.abs(W).sum(axis=1)
    m1 = Z1.mean()
    points = []
    for f in t_fracs:
        t = f * d
        bu = min(1.0, sum_squares_upper(t, d, n, k, v.alpha))
        points.append(_point(f"Z2>=d+{t:g}", bu, float(np.mean(Z2 >= d + t)), _binomial_stderr(bu, trials)))
        bl = min(1.0, sum_squares_lower(t, d))
        points.append(_point(f"Z2<=d-{t:g}", bl, float(np.mean(Z2 <= d - t)), _binomial_stderr(bl, trials)))
    # The centre is the sample mean; |Z1 - m1| >= t implies |Z1 - E Z1| >= t - |m1 - E Z1|,
    # so the bound is evaluated at t shrunk by 4 standard errors of m1.
    shift = SIGMAS * float(Z1.std(ddof=1)) / math.sqrt(trials)
    dev = np.abs(Z1 - m1)
    for f in abs_fracs:
        t = f * d
        b = min(1.0, sum_abs_two_sided(max(t - shift, 0.0), d))
        points.append(_point(f"|Z1-mean|>={t:g}", b, float(np.mean(dev >= t)), _binomial_stderr(b, trials)))
    return _summarize(f"sum_deviation(d={d},n={n},k={k},{v.shape})", points, trials, t0)


def _distortion_ok(plan: EmbeddingPlan, Y, norms):
    eps = plan.eps
    if plan.q == 2:
        r = np.linalg.norm(Y, axis=-1) / norms
        return (r >= 1 / (1 + eps)) & (r <= 1 + eps)
    r = math.sqrt(math.pi / 2) * np.abs(Y).sum(axis=-1) / norms
    return (r >= 1 - eps) & (r <= 1 + eps)


def default_u_set(n, src: BitSource, randoms=3) -> dict:
    e1 = np.zeros(n)
    e1[0] = 1.0
    out = {"e1": e1, "flat": np.full(n, 1 / math.sqrt(n))}
    rng = src.split(0xA11CE).numpy_rng()
    for i in range(randoms):
        g = rng.standard_normal(n)
        out[f"random{i}"] = g / np.linalg.norm(g)
    return out


def check_end_to_end(plan: EmbeddingPlan, u_set, seeds, src: BitSource | None = None,
                     points=None, fail=None) -> CheckReport:
    """Distortion failure frequency over ``seeds`` independent embeddings.

    ``u_set`` maps names to vectors; each must fail at most ``2 delta`` of the
    time (+4 sigma).  With ``points`` (an ``(N, n)`` array) the event "some
    pair of points is distorted" is also counted, against ``fail``.
    """
    t0 = time.perf_counter()
    src = BitSource(plan.seed) if src is None else src
    names = list(u_set)
    U = np.array([u_set[nm] for nm in names], dtype=np.float64)
    norms = np.linalg.norm(U, axis=1)
    if np.any(norms == 0):
        raise ValueError("u_set contains a zero vector")
    if points is not None:
        X = np.asarray(points, dtype=np.float64)
        I, J = np.triu_indices(X.shape[0], 1)
        dnorm = np.linalg.norm(X[I] - X[J], axis=1)
        if np.any(dnorm == 0):
            raise ValueError("points must be distinct")
    children = src.spawn_sources(seeds)

    def run(span):
        a, b = span
        fails = np.zeros(len(names), dtype=np.int64)
        pair_fail = 0
        for c in children[a:b]:
            emb = build_embedding(plan, c)
            fails += ~_distortion_ok(plan, apply(emb, U), norms)
            if points is not None:
                Y = apply(emb, X)
                pair_fail += int(not np.all(_distortion_ok(plan, Y[I] - Y[J], dnorm)))
        return fails, pair_fail

    res = _map_ordered(run, _chunks(seeds, 64))
    fails = sum(r[0] for r in res)
    bound = min(1.0, 2 * plan.delta)
    se = _binomial_stderr(bound, seeds)
    pts = [_point(nm, bound, float(f) / seeds, se) for nm, f in zip(names, fails)]
    if points is not None:
        pf = fail if fail is not None else min(1.0, plan.delta * X.shape[0] ** 2)
        pts.append(_point(f"any of C({X.shape[0]},2) pairs", pf, sum(r[1] for r in res) / seeds,
                          _binomial_stderr(pf, seeds)))
    tag = f"end_to_end(q={plan.q},mode={plan.mode},n={plan.n},d={plan.d},k={plan.k})"
    return _summarize(tag, pts, seeds, t0)


# -- suites ------------------------------------------------------------------

SUITES = ("linf", "negcorr", "bernstein", "moments", "normal", "deviation", "endtoend")


def run_suite(name, trials=10_000, seed=0, n=None, k=None, d=64, delta=0.05, eps=0.5,
              alpha=None, shape="flat") -> list[CheckReport]:
    """Reports for one named suite (or ``"all"``) with the default configurations."""
    from .transform import manual_plan, plan_l2

    if name == "all":
        return [r for s in SUITES for r in run_suite(s, trials, seed, n, k, d, delta, eps, alpha, shape)]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    src = BitSource(seed, stream_id=SUITES.index(name) + 1)
    if name == "linf":
        return [check_linf_flattening(n or 1024, delta, trials, src)]
    if name == "negcorr":
        return [check_negative_correlation(n or 8, k or 3)]
    n = n or (1024 if name == "bernstein" else 4096)
    k = k or n // 4
    spec = TestVectorSpec(n, k, alpha if alpha is not None else 1 / math.sqrt(n), shape)
    if name == "bernstein":
        return [check_sparse_bernstein(n, k, spec, trials, src)]
    if name == "moments":
        return [check_moment_table(n, k, spec, trials, src)]
    if name == "normal":
        return [check_normal_approx(n, k, spec, trials, src)]
    if name == "deviation":
        return [check_sum_deviation(manual_plan(n, d, k), spec, trials, src)]
    n_e2e = 1024
    plan = plan_l2(n_e2e, eps, delta, seed=seed)
    seeds = max(2, min(trials, 2000))
    return [check_end_to_end(plan, default_u_set(n_e2e, src), seeds, src)]
