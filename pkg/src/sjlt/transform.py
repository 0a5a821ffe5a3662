"""Parameter planning, assembly and application of ``f_q = d^(-1/q) P H D``.

``D`` is an l-wise independent sign diagonal (:mod:`sjlt.kwise`), ``H`` the
normalized Walsh-Hadamard matrix and ``P = sqrt(n/k) * (signed k-sparse rows)``
(:mod:`sjlt.rowsampler`).  Logarithms are natural throughout.

Modes
-----
sparse
    The construction above; requires ``k <= n/3`` by default.
achlioptas_fallback
    l2 only, when the sparse ``k`` is too large: a dense ``d x n`` matrix with
    i.i.d. entries ``+1, 0, -1`` w.p. ``1/6, 2/3, 1/6`` scaled by ``sqrt(3/d)``.
dense_l1
    l1 only, when ``n/3 < k``: ``k := n`` so ``P`` is a full sign matrix.
no_reduction
    l1 parameters admit no useful embedding; nothing is built.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _backend
from .kwise import SignFamily, build_sign_family, required_independence, seed_bits
from .randbits import BitReport, BitSource, log2_exact
from .rowsampler import RowPattern, expected_iterations_exact, sample_rows

MODES = ("sparse", "achlioptas_fallback", "dense_l1", "no_reduction")
SPARSE_LIMITS = ("n/3", "n")
E = math.e


# -- validation --------------------------------------------------------------

def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def _check_delta(delta):
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")


def _check_kappa(kappa):
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")


def _sparse_ok(k, n, sparse_limit):
    if sparse_limit not in SPARSE_LIMITS:
        raise ValueError(f"sparse_limit must be one of {SPARSE_LIMITS}")
    return 3 * k <= n if sparse_limit == "n/3" else k <= n


# -- plans -------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingPlan:
    n: int
    d: int
    k: int
    l: int
    q: int
    eps: float
    delta: float
    kappa: float | None
    mode: str
    seed: int = 0
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        log2_exact(self.n)
        if self.q not in (1, 2):
            raise ValueError("q must be 1 or 2")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.d < 1 or not 1 <= self.k <= self.n:
            raise ValueError(f"need d >= 1 and 1 <= k <= n (d={self.d}, k={self.k}, n={self.n})")
        if self.l < 2 or self.l % 2:
            raise ValueError("l must be an even integer >= 2")

    @property
    def scale(self) -> float:
        """Factor applied to the raw signed row sums."""
        if self.mode == "achlioptas_fallback":
            return math.sqrt(3.0 / self.d)
        return math.sqrt(self.n / self.k) * self.d ** (-1.0 / self.q)

    def with_seed(self, seed: int) -> "EmbeddingPlan":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EmbeddingPlan":
        return cls(**data)


def manual_plan(n, d, k, q=2, *, eps=0.5, delta=0.05, kappa=None, mode="sparse", l=None, seed=0):
    """A plan with caller-chosen ``d`` and ``k`` (experiments, verification)."""
    l = required_independence(n, delta) if l is None else l
    return EmbeddingPlan(n, d, k, l, q, eps, delta, kappa, mode, seed,
                         {"source": "manual"})


def l2_dimensions(n, eps, delta):
    """Smallest integer ``d, k`` meeting the l2 theorem's bounds."""
    d = math.ceil(1.55 * (1 + 2 * eps) ** 2 / eps ** 2 * math.log(3 / delta))
    k = math.ceil(max(8 * E / 3 * math.log(6 * d / delta), 20 * E) * math.log(2 * n / delta))
    return d, k


def plan_l2(n, eps, delta, *, seed=0, sparse_limit="n/3") -> EmbeddingPlan:
    log2_exact(n)
    _check_eps(eps)
    _check_delta(delta)
    d, k = l2_dimensions(n, eps, delta)
    l = required_independence(n, delta)
    prov = {
        "d": "ceil(1.55 (1+2eps)^2/eps^2 ln(3/delta))",
        "k": "ceil(max(8e/3 ln(6d/delta), 20e) ln(2n/delta))",
        "l": "2 ceil(ln(n/delta))",
        "k_formula": k,
        "sparse_limit": sparse_limit,
    }
    if _sparse_ok(k, n, sparse_limit):
        return EmbeddingPlan(n, d, k, l, 2, eps, delta, None, "sparse", seed, prov)
    prov["fallback"] = f"k={k} exceeds {sparse_limit}; dense +1/0/-1 matrix instead"
    return EmbeddingPlan(n, d, n, l, 2, eps, delta, None, "achlioptas_fallback", seed, prov)


def _l1_d(eps, kappa, log_term, c_num=math.pi, c_lin=math.sqrt(math.pi / 2) * 8 / 3):
    return math.ceil((c_num + c_lin * kappa * eps) / (kappa ** 2 * eps ** 2) * log_term)


def _l1_k(coef, floor, log_term):
    return math.ceil(max(coef, floor) * log_term)


def _largest_feasible_kappa(coef_of, floor, log_term, n):
    """sup{kappa in (0,1) : ceil(max(coef_of(kappa), floor) * log_term) <= n}, or None."""
    def ok(kap):
        return _l1_k(coef_of(kap), floor, log_term) <= n

    lo, hi = 1e-9, 1.0 - 1e-12
    if not ok(lo):
        return None
    if ok(hi):
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _l1_mode(n, eps, delta, kappa, d_of, coef_of, floor, log_term, seed, prov,
             sparse_limit, raise_kappa, l):
    k = _l1_k(coef_of(kappa), floor, log_term)
    d = d_of(kappa)
    prov = dict(prov, k_formula=k, kappa_requested=kappa, sparse_limit=sparse_limit)
    if _sparse_ok(k, n, sparse_limit) and k <= n:
        return EmbeddingPlan(n, d, k, l, 1, eps, delta, kappa, "sparse", seed, prov)
    kstar = _largest_feasible_kappa(coef_of, floor, log_term, n)
    if kstar is None:
        prov["reason"] = "k > n for every kappa in (0,1); reduction would be at most proportional"
        return EmbeddingPlan(n, n, n, l, 1, eps, delta, kappa, "no_reduction", seed, prov)
    kap = kstar if (raise_kappa or kappa > kstar) else kappa
    d = d_of(kap)
    if d >= n:
        prov["reason"] = f"with k = n the target dimension d={d} is not below n"
        return EmbeddingPlan(n, n, n, l, 1, eps, delta, kap, "no_reduction", seed, prov)
    prov["fallback"] = f"k={k} exceeds {sparse_limit}; k := n, kappa := {kap:.6g}"
    return EmbeddingPlan(n, d, n, l, 1, eps, delta, kap, "dense_l1", seed, prov)


def plan_l1(n, eps, delta, kappa=0.5, *, seed=0, sparse_limit="n/3", raise_kappa=True) -> EmbeddingPlan:
    """Plan for ``f_1``.

    In the dense regime ``k`` becomes ``n`` and ``kappa`` moves to the largest
    value whose ``k`` bound still fits in ``n`` (which shrinks ``d``); with
    ``raise_kappa=False`` it only moves down, and only when it must.
    """
    log2_exact(n)
    _check_eps(eps)
    _check_delta(delta)
    _check_kappa(kappa)
    L = math.log(2 * n / delta)
    prov = {
        "d": "ceil((pi + sqrt(pi/2) 8/3 kappa eps)/(kappa^2 eps^2) ln(2/delta))",
        "k": "ceil(max(9 pi e/(4 (1-kappa)^2 eps^2), 20e) ln(2n/delta))",
        "l": "2 ceil(ln(n/delta))",
    }
    return _l1_mode(
        n, eps, delta, kappa,
        d_of=lambda kap: _l1_d(eps, kap, math.log(2 / delta)),
        coef_of=lambda kap: 9 * math.pi * E / (4 * (1 - kap) ** 2 * eps ** 2),
        floor=20 * E, log_term=L, seed=seed, prov=prov,
        sparse_limit=sparse_limit, raise_kappa=raise_kappa,
        l=required_independence(n, delta),
    )


def plan_for_pointset(n, N, eps, p, q=2, kappa=0.5, *, seed=0, sparse_limit="n/3",
                      raise_kappa=True, l1_variant="theorem") -> EmbeddingPlan:
    """Plan for embedding ``N`` points with overall failure probability ``p``.

    Uses ``delta = p / N^2`` and the rounded constants for the N-point case.
    ``l1_variant="printed"`` uses ``(1 - kappa^2)`` in the l1 ``k`` constant
    instead of ``(1 - kappa)^2``.
    """
    log2_exact(n)
    _check_eps(eps)
    if N < 2:
        raise ValueError("N must be >= 2")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if q not in (1, 2):
        raise ValueError("q must be 1 or 2")
    N2p = N * N / p
    delta = p / (N * N)
    l = required_independence(n, delta)
    prov = {
        "delta": "p / N^2",
        "union_bound": f"C({N},2) pairs x 2 delta = {math.comb(N, 2) * 2 * delta:.6g} < p",
        "l": "2 ceil(ln(n N^2 / p))",
        "points": N,
        "fail": p,
    }
    if q == 2:
        d = math.ceil(1.55 * (1 + 2 * eps) ** 2 / eps ** 2 * math.log(3 * N2p))
        k = math.ceil(max(7.25 * math.log(6 * d * N2p), 55) * math.log(2 * n * N2p))
        prov.update(d="ceil(1.55 (1+2eps)^2/eps^2 ln(3N^2/p))",
                    k="ceil(max(7.25 ln(6dN^2/p), 55) ln(2nN^2/p))",
                    k_formula=k, sparse_limit=sparse_limit)
        if _sparse_ok(k, n, sparse_limit):
            return EmbeddingPlan(n, d, k, l, 2, eps, delta, None, "sparse", seed, prov)
        prov["fallback"] = f"k={k} exceeds {sparse_limit}; dense +1/0/-1 matrix instead"
        return EmbeddingPlan(n, d, n, l, 2, eps, delta, None, "achlioptas_fallback", seed, prov)

    _check_kappa(kappa)
    if l1_variant == "theorem":
        coef_of = lambda kap: 19.3 / ((1 - kap) ** 2 * eps ** 2)  # noqa: E731
        prov["k"] = "ceil(max(19.3/((1-kappa)^2 eps^2), 55) ln(2nN^2/p))"
    elif l1_variant == "printed":
        coef_of = lambda kap: 19.3 / ((1 - kap ** 2) * eps ** 2)  # noqa: E731
        prov["k"] = "ceil(max(19.3/((1-kappa^2) eps^2), 55) ln(2nN^2/p))"
    else:
        raise ValueError("l1_variant must be 'theorem' or 'printed'")
    prov["d"] = "ceil((3.15 + 3.4 kappa eps)/(kappa^2 eps^2) ln(2N^2/p))"
    return _l1_mode(
        n, eps, delta, kappa,
        d_of=lambda kap: _l1_d(eps, kap, math.log(2 * N2p), 3.15, 3.4),
        coef_of=coef_of, floor=55, log_term=math.log(2 * n * N2p),
        seed=seed, prov=prov, sparse_limit=sparse_limit,
        raise_kappa=raise_kappa, l=l,
    )


def expected_bits(plan: EmbeddingPlan) -> dict:
    """Expected bit consumption per component (uses the exact ``E T``)."""
    out = {}
    if plan.mode == "no_reduction":
        return out
    if plan.mode == "achlioptas_fallback":
        out["fallback"] = 3 * plan.d * plan.n * 8 / 6
        return out
    out["signs"] = seed_bits(plan.n, plan.l)
    if plan.mode == "dense_l1":
        out["fallback"] = plan.d * plan.n
    else:
        w = log2_exact(plan.n)
        out["rows"] = plan.d * plan.k + plan.d * expected_iterations_exact(plan.n, plan.k) * w
    return out


# -- matrices ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SparseSignMatrix:
    plan: EmbeddingPlan
    indices: np.ndarray     # (d, k) sorted column indices per row
    signs: np.ndarray       # (d, k) int8 +-1, attached in index order
    iterations: np.ndarray  # (d,) draws made by each row's rejection loop

    @property
    def scale(self) -> float:
        return math.sqrt(self.plan.n / self.plan.k)

    def row(self, i: int) -> tuple[RowPattern, np.ndarray]:
        w = log2_exact(self.plan.n)
        T = int(self.iterations[i])
        return RowPattern(self.plan.n, self.plan.k, self.indices[i], T, T * w), self.signs[i]

    def to_dense(self) -> np.ndarray:
        """``P`` as a dense ``(d, n)`` array including ``sqrt(n/k)``."""
        P = np.zeros((self.plan.d, self.plan.n))
        np.put_along_axis(P, self.indices, self.signs.astype(np.float64), axis=1)
        return P * self.scale


@dataclass(frozen=True, eq=False)
class DenseFallbackMatrix:
    plan: EmbeddingPlan
    entries: np.ndarray  # (d, n) int8

    @property
    def scale(self) -> float:
        return self.plan.scale


@dataclass(frozen=True, eq=False)
class Embedding:
    plan: EmbeddingPlan
    sign_family: SignFamily | None
    matrix: SparseSignMatrix | DenseFallbackMatrix
    report: BitReport

    def __iter__(self):
        return iter((self.sign_family, self.matrix, self.report))

    def apply(self, u) -> np.ndarray:
        return apply(self, u)


def _achlioptas_entries(d, n, src: BitSource) -> np.ndarray:
    """``d*n`` draws of {+1, 0, -1} w.p. {1/6, 2/3, 1/6} from 3-bit rejection sampling."""
    need = d * n
    out = np.empty(need, dtype=np.int8)
    filled = 0
    lut = np.array([1, -1, 0, 0, 0, 0], dtype=np.int8)
    while filled < need:
        rem = need - filled
        m = int(rem * 4 / 3) + 64
        vals = src.peek_uints(3, m)
        keep = np.flatnonzero(vals < 6)
        if len(keep) >= rem:
            keep = keep[:rem]
            src.advance(3 * (int(keep[-1]) + 1))
        else:
            src.advance(3 * m)
        out[filled:filled + len(keep)] = lut[vals[keep]]
        filled += len(keep)
    return out.reshape(d, n)


def build_embedding(plan: EmbeddingPlan, src: BitSource | None = None) -> Embedding:
    """Sample ``D`` and ``P`` for ``plan``; all randomness comes from ``src``.

    ``D`` is read from ``src`` itself, row ``i`` of a sparse ``P`` from child
    stream ``i`` of ``src``, and a dense fallback matrix from one further child.
    """
    if plan.mode == "no_reduction":
        raise ValueError("plan has mode 'no_reduction'; there is nothing to build")
    src = BitSource(plan.seed) if src is None else src
    report = BitReport()
    n, d, k = plan.n, plan.d, plan.k

    D = None
    if plan.mode != "achlioptas_fallback":
        start = src.bits_consumed
        D = build_sign_family(n, plan.l, src)
        report.add("signs", src.bits_consumed - start)
        report.idealized["signs"] = seed_bits(n, plan.l)

    if plan.mode == "sparse":
        rows = src.spawn_sources(d)
        keys = np.array([[r.k0, r.k1] for r in rows], dtype=np.uint64).reshape(d, 2)
        indices, signs, iters = sample_rows(n, k, keys)
        w = log2_exact(n)
        for r, T in zip(rows, iters):
            r.advance(int(T) * w + k)
        report.add("rows", sum(r.bits_consumed for r in rows))
        report.idealized["rows"] = d * k + int(iters.sum()) * w
        P = SparseSignMatrix(plan, indices, signs, iters)
    else:
        fsrc = src.spawn_sources(1)[0]
        if plan.mode == "achlioptas_fallback":
            entries = _achlioptas_entries(d, n, fsrc)
        else:
            entries = (1 - 2 * fsrc.draw_bits(d * n).astype(np.int8)).reshape(d, n)
        report.add("fallback", fsrc.bits_consumed)
        P = DenseFallbackMatrix(plan, entries)
    return Embedding(plan, D, P, report)


# -- application -------------------------------------------------------------

def pad_pow2(u) -> np.ndarray:
    """Zero-pad the last axis to the next power of two (no-op if already one)."""
    a = np.asarray(u, dtype=np.float64)
    m = a.shape[-1] if a.ndim else 0
    if a.ndim == 0 or m == 0:
        raise ValueError("cannot pad an empty vector")
    target = 1 << (m - 1).bit_length()
    if target == m:
        return a.copy()
    pad = [(0, 0)] * (a.ndim - 1) + [(0, target - m)]
    return np.pad(a, pad)


def precondition(emb: Embedding, X: np.ndarray) -> np.ndarray:
    """``H D x`` for each row of ``X`` (a fresh array)."""
    out = np.ascontiguousarray(X * emb.sign_family.signs, dtype=np.float64)
    _backend.kernels.wht_inplace(out)
    return out


def apply(emb: Embedding, u) -> np.ndarray:
    """``f_q(u)`` for one vector of length ``n`` or each row of a ``(m, n)`` batch."""
    plan = emb.plan
    X = np.asarray(u, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != plan.n:
        raise ValueError(f"expected vectors of length n={plan.n}, got shape {np.shape(u)}")
    P = emb.matrix
    if plan.mode == "achlioptas_fallback":
        Y = (X @ P.entries.T.astype(np.float64)) * plan.scale
    else:
        V = precondition(emb, X)
        if plan.mode == "sparse":
            Y = _backend.kernels.sparse_apply(P.indices, P.signs, V) * plan.scale
        else:
            Y = (V @ P.entries.T.astype(np.float64)) * plan.scale
    return Y[0] if single else Y


def l1_norm_estimate(plan: EmbeddingPlan, y) -> np.ndarray | float:
    """``sqrt(pi/2) * ||y||_1`` (per row for a batch)."""
    y = np.asarray(y, dtype=np.float64)
    est = math.sqrt(math.pi / 2) * np.abs(y).sum(axis=-1)
    return float(est) if y.ndim == 1 else est


def norm_estimate(plan: EmbeddingPlan, y):
    """Estimate of ``||u||_2`` from ``y = f_q(u)`` matching the plan's target norm."""
    y = np.asarray(y, dtype=np.float64)
    if plan.q == 1:
        return l1_norm_estimate(plan, y)
    est = np.sqrt((y * y).sum(axis=-1))
    return float(est) if y.ndim == 1 else est
