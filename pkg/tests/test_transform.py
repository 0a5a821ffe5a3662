import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sjlt.kwise import seed_bits
from sjlt.randbits import BitSource
from sjlt.rowsampler import expected_iterations_exact
from sjlt.transform import (EmbeddingPlan, apply, build_embedding, expected_bits, l1_norm_estimate,
                            manual_plan, pad_pow2, plan_for_pointset, plan_l1, plan_l2, precondition)
from sjlt.wht import hadamard_matrix

mpmath.mp.dps = 40


def oracle_l2(n, eps, delta):
    eps, delta, E = mpmath.mpf(eps), mpmath.mpf(delta), mpmath.e
    d = int(mpmath.ceil(mpmath.mpf("1.55") * (1 + 2 * eps) ** 2 / eps ** 2 * mpmath.log(3 / delta)))
    k = int(mpmath.ceil(max(8 * E / 3 * mpmath.log(6 * d / delta), 20 * E) * mpmath.log(2 * n / delta)))
    return d, k


def oracle_l1(n, eps, delta, kappa):
    eps, delta, kappa, E, pi = (mpmath.mpf(eps), mpmath.mpf(delta), mpmath.mpf(kappa), mpmath.e, mpmath.pi)
    d = int(mpmath.ceil((pi + mpmath.sqrt(pi / 2) * 8 / 3 * kappa * eps) / (kappa * eps) ** 2
                        * mpmath.log(2 / delta)))
    k = int(mpmath.ceil(max(9 * pi * E / (4 * (1 - kappa) ** 2 * eps ** 2), 20 * E) * mpmath.log(2 * n / delta)))
    return d, k


# -- padding -----------------------------------------------------------------

def test_pad_examples():
    p = pad_pow2([1.0, 2.0, 3.0])
    assert p.tolist() == [1.0, 2.0, 3.0, 0.0]
    x = np.arange(8.0)
    assert np.array_equal(pad_pow2(x), x)


@given(st.lists(st.floats(-1e100, 1e100, allow_nan=False), min_size=1, max_size=70))
def test_pad_keeps_norm_exactly(u):
    p = pad_pow2(u)
    assert len(p) & (len(p) - 1) == 0 and len(p) >= len(u)
    assert p[:len(u)].tolist() == list(u) and not np.any(p[len(u):])
    assert math.hypot(*p) == math.hypot(*u)


def test_pad_rejects_empty():
    with pytest.raises(ValueError):
        pad_pow2([])


# -- planning ----------------------------------------------------------------

def test_plan_l2_example():
    p = plan_l2(2 ** 20, 0.2, 0.01)
    assert (p.d, p.k) == oracle_l2(2 ** 20, 0.2, 0.01) == (434, 1733)
    assert p.mode == "sparse" and p.q == 2 and p.l == 2 * math.ceil(math.log(2 ** 20 / 0.01))


def test_plan_l2_fallback_small_n():
    p = plan_l2(256, 0.2, 0.01)
    assert oracle_l2(256, 0.2, 0.01)[1] > 256 / 3
    assert p.mode == "achlioptas_fallback"
    assert p.provenance["k_formula"] == oracle_l2(256, 0.2, 0.01)[1]


@settings(max_examples=100)
@given(st.integers(4, 30), st.floats(0.01, 0.99), st.floats(1e-8, 0.49))
def test_plan_l2_matches_oracle(logn, eps, delta):
    n = 1 << logn
    p = plan_l2(n, eps, delta)
    d, k = oracle_l2(n, eps, delta)
    assert p.d == d
    assert p.provenance["k_formula"] == k
    assert (p.mode == "sparse") == (3 * k <= n)
    if p.mode == "sparse":
        assert p.k == k and 3 * p.k <= n


@given(st.floats(0.01, 0.98), st.floats(0.001, 0.01), st.floats(1e-6, 0.49))
def test_smaller_eps_never_decreases_d(eps, shrink, delta):
    assert plan_l2(1024, eps - shrink * eps, delta).d >= plan_l2(1024, eps, delta).d


@pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (1.0, 0.1), (0.5, 0.5), (0.5, 0.0)])
def test_plan_rejects_ranges(eps, delta):
    with pytest.raises(ValueError):
        plan_l2(1024, eps, delta)
    with pytest.raises(ValueError):
        plan_l1(1024, eps, delta)


def test_plan_rejects_non_pow2():
    with pytest.raises(ValueError):
        plan_l2(1000, 0.5, 0.05)


def test_plan_l1_example():
    p = plan_l1(2 ** 16, 0.5, 0.05, 0.5)
    assert (p.d, p.k) == oracle_l1(2 ** 16, 0.5, 0.05, 0.5) == (235, 4544)
    assert p.mode == "sparse" and p.q == 1 and p.kappa == 0.5


def test_plan_l1_pure():
    assert plan_l1(2 ** 16, 0.5, 0.05, 0.5) == plan_l1(2 ** 16, 0.5, 0.05, 0.5)


def test_kappa_near_one_leaves_sparse():
    assert plan_l1(2 ** 16, 0.5, 0.05, 0.5).mode == "sparse"
    assert plan_l1(2 ** 16, 0.5, 0.05, 0.95).mode != "sparse"


def test_plan_l1_dense_regime():
    n, eps, delta = 4096, 0.5, 0.05
    assert oracle_l1(n, eps, delta, 0.5)[1] > n / 3
    p = plan_l1(n, eps, delta, 0.5)
    assert p.mode == "dense_l1" and p.k == n
    # kappa moved to the largest value whose k bound still fits in n
    assert oracle_l1(n, eps, delta, p.kappa)[1] <= n
    assert oracle_l1(n, eps, delta, p.kappa + 1e-6)[1] > n
    assert p.d == oracle_l1(n, eps, delta, p.kappa)[0] < n


def test_plan_l1_dense_without_raising_kappa():
    p = plan_l1(4096, 0.5, 0.05, 0.3, raise_kappa=False)
    assert p.mode == "dense_l1" and p.kappa == 0.3
    assert p.d == oracle_l1(4096, 0.5, 0.05, 0.3)[0]


def test_plan_l1_no_reduction():
    p = plan_l1(1024, 0.5, 0.05, 0.5)
    assert p.mode == "no_reduction"
    with pytest.raises(ValueError):
        build_embedding(p)
    tiny = plan_l1(16, 0.5, 0.05, 0.5)
    assert tiny.mode == "no_reduction"


def test_pointset_example():
    p = plan_for_pointset(2 ** 20, 1000, 0.2, 0.5, q=2)
    assert p.delta == pytest.approx(5e-7, rel=1e-12)
    N2p = 1000 ** 2 / 0.5
    d = math.ceil(1.55 * 1.4 ** 2 / 0.04 * math.log(3 * N2p))
    k = math.ceil(max(7.25 * math.log(6 * d * N2p), 55) * math.log(2 * 2 ** 20 * N2p))
    assert (p.d, p.provenance["k_formula"]) == (d, k)
    assert "C(1000,2)" in p.provenance["union_bound"]


def test_pointset_two_points_union_bound():
    p = plan_for_pointset(1024, 2, 0.5, 0.2)
    assert math.comb(2, 2) * 2 * p.delta <= 0.2


def test_pointset_doubling_N_adds_rows():
    eps = 0.2
    step = 1.55 * (1 + 2 * eps) ** 2 / eps ** 2 * 2 * math.log(2)
    for N in (10, 100, 1000):
        a = plan_for_pointset(2 ** 20, N, eps, 0.5).d
        b = plan_for_pointset(2 ** 20, 2 * N, eps, 0.5).d
        assert abs((b - a) - step) <= 1


def test_pointset_l1_variants():
    a = plan_for_pointset(2 ** 24, 100, 0.5, 0.5, q=1, sparse_limit="n")
    b = plan_for_pointset(2 ** 24, 100, 0.5, 0.5, q=1, sparse_limit="n", l1_variant="printed")
    L = math.log(2 * 2 ** 24 * 100 ** 2 / 0.5)
    assert a.k == math.ceil(max(19.3 / (0.25 * 0.25), 55) * L)
    assert b.k == math.ceil(max(19.3 / (0.75 * 0.25), 55) * L)
    with pytest.raises(ValueError):
        plan_for_pointset(1024, 10, 0.5, 0.5, q=1, l1_variant="other")


@pytest.mark.parametrize("N,p", [(1, 0.5), (10, 0.0), (10, 1.0)])
def test_pointset_rejects(N, p):
    with pytest.raises(ValueError):
        plan_for_pointset(1024, N, 0.5, p)


def test_plan_invariants_enforced():
    with pytest.raises(ValueError):
        EmbeddingPlan(1024, 10, 2000, 20, 2, 0.5, 0.05, None, "sparse")
    with pytest.raises(ValueError):
        EmbeddingPlan(1024, 10, 10, 20, 3, 0.5, 0.05, None, "sparse")
    with pytest.raises(ValueError):
        EmbeddingPlan(1024, 10, 10, 20, 2, 0.5, 0.05, None, "bogus")


def test_plan_dict_round_trip():
    p = plan_l1(4096, 0.5, 0.05)
    assert EmbeddingPlan.from_dict(p.to_dict()) == p


# -- building ----------------------------------------------------------------

def test_bit_accounting_sparse():
    plan = manual_plan(1024, 40, 200, seed=5)
    D, P, report = build_embedding(plan)
    w = 10
    assert report.per_component["signs"] == seed_bits(1024, plan.l) == D.seed_bits_used
    assert report.per_component["rows"] == plan.d * plan.k + int(P.iterations.sum()) * w
    assert report.total == report.per_component["signs"] + report.per_component["rows"]
    assert report.matches_idealized


def test_bits_continue_on_the_stream():
    plan = manual_plan(256, 8, 32)
    src = BitSource(1)
    build_embedding(plan, src)
    assert src.bits_consumed == seed_bits(256, plan.l)
    assert src._children == plan.d


def test_rows_use_independent_child_streams():
    from sjlt.rowsampler import sample_subset

    plan = manual_plan(512, 6, 50, seed=9)
    src = BitSource(9)
    _, P, _ = build_embedding(plan, BitSource(9))
    for i in range(plan.d):
        assert sample_subset(512, 50, src.split(i)).indices.tolist() == P.indices[i].tolist()


def test_achlioptas_frequencies():
    plan = plan_l2(256, 0.2, 0.01, seed=3)
    _, P, report = build_embedding(plan)
    e = P.entries.ravel()
    N = e.size
    for val, prob in ((1, 1 / 6), (0, 2 / 3), (-1, 1 / 6)):
        assert abs(np.sum(e == val) - N * prob) <= 4 * math.sqrt(N * prob * (1 - prob))
    assert report.per_component["fallback"] % 3 == 0 and "signs" not in report.per_component


def test_dense_l1_entries_and_bits():
    plan = plan_l1(4096, 0.5, 0.05, seed=2)
    _, P, report = build_embedding(plan)
    assert P.entries.shape == (plan.d, 4096) and set(np.unique(P.entries)) == {-1, 1}
    assert report.per_component["fallback"] == plan.d * plan.n


def test_build_deterministic():
    plan = manual_plan(1024, 30, 100, seed=77)
    a, b = build_embedding(plan), build_embedding(plan)
    assert np.array_equal(a.sign_family.signs, b.sign_family.signs)
    assert a.matrix.indices.tobytes() == b.matrix.indices.tobytes()
    assert a.matrix.signs.tobytes() == b.matrix.signs.tobytes()
    u = np.random.default_rng(0).standard_normal(1024)
    assert apply(a, u).tobytes() == apply(b, u).tobytes()


def test_expected_bits_formula():
    plan = manual_plan(1024, 40, 200)
    eb = expected_bits(plan)
    assert eb["signs"] == seed_bits(1024, plan.l)
    assert eb["rows"] == pytest.approx(40 * 200 + 40 * expected_iterations_exact(1024, 200) * 10)


# -- applying ----------------------------------------------------------------

def dense_oracle(emb, u):
    """``d^(-1/q) P H D u`` with every factor materialised."""
    plan = emb.plan
    H = hadamard_matrix(plan.n)
    D = np.diag(emb.sign_family.signs.astype(float))
    return plan.d ** (-1 / plan.q) * emb.matrix.to_dense() @ (H @ (D @ u))


@pytest.mark.parametrize("q", [1, 2])
def test_apply_matches_dense_oracle(backend, q):
    plan = manual_plan(64, 12, 16, q=q, seed=4)
    emb = build_embedding(plan)
    U = np.random.default_rng(2).standard_normal((5, 64))
    for u in U:
        assert np.allclose(apply(emb, u), dense_oracle(emb, u), rtol=1e-12, atol=1e-13)
    assert np.allclose(apply(emb, U), np.array([dense_oracle(emb, u) for u in U]), atol=1e-12)


def test_apply_zero_and_linear():
    emb = build_embedding(manual_plan(256, 20, 40, seed=1))
    assert np.all(apply(emb, np.zeros(256)) == 0)
    u = np.random.default_rng(3).standard_normal(256)
    for a in (-3.0, 0.5, 1e6):
        assert np.allclose(apply(emb, a * u), a * apply(emb, u), rtol=1e-12, atol=0)


def test_apply_dimension_mismatch():
    emb = build_embedding(manual_plan(256, 20, 40))
    with pytest.raises(ValueError):
        apply(emb, np.ones(128))


def test_hd_preserves_norm():
    emb = build_embedding(manual_plan(4096, 4, 10, seed=8))
    U = np.random.default_rng(5).standard_normal((6, 4096))
    V = precondition(emb, U)
    assert np.allclose(np.linalg.norm(V, axis=1), np.linalg.norm(U, axis=1), rtol=1e-10)


def test_achlioptas_apply_matches_matrix():
    plan = plan_l2(256, 0.5, 0.05, seed=1)
    emb = build_embedding(plan)
    u = np.random.default_rng(1).standard_normal(256)
    assert np.allclose(apply(emb, u), math.sqrt(3 / plan.d) * emb.matrix.entries @ u)


def test_mean_squared_norm_is_one():
    plan = manual_plan(256, 16, 64)
    u = np.random.default_rng(7).standard_normal(256)
    u /= np.linalg.norm(u)
    src = BitSource(31)
    vals = np.array([np.sum(apply(build_embedding(plan, c), u) ** 2) for c in src.spawn_sources(2000)])
    assert abs(vals.mean() - 1) <= 4 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_l1_estimate_basics():
    plan = manual_plan(64, 8, 16, q=1)
    assert l1_norm_estimate(plan, np.zeros(8)) == 0.0
    y = np.random.default_rng(0).standard_normal(8)
    assert l1_norm_estimate(plan, -2.5 * y) == pytest.approx(2.5 * l1_norm_estimate(plan, y))
    assert l1_norm_estimate(plan, y) == pytest.approx(math.sqrt(math.pi / 2) * np.abs(y).sum())


def test_l1_estimate_near_one_dense():
    plan = plan_l1(4096, 0.5, 0.05)
    u = np.zeros(4096)
    u[0] = 1.0
    src = BitSource(12)
    est = [l1_norm_estimate(plan, apply(build_embedding(plan, c), u)) for c in src.spawn_sources(60)]
    assert abs(np.mean(est) - 1) <= plan.eps
    assert all(1 - plan.eps <= e <= 1 + plan.eps for e in est)
