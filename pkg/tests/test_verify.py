import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from sjlt import verify as V
from sjlt.randbits import BitSource
from sjlt.transform import manual_plan, plan_l2


def test_report_record_fields():
    r = V.CheckReport("x", 1.0, 0.5, 0.1, True, 10, 0.25)
    rec = json.loads(r.to_json())
    assert list(rec)[:7] == ["name", "bound", "observed", "stderr", "passed", "trials", "elapsed"]
    assert "PASS" in r.line()


def test_pass_semantics():
    assert V._upper(1.3, 1.0, 0.075)
    assert not V._upper(1.31, 1.0, 0.075)
    assert V._two_sided(0.8, 1.0, 0.1, 0.025)
    assert not V._two_sided(1.21, 1.0, 0.1, 0.025)


# -- negative correlation ------------------------------------------------------

def test_negcorr_n4_k2():
    r = V.check_negative_correlation(4, 2)
    assert r.passed and r.stderr == 0.0
    sizes = {row["size"]: Fraction(row["exact"]) for row in r.detail}
    assert sizes[2] == Fraction(1, 6) and sizes[2] <= Fraction(1, 4)
    assert sizes[3] == 0 and sizes[4] == 0
    assert sizes[1] == Fraction(2, 4)


@pytest.mark.parametrize("n,k,a", [(10, 4, 2), (9, 9, 5), (7, 3, 4), (12, 6, 6)])
def test_falling_ratio_matches_counting(n, k, a):
    count = Fraction(math.comb(n - a, k - a), math.comb(n, k)) if a <= k else Fraction(0)
    assert V.falling_ratio(n, k, a) == count


def test_negcorr_budget():
    with pytest.raises(ValueError):
        V.check_negative_correlation(40, 20)


# -- vectors ---------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.sampled_from(V.SHAPES), st.floats(0.0, 1.0))
def test_vector_shapes_respect_invariants(logn, shape, t):
    n = 1 << logn
    alpha = 1 / math.sqrt(n) + t * (1 - 1 / math.sqrt(n))
    v = V.make_vector(V.TestVectorSpec(n, 1, alpha, shape), BitSource(logn))
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    assert np.abs(v).max() <= alpha * (1 + 1e-9)


def test_spike_capped_hits_cap():
    v = V.make_vector(V.TestVectorSpec(1024, 256, 0.1, "spike-capped"))
    assert np.isclose(np.abs(v).max(), 0.1) and np.count_nonzero(v) == 100


def test_vector_alpha_too_small():
    with pytest.raises(ValueError):
        V.make_vector(V.TestVectorSpec(64, 1, 0.1))


def test_nka_precondition():
    V.TestVectorSpec(4096, 1024, 0.158, "flat").require_nka()
    with pytest.raises(V.PreconditionError):
        V.TestVectorSpec(4096, 1024, 0.2, "flat").require_nka()
    with pytest.raises(V.PreconditionError):
        V.check_moment_table(4096, 1024, V.TestVectorSpec(4096, 1024, 0.2), 100, BitSource())


# -- W sampling --------------------------------------------------------------------

def test_sample_W_matches_dense_rows():
    n, k = 64, 16
    v = np.random.default_rng(0).standard_normal(n)
    src = BitSource(3)
    W = V.sample_W(n, k, v, 10, BitSource(3))
    from sjlt.rowsampler import sample_rows
    idx, signs, _ = sample_rows(n, k, src.spawn(10))
    expect = math.sqrt(n / k) * np.array([np.dot(s, v[i]) for i, s in zip(idx, signs)])
    assert np.allclose(W, expect, rtol=1e-13)


def test_sample_W_independent_of_thread_count(monkeypatch):
    v = np.full(256, 1 / 16)
    monkeypatch.setenv("SJLT_THREADS", "1")
    a = V.sample_W(256, 64, v, 40_000, BitSource(5))
    monkeypatch.setenv("SJLT_THREADS", "4")
    b = V.sample_W(256, 64, v, 40_000, BitSource(5))
    assert a.tobytes() == b.tobytes()


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv("SJLT_THREADS", "0")
    with pytest.raises(ValueError):
        V.worker_count()


# -- closed forms -------------------------------------------------------------------

def test_linf_threshold_value():
    assert V.linf_threshold(1024, 0.05) == pytest.approx(0.2375, abs=5e-5)


def test_tail_bounds_vacuous_at_zero():
    assert V.tail_bound_Wi(0.0, 1024, 256, 1 / 32) == 2.0
    assert V.sum_squares_upper(0.0, 64, 4096, 1024, 1 / 64) >= 1.0
    assert V.sum_abs_two_sided(0.0, 64) == 2.0


def test_tail_bound_flat_example():
    n, k, alpha, s = 1024, 256, 1 / 32, 3.0
    expect = 2 * math.exp(-9 / (2 + (2 / 3) * 2 * (1 / 32) * 3))
    assert V.tail_bound_Wi(s, n, k, alpha) == pytest.approx(expect, rel=1e-14)


def test_stein_bound_flat():
    n, k = 4096, 1024
    v = np.full(n, 1 / math.sqrt(n))
    # 3 (k/n) n (n/k)^{3/2} n^{-3/2} = 3 / sqrt(k)
    assert V.stein_bound(n, k, v) == pytest.approx(3 / math.sqrt(k), rel=1e-12)


def _w1_by_quadrature(x):
    x = np.sort(x)
    N = x.size

    def gap(z):
        return abs(np.searchsorted(x, z, side="right") / N - stats.norm.cdf(z))

    pts = np.concatenate(([-12.0], x, [12.0]))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += integrate.quad(gap, a, b, limit=200)[0]
    return total


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_wasserstein_two_routes(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(40) * (1 + 0.3 * seed) + 0.2 * seed
    assert V.wasserstein_to_normal(x) == pytest.approx(_w1_by_quadrature(x), abs=1e-7)


def test_wasserstein_single_point():
    # W1(delta_0, N(0,1)) = E|G| = sqrt(2/pi)
    assert V.wasserstein_to_normal([0.0]) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)


def test_wasserstein_large_normal_sample_is_small():
    x = np.random.default_rng(9).standard_normal(100_000)
    assert V.wasserstein_to_normal(x) < 4 * V.wasserstein_slack(x)


# -- checks --------------------------------------------------------------------------

def test_linf_spike_never_exceeds():
    n = 256
    e1 = np.zeros(n)
    e1[0] = 1.0
    r = V.check_linf_flattening(n, 0.05, 200, BitSource(1), vectors={"e1": e1})
    assert r.passed and r.detail[0]["observed"] == 0.0


def test_linf_flattening_passes():
    r = V.check_linf_flattening(1024, 0.05, 2000, BitSource(2))
    assert r.passed and {p["at"] for p in r.detail} == {"e1", "flat", "random"}


def test_bernstein_passes_flat():
    r = V.check_sparse_bernstein(1024, 256, V.TestVectorSpec(1024, 256, 1 / 32), 20_000, BitSource(3))
    assert r.passed and len(r.detail) == 2 * len(V.S_GRID)


def test_bernstein_k_equals_n():
    r = V.check_sparse_bernstein(256, 256, V.TestVectorSpec(256, 256, 1 / 16), 20_000, BitSource(4))
    assert r.passed


def test_moments_rademacher_k_equals_n():
    n = 256
    r = V.check_moment_table(n, n, V.TestVectorSpec(n, n, 1 / 16), 50_000, BitSource(5))
    assert r.passed
    m4 = next(p for p in r.detail if p["at"] == "E W^4")
    assert abs(m4["observed"] - (3 - 2 / n)) <= 4 * m4["stderr"]


def test_moment_check_can_fail():
    # a spike vector breaks the flatness regime; its fourth moment is far above 3.1
    n, k = 1024, 256
    spec = V.TestVectorSpec(n, k, 1.0, "spike-capped")
    W = V.sample_W(n, k, V.make_vector(spec), 20_000, BitSource(6))
    assert np.mean(W ** 4) > V.MOMENT_BOUNDS[4]


def test_normal_approx_passes():
    r = V.check_normal_approx(4096, 1024, V.TestVectorSpec(4096, 1024, 1 / 64), 20_000, BitSource(7))
    assert r.passed
    e_abs = next(p for p in r.detail if p["at"] == "E|W|")
    assert e_abs["bound"] == pytest.approx(1.5 / math.sqrt(1024))


def test_sum_deviation_passes():
    r = V.check_sum_deviation(manual_plan(4096, 64, 1024), V.TestVectorSpec(4096, 1024, 1 / 64),
                              2000, BitSource(8))
    assert r.passed


def test_end_to_end_with_points():
    plan = plan_l2(1024, 0.5, 0.05)
    src = BitSource(9)
    X = src.numpy_rng().standard_normal((10, 1024))
    r = V.check_end_to_end(plan, V.default_u_set(1024, src), 200, src, points=X, fail=0.5)
    assert r.passed and len(r.detail) == 6


def test_end_to_end_pair_distortion_is_difference_distortion():
    from sjlt.transform import apply, build_embedding

    emb = build_embedding(manual_plan(256, 30, 64, seed=3))
    x, y = np.random.default_rng(4).standard_normal((2, 256))
    assert np.allclose(apply(emb, x) - apply(emb, y), apply(emb, x - y), atol=1e-12)


def test_run_suite_unknown():
    with pytest.raises(ValueError):
        V.run_suite("nope")


def test_run_suite_deterministic():
    a = V.run_suite("bernstein", trials=3000, seed=7)[0]
    b = V.run_suite("bernstein", trials=3000, seed=7)[0]
    a.elapsed = b.elapsed = 0.0
    assert a.to_json() == b.to_json()
