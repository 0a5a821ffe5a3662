import os
import subprocess
import sys

import numpy as np
import pytest

from sjlt import _backend, _pykernels
from sjlt.randbits import BitSource
from sjlt.kwise import IRREDUCIBLE

compiled = pytest.importorskip("sjlt._kernels")


def test_default_is_compiled():
    assert _backend.available() == ["compiled", "python"]


def test_env_forces_python():
    code = "from sjlt import _backend; print(_backend.active())"
    env = dict(os.environ, SJLT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"


def test_set_backend_round_trip():
    prev = _backend.set_backend("python")
    assert _backend.active() == "python"
    _backend.set_backend(prev)
    with pytest.raises(ValueError):
        _backend.get("gpu")


def test_prg_blocks_equal():
    assert np.array_equal(compiled.prg_blocks(1, 2, 5, 100), _pykernels.prg_blocks(1, 2, 5, 100))


@pytest.mark.parametrize("width", [0, 1, 3, 7, 10, 31, 32])
@pytest.mark.parametrize("pos", [0, 5, 63, 64, 1000])
def test_read_uints_equal(width, pos):
    src = BitSource(4)
    a = compiled.read_uints(src.k0, src.k1, pos, width, 77)
    b = _pykernels.read_uints(src.k0, src.k1, pos, width, 77)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("n,k", [(1, 1), (2, 2), (64, 1), (64, 64), (1024, 33), (1024, 341), (4096, 1000)])
def test_sample_rows_equal(n, k):
    keys = BitSource(n + k).spawn(8)
    for x, y in zip(compiled.sample_rows(keys, n, k), _pykernels.sample_rows(keys, n, k)):
        assert np.array_equal(x, y)


def test_sparse_rows_dot_equal():
    keys = BitSource(2).spawn(20)
    v = np.random.default_rng(0).standard_normal(512)
    assert np.allclose(compiled.sparse_rows_dot(keys, 512, 100, v),
                       _pykernels.sparse_rows_dot(keys, 512, 100, v), rtol=1e-13)


def test_wht_bit_identical():
    X = np.random.default_rng(1).standard_normal((3, 2048))
    a, b = X.copy(), X.copy()
    compiled.wht_inplace(a)
    _pykernels.wht_inplace(b)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("m", [2, 5, 11, 17])
def test_sign_family_equal(m):
    n = 1 << (m - 1)
    coeffs = BitSource(m).draw_uints(m, 9).astype(np.uint64)
    a = compiled.sign_family(m, IRREDUCIBLE[m], coeffs, 1, n)
    b = _pykernels.sign_family(m, IRREDUCIBLE[m], coeffs, 1, n)
    assert np.array_equal(a, b)


def test_sparse_apply_equal():
    idx, signs, _ = compiled.sample_rows(BitSource(3).spawn(10), 256, 40)
    x = np.random.default_rng(2).standard_normal((4, 256))
    assert np.allclose(compiled.sparse_apply(idx, signs, x), _pykernels.sparse_apply(idx, signs, x), rtol=1e-13)
