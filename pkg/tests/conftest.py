import pytest

from sjlt import _backend


def scalar_bits(k0, k1, count, start=0):
    """First ``count`` stream bits from the scalar block function (MSB-first)."""
    from sjlt._prg import block

    out = []
    i = start // 64
    off = start % 64
    while len(out) < count:
        b = block(k0, k1, i)
        out.extend((b >> (63 - j)) & 1 for j in range(off, 64))
        off = 0
        i += 1
    return out[:count]


@pytest.fixture(params=_backend.available())
def backend(request):
    prev = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(prev)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
