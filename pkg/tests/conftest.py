import numpy as np
import pytest


def random_spd(rng, n, cond=None):
    """Random SPD matrix; with ``cond`` the condition number is set exactly."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if cond is None:
        w = rng.standard_normal((n, n))
        return w @ w.T + n * np.eye(n) * 0.1
    eig = np.logspace(0, np.log10(cond), n)
    return (q * eig) @ q.T


def random_instance(rng, m=None, n=None, t=None, g=None, max_m=8, max_n=16, max_t=12, max_g=5, well_posed=True):
    """Small random regression problem: lead field, trials, h and a dense SPD B.

    With ``well_posed`` the free sizes are redrawn until ``M * G >= T`` so the
    temporal likelihood is bounded below.
    """
    while True:
        mm = m or int(rng.integers(2, max_m + 1))
        nn = n or int(rng.integers(2, max_n + 1))
        tt = t or int(rng.integers(2, max_t + 1))
        gg = g or int(rng.integers(1, max_g + 1))
        if not well_posed or mm * gg >= tt or (m and t and g):
            break
    m, n, t, g = mm, nn, tt, gg
    lead = rng.standard_normal((m, n))
    trials = rng.standard_normal((g, m, t))
    h = np.abs(rng.standard_normal(n + m)) + 0.1
    b = random_spd(rng, t)
    return lead, trials, h, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
