import numpy as np
import pytest

from tisa import backend

BACKENDS = ["python"] + (["compiled"] if backend.has_compiled() else [])

# Filled by test_acceptance.report(); echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(params=BACKENDS)
def kernels_backend(request):
    previous = backend.use(request.param)
    yield request.param
    backend.use(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for p in range(a.shape[1]):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


def brute_force_toeplitz(a):
    """(rss, tss, r2) by explicit loops over every entry and its diagonal."""
    n = len(a)
    rss = 0.0
    for i in range(n):
        for j in range(n):
            diag = [a[r][c] for r in range(n) for c in range(n) if c - r == j - i]
            mean = sum(diag) / len(diag)
            rss += (a[i][j] - mean) ** 2
    grand = sum(a[i][j] for i in range(n) for j in range(n)) / (n * n)
    tss = sum((a[i][j] - grand) ** 2 for i in range(n) for j in range(n))
    r2 = 1.0 if tss <= 1e-12 * n * n else 1.0 - rss / tss
    return rss, tss, r2


def central_difference(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f(x)
        x[idx] = old - h
        fm = f(x)
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def max_relative_error(analytic, numeric):
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-300)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def synthetic_profile(seed=7, window=128, noise=0.1):
    """Offsets -window..window with a peaked, asymmetric profile plus noise."""
    gen = np.random.default_rng(seed)
    ks = np.arange(-window, window + 1)
    clean = (1.5 * np.exp(-0.3 * (ks + 1.0) ** 2) + 0.6 * np.exp(-0.02 * (ks - 4.0) ** 2)
             - 0.4 * np.exp(-0.001 * (ks + 30.0) ** 2))
    return ks, clean + noise * gen.standard_normal(ks.size)
