"""Least-squares regression of RBF scoring functions onto a positional profile.

The loss is ``sum_k (f(k) - target[k])**2`` over offsets within ``window`` of
``center``. Each restart runs full-batch gradient descent where every
parameter gets its own step: the raw gradient is divided by that
parameter's Gauss-Newton curvature ``sum_k (df/dtheta)^2`` and scaled by an
adaptive factor. An accepted step (RSS decreased) grows the factor by 1.1,
except for parameters whose gradient changed sign, which are halved. A
rejected step halves every factor and leaves the parameters unchanged, so
RSS never increases.

Besides the uniformly seeded restarts, a greedy chain (on by default) adds
kernels one at a time at the offset of largest residual and refits after
each addition. Narrow peaks are otherwise rarely found, because the
gradient with respect to a distant center vanishes.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .attention import KernelParams
from .errors import DomainError
from .rng import SplitMix64

WIDTH_CHOICES = (0.01, 0.1, 1.0)
MAX_STEP = 2.0


@dataclass(frozen=True)
class FitOptions:
    S: int = 5
    window: int = 128
    restarts: int = 8
    max_iters: int = 3000
    step: float = 0.5
    seed: int = 0
    tol: float = 1e-12
    center: int = 0
    jobs: int = 1
    greedy: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise DomainError(f"window must be >= 1, got {self.window}")
        if self.restarts < 1:
            raise DomainError(f"restarts must be >= 1, got {self.restarts}")
        if self.S < 0:
            raise DomainError(f"S must be >= 0, got {self.S}")


@dataclass(frozen=True)
class FitResult:
    params: KernelParams
    rss: float
    iterations: int
    converged: bool
    restart: int = 0


def select_window(offsets, values, opts):
    """Offsets (as floats) and targets inside the fit window, ascending by offset."""
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if offsets.size == 0 or values.size == 0:
        raise DomainError("the profile is empty")
    if offsets.shape != values.shape:
        raise DomainError(f"{offsets.size} offsets but {values.size} values")
    if not np.all(np.isfinite(values)):
        raise DomainError("the profile contains non-finite values")
    keep = np.abs(offsets - opts.center) <= opts.window
    wanted = np.arange(opts.center - opts.window, opts.center + opts.window + 1)
    if not np.array_equal(np.sort(offsets[keep]), wanted):
        raise DomainError(
            f"profile must cover every offset in [{wanted[0]}, {wanted[-1]}] exactly once")
    order = np.argsort(offsets[keep])
    return offsets[keep][order].astype(np.float64), np.ascontiguousarray(values[keep][order])


def window_rss(params, ks, target):
    rss, _, _ = backend.kernels().rbf_fit_terms(params.amp, params.width, params.center, ks, target)
    return rss


def _descend(theta, ks, target, opts):
    kern = backend.kernels()
    S = theta.shape[0] // 3

    def terms(t):
        return kern.rbf_fit_terms(t[:S], t[S:2 * S], t[2 * S:], ks, target)

    rss, grad, diag = terms(theta)
    steps = np.full(theta.shape, opts.step)
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        if rss <= 1e-300:
            converged = True
            break
        curvature = diag + 1e-12 * max(float(np.max(diag)), 1e-300)
        trial = theta - steps * grad / (2.0 * curvature)
        t_rss, t_grad, t_diag = terms(trial)
        if np.isfinite(t_rss) and t_rss < rss:
            improvement = rss - t_rss
            flipped = np.sign(t_grad) * np.sign(grad) < 0
            steps = np.where(flipped, 0.5 * steps, np.minimum(1.1 * steps, MAX_STEP))
            theta, rss, grad, diag = trial, t_rss, t_grad, t_diag
            if improvement <= opts.tol * rss:
                converged = True
                break
        else:
            steps = 0.5 * steps
            if np.max(steps) < 1e-14:
                converged = True
                break
    return theta, rss, it, converged


def _initial_theta(rng, S, values, opts):
    lo, hi = float(np.min(values)), float(np.max(values))
    amp = rng.uniform(S, lo, hi)
    width = np.asarray(WIDTH_CHOICES)[rng.integers(len(WIDTH_CHOICES), S)]
    center = opts.center + rng.uniform(S, -opts.window / 2, opts.window / 2)
    return np.concatenate([amp, width, center])


def _pad_warm_start(warm, S, opts):
    extra = S - warm.S
    if extra < 0:
        raise DomainError(f"warm start has {warm.S} kernels, more than S={S}")
    spread = np.linspace(-opts.window / 2, opts.window / 2, extra + 2)[1:-1] + opts.center
    return np.concatenate([
        warm.amp, np.zeros(extra),
        warm.width, np.full(extra, 0.1),
        warm.center, spread,
    ])


def _greedy_chain(ks, target, S, opts):
    kern = backend.kernels()
    theta = np.zeros(0)
    iters, converged = 0, False
    for s in range(1, S + 1):
        prev = s - 1
        amp, width, center = theta[:prev], theta[prev:2 * prev], theta[2 * prev:]
        resid = target - kern.rbf_profile(amp, width, center, ks)
        peak = int(np.argmax(np.abs(resid)))
        theta = np.concatenate([amp, [resid[peak]], width, [1.0], center, [ks[peak]]])
        theta, rss, used, converged = _descend(theta, ks, target, opts)
        iters += used
    return theta, rss, iters, converged


def fit_kernels(offsets, values, opts=None, warm_start=None, layer=0, head=0):
    """Fit ``opts.S`` RBF kernels to ``values`` at integer ``offsets``.

    ``warm_start`` (a KernelParams with at most S kernels) becomes restart 0,
    padded with zero-amplitude kernels; since no step ever raises the RSS the
    result is never worse than the warm start. The greedy chain, when
    enabled and no warm start is given, runs as candidate ``restarts``. The
    best candidate is chosen by (rss, index), independent of execution order.
    """
    opts = opts or FitOptions()
    ks, target = select_window(offsets, values, opts)
    S = opts.S
    if S == 0:
        empty = KernelParams.empty(layer, head)
        return FitResult(empty, float(np.sum(target * target)), 0, True, 0)

    rng = SplitMix64(opts.seed)
    starts = [_initial_theta(rng.spawn(r), S, target, opts) for r in range(opts.restarts)]
    if warm_start is not None:
        starts[0] = _pad_warm_start(warm_start, S, opts)

    greedy = opts.greedy and warm_start is None

    def run(r):
        if r == len(starts):
            theta, rss, iters, converged = _greedy_chain(ks, target, S, opts)
        else:
            theta, rss, iters, converged = _descend(starts[r], ks, target, opts)
        return rss, r, theta, iters, converged

    with ThreadPoolExecutor(max_workers=max(1, opts.jobs)) as pool:
        outcomes = list(pool.map(run, range(len(starts) + greedy)))
    rss, r, theta, iters, converged = min(outcomes, key=lambda o: (o[0], o[1]))
    params = KernelParams(theta[:S], theta[S:2 * S], theta[2 * S:], layer, head)
    return FitResult(params, float(rss), iters, converged, r)


def fit_kernels_incremental(offsets, values, max_S, opts=None):
    """Fits for S = 1 .. max_S, each warm-started from the previous one."""
    opts = opts or FitOptions()
    results, previous = [], None
    for S in range(1, max_S + 1):
        res = fit_kernels(offsets, values, replace(opts, S=S), warm_start=previous)
        results.append(res)
        previous = res.params
    return results

