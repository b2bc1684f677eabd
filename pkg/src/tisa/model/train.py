"""Training loop and positional parameter accounting."""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DomainError, TrainingError
from .transformer import forward_batch, init_params, loss_and_grads

SCHEMES = ("standard", "untied", "tisa")


@dataclass(frozen=True)
class ArchSpec:
    n: int = 512
    d: int = 768
    S: int = 5
    H: int = 12
    L: int = 12
    scheme: str = "standard"


def count_positional_params(spec):
    """Positional parameters of an architecture.

    standard: one learned embedding per position (n d); untied: plus separate
    query/key maps for positions (n d + 2 d^2); tisa: three numbers per kernel,
    head and layer (3 S H L).
    """
    if spec.scheme == "standard":
        return spec.n * spec.d
    if spec.scheme == "untied":
        return spec.n * spec.d + 2 * spec.d * spec.d
    if spec.scheme == "tisa":
        return 3 * spec.S * spec.H * spec.L
    raise DomainError(f"scheme must be one of {SCHEMES}, got {spec.scheme!r}")


@dataclass
class TrainReport:
    steps: int
    final_loss: float
    eval_accuracy: float
    positional_param_count: int
    wall_time_seconds: float
    # Not part of the serialized report.
    params: dict = field(default=None, repr=False)
    loss_history: list = field(default_factory=list, repr=False)

    def to_dict(self, include_time=True):
        d = {k: v for k, v in asdict(self).items() if k not in ("params", "loss_history")}
        if not include_time:
            del d["wall_time_seconds"]
        return d

    def to_json(self, include_time=True):
        return json.dumps(self.to_dict(include_time), indent=2, sort_keys=True) + "\n"


def accuracy(config, params, tokens, targets, batch=64):
    """Fraction of non-pad positions whose argmax logit equals the target."""
    correct = total = 0
    for lo in range(0, tokens.shape[0], batch):
        logits = forward_batch(config, params, tokens[lo:lo + batch])
        t = targets[lo:lo + batch]
        valid = t >= 0
        correct += int(np.sum((np.argmax(logits, axis=-1) == t) & valid))
        total += int(np.sum(valid))
    return correct / max(total, 1)


def clip_by_global_norm(grads, max_norm):
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        factor = max_norm / norm
        return {k: g * factor for k, g in grads.items()}, norm
    return grads, norm


def train(config, task, steps, lr=0.1, batch=32, clip=1.0, eval_sequences=256, eval_n=None,
          params=None):
    """Gradient descent on cross-entropy with global-norm clipping.

    Returns a TrainReport whose ``eval_accuracy`` is measured on a held-out
    set of ``eval_sequences`` sequences of length ``eval_n`` (default: the
    task length). The trained tensors are attached as ``report.params``.
    """
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    params = init_params(config) if params is None else {k: v.copy() for k, v in params.items()}
    start = time.perf_counter()
    history = []
    stream = task.batches(batch)
    last_finite = float("nan")
    for step in range(1, steps + 1):
        tokens, targets = next(stream)
        loss, grads = loss_and_grads(config, params, tokens, targets)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError(
                f"non-finite loss at step {step}; last finite loss {last_finite!r}",
                step=step - 1, last_finite_loss=last_finite)
        last_finite = loss
        history.append(loss)
        grads, _ = clip_by_global_norm(grads, clip)
        for name, g in grads.items():
            params[name] = params[name] - lr * g
    tokens, targets = task.held_out(eval_sequences, eval_n)
    acc = accuracy(config, params, tokens, targets)
    return TrainReport(
        steps=steps,
        final_loss=history[-1],
        eval_accuracy=acc,
        positional_param_count=config.positional_param_count(),
        wall_time_seconds=time.perf_counter() - start,
        params=params,
        loss_history=history,
    )
