"""Synthetic position-sensitive tasks.

``shift_copy``: the target at position i is the input token at i + offset;
positions whose source falls outside the sequence carry the pad label -1 and
are ignored by loss and accuracy. With the default ``sampling="permutation"``
a sequence is a concatenation of independent random permutations of the
vocabulary (truncated to n), so the multiset of tokens says nothing about
which token sits where. With ``sampling="iid"`` tokens are drawn uniformly
and independently; a position-blind model can then beat 1/vocab by
predicting tokens that occur often in the sequence.

``distance_class``: two marker tokens (id ``vocab - 1``) are placed in a
sequence of ordinary tokens; position 0 must predict class 1 when the markers
are at most ``distance`` apart and class 0 otherwise. Classes are balanced.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..rng import SplitMix64

PAD = -1


def shift_targets(tokens, offset):
    tokens = np.asarray(tokens, dtype=np.int64)
    n = tokens.shape[-1]
    out = np.full(tokens.shape, PAD, dtype=np.int64)
    if offset >= 0:
        out[..., :n - offset] = tokens[..., offset:]
    else:
        out[..., -offset:] = tokens[..., :n + offset]
    return out


@dataclass(frozen=True)
class Task:
    kind: str
    n: int
    vocab: int
    seed: int
    offset: int = 0
    distance: int = 1
    sampling: str = "permutation"

    @property
    def chance(self):
        return 1.0 / self.vocab if self.kind == "shift_copy" else 0.5

    def sample(self, rng, batch, n=None):
        """(tokens, targets) for ``batch`` sequences of length ``n``; pad targets are -1."""
        n = self.n if n is None else n
        if self.kind == "shift_copy":
            if abs(self.offset) >= n:
                raise DomainError(f"|offset| = {abs(self.offset)} must be < n = {n}")
            tokens = self._tokens(rng, batch, n)
            return tokens, shift_targets(tokens, self.offset)
        return self._sample_distance(rng, batch, n)

    def _tokens(self, rng, batch, n):
        if self.sampling == "iid":
            return rng.integers(self.vocab, batch * n).reshape(batch, n)
        blocks = -(-n // self.vocab)
        keys = rng.uniform(batch * blocks * self.vocab).reshape(batch, blocks, self.vocab)
        perms = np.argsort(keys, axis=-1, kind="stable")
        return perms.reshape(batch, blocks * self.vocab)[:, :n].astype(np.int64)

    def _sample_distance(self, rng, batch, n):
        marker = self.vocab - 1
        tokens = rng.integers(self.vocab - 1, batch * n).reshape(batch, n)
        targets = np.full((batch, n), PAD, dtype=np.int64)
        labels = rng.integers(2, batch)
        near_max = min(self.distance, n - 1)
        for row, label in enumerate(labels):
            if label == 1:
                gap = 1 + int(rng.integers(near_max, 1)[0])
            else:
                gap = self.distance + 1 + int(rng.integers(n - 1 - self.distance, 1)[0])
            first = int(rng.integers(n - gap, 1)[0])
            tokens[row, first] = tokens[row, first + gap] = marker
            targets[row, 0] = label
        return tokens, targets

    def batches(self, batch, n=None):
        """Endless deterministic stream of training batches."""
        rng = SplitMix64(self.seed)
        while True:
            yield self.sample(rng, batch, n)

    def held_out(self, batch, n=None):
        """A fixed evaluation set drawn from a stream disjoint from training."""
        return self.sample(SplitMix64(self.seed).spawn(0xE7A1), batch, n)


def make_task(kind, n, vocab, seed=0, offset=0, distance=1, sampling="permutation"):
    if sampling not in ("permutation", "iid"):
        raise DomainError(f"sampling must be 'permutation' or 'iid', got {sampling!r}")
    if kind == "shift_copy":
        if abs(offset) >= n:
            raise DomainError(f"|offset| = {abs(offset)} must be < n = {n}")
        if vocab < 1:
            raise DomainError("vocab must be >= 1")
    elif kind == "distance_class":
        if vocab < 3:
            raise DomainError("distance_class needs vocab >= 3 (two classes plus a marker)")
        if not 1 <= distance < n - 1:
            raise DomainError(f"distance must be in [1, n - 2], got {distance} for n = {n}")
    else:
        raise DomainError(f"unknown task kind {kind!r}")
    return Task(kind, n, vocab, seed, offset, distance, sampling)
