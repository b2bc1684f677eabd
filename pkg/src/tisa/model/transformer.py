"""A small pre-norm transformer encoder with optional TISA positional bias.

Block ``l``::

    x = x + W_O concat_h softmax(q_h k_h^T / sqrt(d_k) [+ F_{l,h}] [+ mask]) v_h
    x = x + FF(LN(x))

with ``q_h, k_h, v_h`` projected from ``LN(x)``. The readout is linear in the
final residual stream, so with ``L = 0`` logits are a linear map of the
(possibly position-augmented) word embeddings.

Modes:

``case_a_with_pe``    position embeddings added to the input and a bias in every head
``case_b_tisa_only``  bias in every head, no position embeddings
``baseline_pe_only``  position embeddings only
``bag_of_words``      no positional signal at all
"""

import math
from dataclasses import dataclass

import numpy as np

from ..attention import KernelParams, TisaStack
from ..errors import DomainError, SequenceLengthError
from ..rng import SplitMix64
from . import autograd as ag

MODES = ("case_a_with_pe", "case_b_tisa_only", "baseline_pe_only", "bag_of_words")
FF_MULT = 4


@dataclass(frozen=True)
class ToyModelConfig:
    vocab: int = 16
    d: int = 32
    d_k: int = 16
    H: int = 2
    L: int = 2
    S: int = 3
    n_max: int = 16
    mode: str = "case_b_tisa_only"
    seed: int = 0
    freeze_pe: bool = False
    # case_a_with_pe only: False builds first-layer queries and keys from
    # token embeddings alone (values and the residual stream keep E_P).
    qk_positions: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.d != self.H * self.d_k:
            raise DomainError(f"d = {self.d} must equal H * d_k = {self.H * self.d_k}")
        if min(self.vocab, self.d, self.d_k, self.H, self.n_max) < 1 or self.L < 0 or self.S < 0:
            raise DomainError("sizes must be positive (L and S may be 0)")

    @property
    def uses_pe(self):
        return self.mode in ("case_a_with_pe", "baseline_pe_only")

    @property
    def uses_tisa(self):
        return self.mode in ("case_a_with_pe", "case_b_tisa_only")

    def positional_param_count(self):
        count = self.n_max * self.d if self.uses_pe else 0
        if self.uses_tisa:
            count += 3 * self.S * self.H * self.L
        return count


def _tisa_names(l, h):
    return tuple(f"l{l}.h{h}.tisa.{part}" for part in ("amp", "width", "center"))


def init_tisa(S, rng):
    """Fresh kernels: small random amplitudes, width 0.1, centers spread over [-S, S]."""
    center = np.linspace(-S, S, S) if S > 1 else np.zeros(S)
    return KernelParams(rng.uniform(S, -0.1, 0.1), np.full(S, 0.1), center)


def init_params(config):
    """All trainable tensors as 2-D float64 arrays, keyed by name."""
    rng = SplitMix64(config.seed)
    d, V = config.d, config.vocab
    params = {}

    def normal(name, rows, cols, std):
        params[name] = rng.spawn().normal(rows * cols, std).reshape(rows, cols)

    normal("tok_emb", V, d, 1.0)
    if config.uses_pe:
        normal("pos_emb", config.n_max, d, 1.0)
    for l in range(config.L):
        params[f"l{l}.ln1.g"], params[f"l{l}.ln1.b"] = np.ones((1, d)), np.zeros((1, d))
        for h in range(config.H):
            for w in ("w_q", "w_k", "w_v"):
                normal(f"l{l}.h{h}.{w}", d, config.d_k, 1.0 / math.sqrt(d))
            if config.uses_tisa:
                k = init_tisa(config.S, rng.spawn())
                for name, arr in zip(_tisa_names(l, h), (k.amp, k.width, k.center)):
                    params[name] = arr.reshape(1, -1).copy()
        normal(f"l{l}.w_o", d, d, 1.0 / math.sqrt(d))
        params[f"l{l}.ln2.g"], params[f"l{l}.ln2.b"] = np.ones((1, d)), np.zeros((1, d))
        normal(f"l{l}.ff1.w", d, FF_MULT * d, 1.0 / math.sqrt(d))
        params[f"l{l}.ff1.b"] = np.zeros((1, FF_MULT * d))
        normal(f"l{l}.ff2.w", FF_MULT * d, d, 1.0 / math.sqrt(FF_MULT * d))
        params[f"l{l}.ff2.b"] = np.zeros((1, d))
    normal("out.w", d, V, 1.0 / math.sqrt(d))
    params["out.b"] = np.zeros((1, V))
    return params


def trainable(config, name):
    return not (config.freeze_pe and name == "pos_emb")


def tisa_stack(config, params):
    stack = TisaStack(H=config.H, L=config.L, d_k=config.d_k)
    if config.uses_tisa:
        for l in range(config.L):
            for h in range(config.H):
                amp, width, center = (params[n].reshape(-1) for n in _tisa_names(l, h))
                stack[l, h] = KernelParams(amp, width, center)
    return stack


def _check_tokens(config, tokens):
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2 or tokens.shape[1] < 1:
        raise DomainError(f"expected a (batch, n) token array with n >= 1, got {tokens.shape}")
    if tokens.min() < 0 or tokens.max() >= config.vocab:
        raise DomainError(f"token ids must lie in [0, {config.vocab})")
    if config.uses_pe and tokens.shape[1] > config.n_max:
        raise SequenceLengthError(
            f"sequence length {tokens.shape[1]} exceeds the {config.n_max} learned positions")
    return tokens


def build_graph(config, nodes, tokens, mask=None):
    """Logits node of shape (B, n, vocab) for a (B, n) batch of token ids.

    ``nodes`` maps parameter names to autograd leaves. ``mask`` is an optional
    additive (n, n) matrix (``-inf`` blocks attention) shared by every head.
    """
    tokens = _check_tokens(config, tokens)
    n = tokens.shape[1]
    x = ag.embed(nodes["tok_emb"], tokens)
    words_only = x
    if config.uses_pe:
        x = ag.add_table_prefix(x, nodes["pos_emb"])
    split_qk = config.mode == "case_a_with_pe" and not config.qk_positions
    mask_node = None if mask is None else ag.constant(mask)
    inv_sqrt = 1.0 / math.sqrt(config.d_k)
    for l in range(config.L):
        h_in = ag.layer_norm(x, nodes[f"l{l}.ln1.g"], nodes[f"l{l}.ln1.b"])
        qk_in = h_in
        if split_qk and l == 0:
            qk_in = ag.layer_norm(words_only, nodes["l0.ln1.g"], nodes["l0.ln1.b"])
        heads = []
        for h in range(config.H):
            q = ag.linear(qk_in, nodes[f"l{l}.h{h}.w_q"])
            k = ag.linear(qk_in, nodes[f"l{l}.h{h}.w_k"])
            v = ag.linear(h_in, nodes[f"l{l}.h{h}.w_v"])
            scores = ag.scale(ag.bmm(q, ag.transpose(k)), inv_sqrt)
            if config.uses_tisa:
                amp, width, center = (nodes[name] for name in _tisa_names(l, h))
                scores = ag.add_square(scores, ag.positional_bias(amp, width, center, n))
            if mask_node is not None:
                scores = ag.add_square(scores, mask_node)
            heads.append(ag.bmm(ag.softmax(scores), v))
        x = ag.add(x, ag.linear(ag.concat_last(heads), nodes[f"l{l}.w_o"]))
        f_in = ag.layer_norm(x, nodes[f"l{l}.ln2.g"], nodes[f"l{l}.ln2.b"])
        hidden = ag.gelu(ag.add_row(ag.linear(f_in, nodes[f"l{l}.ff1.w"]), nodes[f"l{l}.ff1.b"]))
        x = ag.add(x, ag.add_row(ag.linear(hidden, nodes[f"l{l}.ff2.w"]), nodes[f"l{l}.ff2.b"]))
    return ag.add_row(ag.linear(x, nodes["out.w"]), nodes["out.b"])


def forward_batch(config, params, tokens, mask=None):
    nodes = {name: ag.constant(v) for name, v in params.items()}
    return build_graph(config, nodes, tokens, mask).value


def forward(config, params, token_ids, mask=None):
    """Logits (n x vocab) for a single sequence."""
    return forward_batch(config, params, np.asarray(token_ids)[None, :], mask)[0]


def loss_and_grads(config, params, tokens, targets, mask=None):
    """Mean cross-entropy over non-pad targets and its gradient for every trainable tensor."""
    nodes = {name: ag.leaf(v, trainable(config, name)) for name, v in params.items()}
    loss = ag.cross_entropy(build_graph(config, nodes, tokens, mask), targets)
    ag.backward(loss)
    grads = {}
    for name, node in nodes.items():
        if node.requires_grad:
            grads[name] = node.grad if node.grad is not None else np.zeros_like(node.value)
    return float(loss.value), grads
