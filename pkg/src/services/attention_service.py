"""Self attention with additive heat-kernel scores, cross attention and the self-cross block."""
import logging

import numpy as np

from src.models.errors import ShapeError
from src.models.models import AttentionMode
from src.tensor import ops
from src.tensor.parameters import LayerNorm, Linear
from src.tensor.tensor import as_tensor

logger = logging.getLogger(__name__)


def _check_width(kind, width, *tensors):
    for tensor in tensors:
        if tensor.values.ndim != 2 or tensor.shape[1] != width:
            raise ShapeError(f"{kind}: expected N x {width} features, got {tensor.shape}")


def _scores(queries, keys, head_dim):
    return ops.scale(ops.matmul(queries, ops.transpose(keys)), 1.0 / np.sqrt(head_dim))


class SelfAttention:
    """Multi-head self attention, optionally adding HKS query/key scores per head.

    mode HKS:     softmax(Q_i K_i^T / sqrt(d_h) + HQ_i HK_i^T / sqrt(d_h)) V_i
    mode VANILLA: softmax(Q_i K_i^T / sqrt(d_h)) V_i
    mode NONE:    the block is skipped and returns its input
    Heads are concatenated, projected and added to the input.
    """

    def __init__(self, store, name, width, heads, head_dim, mode=AttentionMode.HKS):
        self.width = width
        self.heads = heads
        self.head_dim = head_dim
        self.mode = mode
        self.query = [Linear(store, f"{name}.q{i}", width, head_dim, bias=False) for i in range(heads)]
        self.key = [Linear(store, f"{name}.k{i}", width, head_dim, bias=False) for i in range(heads)]
        self.value = [Linear(store, f"{name}.v{i}", width, head_dim, bias=False) for i in range(heads)]
        self.hks_query = [Linear(store, f"{name}.hq{i}", width, head_dim, bias=False) for i in range(heads)]
        self.hks_key = [Linear(store, f"{name}.hk{i}", width, head_dim, bias=False) for i in range(heads)]
        self.output = Linear(store, f"{name}.out", heads * head_dim, width, bias=False)

    def head_weights(self, features, hks=None, head=0):
        """Row-stochastic attention matrix of one head."""
        scores = _scores(self.query[head](features), self.key[head](features), self.head_dim)
        if self.mode is AttentionMode.HKS:
            hks_scores = _scores(self.hks_query[head](hks), self.hks_key[head](hks), self.head_dim)
            scores = ops.add(scores, hks_scores)
        return ops.softmax_rows(scores)

    def __call__(self, features, hks=None):
        features = as_tensor(features)
        if self.mode is AttentionMode.NONE:
            return features
        _check_width("self-attention", self.width, features)
        if self.mode is AttentionMode.HKS:
            if hks is None:
                raise ShapeError("self-attention: HKS mode needs the HKS embedding")
            hks = as_tensor(hks)
            _check_width("self-attention", self.width, hks)
            if hks.shape[0] != features.shape[0]:
                raise ShapeError(f"self-attention: {hks.shape[0]} HKS rows for {features.shape[0]} points")
        heads = [
            ops.matmul(self.head_weights(features, hks, i), self.value[i](features))
            for i in range(self.heads)
        ]
        return ops.add(self.output(ops.concat(heads)), features)


def vanilla_self_attention(block, features):
    """Plain multi-head self attention with the block's Q/K/V/output weights, HKS terms left out."""
    features = as_tensor(features)
    heads = []
    for i in range(block.heads):
        weights = ops.softmax_rows(_scores(block.query[i](features), block.key[i](features), block.head_dim))
        heads.append(ops.matmul(weights, block.value[i](features)))
    return ops.add(block.output(ops.concat(heads)), features)


class CrossAttention:
    """Queries from one frame, keys and values from the other. No residual."""

    def __init__(self, store, name, width, heads, head_dim):
        self.width = width
        self.heads = heads
        self.head_dim = head_dim
        self.query = [Linear(store, f"{name}.q{i}", width, head_dim, bias=False) for i in range(heads)]
        self.key = [Linear(store, f"{name}.k{i}", width, head_dim, bias=False) for i in range(heads)]
        self.value = [Linear(store, f"{name}.v{i}", width, head_dim, bias=False) for i in range(heads)]
        self.output = Linear(store, f"{name}.out", heads * head_dim, width, bias=False)

    def __call__(self, queries, context):
        queries, context = as_tensor(queries), as_tensor(context)
        _check_width("cross-attention", self.width, queries, context)
        heads = []
        for i in range(self.heads):
            weights = ops.softmax_rows(_scores(self.query[i](queries), self.key[i](context), self.head_dim))
            heads.append(ops.matmul(weights, self.value[i](context)))
        return self.output(ops.concat(heads))


class FeedForward:
    """F + L2(relu(LN(L1(F))))."""

    def __init__(self, store, name, width):
        self.first = Linear(store, f"{name}.l1", width, width)
        self.norm = LayerNorm(store, f"{name}.ln", width)
        self.second = Linear(store, f"{name}.l2", width, width)

    def __call__(self, features):
        features = as_tensor(features)
        hidden = ops.relu(self.norm(self.first(features)))
        return ops.add(self.second(hidden), features)


class SelfCrossAttention:
    """One self block and one cross block per frame, parameters shared by both frames.

    F_self = SA(LN(F), LN(H)); F_self_n = LN(FFN(F_self)) feeds the other
    frame's cross attention; F_sc_att = F_self + CA(F_self, other F_self_n);
    output LN(FFN(F_sc_att)).
    """

    def __init__(self, store, config, name="attn"):
        width = config.width
        self.width = width
        self.input_norm = LayerNorm(store, f"{name}.ln_in", width)
        self.hks_norm = LayerNorm(store, f"{name}.ln_hks", width)
        self.self_attention = SelfAttention(
            store, f"{name}.self", width, config.heads, config.head_dim, config.attention_mode
        )
        self.self_ffn = FeedForward(store, f"{name}.ffn_self", width)
        self.self_norm = LayerNorm(store, f"{name}.ln_self", width)
        self.cross_attention = CrossAttention(store, f"{name}.cross", width, config.heads, config.head_dim)
        self.out_ffn = FeedForward(store, f"{name}.ffn_out", width)
        self.out_norm = LayerNorm(store, f"{name}.ln_out", width)

    def _self_side(self, features, hks):
        hks_normed = self.hks_norm(as_tensor(hks)) if hks is not None else None
        attended = self.self_attention(self.input_norm(features), hks_normed)
        return attended, self.self_norm(self.self_ffn(attended))

    def __call__(self, features_x, features_y, hks_x=None, hks_y=None):
        features_x, features_y = as_tensor(features_x), as_tensor(features_y)
        _check_width("self-cross", self.width, features_x, features_y)
        self_x, context_x = self._self_side(features_x, hks_x)
        self_y, context_y = self._self_side(features_y, hks_y)
        combined_x = ops.add(self_x, self.cross_attention(self_x, context_y))
        combined_y = ops.add(self_y, self.cross_attention(self_y, context_x))
        return self.out_norm(self.out_ffn(combined_x)), self.out_norm(self.out_ffn(combined_y))
