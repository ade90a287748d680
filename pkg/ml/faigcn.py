"""Frequency-attention GCN over the pose-frequency graph.

Input is one `SpectralFeatures` tensor per subject, reshaped to
(batch, bins * 18, 2). Two graph-conv layers mix neighbouring joints and
bins, a per-joint attention over bins pools the frequency axis, joints are
averaged and a linear head gives two logits (normal, abnormal).
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from torch import nn

from ml.numerics import (
    DTYPE,
    RngStream,
    batch_norm,
    dropout,
    matmul,
    mean,
    relu,
    softmax,
    sparse_from_scipy,
    sparse_matmul,
    tanh,
)
from pipeline.configurations import (
    ATTENTION_VARIANT,
    BN_EPS,
    BN_MOMENTUM,
    CHANNELS,
    DROPOUT,
    KERNEL_SIZE,
    NUM_CHANNELS,
    NUM_CLASSES,
    NUM_JOINTS,
    STRIDES,
)
from pipeline.errors import ContractError, DimensionError, ParameterError
from pipeline.graph import STRATEGIES, adjacency_for
from pipeline.spectral import SpectralFeatures

logger = logging.getLogger(__name__)

KERNEL_TO_STRATEGY = {size: name for name, size in STRATEGIES.items()}
ATTENTION_HIDDEN = 64


class FaigcnConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    channels: List[int] = CHANNELS
    strides: List[int] = STRIDES
    kernel_size: int = KERNEL_SIZE
    dropout: float = DROPOUT
    attention_variant: int = ATTENTION_VARIANT
    attention_hidden: int = ATTENTION_HIDDEN
    use_attention: bool = True
    inter_frequency: bool = True
    num_classes: int = NUM_CLASSES

    @field_validator("kernel_size")
    @classmethod
    def _known_kernel(cls, v: int) -> int:
        if v not in KERNEL_TO_STRATEGY:
            raise ValueError(f"kernel_size must be one of {sorted(KERNEL_TO_STRATEGY)}")
        return v

    @field_validator("attention_variant")
    @classmethod
    def _known_variant(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError("attention_variant must be 1 or 2")
        return v

    @field_validator("dropout")
    @classmethod
    def _rate(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        return v

    @model_validator(mode="after")
    def _layers_match(self) -> "FaigcnConfig":
        if not self.channels or len(self.channels) != len(self.strides):
            raise ValueError("channels and strides must be non-empty and the same length")
        if any(c < 1 for c in self.channels) or any(s < 1 for s in self.strides):
            raise ValueError("channels and strides must be positive")
        if self.num_classes != 2:
            raise ValueError("only binary classification is supported")
        return self

    @property
    def partition_strategy(self) -> str:
        return KERNEL_TO_STRATEGY[self.kernel_size]


def strided_bins(num_bins: int, stride: int) -> int:
    return math.ceil(num_bins / stride)


@dataclass(frozen=True)
class AttentionMap:
    """Per-joint attention over (post-stride) bins, shape (bins, 18)."""
    alpha: np.ndarray

    @property
    def num_bins(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def per_joint(self) -> np.ndarray:
        """Peak attention of each joint, rescaled to sum 1."""
        peak = self.alpha.max(axis=0)
        return peak / peak.sum()

    @classmethod
    def uniform(cls, num_bins: int) -> "AttentionMap":
        return cls(np.full((num_bins, NUM_JOINTS), 1.0 / num_bins))


def gcn_layer(
    h: torch.Tensor,
    adjacency: torch.Tensor,
    weights: torch.Tensor,
    stride: int = 1,
    bn: Optional[nn.BatchNorm1d] = None,
    rate: float = 0.0,
    rng: Optional[RngStream] = None,
    training: bool = False,
) -> torch.Tensor:
    """ReLU(dropout(BN(sum_p A_p H W_p))), then keep every `stride`-th bin.

    h: (batch, nodes, in_ch); adjacency: sparse [A_0 | ... | A_K-1], (nodes, K*nodes);
    weights: (K, in_ch, out_ch).
    """
    batch, nodes, in_ch = h.shape
    k, w_in, out_ch = weights.shape
    if w_in != in_ch or adjacency.shape != (nodes, k * nodes) or nodes % NUM_JOINTS:
        raise DimensionError("gcn_layer", h.shape, weights.shape)

    # (batch, K, nodes, out) -> (batch, K*nodes, out) matches the stacked adjacency
    hw = matmul(h.unsqueeze(1), weights.unsqueeze(0)).reshape(batch, k * nodes, out_ch)
    out = sparse_matmul(adjacency, hw)
    if bn is not None:
        out = batch_norm(
            out.transpose(1, 2), bn.running_mean, bn.running_var, bn.weight, bn.bias,
            training, bn.momentum, bn.eps,
        ).transpose(1, 2)
    out = relu(dropout(out, rate, rng, training))
    if stride > 1:
        bins = nodes // NUM_JOINTS
        out = out.reshape(batch, bins, NUM_JOINTS, out_ch)[:, ::stride].reshape(batch, -1, out_ch)
    return out


def attention_scores(z: torch.Tensor, w_alpha: torch.Tensor, variant: int) -> torch.Tensor:
    """Score each z (..., hidden) against w_alpha: 1 + cosine (variant 1) or a dot product (variant 2)."""
    dot = matmul(z, w_alpha)
    if variant == 2:
        return dot
    # a zero-norm z or w_alpha gives cosine 0, i.e. score 1
    norms_sq = (z * z).sum(dim=-1) * (w_alpha * w_alpha).sum()
    return 1.0 + dot / torch.sqrt(norms_sq.clamp_min(1e-300))


def attention_pool(h: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
    """v_i = sum_b alpha[b, i] h[b, i]; h (batch, bins, 18, F), alpha (batch, bins, 18)."""
    if h.shape[:3] != alpha.shape:
        raise DimensionError("attention_pool", h.shape, alpha.shape)
    return (alpha.unsqueeze(-1) * h).sum(dim=1)


class FrequencyAttention(nn.Module):
    def __init__(self, features: int, hidden: int, variant: int):
        super().__init__()
        self.variant = variant
        self.w_z = nn.Parameter(torch.zeros(features, hidden, dtype=DTYPE))
        self.w_alpha = nn.Parameter(torch.zeros(hidden, dtype=DTYPE))

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        if h.shape[-1] != self.w_z.shape[0]:
            raise DimensionError("attention", h.shape, self.w_z.shape)
        z = tanh(matmul(h, self.w_z))
        scores = attention_scores(z, self.w_alpha, self.variant)
        return softmax(scores, axis=1)


class Faigcn(nn.Module):
    """All learnable state of the network for a fixed bin count."""

    def __init__(self, config: FaigcnConfig, num_bins: int):
        super().__init__()
        if num_bins < 2:
            raise ParameterError(f"model needs at least 2 bins, got {num_bins}")
        self.config = config
        self.num_bins = num_bins
        k = config.kernel_size

        self.weights = nn.ParameterList()
        self.norms = nn.ModuleList()
        self._adjacency: List[torch.Tensor] = []
        in_ch, bins = NUM_CHANNELS, num_bins
        for out_ch, stride in zip(config.channels, config.strides):
            self.weights.append(nn.Parameter(torch.zeros(k, in_ch, out_ch, dtype=DTYPE)))
            self.norms.append(nn.BatchNorm1d(out_ch, eps=BN_EPS, momentum=BN_MOMENTUM, dtype=DTYPE))
            adj = adjacency_for(bins, config.partition_strategy, config.inter_frequency)
            self._adjacency.append(sparse_from_scipy(adj.stacked()))
            in_ch, bins = out_ch, strided_bins(bins, stride)

        self.out_bins = bins
        self.feature_size = in_ch
        self.attention = FrequencyAttention(in_ch, config.attention_hidden, config.attention_variant)
        self.fc = nn.Linear(in_ch, config.num_classes, dtype=DTYPE)

    def forward(self, x: torch.Tensor, rng: Optional[RngStream] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """x: (batch, bins, 18, 2) -> logits (batch, 2), alpha (batch, out_bins, 18)."""
        if x.dim() != 4 or x.shape[1:] != (self.num_bins, NUM_JOINTS, NUM_CHANNELS):
            raise DimensionError("forward", x.shape, (self.num_bins, NUM_JOINTS, NUM_CHANNELS))
        if self.training and self.config.dropout > 0 and rng is None:
            raise ContractError("training forward needs an RngStream for dropout")

        batch = x.shape[0]
        h = x.reshape(batch, self.num_bins * NUM_JOINTS, NUM_CHANNELS)
        for weights, bn, adj, stride in zip(self.weights, self.norms, self._adjacency, self.config.strides):
            h = gcn_layer(h, adj, weights, stride, bn, self.config.dropout, rng, self.training)

        h = h.reshape(batch, self.out_bins, NUM_JOINTS, self.feature_size)
        if self.config.use_attention:
            alpha = self.attention(h)
        else:
            alpha = torch.full(h.shape[:3], 1.0 / self.out_bins, dtype=DTYPE)
        pooled = mean(attention_pool(h, alpha), axis=1)
        return self.fc(pooled), alpha


FaigcnParams = Faigcn


def init_params(config: FaigcnConfig, num_bins: int, rng: RngStream) -> Faigcn:
    """Fresh model: weights ~ U(-a, a), a = sqrt(6 / fan_in); BN scale 1, shift 0; biases 0."""
    model = Faigcn(config, num_bins)

    def draw(param: torch.Tensor, fan_in: int) -> None:
        bound = math.sqrt(6.0 / fan_in)
        param.copy_(rng.uniform(-bound, bound, param.shape))

    with torch.no_grad():
        for w in model.weights:
            draw(w, w.shape[1])
        for bn in model.norms:
            bn.weight.fill_(1.0)
            bn.bias.zero_()
        draw(model.attention.w_z, model.attention.w_z.shape[0])
        draw(model.attention.w_alpha, model.attention.w_alpha.shape[0])
        draw(model.fc.weight, model.fc.weight.shape[1])
        model.fc.bias.zero_()
    return model


def features_tensor(features: Sequence[SpectralFeatures]) -> torch.Tensor:
    bins = {f.num_bins for f in features}
    if len(bins) != 1:
        raise DimensionError("features_tensor", tuple(sorted(bins)))
    return torch.from_numpy(np.stack([f.values for f in features])).to(DTYPE)


def forward(
    features: SpectralFeatures,
    model: Faigcn,
    training: bool = False,
    rng: Optional[RngStream] = None,
) -> Tuple[torch.Tensor, AttentionMap]:
    """Single-subject pass: logits of shape (2,) and the attention map."""
    if features.num_bins != model.num_bins:
        raise DimensionError("forward", (features.num_bins,), (model.num_bins,))
    model.train(training)
    logits, alpha = model(features_tensor([features]), rng)
    return logits[0], AttentionMap(alpha[0].detach().numpy().copy())
