"""Tensor ops, gradients, Adam and randomness for the model.

Tensors are float64 CPU `torch.Tensor`s and differentiation is torch
autograd. The wrappers here add the shape checks the model relies on and
route every random draw through `RngStream`, never torch's global RNG.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import torch
import torch.nn.functional as F

from pipeline.configurations import (
    ADAM_BETAS,
    ADAM_EPS,
    BN_EPS,
    BN_MOMENTUM,
    CHECKPOINT_FORMAT_VERSION,
    LR_DECAY_FACTOR,
    LR_DECAY_PERIOD,
    TORCH_THREADS,
)
from pipeline.errors import ContractError, DataError, DimensionError, ParameterError
from pipeline.storage import write_bytes_atomic

logger = logging.getLogger(__name__)

DTYPE = torch.float64


def configure_torch(threads: int = TORCH_THREADS) -> None:
    torch.set_num_threads(max(1, threads))
    torch.use_deterministic_algorithms(True, warn_only=True)


def as_tensor(values: Any, requires_grad: bool = False) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE).clone()
    t.requires_grad_(requires_grad)
    return t


# ---------------------------------------------------------------- randomness


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for sub-task `index` (fold, sweep cell, ...)."""
    state = np.random.SeedSequence((int(seed), int(index))).generate_state(1, np.uint64)
    return int(state[0])


class RngStream:
    """Seeded counter-based (Philox) stream; same seed -> same draws everywhere."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.Philox(self.seed))

    def spawn(self, index: int) -> "RngStream":
        return RngStream(derive_seed(self.seed, index))

    def uniform(self, low: float, high: float, shape: Sequence[int]) -> torch.Tensor:
        return torch.from_numpy(self.generator.uniform(low, high, size=tuple(shape))).to(DTYPE)

    def normal(self, shape: Sequence[int], scale: Union[float, np.ndarray] = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, 1.0, size=tuple(shape)) * scale

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def keep_mask(self, rate: float, shape: Sequence[int]) -> torch.Tensor:
        return torch.from_numpy(self.generator.random(size=tuple(shape)) >= rate)


# ---------------------------------------------------------------- core ops


def _broadcast(op: str, a: torch.Tensor, b: torch.Tensor) -> None:
    try:
        torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise DimensionError(op, a.shape, b.shape) from None


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() < 1 or b.dim() < 1 or a.shape[-1] != b.shape[-2 if b.dim() > 1 else 0]:
        raise DimensionError("matmul", a.shape, b.shape)
    return torch.matmul(a, b)


def sparse_matmul(adjacency: torch.Tensor, dense: torch.Tensor) -> torch.Tensor:
    """`adjacency @ dense` for (M, F) or batched (batch, M, F) dense input."""
    if dense.dim() not in (2, 3) or adjacency.shape[1] != dense.shape[-2]:
        raise DimensionError("sparse_matmul", adjacency.shape, dense.shape)
    if dense.dim() == 2:
        return torch.sparse.mm(adjacency, dense)
    batch, m, f = dense.shape
    flat = dense.permute(1, 0, 2).reshape(m, batch * f)
    out = torch.sparse.mm(adjacency, flat)
    return out.reshape(adjacency.shape[0], batch, f).permute(1, 0, 2)


def add(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _broadcast("add", a, b)
    return a + b


def multiply(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _broadcast("multiply", a, b)
    return a * b


def relu(x: torch.Tensor) -> torch.Tensor:
    return torch.relu(x)


def tanh(x: torch.Tensor) -> torch.Tensor:
    return torch.tanh(x)


def softmax(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    if not -x.dim() <= axis < x.dim():
        raise DimensionError("softmax", x.shape)
    return torch.softmax(x, dim=axis)


def mean(x: torch.Tensor, axis: Union[int, Tuple[int, ...], None] = None) -> torch.Tensor:
    if axis is None:
        return x.mean()
    return x.mean(dim=axis)


def batch_norm(
    x: torch.Tensor,
    running_mean: Optional[torch.Tensor],
    running_var: Optional[torch.Tensor],
    weight: torch.Tensor,
    bias: torch.Tensor,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> torch.Tensor:
    """Normalise (batch, channels, nodes) over the batch and node axes."""
    if x.dim() != 3 or x.shape[1] != weight.shape[0]:
        raise DimensionError("batch_norm", x.shape, weight.shape)
    return F.batch_norm(x, running_mean, running_var, weight, bias, training, momentum, eps)


def dropout(x: torch.Tensor, rate: float, rng: Optional[RngStream], training: bool) -> torch.Tensor:
    """Inverted dropout; identity in evaluation mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs an RngStream")
    mask = rng.keep_mask(rate, x.shape).to(x.dtype)
    return x * mask / (1.0 - rate)


def cross_entropy(logits: torch.Tensor, labels: Union[int, torch.Tensor]) -> torch.Tensor:
    """Mean softmax cross-entropy; logits (classes,) or (batch, classes)."""
    if logits.dim() == 1:
        logits = logits.unsqueeze(0)
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if logits.dim() != 2 or labels.shape[0] != logits.shape[0]:
        raise DimensionError("cross_entropy", logits.shape, labels.shape)
    return F.cross_entropy(logits, labels)


def backward(loss: torch.Tensor) -> None:
    if loss.numel() != 1 or loss.dim() != 0:
        raise ContractError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    loss.backward()


def sparse_from_scipy(mat: sp.spmatrix) -> torch.Tensor:
    coo = mat.tocoo()
    indices = torch.from_numpy(np.vstack([coo.row, coo.col]).astype(np.int64))
    values = torch.from_numpy(coo.data.astype(np.float64))
    return torch.sparse_coo_tensor(indices, values, coo.shape, dtype=DTYPE).coalesce()


# ---------------------------------------------------------------- optimisation


@dataclass(frozen=True)
class AdamState:
    first_moment: torch.Tensor
    second_moment: torch.Tensor
    step_count: int


def make_optimizer(params: Iterable[torch.nn.Parameter], lr: float) -> torch.optim.Adam:
    if lr <= 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    return torch.optim.Adam(params, lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)


def adam_step(optimizer: torch.optim.Adam, lr: float) -> None:
    if lr <= 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()


def adam_state(optimizer: torch.optim.Adam, param: torch.nn.Parameter) -> Optional[AdamState]:
    state = optimizer.state.get(param)
    if not state:
        return None
    return AdamState(
        first_moment=state["exp_avg"].detach().clone(),
        second_moment=state["exp_avg_sq"].detach().clone(),
        step_count=int(state["step"]),
    )


def lr_at(
    epoch: int,
    base_lr: float,
    factor: float = LR_DECAY_FACTOR,
    period: int = LR_DECAY_PERIOD,
) -> float:
    if epoch < 0:
        raise ParameterError(f"epoch must be >= 0, got {epoch}")
    return base_lr * factor ** (epoch // period)


def check_gradients(fn, inputs: Tuple[torch.Tensor, ...], eps: float = 1e-5, rtol: float = 1e-4) -> bool:
    """Analytic vs central finite-difference gradients of `fn` w.r.t. `inputs`."""
    return torch.autograd.gradcheck(fn, inputs, eps=eps, atol=1e-8, rtol=rtol, raise_exception=False)


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path: Path, config: Dict[str, Any], num_bins: int, state_dict: Dict[str, torch.Tensor]) -> None:
    buf = io.BytesIO()
    torch.save(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "config": config,
            "num_bins": int(num_bins),
            "state_dict": {k: v.detach().cpu().contiguous() for k, v in state_dict.items()},
        },
        buf,
    )
    write_bytes_atomic(Path(path), buf.getvalue())


def load_checkpoint(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format version {payload.get('format_version')!r}")
    return payload
