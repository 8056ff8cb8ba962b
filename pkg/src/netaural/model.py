"""M5-style 1D convolutional regressor over node waveforms.

Each node's waveform is an independent sequence; the nodes of one graph form
the batch, so batch-norm statistics in training mode are per-graph.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

LOSS_EPS = 1e-8

CKPT_MAGIC = b"M5CK"
CKPT_VERSION = 1


class DegenerateCorrelation(ValueError):
    """Pearson correlation undefined because an input is constant."""


class CheckpointError(ValueError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


@dataclass(frozen=True)
class M5Config:
    input_length: int = 10_000
    first_kernel: int = 80
    first_stride: int = 4
    stage_channels: tuple[int, ...] = (128, 128, 256, 512)
    later_kernel: int = 3
    pool: int = 4
    output_dim: int = 1
    standardize_input: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        if self.first_kernel != 80:
            raise ValueError("the first convolution must have kernel width 80")
        if self.output_dim != 1:
            raise ValueError("the regressor has a single output")
        if len(self.stage_channels) != 4 or min(self.stage_channels) < 1:
            raise ValueError("stage_channels needs four positive widths")
        if min(self.first_stride, self.later_kernel, self.pool) < 1:
            raise ValueError("strides, kernels and pools must be positive")
        if self.input_length < self.first_kernel:
            raise ValueError(f"input_length must be at least {self.first_kernel}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_channels"] = list(self.stage_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "M5Config":
        return cls(**d)


SMALL_CHANNELS = (32, 32, 64, 64)


class M5(nn.Module):
    def __init__(self, config: M5Config):
        super().__init__()
        self.config = config
        c = config.stage_channels
        layers: list[nn.Module] = []
        in_ch = 1
        for i, out_ch in enumerate(c):
            if i == 0:
                conv = nn.Conv1d(in_ch, out_ch, config.first_kernel, stride=config.first_stride)
            else:
                conv = nn.Conv1d(in_ch, out_ch, config.later_kernel, padding=config.later_kernel // 2)
            # ceil_mode keeps short inputs from pooling down to zero length
            layers += [conv, nn.BatchNorm1d(out_ch), nn.ReLU(), nn.MaxPool1d(config.pool, ceil_mode=True)]
            in_ch = out_ch
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(in_ch, config.output_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """``x`` has shape (nodes, length); returns one value per node."""
        if self.config.standardize_input:
            x = (x - x.mean()) / (x.std(unbiased=False) + LOSS_EPS)
        h = self.features(x.unsqueeze(1))
        return self.head(h.mean(dim=2)).squeeze(1)


@dataclass
class Checkpoint:
    model: M5
    metadata: dict = field(default_factory=dict)

    @property
    def config(self) -> M5Config:
        return self.model.config


def _init_weights(model: M5, seed: int) -> None:
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for mod in model.modules():
            if isinstance(mod, nn.Conv1d):
                fan_in = mod.in_channels * mod.kernel_size[0]
                mod.weight.copy_(torch.randn(mod.weight.shape, generator=gen) * math.sqrt(2.0 / fan_in))
                mod.bias.zero_()
            elif isinstance(mod, nn.Linear):
                bound = 1.0 / math.sqrt(mod.in_features)
                mod.weight.copy_((torch.rand(mod.weight.shape, generator=gen) * 2 - 1) * bound)
                mod.bias.zero_()
            elif isinstance(mod, nn.BatchNorm1d):
                mod.reset_parameters()
                mod.reset_running_stats()


def m5_init(config: M5Config, seed: int = 0) -> Checkpoint:
    model = M5(config)
    _init_weights(model, seed)
    return Checkpoint(model, {"init_seed": int(seed)})


def waveforms_to_tensor(s: np.ndarray, config: M5Config, dtype=np.float32) -> torch.Tensor:
    """(l, n) float64 waveform matrix to a (n, l) tensor, float32 unless asked otherwise."""
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != config.input_length:
        raise ValueError(f"expected waveforms of length {config.input_length}, got shape {s.shape}")
    return torch.from_numpy(np.ascontiguousarray(s.T, dtype=dtype))


def m5_forward(ckpt: Checkpoint, s: np.ndarray) -> np.ndarray:
    """Predicted centrality per node, using running statistics (no side effects).

    Nodes are pushed through one at a time: in eval mode they are independent,
    and a fixed batch shape keeps the output exactly permutation-equivariant
    (batched kernels round differently depending on a row's position).
    """
    model = ckpt.model
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            x = waveforms_to_tensor(s, ckpt.config)
            out = torch.cat([model(row) for row in x.split(1)])
    finally:
        model.train(was_training)
    return out.double().numpy()


def pearson(x, y) -> float:
    """Population Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("pearson needs two 1-D vectors of equal length >= 2")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt((xc * xc).mean()), np.sqrt((yc * yc).mean())
    if sx == 0 or sy == 0:
        raise DegenerateCorrelation("constant input")
    r = (xc * yc).mean() / (sx * sy)
    return float(min(1.0, max(-1.0, r)))


def pearson_loss(target, pred: torch.Tensor, eps: float = LOSS_EPS) -> torch.Tensor:
    """``1 - rho(target, pred)``, differentiable in ``pred``.

    Computed in float64. ``eps`` guards only the prediction's spread: the
    target is required to be non-constant, and leaving its std unguarded keeps
    the loss exactly invariant to positive affine rescaling of the target.
    """
    c = torch.as_tensor(np.asarray(target, dtype=np.float64)) if not torch.is_tensor(target) else target.double()
    p = pred.double()
    if c.shape != p.shape or c.numel() < 2:
        raise ValueError("target and prediction must be equal-length vectors of length >= 2")
    cc = c - c.mean()
    sc = cc.pow(2).mean().sqrt()
    if sc == 0:
        raise DegenerateCorrelation("constant target")
    cz = cc / sc
    pc = p - p.mean()
    sp = pc.pow(2).mean().sqrt()
    rho = (cz * pc).mean() / (sp + eps)
    return 1.0 - rho


def loss(c, p) -> float:
    return float(pearson_loss(c, torch.as_tensor(np.asarray(p, dtype=np.float64))))


def backward(ckpt: Checkpoint, s: np.ndarray, c) -> tuple[dict[str, torch.Tensor], float]:
    """Loss and gradients for one graph, with batch statistics over its nodes.

    Running statistics are restored afterwards so the call has no side effects.
    """
    model = ckpt.model
    saved = {k: v.clone() for k, v in model.state_dict().items() if "running" in k or "num_batches" in k}
    was_training = model.training
    model.train()
    model.zero_grad(set_to_none=True)
    dtype = next(model.parameters()).dtype
    x = waveforms_to_tensor(s, ckpt.config, np.float64 if dtype == torch.float64 else np.float32)
    value = pearson_loss(c, model(x))
    value.backward()
    grads = {name: p.grad.detach().clone() for name, p in model.named_parameters()}
    model.zero_grad(set_to_none=True)
    model.load_state_dict(saved, strict=False)
    model.train(was_training)
    return grads, float(value.detach())


# checkpoint container: magic, version, header json, then named float32 tensors
_HEAD = struct.Struct("<4sII")


def save_checkpoint(ckpt: Checkpoint) -> bytes:
    header = json.dumps({"config": ckpt.config.to_dict(), "metadata": ckpt.metadata}, sort_keys=True).encode()
    state = ckpt.model.state_dict()
    out = [_HEAD.pack(CKPT_MAGIC, CKPT_VERSION, len(header)), header, struct.pack("<I", len(state))]
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        key = name.encode()
        out.append(struct.pack("<H", len(key)) + key)
        out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError("truncated checkpoint")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(data: bytes, config: M5Config | None = None) -> Checkpoint:
    """Inverse of :func:`save_checkpoint`.

    If ``config`` is given, tensor shapes are checked against a model built
    from it instead of the stored configuration.
    """
    r = _Reader(data)
    magic, version, hlen = r.unpack("<4sII")
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(r.take(hlen))
    stored = M5Config.from_dict(header["config"])
    model = M5(config or stored)
    expected = model.state_dict()
    (count,) = r.unpack("<I")
    state = {}
    for _ in range(count):
        (klen,) = r.unpack("<H")
        name = r.take(klen).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape)
        if name not in expected:
            raise CheckpointShapeError(f"unexpected tensor {name!r}")
        if tuple(expected[name].shape) != tuple(shape):
            raise CheckpointShapeError(f"{name}: stored shape {tuple(shape)} != model shape {tuple(expected[name].shape)}")
        state[name] = torch.from_numpy(arr.copy()).to(expected[name].dtype)
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after tensor table")
    missing = set(expected) - set(state)
    if missing:
        raise CheckpointShapeError(f"missing tensors: {sorted(missing)}")
    model.load_state_dict(state)
    return Checkpoint(model, header["metadata"])


def state_equal(a: Checkpoint, b: Checkpoint) -> bool:
    sa, sb = a.model.state_dict(), b.model.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)
