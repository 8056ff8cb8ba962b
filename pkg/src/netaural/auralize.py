"""Impulse-response energy exchange on a graph.

Every node starts with potential 1. At each step a node pushes its potential
to its neighbours in equal shares, plus a fraction ``momentum`` of the flow it
pushed along the same edge at the previous step. The recorded potentials,
minus their time-mean, are the node waveforms.

Flows are stored per directed edge, so a run costs O(l * |E|).
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .graphs import Graph

EPS = 1e-32
DEFAULT_MOMENTUM = 0.99
DEFAULT_SAMPLES = 10_000
DENSE_ORACLE_MAX_N = 64

AURL_MAGIC = b"AURL"
AURL_VERSION = 1
_AURL_HEADER = struct.Struct("<4sIQQ")


class WaveformFormatError(ValueError):
    pass


@dataclass
class FlowState:
    """Per-directed-edge flow for one graph.

    ``src``/``dst`` list both orientations of each edge, sorted by
    (src, dst); ``power[e]`` is the share of ``src[e]``'s potential sent along
    edge ``e`` per step.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    power: np.ndarray
    flow: np.ndarray
    momentum: float
    # incoming flows are reduced in (dst, src) order
    _in_order: np.ndarray
    _in_dst: np.ndarray

    @classmethod
    def initial(cls, g: Graph, momentum: float = DEFAULT_MOMENTUM, eps: float = EPS) -> "FlowState":
        if not 0.0 <= momentum <= 1.0:
            raise ValueError(f"momentum must lie in [0, 1], got {momentum}")
        src, dst = g.directed_edges
        deg = g.degree.astype(np.float64)
        power = 1.0 / (deg[src] + _guard(deg[src], eps))
        in_order = np.lexsort((src, dst))
        return cls(g.n, src, dst, power, np.zeros_like(power), float(momentum), in_order, dst[in_order])

    def power_matrix(self) -> np.ndarray:
        p = np.zeros((self.n, self.n))
        p[self.src, self.dst] = self.power
        return p


def _guard(deg, eps):
    # eps only matters where the degree is zero; adding it to 1.0 would be lost anyway
    return np.where(deg == 0, eps, 0.0)


def power_matrix(g: Graph, eps: float = EPS) -> np.ndarray:
    """Dense ``P[u, v] = A[u, v] / D[u]`` with isolated rows left at zero."""
    a = g.adjacency()
    deg = a.sum(axis=1)
    return a / (deg + _guard(deg, eps))[:, None]


def flow_step(state: FlowState, s_prev: np.ndarray) -> tuple[FlowState, np.ndarray]:
    """Advance one step; returns the updated state and the new potentials.

    ``state.flow`` is updated in place and the same object is returned.
    """
    s_prev = np.asarray(s_prev, dtype=np.float64)
    if s_prev.shape != (state.n,):
        raise ValueError(f"expected {state.n} potentials, got shape {s_prev.shape}")
    flow = state.flow
    np.multiply(flow, state.momentum, out=flow)
    flow += s_prev[state.src] * state.power
    incoming = np.bincount(state._in_dst, weights=flow[state._in_order], minlength=state.n)
    outgoing = np.bincount(state.src, weights=flow, minlength=state.n)
    # net flow first, so symmetric exchanges cancel exactly
    return state, s_prev + (incoming - outgoing)


def remove_dc(raw: np.ndarray) -> np.ndarray:
    return raw - raw.mean(axis=0, keepdims=True)


def _check_args(momentum, samples):
    if samples < 1:
        raise ValueError("sample count must be >= 1")
    if not 0.0 <= momentum <= 1.0:
        raise ValueError(f"momentum must lie in [0, 1], got {momentum}")


def auralize_raw(g: Graph, momentum: float = DEFAULT_MOMENTUM, samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Potentials S_1..S_l before DC removal, shape ``(samples, n)``."""
    _check_args(momentum, samples)
    state = FlowState.initial(g, momentum)
    out = np.empty((samples, g.n), dtype=np.float64)
    s = np.ones(g.n)
    for t in range(samples):
        state, s = flow_step(state, s)
        out[t] = s
    return out


def auralize(g: Graph, momentum: float = DEFAULT_MOMENTUM, samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Node waveforms, shape ``(samples, n)``, each column with zero mean."""
    return remove_dc(auralize_raw(g, momentum, samples))


def auralize_dense_oracle(g: Graph, momentum: float = DEFAULT_MOMENTUM, samples: int = DEFAULT_SAMPLES,
                          raw: bool = False) -> np.ndarray:
    """Reference implementation with a dense n x n flow matrix.

    Kept deliberately close to the matrix pseudocode; only for small graphs.
    """
    _check_args(momentum, samples)
    if g.n > DENSE_ORACLE_MAX_N:
        raise ValueError(f"dense oracle limited to n <= {DENSE_ORACLE_MAX_N}")
    a = g.adjacency()
    p = a / (a.sum(axis=0) + EPS)[:, None]
    s_t = np.ones(g.n)
    ds = np.zeros((g.n, g.n))
    rows = []
    for _ in range(samples):
        ds = np.diag(s_t) @ p + momentum * ds
        s_t = s_t + ds.sum(axis=0) - ds.sum(axis=1)
        rows.append(s_t)
    out = np.array(rows)
    return out if raw else remove_dc(out)


def write_waveforms(s: np.ndarray) -> bytes:
    """AURL container: magic, version, l, n, then row-major little-endian float64."""
    s = np.ascontiguousarray(s, dtype="<f8")
    if s.ndim != 2:
        raise ValueError("waveform matrix must be 2-D")
    l, n = s.shape
    return _AURL_HEADER.pack(AURL_MAGIC, AURL_VERSION, l, n) + s.tobytes()


def read_waveforms(data: bytes) -> np.ndarray:
    if len(data) < _AURL_HEADER.size:
        raise WaveformFormatError("truncated header")
    magic, version, l, n = _AURL_HEADER.unpack_from(data)
    if magic != AURL_MAGIC:
        raise WaveformFormatError(f"bad magic {magic!r}")
    if version != AURL_VERSION:
        raise WaveformFormatError(f"unsupported version {version}")
    body = data[_AURL_HEADER.size:]
    if len(body) != 8 * l * n:
        raise WaveformFormatError(f"expected {8 * l * n} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(l, n).astype(np.float64)


def trace_csv(s: np.ndarray) -> str:
    """CSV with one row per step: ``t, node_0, ..., node_{n-1}``; t starts at 1."""
    buf = io.StringIO()
    l, n = s.shape
    buf.write(",".join(["t"] + [f"node_{v}" for v in range(n)]) + "\n")
    for t in range(l):
        buf.write(",".join([str(t + 1)] + [repr(float(x)) for x in s[t]]) + "\n")
    return buf.getvalue()
