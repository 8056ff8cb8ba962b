"""Shared graph samplers and independent oracles for the tests."""
import struct

import numpy as np
import torch

from netaural import model as m5
from netaural.graphs import gen_ba, gen_er, gen_ws, giant_component


def random_small_graphs(count, max_n=20, seed=0, allow_isolated=True):
    """Mixed ER/BA/WS graphs with n <= max_n."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(3, max_n + 1))
        kind = len(out) % 3
        s = int(rng.integers(1 << 31))
        if kind == 0:
            g = gen_er(n, float(rng.uniform(0.1, 0.6)), s)
        elif kind == 1:
            g = gen_ba(n, int(rng.integers(1, min(4, n - 1) + 1)), s)
        else:
            k = 2 * int(rng.integers(1, max(2, (n - 1) // 2)))
            if k >= n:
                k = 2
            g = gen_ws(n, k, float(rng.uniform(0, 0.5)), s)
        if not allow_isolated:
            g = giant_component(g)
            if g.n < 2:
                continue
        out.append(g)
    return out


def finite_difference_check(ckpt, s, target, count, seed, h=1e-4):
    """Central differences on randomly chosen scalar parameters (float64 model)."""
    model = ckpt.model.double()
    grads, _ = m5.backward(ckpt, s, target)
    params = dict(model.named_parameters())
    rng = np.random.default_rng(seed)
    names = sorted(params)
    x = torch.from_numpy(np.ascontiguousarray(s.T))

    def loss_now():
        model.train()
        with torch.no_grad():
            return float(m5.pearson_loss(target, model(x)))

    errors = []
    for _ in range(count):
        name = names[rng.integers(len(names))]
        p = params[name]
        idx = tuple(int(rng.integers(d)) for d in p.shape)
        orig = p.data[idx].item()
        with torch.no_grad():
            p.data[idx] = orig + h
            up = loss_now()
            p.data[idx] = orig - h
            down = loss_now()
            p.data[idx] = orig
        fd = (up - down) / (2 * h)
        an = grads[name][idx].item()
        errors.append((name, an, fd, abs(an - fd) / max(abs(an), abs(fd), 1e-7)))
    return errors


def parse_riff(data: bytes) -> dict:
    """Independent chunk walker; does not assume the canonical 44-byte layout."""
    assert data[:4] == b"RIFF" and data[8:12] == b"WAVE"
    (riff_size,) = struct.unpack_from("<I", data, 4)
    assert riff_size == len(data) - 8
    chunks, pos = {}, 12
    while pos < len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        chunks[cid] = data[pos + 8:pos + 8 + size]
        pos += 8 + size + (size & 1)
    tag, ch, rate, byte_rate, align, bits = struct.unpack("<HHIIHH", chunks[b"fmt "])
    return {"tag": tag, "channels": ch, "rate": rate, "byte_rate": byte_rate, "align": align, "bits": bits,
            "samples": np.frombuffer(chunks[b"data"], dtype="<i2")}
