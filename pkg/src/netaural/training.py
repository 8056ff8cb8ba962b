"""Centrality learning loop and the three-tier evaluation.

Each epoch draws a fresh set of small random graphs (10 + epoch // 10 of
them), auralizes them once, and takes several optimiser steps on that fixed
set. Graph draws for epoch ``e`` come from ``SeedSequence([seed, e])`` so a
resumed run sees the same graphs as an uninterrupted one.
"""
from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from . import centrality
from .auralize import DEFAULT_MOMENTUM, DEFAULT_SAMPLES, auralize
from .graphs import (Graph, bundled_graph, bundled_names, gen_ba, gen_caveman, gen_er, gen_grid, gen_ws,
                     giant_component, load_edge_list)
from .model import (Checkpoint, DegenerateCorrelation, M5Config, m5_forward, m5_init, pearson, pearson_loss,
                    waveforms_to_tensor)

log = logging.getLogger(__name__)

ALL_GENERATORS = ("er", "ba", "ws", "caveman", "grid")
LEAKAGE_PRONE = frozenset({"caveman", "grid"})
TABLE_COLUMNS = {"degree": "Deg", "closeness": "CC", "eigenvector": "EC", "betweenness": "BC"}
# enough for slowly mixing lattices; the default of 1000 is too tight for 150-node grids
EIGEN_MAX_ITER = 100_000


@dataclass
class TrainConfig:
    measure: str = "degree"
    epochs: int = 300
    base_graphs: int = 10
    growth_divisor: int = 10
    inner_batches: int = 10
    train_n: int = 150
    momentum: float = DEFAULT_MOMENTUM
    samples: int = DEFAULT_SAMPLES
    generators: tuple[str, ...] = ALL_GENERATORS
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.0
    # extra 1/10 on the batch loss; only rescales the step size
    loss_scale: float = 0.1
    channels: tuple[int, ...] = (128, 128, 256, 512)
    standardize_input: bool = False
    seed: int = 0

    def __post_init__(self):
        self.generators = tuple(self.generators)
        self.channels = tuple(int(c) for c in self.channels)
        self.betas = tuple(float(b) for b in self.betas)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.inner_batches < 0:
            raise ValueError("inner_batches must be >= 0")
        if self.measure not in centrality.MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}; choose from {', '.join(centrality.MEASURES)}")
        unknown = set(self.generators) - set(ALL_GENERATORS)
        if unknown or not self.generators:
            raise ValueError(f"generators must be a non-empty subset of {ALL_GENERATORS}")

    def model_config(self) -> M5Config:
        return M5Config(input_length=self.samples, stage_channels=self.channels,
                        standardize_input=self.standardize_input)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("generators", "channels", "betas"):
            d[k] = list(d[k])
        return d


def graphs_per_epoch(epoch: int, base: int = 10, divisor: int = 10) -> int:
    return base + epoch // divisor


def sample_graph(kind: str, n: int, rng: np.random.Generator) -> tuple[Graph, dict]:
    """Draw one graph of roughly ``n`` nodes with randomised density.

    Densities are chosen so a 150-node draw matches the training ranges
    (ER p in [0.02, 0.1], BA k in 1..5, WS k in {2,4,6}); ER keeps its mean
    degree when ``n`` changes. Returns the giant component and the parameters.
    """
    seed = int(rng.integers(2**63))
    if kind == "er":
        p = float(rng.uniform(0.02, 0.1)) * 149 / max(n - 1, 1)
        params = {"n": n, "p": min(p, 1.0)}
        g = gen_er(n, params["p"], seed)
    elif kind == "ba":
        params = {"n": n, "k": int(rng.integers(1, 6))}
        g = gen_ba(n, params["k"], seed)
    elif kind == "ws":
        params = {"n": n, "k": int(rng.choice([2, 4, 6])), "p": float(rng.uniform(0.1, 0.5))}
        g = gen_ws(n, params["k"], params["p"], seed)
    elif kind == "caveman":
        size = int(rng.integers(5, 31))
        params = {"cliques": max(2, round(n / size)), "size": size}
        g = gen_caveman(params["cliques"], params["size"])
    elif kind == "grid":
        root = math.sqrt(n)
        rows = int(rng.integers(max(1, math.ceil(root / 2)), int(root) + 1))
        params = {"rows": rows, "cols": max(1, round(n / rows))}
        g = gen_grid(params["rows"], params["cols"])
    else:
        raise ValueError(f"unknown generator {kind!r}")
    params["seed"] = seed
    return giant_component(g), params


def ground_truth(g: Graph, measure: str) -> np.ndarray:
    if measure == "eigenvector":
        return centrality.eigenvector_centrality(g, max_iter=EIGEN_MAX_ITER)
    return centrality.compute(g, measure)


def _is_constant(c: np.ndarray) -> bool:
    return c.size < 2 or float(np.ptp(c)) == 0.0


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[tuple[int, int, float]]
    skipped: int = 0


def _epoch_graphs(config: TrainConfig, epoch: int) -> tuple[list[tuple[torch.Tensor, np.ndarray]], int]:
    rng = np.random.default_rng([config.seed, epoch])
    mcfg = config.model_config()
    batch, skipped = [], 0
    while len(batch) < graphs_per_epoch(epoch, config.base_graphs, config.growth_divisor):
        kind = config.generators[int(rng.integers(len(config.generators)))]
        g, _ = sample_graph(kind, config.train_n, rng)
        target = ground_truth(g, config.measure)
        if _is_constant(target):
            skipped += 1
            continue
        s = auralize(g, config.momentum, config.samples)
        batch.append((waveforms_to_tensor(s, mcfg), target))
    return batch, skipped


def train(config: TrainConfig, checkpoint: Checkpoint | None = None, start_epoch: int = 0,
          on_epoch: Callable[[int, Checkpoint, list], None] | None = None) -> TrainResult:
    """Run epochs ``start_epoch + 1 .. config.epochs``.

    ``history`` holds ``(step, epoch, loss)`` with the unscaled mean of
    ``1 - rho`` over the epoch's graphs, recorded before each optimiser step.
    """
    torch.use_deterministic_algorithms(True)
    ckpt = checkpoint or m5_init(config.model_config(), config.seed)
    model = ckpt.model
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, betas=config.betas,
                           weight_decay=config.weight_decay)
    history: list[tuple[int, int, float]] = []
    step = int(ckpt.metadata.get("steps", 0))
    skipped = 0
    model.train()
    for epoch in range(start_epoch + 1, config.epochs + 1):
        batch, n_skip = _epoch_graphs(config, epoch)
        if n_skip:
            log.info("epoch %d: skipped %d graphs with constant %s", epoch, n_skip, config.measure)
        skipped += n_skip
        for _ in range(config.inner_batches):
            opt.zero_grad(set_to_none=True)
            total = 0.0
            # one graph's activations at a time; gradients accumulate to those of the mean loss
            for x, target in batch:
                value = pearson_loss(target, model(x))
                (value * (config.loss_scale / len(batch))).backward()
                total += float(value.detach())
            opt.step()
            step += 1
            history.append((step, epoch, total / len(batch)))
        ckpt.metadata.update({"measure": config.measure, "seed": config.seed, "epoch": epoch,
                              "epochs": config.epochs, "steps": step, "momentum": config.momentum})
        if on_epoch is not None:
            on_epoch(epoch, ckpt, history)
    model.eval()
    return TrainResult(ckpt, history, skipped)


def history_csv(history) -> str:
    buf = io.StringIO()
    buf.write("step,epoch,loss\n")
    for step, epoch, value in history:
        buf.write(f"{step},{epoch},{value!r}\n")
    return buf.getvalue()


def read_history_csv(text: str) -> list[tuple[int, int, float]]:
    rows = text.strip().splitlines()[1:]
    out = []
    for row in rows:
        step, epoch, value = row.split(",")
        out.append((int(step), int(epoch), float(value)))
    return out


# -- evaluation ------------------------------------------------------------

@dataclass
class TestGraph:
    __test__ = False

    name: str
    kind: str
    graph: Graph
    params: dict = field(default_factory=dict)


def build_testset(tier: str, seed: int = 0, per_generator: int = 4, n: int | None = None,
                  generators=ALL_GENERATORS, internet: str | Path | None = None) -> list[TestGraph]:
    """Fresh test graphs for one tier.

    ``small`` and ``large`` draw ``per_generator`` graphs from each model at
    n=150 / n=1500 (override with ``n``); ``real`` returns the bundled
    networks plus an optional external Internet edge list.
    """
    if tier == "real":
        out = [TestGraph(name, "real", bundled_graph(name)) for name in bundled_names()]
        if internet is not None:
            g = giant_component(load_edge_list(Path(internet).read_text(encoding="utf-8")))
            out.append(TestGraph("internet", "real", g, {"path": str(internet)}))
        else:
            log.warning("no Internet topology supplied; the real tier has %d graphs", len(out))
        return out
    if tier not in ("small", "large"):
        raise ValueError(f"unknown tier {tier!r}")
    size = n or (150 if tier == "small" else 1500)
    rng = np.random.default_rng([seed, 0x7E57])
    out = []
    for kind in generators:
        for i in range(per_generator):
            g, params = sample_graph(kind, size, rng)
            out.append(TestGraph(f"{kind}-{size}-{i}", kind, g, params))
    return out


@dataclass
class EvalRecord:
    graph: str
    kind: str
    n: int
    measure: str
    rho: float | None
    degenerate: bool = False
    leakage_risk: bool = False


@dataclass
class EvalReport:
    tier: str
    measure: str
    records: list[EvalRecord]
    notes: list[str] = field(default_factory=list)

    def valid(self) -> list[float]:
        return [r.rho for r in self.records if not r.degenerate]

    def summary(self) -> dict:
        vals = self.valid()
        return {
            "mean": float(np.mean(vals)) if vals else None,
            "min": float(np.min(vals)) if vals else None,
            "count": len(vals),
            "degenerate": sum(r.degenerate for r in self.records),
        }

    def to_dict(self) -> dict:
        return {"tier": self.tier, "measure": self.measure, "summary": self.summary(),
                "records": [asdict(r) for r in self.records], "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate(ckpt: Checkpoint | None, testset: list[TestGraph], measure: str, tier: str = "custom",
             momentum: float = DEFAULT_MOMENTUM, samples: int | None = None,
             predictor: Callable[[Graph, np.ndarray], np.ndarray] | None = None) -> EvalReport:
    """Pearson correlation between predictions and ground truth for each graph.

    ``predictor`` replaces the model (useful for debugging the harness). The
    checkpoint is only read, in evaluation mode.
    """
    if samples is None:
        if ckpt is None:
            raise ValueError("samples is required without a checkpoint")
        samples = ckpt.config.input_length
    if ckpt is not None and samples != ckpt.config.input_length:
        raise ValueError(f"checkpoint expects length {ckpt.config.input_length}, got {samples}")
    records = []
    for tg in testset:
        g = tg.graph
        truth = ground_truth(g, measure)
        s = auralize(g, momentum, samples)
        pred = predictor(g, s) if predictor is not None else m5_forward(ckpt, s)
        try:
            rho = pearson(truth, pred)
            degenerate = False
        except (DegenerateCorrelation, ValueError):
            rho, degenerate = None, True
        records.append(EvalRecord(tg.name, tg.kind, g.n, measure, rho, degenerate, tg.kind in LEAKAGE_PRONE))
    notes = []
    if any(r.leakage_risk for r in records):
        notes.append("grid and caveman graphs have low variability; train/test leakage is likely")
    return EvalReport(tier, measure, records, notes)


def correlation_matrix_csv(reports: list[EvalReport]) -> str:
    """Networks as rows, one column per measure present (Deg, CC, EC, BC order)."""
    measures = [m for m in TABLE_COLUMNS if any(r.measure == m for r in reports)]
    rows: dict[str, dict[str, str]] = {}
    tiers: dict[str, str] = {}
    for rep in reports:
        for rec in rep.records:
            rows.setdefault(rec.graph, {})[rec.measure] = "degenerate" if rec.degenerate else repr(rec.rho)
            tiers[rec.graph] = rep.tier
    buf = io.StringIO()
    buf.write(",".join(["network", "tier"] + [TABLE_COLUMNS[m] for m in measures]) + "\n")
    for name, vals in rows.items():
        buf.write(",".join([name, tiers[name]] + [vals.get(m, "") for m in measures]) + "\n")
    return buf.getvalue()
