"""Command-line entry point: gen, auralize, centrality, train, eval, reproduce.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, audio, centrality
from .auralize import (DEFAULT_MOMENTUM, DEFAULT_SAMPLES, WaveformFormatError, auralize_raw, remove_dc,
                       trace_csv, write_waveforms)
from .graphs import (EdgeListError, Graph, GraphError, bundled_graph, gen_ba, gen_caveman, gen_er, gen_grid,
                     gen_ws, load_edge_list, serialize_edge_list)
from .model import SMALL_CHANNELS, CheckpointError, load_checkpoint, save_checkpoint
from .training import (ALL_GENERATORS, TrainConfig, build_testset, correlation_matrix_csv, evaluate,
                       ground_truth, history_csv, read_history_csv, train)

log = logging.getLogger("netaural")

SEED_ENV = "NETAURAL_SEED"


class UsageError(Exception):
    pass


def _default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV, "0"))
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer") from None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, data, outputs: list[Path]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data, encoding="utf-8")
    outputs.append(path)
    return path


def _write_manifest(path: Path, command: str, config: dict, seed, inputs, outputs, started: float):
    manifest = {
        "subcommand": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if Path(p).is_file()},
        "outputs": {str(p): _sha256(p) for p in outputs if p.is_file()},
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "versions": {"netaural": __version__, "python": platform.python_version(), "numpy": np.__version__},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def read_graph(spec: str) -> tuple[Graph, str]:
    """``bundled:<name>`` or a path to an edge-list file."""
    if spec.startswith("bundled:"):
        name = spec.split(":", 1)[1]
        return bundled_graph(name), name
    path = Path(spec)
    return load_edge_list(path.read_text(encoding="utf-8")), path.stem


# -- subcommands -----------------------------------------------------------

def cmd_gen(args) -> int:
    started = time.time()
    seed = args.seed if args.seed is not None else _default_seed()
    model = args.model
    need = {"er": ("n", "p"), "ba": ("n", "k"), "ws": ("n", "k", "p"), "caveman": ("cliques", "size"),
            "grid": ("rows", "cols")}[model]
    params = {name: getattr(args, name) for name in need}
    if model == "ws" and params["k"] is not None and params["k"] % 2:
        raise UsageError(f"k must be even, got {params['k']}")
    missing = [k for k, v in params.items() if v is None]
    if missing:
        raise UsageError(f"--model {model} needs " + ", ".join(f"--{k}" for k in missing))
    if model == "er":
        g = gen_er(params["n"], params["p"], seed)
    elif model == "ba":
        g = gen_ba(params["n"], params["k"], seed)
    elif model == "ws":
        g = gen_ws(params["n"], params["k"], params["p"], seed)
    elif model == "caveman":
        g = gen_caveman(params["cliques"], params["size"])
    else:
        g = gen_grid(params["rows"], params["cols"])
    text = serialize_edge_list(g)
    if args.out is None:
        sys.stdout.write(text)
        return 0
    outputs: list[Path] = []
    out = _write(Path(args.out), text, outputs)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "gen", {"model": model, **params},
                    seed, [], outputs, started)
    return 0


def cmd_auralize(args) -> int:
    started = time.time()
    if args.l < 1:
        raise UsageError("--l must be >= 1")
    g, name = read_graph(args.graph)
    raw = auralize_raw(g, args.m, args.l)
    s = remove_dc(raw)
    outputs: list[Path] = []
    out = Path(args.out)
    _write(out, write_waveforms(s), outputs)
    if args.trace:
        _write(Path(args.trace), trace_csv(raw), outputs)
    if args.wav_dir:
        wav_dir = Path(args.wav_dir)
        for v in range(g.n):
            clip = audio.waveform_to_clip(s[:, v], args.rate, args.peak)
            _write(wav_dir / f"{name}_{v}.wav", audio.write_wav(clip), outputs)
        all_clip = audio.concat_all_nodes(s, args.rate, args.gap, args.peak)
        _write(wav_dir / f"{name}_all.wav", audio.write_wav(all_clip), outputs)
    if args.spectra_dir:
        spec_dir = Path(args.spectra_dir)
        for v in range(g.n):
            _write(spec_dir / f"{name}_{v}_spectrum.csv",
                   audio.spectrum_csv(audio.spectrum(s[:, v]), args.l, args.rate), outputs)
            if args.l >= 256:
                _write(spec_dir / f"{name}_{v}_spectrogram.csv", audio.spectrogram_csv(audio.spectrogram(s[:, v])),
                       outputs)
    if args.figures:
        from . import plotting

        fig_dir = Path(args.figures)
        outputs.append(plotting.plot_trace(raw, fig_dir / f"{name}_trace.png", title=f"{name}, m={args.m}"))
        outputs.append(plotting.plot_voice(s, fig_dir / f"{name}_voice.png", sample_rate=args.rate, title=name))
    config = {"graph": args.graph, "n": g.n, "m_edges": g.m, "momentum": args.m, "samples": args.l,
              "rate": args.rate, "peak": args.peak, "gap": args.gap}
    if g.labels is not None:
        config["labels"] = list(g.labels)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "auralize", config, None,
                    [args.graph], outputs, started)
    return 0


def cmd_centrality(args) -> int:
    g, _ = read_graph(args.graph)
    values = ground_truth(g, args.measure)
    text = centrality.to_csv(values, args.measure)
    if args.out is None:
        sys.stdout.write(text)
        return 0
    started = time.time()
    outputs: list[Path] = []
    out = _write(Path(args.out), text, outputs)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "centrality",
                    {"graph": args.graph, "measure": args.measure}, None, [args.graph], outputs, started)
    return 0


_TRAIN_FLAGS = {
    "measure": "measure", "epochs": "epochs", "n": "train_n", "l": "samples", "m": "momentum",
    "lr": "lr", "inner_batches": "inner_batches", "seed": "seed", "loss_scale": "loss_scale",
}


def resolve_train_config(args) -> TrainConfig:
    """Flags override the config file, which overrides defaults."""
    values: dict = {}
    if args.config:
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if "seed" not in values:
        values["seed"] = _default_seed()
    for flag, key in _TRAIN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if getattr(args, "generators", None):
        values["generators"] = args.generators.split(",")
    if getattr(args, "small_model", False):
        values["channels"] = list(SMALL_CHANNELS)
    if getattr(args, "standardize", False):
        values["standardize_input"] = True
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise UsageError(f"bad training configuration: {exc}") from None


def cmd_train(args) -> int:
    started = time.time()
    config = resolve_train_config(args)
    out = Path(args.out)
    outputs: list[Path] = []

    def progress(epoch, ckpt, history):
        losses = [h[2] for h in history if h[1] == epoch]
        mean = float(np.mean(losses)) if losses else float("nan")
        print(f"epoch {epoch} mean_loss {mean:.6f}", flush=True)

    result = train(config, on_epoch=progress)
    _write(out / "checkpoint.m5", save_checkpoint(result.checkpoint), outputs)
    _write(out / "history.csv", history_csv(result.history), outputs)
    if not args.no_figures and result.history:
        from . import plotting

        outputs.append(plotting.plot_loss(result.history, out / "loss.png", title=f"{config.measure}"))
    _write_manifest(out / "manifest.json", "train", config.to_dict(), config.seed, [args.config] if args.config else [],
                    outputs, started)
    return 0


def _eval_predictor(args, measure):
    if args.ground_truth_predictor:
        return lambda g, s: ground_truth(g, measure)
    return None


def cmd_eval(args) -> int:
    started = time.time()
    ckpt = load_checkpoint(Path(args.checkpoint).read_bytes())
    seed = args.seed if args.seed is not None else _default_seed()
    measure = args.measure or ckpt.metadata.get("measure", "degree")
    momentum = args.m if args.m is not None else ckpt.metadata.get("momentum", DEFAULT_MOMENTUM)
    if args.l is not None and args.l != ckpt.config.input_length:
        print(f"error: checkpoint expects --l {ckpt.config.input_length}, got {args.l}", file=sys.stderr)
        return 1
    generators = tuple(args.generators.split(",")) if args.generators else ALL_GENERATORS
    testset = build_testset(args.tier, seed, per_generator=args.per_generator, n=args.n, generators=generators,
                            internet=args.internet)
    if args.tier == "real" and args.internet is None:
        print("warning: no Internet topology given (--internet); reporting the 4 bundled graphs", file=sys.stderr)
    report = evaluate(ckpt, testset, measure, tier=args.tier, momentum=momentum,
                      predictor=_eval_predictor(args, measure))
    out = Path(args.out)
    outputs: list[Path] = []
    _write(out / "report.json", report.to_json(), outputs)
    _write(out / "correlations.csv", correlation_matrix_csv([report]), outputs)
    if not args.no_figures:
        from . import plotting

        outputs.append(plotting.plot_correlations([report], out / "correlations.png",
                                                  title=f"{measure}, {args.tier} tier"))
    summary = report.summary()
    print(f"{args.tier} {measure}: mean rho {summary['mean']} over {summary['count']} graphs "
          f"({summary['degenerate']} degenerate)")
    _write_manifest(out / "manifest.json", "eval",
                    {"tier": args.tier, "measure": measure, "momentum": momentum,
                     "per_generator": args.per_generator, "n": args.n, "generators": list(generators),
                     "internet": args.internet, "ground_truth_predictor": args.ground_truth_predictor},
                    seed, [args.checkpoint] + ([args.internet] if args.internet else []), outputs, started)
    return 0


def cmd_reproduce(args) -> int:
    if not args.i_understand_this_takes_hours:
        raise UsageError("reproduce runs the full protocol (hours of CPU); pass --i-understand-this-takes-hours")
    started = time.time()
    base = resolve_train_config(args)
    out = Path(args.out)
    outputs: list[Path] = []
    reports = []
    measures = args.measures.split(",") if args.measures else list(centrality.MEASURES)
    try:
        for measure in measures:
            config = TrainConfig(**{**base.to_dict(), "measure": measure})
            mdir = out / measure
            ckpt_path, hist_path = mdir / "checkpoint.m5", mdir / "history.csv"
            ckpt, start, history = None, 0, []
            if ckpt_path.exists():
                ckpt = load_checkpoint(ckpt_path.read_bytes())
                start = int(ckpt.metadata.get("epoch", 0))
                history = read_history_csv(hist_path.read_text()) if hist_path.exists() else []
                print(f"{measure}: resuming after epoch {start}", flush=True)

            def save(epoch, c, h, mdir=mdir, prior=history):
                mdir.mkdir(parents=True, exist_ok=True)
                (mdir / "checkpoint.m5").write_bytes(save_checkpoint(c))
                (mdir / "history.csv").write_text(history_csv(prior + h))
                losses = [x[2] for x in h if x[1] == epoch]
                print(f"{measure} epoch {epoch} mean_loss {np.mean(losses) if losses else float('nan'):.6f}",
                      flush=True)

            if start < config.epochs:
                result = train(config, checkpoint=ckpt, start_epoch=start, on_epoch=save)
                ckpt, history = result.checkpoint, history + result.history
            outputs += [ckpt_path, hist_path]
            if not args.no_figures:
                from . import plotting

                outputs.append(plotting.plot_loss(history, mdir / "loss.png", title=measure))
            for tier in ("small", "large", "real"):
                testset = build_testset(tier, args.seed_eval, per_generator=args.per_generator,
                                        internet=args.internet)
                rep = evaluate(ckpt, testset, measure, tier=tier, momentum=config.momentum)
                reports.append(rep)
                _write(mdir / f"report_{tier}.json", rep.to_json(), outputs)
    except (MemoryError, KeyboardInterrupt) as exc:
        print(f"error: interrupted ({type(exc).__name__}); partial results saved under {out}", file=sys.stderr)
        if reports:
            _write(out / "table1_partial.csv", correlation_matrix_csv(reports), outputs)
        return 1
    _write(out / "table1.csv", correlation_matrix_csv(reports), outputs)
    _write(out / "table1.json", json.dumps([r.to_dict() for r in reports], indent=2), outputs)
    if not args.no_figures:
        from . import plotting

        outputs.append(plotting.plot_correlations(reports, out / "table1.png"))
    _write_manifest(out / "manifest.json", "reproduce", {**base.to_dict(), "measures": measures}, base.seed,
                    [args.internet] if args.internet else [], outputs, started)
    return 0


# -- parser ----------------------------------------------------------------

def _add_train_flags(p):
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--measure", choices=centrality.MEASURES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--n", type=int, help="nodes per training graph")
    p.add_argument("--l", type=int, help="waveform length")
    p.add_argument("--m", type=float, help="momentum")
    p.add_argument("--lr", type=float)
    p.add_argument("--inner-batches", type=int)
    p.add_argument("--loss-scale", type=float)
    p.add_argument("--generators", help=f"comma-separated subset of {','.join(ALL_GENERATORS)}")
    p.add_argument("--small-model", action="store_true", help=f"channels {list(SMALL_CHANNELS)}")
    p.add_argument("--standardize", action="store_true", help="standardise each graph's waveforms")
    p.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netaural", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random graph edge list")
    p.add_argument("--model", required=True, choices=ALL_GENERATORS)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--cliques", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="edge-list path (default: stdout, no manifest)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("auralize", help="node waveforms, audio, spectra")
    p.add_argument("graph", help="edge-list path or bundled:<name>")
    p.add_argument("--m", type=float, default=DEFAULT_MOMENTUM)
    p.add_argument("--l", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--out", required=True, help="AURL waveform file")
    p.add_argument("--trace", help="CSV of potentials before DC removal")
    p.add_argument("--wav-dir")
    p.add_argument("--spectra-dir")
    p.add_argument("--figures", help="directory for trace and spectrum figures")
    p.add_argument("--rate", type=int, default=audio.DEFAULT_RATE)
    p.add_argument("--peak", type=float, default=audio.DEFAULT_PEAK)
    p.add_argument("--gap", type=float, default=0.0, help="silence between nodes in _all.wav (s)")
    p.set_defaults(func=cmd_auralize)

    p = sub.add_parser("centrality", help="ground-truth centrality CSV")
    p.add_argument("graph")
    p.add_argument("--measure", required=True, choices=centrality.MEASURES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_centrality)

    p = sub.add_parser("train", help="learn a centrality measure from waveforms")
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Pearson correlations on a test tier")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tier", required=True, choices=("small", "large", "real"))
    p.add_argument("--measure", choices=centrality.MEASURES)
    p.add_argument("--m", type=float, help="momentum (default: from checkpoint)")
    p.add_argument("--l", type=int, help="must match the checkpoint's input length")
    p.add_argument("--n", type=int, help="override graph size for small/large tiers")
    p.add_argument("--per-generator", type=int, default=4)
    p.add_argument("--generators")
    p.add_argument("--internet", help="edge list of an AS-level Internet topology")
    p.add_argument("--ground-truth-predictor", action="store_true", help="debug: predict with the ground truth")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reproduce", help="full protocol for all measures and tiers (hours)")
    _add_train_flags(p)
    p.add_argument("--measures", help="comma-separated subset (default: all four)")
    p.add_argument("--per-generator", type=int, default=4)
    p.add_argument("--internet")
    p.add_argument("--seed-eval", type=int, default=1)
    p.add_argument("--i-understand-this-takes-hours", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EdgeListError, WaveformFormatError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
