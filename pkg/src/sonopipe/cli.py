"""Command line entry point.

    sonopipe synth-gen --out data/ --per-class 20 --noise-sigma 0.15
    sonopipe train --data data/ --templates-out tpl/ --model-out model.json
    sonopipe eval --data data/ --report-out report.json
    sonopipe run --source synth --max-frames 200 --metrics-out metrics.json

Exit codes: 0 on success, 1 on runtime failure, 2 on bad configuration.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from pathlib import Path

from .classifier import ConfusionMatrix, load_model, save_model
from .gestures import ALL_GESTURES, GestureLabel
from .pipeline import (
    CommandServer,
    ConfigError,
    PipelineConfig,
    PipelineEngine,
    evaluate_samples,
    train_from_frames,
)
from .sources import DirectoryReplaySource, SourceError, SyntheticSource, TcpFrameSource
from .streamwire import StreamServer
from .synth import generate_dataset, load_dataset
from .templates import load_store, save_store


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="deterministic seed")
    parser.add_argument("--k", type=int, help="neighbours for classification")
    parser.add_argument("--folds", type=int, help="cross-validation folds")
    parser.add_argument("--noise-sigma", type=float, dest="noise_sigma",
                        help="additive noise level for synthetic frames")
    parser.add_argument("--per-class", type=int, dest="per_class",
                        help="synthetic frames per gesture")
    parser.add_argument("--template-n", type=int, dest="template_n",
                        help="stable frames averaged per template")
    parser.add_argument("--dims", help="frame size as WIDTHxHEIGHT, e.g. 128x128")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonopipe",
        description="Ultrasound gesture pipeline: dataset tools, training, "
                    "evaluation, and the live streaming loop.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-gen", help="write a synthetic labeled dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="build templates and classifier from a dataset")
    _add_common(p)
    p.add_argument("--data", help="dataset directory (default: synthesize in memory)")
    p.add_argument("--templates-out", dest="templates_out", help="directory for templates")
    p.add_argument("--model-out", dest="model_out", help="path for the classifier JSON")

    p = sub.add_parser("eval", help="cross-validated accuracy report")
    _add_common(p)
    p.add_argument("--data", help="dataset directory (default: synthesize in memory)")
    p.add_argument("--report-out", dest="report_out", help="write the JSON report here")
    p.add_argument("--csv-out", dest="csv_out",
                   help="write confusion matrices as CSV files with this prefix")

    p = sub.add_parser("run", help="run the live pipeline and stream poses")
    _add_common(p)
    p.add_argument("--templates", help="load templates from this directory "
                                       "(default: train on synthetic frames)")
    p.add_argument("--model", help="load the classifier from this JSON file")
    p.add_argument("--source", choices=("synth", "dir", "tcp"), help="frame source kind")
    p.add_argument("--data-dir", dest="source_dir", help="directory for --source dir")
    p.add_argument("--source-host", dest="source_host", help="host for --source tcp")
    p.add_argument("--source-port", dest="source_port", type=int, help="port for --source tcp")
    p.add_argument("--rate", dest="rate_hz", type=float, help="frame rate in Hz")
    p.add_argument("--unpaced", action="store_true",
                   help="run as fast as possible instead of real time")
    p.add_argument("--debounce", dest="debounce_m", type=int,
                   help="majority window for gesture switching")
    p.add_argument("--tcp-port", dest="tcp_port", type=int, help="NDJSON stream port")
    p.add_argument("--ws-port", dest="ws_port", type=int, help="WebSocket stream port")
    p.add_argument("--cmd-port", dest="cmd_port", type=int, help="command channel port")
    p.add_argument("--allow-commands", action="store_true",
                   help="accept set_gesture commands on the command port")
    p.add_argument("--max-frames", dest="max_frames", type=int,
                   help="stop after this many processed frames")
    p.add_argument("--metrics-out", dest="metrics_out", help="write run metrics JSON here")

    return parser


def _parse_dims(text: str):
    try:
        w, h = text.lower().split("x")
        return (int(w), int(h))
    except ValueError as exc:
        raise ConfigError(f"bad --dims {text!r}, expected WIDTHxHEIGHT") from exc


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides = {}
    for name in ("seed", "k", "folds", "noise_sigma", "per_class", "template_n",
                 "source", "source_dir", "source_host", "source_port", "rate_hz",
                 "debounce_m", "tcp_port", "ws_port", "cmd_port", "max_frames",
                 "metrics_out"):
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "dims", None):
        overrides["dims"] = _parse_dims(args.dims)
    if getattr(args, "allow_commands", False):
        overrides["allow_commands"] = True
    if getattr(args, "unpaced", False):
        overrides["paced"] = False
    return cfg.override(**overrides)


def _load_frames(cfg: PipelineConfig, data_dir):
    per_label = {label: [] for label in ALL_GESTURES}
    if data_dir:
        for frame, label in load_dataset(data_dir):
            per_label[label].append(frame)
        return per_label
    from .synth import make_phantom, render_gesture

    spec = cfg.phantom_spec()
    base = make_phantom(spec)
    for label in ALL_GESTURES:
        per_label[label] = [render_gesture(base, label, 1.0, spec, draw=i,
                                           timestamp_us=i, seq=i)
                            for i in range(cfg.per_class)]
    return per_label


def cmd_synth_gen(args) -> int:
    cfg = _config_from_args(args)
    manifest = generate_dataset(cfg.phantom_spec(), cfg.per_class, args.out)
    n = len(manifest["files"])
    print(f"wrote {n} frames to {args.out} (seed={cfg.seed}, "
          f"noise_sigma={cfg.noise_sigma})")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    frames = _load_frames(cfg, args.data)
    store, model, samples = train_from_frames(frames, cfg.k, cfg.template_n)
    if args.templates_out:
        save_store(store, args.templates_out)
        print(f"templates -> {args.templates_out}")
    if args.model_out:
        save_model(model, args.model_out)
        print(f"model -> {args.model_out}")
    print(f"trained on {len(samples)} samples "
          f"({len(frames)} gestures, k={cfg.k})")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    frames = _load_frames(cfg, args.data)
    _, _, samples = train_from_frames(frames, cfg.k, cfg.template_n)
    report = evaluate_samples(samples, k=cfg.k, folds=cfg.folds, seed=cfg.seed)
    full_acc = report["full"]["accuracy"]
    nr_acc = report["rest_excluded"]["accuracy"]
    print(f"accuracy (all gestures):  {full_acc:.4f}")
    print(f"accuracy (rest excluded): {nr_acc:.4f}")
    if args.report_out:
        Path(args.report_out).write_text(json.dumps(report, indent=2) + "\n")
        print(f"report -> {args.report_out}")
    if args.csv_out:
        for key in ("full", "rest_excluded"):
            labels = tuple(GestureLabel.from_wire(name) for name in report[key]["labels"])
            cm = ConfusionMatrix(labels, report[key]["confusion"])
            path = Path(f"{args.csv_out}_{key}.csv")
            cm.save_csv(path)
            print(f"confusion -> {path}")
    return 0


def _make_source(cfg: PipelineConfig):
    if cfg.source == "dir":
        return DirectoryReplaySource(cfg.source_dir, rate_hz=cfg.rate_hz, paced=cfg.paced)
    if cfg.source == "tcp":
        return TcpFrameSource(cfg.source_host, cfg.source_port)
    return SyntheticSource(cfg.phantom_spec(), rate_hz=cfg.rate_hz,
                           paced=cfg.paced, ramp_s=cfg.ramp_s,
                           max_frames=cfg.max_frames)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    if args.templates and args.model:
        store = load_store(args.templates)
        model = load_model(args.model)
    elif args.templates or args.model:
        raise ConfigError("--templates and --model must be given together")
    else:
        frames = _load_frames(cfg, None)
        store, model, _ = train_from_frames(frames, cfg.k, cfg.template_n)
    source = _make_source(cfg)
    server = StreamServer(tcp_port=cfg.tcp_port, ws_port=cfg.ws_port)
    server.start()
    engine = PipelineEngine(cfg, store, model, server=server, source=source)
    command_server = None
    if cfg.allow_commands and isinstance(source, SyntheticSource):
        command_server = CommandServer(source.set_target, port=cfg.cmd_port)
        print(f"commands on ws://127.0.0.1:{command_server.port}", flush=True)
    # Flushed so supervisors reading a pipe see the ports before frames flow.
    print(f"streaming on tcp://127.0.0.1:{server.tcp_port} "
          f"and ws://127.0.0.1:{server.ws_port}", flush=True)

    def _interrupt(signum, _frame):
        engine.stop()

    previous = signal.signal(signal.SIGINT, _interrupt)
    try:
        metrics = engine.run()
    finally:
        signal.signal(signal.SIGINT, previous)
        if command_server is not None:
            command_server.stop()
        server.stop()
        source.close()
    snap = metrics.snapshot()
    print(f"processed {snap['processed']} frames at {snap['achieved_fps']:.1f} fps, "
          f"dropped {snap['dropped']}, errors {snap['errors']}")
    if cfg.metrics_out:
        print(f"metrics -> {cfg.metrics_out}")
    return 0


_COMMANDS = {
    "synth-gen": cmd_synth_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SourceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
