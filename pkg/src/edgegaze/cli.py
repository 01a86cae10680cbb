"""Command-line entry point. Batch-only: every subcommand reads flags,
echoes its resolved config, writes files, and exits (0 success, 1 runtime
failure, 2 usage error). ``--seed`` makes every file-emitting subcommand
byte-reproducible."""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

import numpy as np


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"config: {json.dumps(resolved, sort_keys=True, default=str)}")


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be HOST:PORT, got {text!r}")
    return host, int(port)


# -- synth ----------------------------------------------------------------------


def cmd_synth(args) -> int:
    from .synth import gen_dataset

    manifests = gen_dataset(
        args.out, args.n, seed=args.seed, duration_s=args.duration,
        rate_hz=args.rate, fps=args.fps, frame_w=args.frame_w,
        frame_h=args.frame_h, noise_amp=args.noise,
        device_profiles=tuple(args.devices.split(",")))
    print(f"wrote {len(manifests)} recordings under {args.out}")
    return 0


# -- train ----------------------------------------------------------------------


def cmd_train(args) -> int:
    from . import nn
    from .pipeline import build_training_set
    from .recording import load_index

    recordings = load_index(Path(args.data) / "index.json")
    graph = nn.build_named_model(args.model, seed=args.seed,
                                 window=args.window, config_path=args.config)
    dataset = build_training_set(recordings, window=graph.window)
    cfg = nn.TrainConfig(learning_rate=args.lr, decay=args.decay,
                         batch_size=args.batch_size, epochs=args.epochs,
                         seed=args.seed)
    result = nn.train_adam(graph, dataset, cfg)
    nn.save_model(result.graph, args.out)
    log_path = Path(args.out).with_suffix(".training_log.csv")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(result.epoch_losses):
            fh.write(f"{i},{loss!r}\n")
    print(f"trained {args.model} for {args.epochs} epochs "
          f"({result.steps} steps) -> {args.out}")
    print(f"training log -> {log_path}")
    return 0


# -- optimize ---------------------------------------------------------------------


def cmd_optimize(args) -> int:
    from . import nn
    from .optimize import SparsitySchedule, prune_model, quantize_half

    graph = nn.load_model(args.model)
    if args.mode == "quantize":
        optimised, report = quantize_half(graph)
    else:
        sched = SparsitySchedule(start=args.sparsity_start, final=args.sparsity_final,
                                 total_steps=args.sparsity_steps,
                                 interval=args.sparsity_interval)
        optimised, report = prune_model(graph, sched)
    nn.save_model(optimised, args.out)
    prefix = Path(args.report) if args.report else Path(args.out).with_suffix("")
    Path(f"{prefix}.optimisation_report.csv").write_text(report.to_csv(), encoding="utf-8")
    Path(f"{prefix}.optimisation_report.md").write_text(report.to_markdown(), encoding="utf-8")
    print(f"{args.mode} {graph.name}: {report.baseline_bytes} -> "
          f"{report.optimised_bytes} payload bytes "
          f"({report.reduction_pct:.2f}% smaller) -> {args.out}")
    return 0


# -- eval -----------------------------------------------------------------------


def _eval_from_preds_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if rows[0] != "pred_x_cm,pred_y_cm,true_x_cm,true_y_cm":
        raise ValueError(f"{path}: expected header pred_x_cm,pred_y_cm,true_x_cm,true_y_cm")
    arr = np.array([[float(v) for v in line.split(",")] for line in rows[1:]])
    return arr[:, :2], arr[:, 2:]


def cmd_eval(args) -> int:
    from . import nn
    from .metrics import EvalResult, evaluate_predictions, kfold_indices
    from .pipeline import build_training_set
    from .recording import load_index

    if args.preds:
        preds, truths = _eval_from_preds_csv(args.preds)
        name = args.name or "predictions"
        folds = None
    else:
        if not (args.model and args.data):
            print("eval needs either --preds or both --model and --data", file=sys.stderr)
            return 2
        graph = nn.load_model(args.model)
        name = args.name or graph.name
        recordings = load_index(Path(args.data) / "index.json")
        folds = None
        if args.kfold:
            # folds split whole recordings to avoid temporal leakage
            rec_folds = kfold_indices(len(recordings), k=args.kfold, seed=args.seed)
            sizes = []
            for rec in recordings:
                x, _ = build_training_set([rec], window=graph.window)
                sizes.append(len(x))
            offsets = np.concatenate([[0], np.cumsum(sizes)])
            folds = [np.concatenate([np.arange(offsets[i], offsets[i + 1])
                                     for i in fold])
                     for fold in rec_folds]
        inputs, truths = build_training_set(recordings, window=graph.window)
        preds = nn.predict_batched(graph, inputs)
    result = evaluate_predictions(name, preds, truths, fold_assignments=folds)
    Path(f"{args.out}.csv").write_text(EvalResult.to_csv([result]), encoding="utf-8")
    Path(f"{args.out}.md").write_text(EvalResult.to_markdown([result]), encoding="utf-8")
    if args.dump_preds:
        with open(args.dump_preds, "w", encoding="utf-8") as fh:
            fh.write("pred_x_cm,pred_y_cm,true_x_cm,true_y_cm\n")
            for p, t in zip(preds, truths):
                fh.write(f"{float(p[0])!r},{float(p[1])!r},{float(t[0])!r},{float(t[1])!r}\n")
    print(f"{name}: rmse {result.rmse_cm:.4f} cm, r2 {result.r2:.4f}, "
          f"mean euclid {result.mean_euclid_cm:.4f} cm over {result.n} samples")
    print(f"eval tables -> {args.out}.csv / {args.out}.md")
    return 0


# -- bench ----------------------------------------------------------------------


def _infer_variant(graph) -> str:
    if graph.dtype == "half":
        return "quantised"
    if any(m is not None for row in graph.masks for m in row):
        return "pruned"
    return "baseline"


def cmd_bench(args) -> int:
    from . import nn
    from .bench import (BenchRow, EnergySummary, ResourceSampler, emit_report,
                        energy_mwh, ingest_power_log, time_stages)
    from .recording import load_index

    recordings = load_index(Path(args.data) / "index.json")
    energy = None
    if args.power_log:
        total = energy_mwh(ingest_power_log(args.power_log))
        idle = energy_mwh(ingest_power_log(args.idle_log)) if args.idle_log else 0.0
        energy = EnergySummary(total_mwh=total, idle_mwh=idle)

    rows = []
    for model_path in args.model:
        graph = nn.load_model(model_path)
        sampler = ResourceSampler(None, interval_s=args.sample_interval).start()
        merged = None
        for rec in recordings:
            summary = time_stages(graph, rec)
            if merged is None:
                merged = summary
            else:
                merged.timings.extend(summary.timings)
                merged.skipped += summary.skipped
        samples = sampler.stop()
        rows.append(BenchRow(model=graph.name, variant=_infer_variant(graph),
                             timing=merged, resources=samples, energy=energy,
                             energy_frames=merged.frames if merged else None))
    written = emit_report(rows, args.out)
    for name in sorted(written):
        print(f"bench table -> {written[name]}")
    return 0


# -- serve / client ---------------------------------------------------------------


def cmd_serve(args) -> int:
    if args.cloud:
        from .serve import CloudStub, ModelRegistry

        if args.registry_root is None:
            print("--cloud needs --registry-root", file=sys.stderr)
            return 2
        registry = ModelRegistry(args.registry_root)
        service = CloudStub(registry, bind=_parse_addr(args.bind))
    else:
        from .serve import EdgeServer

        if args.model is None and not (args.model_name and args.registry):
            print("serve needs --model, or --model-name with --registry", file=sys.stderr)
            return 2

        source = args.model_name if args.model_name else Path(args.model)
        registry_addr = _parse_addr(args.registry) if args.registry else None
        service = EdgeServer(source, bind=_parse_addr(args.bind),
                             registry_addr=registry_addr,
                             upsync_batch=args.upsync_batch)
    service.start()
    host, port = service.address
    kind = "cloud stub" if args.cloud else "edge server"
    print(f"{kind} listening on {host}:{port}", flush=True)
    try:
        if args.run_seconds > 0:
            time.sleep(args.run_seconds)
        else:
            signal.pause()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
        if args.cloud and len(service.gaze_log):
            log_path = Path(args.registry_root) / "gaze_log.csv"
            log_path.write_text(service.gaze_log.to_csv(), encoding="utf-8")
            print(f"gaze log -> {log_path}")
    return 0


def cmd_client(args) -> int:
    from .recording import load_recording
    from .serve import client_stream

    recording = load_recording(args.data)
    transcript = client_stream(_parse_addr(args.server), recording, fps=args.fps,
                               model_name=args.model_name)
    Path(args.out).write_text(transcript.to_csv(), encoding="utf-8")
    print(f"{len(transcript.entries)} responses -> {args.out}")
    if transcript.error:
        print(f"stream ended early: {transcript.error}", file=sys.stderr)
        return 1
    return 0


# -- heatmap ----------------------------------------------------------------------


def _read_points_csv(path) -> list[tuple[float, float]]:
    import csv as csvmod

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csvmod.reader(fh) if r and not r[0].startswith("#")]
    header = rows[0]
    try:
        xi, yi = header.index("x_cm"), header.index("y_cm")
    except ValueError as exc:
        raise ValueError(f"{path}: needs x_cm and y_cm columns") from exc
    points = []
    for row in rows[1:]:
        x, y = float(row[xi]), float(row[yi])
        points.append((x, y))
    return points


def cmd_heatmap(args) -> int:
    from .pgm import write_pgm
    from .serve import GridSpec, heatmap_accumulate, heatmap_csv, heatmap_render

    points = _read_points_csv(args.points)
    spec = GridSpec(rows=args.rows, cols=args.cols,
                    extent_w_cm=args.extent_w, extent_h_cm=args.extent_h)
    grid = heatmap_accumulate(points, spec)
    write_pgm(f"{args.out}.pgm", heatmap_render(grid, cell_px=args.cell_px))
    Path(f"{args.out}.csv").write_text(heatmap_csv(grid), encoding="utf-8")
    print(f"heatmap: {grid.total_in_extent()} in extent, "
          f"{grid.out_of_extent} outside -> {args.out}.pgm / {args.out}.csv")
    return 0


# -- report -----------------------------------------------------------------------


def cmd_report(args) -> int:
    from .metrics import EvalResult

    rows = []
    for path in args.evals:
        lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
        if lines[0] != EvalResult.CSV_HEADER:
            raise ValueError(f"{path}: not an eval CSV")
        for line in lines[1:]:
            parts = line.split(",")
            rows.append({"label": parts[0], "rmse_cm": float(parts[1]),
                         "r2": float(parts[2])})
    if not rows:
        raise ValueError("no eval rows found")
    base = rows[0]
    table = []
    for row in rows:
        delta = row["rmse_cm"] - base["rmse_cm"]
        pct = (delta / base["rmse_cm"] * 100.0) if base["rmse_cm"] else 0.0
        table.append([row["label"], repr(round(row["rmse_cm"], 6)),
                      repr(round(row["r2"], 6)), repr(round(delta, 6)),
                      repr(round(pct, 4))])
    header = ["variant", "rmse_cm", "r2", "delta_rmse_cm", "delta_rmse_pct"]
    csv_text = ",".join(header) + "\n" + "\n".join(",".join(r) for r in table) + "\n"
    md = ("| " + " | ".join(header) + " |\n"
          + "| " + " | ".join("---" for _ in header) + " |\n"
          + "\n".join("| " + " | ".join(r) + " |" for r in table) + "\n")
    Path(f"{args.out}.csv").write_text(csv_text, encoding="utf-8")
    Path(f"{args.out}.md").write_text(md, encoding="utf-8")
    print(f"accuracy trade-off over {len(table)} variants -> {args.out}.csv / {args.out}.md")
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgegaze",
        description="Gaze-model training, optimisation, serving and benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic moving-dot recordings")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=20.0, help="seconds per recording")
    p.add_argument("--rate", type=float, default=20.0, help="dot coordinates per second")
    p.add_argument("--fps", type=float, default=10.0, help="frames per second")
    p.add_argument("--frame-w", type=int, default=160)
    p.add_argument("--frame-h", type=int, default=120)
    p.add_argument("--noise", type=float, default=4.0, help="background noise amplitude")
    p.add_argument("--devices", default="standard",
                   help="comma-separated device presets to cycle through")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a synthetic dataset")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--model", required=True,
                   help="config name, e.g. cnn_tiny or cnn_gru")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path, default=None, help="model config JSON override")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--decay", type=float, default=0.0001)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--window", type=int, default=None, help="frames per recurrent sample")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("optimize", help="quantise or prune a trained model")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--mode", required=True, choices=("quantize", "prune"))
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--report", type=Path, default=None, help="report path prefix")
    p.add_argument("--sparsity-start", type=float, default=0.80)
    p.add_argument("--sparsity-final", type=float, default=0.90)
    p.add_argument("--sparsity-steps", type=int, default=2000)
    p.add_argument("--sparsity-interval", type=int, default=500)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", help="evaluate a model or a predictions CSV")
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--preds", type=Path, default=None,
                   help="CSV with pred_x_cm,pred_y_cm,true_x_cm,true_y_cm")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--name", default=None, help="row label (defaults to model name)")
    p.add_argument("--kfold", type=int, default=0,
                   help="fold count for per-fold metrics (splits whole recordings)")
    p.add_argument("--dump-preds", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-stage timing, resources and energy tables")
    p.add_argument("--model", required=True, action="append", type=Path,
                   help="model container; repeat for multiple variants")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--power-log", type=Path, default=None)
    p.add_argument("--idle-log", type=Path, default=None)
    p.add_argument("--sample-interval", type=float, default=1.0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the edge server (or the cloud stub)")
    p.add_argument("--bind", default="127.0.0.1:0")
    p.add_argument("--model", type=Path, default=None, help="local model container")
    p.add_argument("--model-name", default=None, help="fetch this model from --registry")
    p.add_argument("--registry", default=None, help="cloud stub HOST:PORT")
    p.add_argument("--upsync-batch", type=int, default=50)
    p.add_argument("--cloud", action="store_true", help="run the cloud stub instead")
    p.add_argument("--registry-root", type=Path, default=None,
                   help="model store directory (cloud mode)")
    p.add_argument("--run-seconds", type=float, default=0.0,
                   help="stop after this long (0 = run until interrupted)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("client", help="stream a recording to an edge server")
    p.add_argument("--server", required=True, help="HOST:PORT")
    p.add_argument("--data", required=True, type=Path, help="recording manifest")
    p.add_argument("--fps", type=float, default=20.0)
    p.add_argument("--model-name", default="")
    p.add_argument("--out", required=True, type=Path, help="transcript CSV")
    p.set_defaults(func=cmd_client)

    p = sub.add_parser("heatmap", help="bin gaze points and render a PGM heatmap")
    p.add_argument("--points", required=True, type=Path,
                   help="CSV with x_cm,y_cm columns (gaze log or transcript)")
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=9)
    p.add_argument("--extent-w", type=float, required=True, help="screen width in cm")
    p.add_argument("--extent-h", type=float, required=True, help="screen height in cm")
    p.add_argument("--cell-px", type=int, default=8)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("report", help="accuracy trade-off table from eval CSVs")
    p.add_argument("--evals", required=True, nargs="+", type=Path,
                   help="eval CSVs in variant order (baseline first)")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - single CLI failure funnel
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
