"""Command-line entry points: simulate, denoise, evaluate, sweep.

Outputs go under a run directory with a fixed layout::

    events/   event files, camera config, ground-truth sidecar
    labels/   per-event labels and scores
    iwe/      images of warped events (8-bit PGM and raw float64)
    metrics/  motion estimate, iteration history, metrics JSON, ROC and sweep CSVs
    figures/  PNG renderings of the above

Every command also writes ``config.json`` with the resolved arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import formats, sim
from .baselines import BafConfig, baf_filter, random_downsample
from .cmax import OptimizerConfig
from .core import CameraModel, EventSlice, SliceError
from .denoise import ScoreKind, joint_estimate, split_iwe
from .iwe import splat_image
from .metrics import angvel_rms, flow_epe, fwl, precision_recall, roc_auc
from .warp import AngularVelocity, TileFlow

LAYOUT = ("events", "labels", "iwe", "metrics", "figures")


class CliError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _vec3(text: str) -> list[float]:
    v = _floats(text)
    if len(v) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return v


def _vec2(text: str) -> list[float]:
    v = _floats(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return v


def _prepare(out: Path) -> Path:
    out = Path(out)
    for d in LAYOUT:
        (out / d).mkdir(parents=True, exist_ok=True)
    return out


def _config_dict(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "dump_config")}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}


def _csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


# simulate ----------------------------------------------------------------


def _scene(args, noise_hz: float) -> sim.LabeledSlice:
    sensor = CameraModel.centered(args.size, args.size)
    if args.pattern == "star":
        pattern = sim.Star(n_arms=args.n_arms)
    elif args.pattern == "bar":
        pattern = sim.Bar()
    else:
        pattern = sim.TwoDepth(args.near_density, args.far_density)
    if args.flow is not None:
        motion = TileFlow.uniform(sensor, args.flow, args.tile)
    else:
        motion = AngularVelocity(tuple(args.omega))
    spec = sim.SceneSpec(pattern, motion, args.duration, args.rate, sensor, args.seed)
    scene = sim.generate_scene(spec)
    return sim.inject_ba_noise(scene, noise_hz, args.seed + 7919)


def cmd_simulate(args) -> int:
    out = _prepare(args.out)
    scene = _scene(args, args.noise_hz)
    formats.write_events(out / "events" / "events.txt", scene.slice)
    formats.write_camera(out / "events" / "camera.txt", scene.slice.sensor)
    formats.write_ground_truth(out / "events" / "groundtruth.txt", scene.gt_labels, scene.gt_motion, scene.injected_noise_rate)
    formats.write_json(out / "config.json", _config_dict(args))
    print(f"events={len(scene)} noise_fraction={scene.noise_fraction:.4f}")
    return 0


def _add_scene_args(p) -> None:
    p.add_argument("--pattern", choices=("star", "bar", "two_depth"), default="star")
    p.add_argument("--size", type=int, default=200, help="square sensor side in px")
    p.add_argument("--duration", type=float, default=0.2, help="slice length in s")
    p.add_argument("--rate", type=float, default=450.0, help="events per edge point per second")
    p.add_argument("--omega", type=_vec3, default=[0.0, 0.0, 2.0], help="ground-truth rotation wx,wy,wz in rad/s")
    p.add_argument("--flow", type=_vec2, default=None, help="uniform ground-truth flow vx,vy in px/s (replaces --omega)")
    p.add_argument("--tile", type=int, default=16, help="flow tile size in px")
    p.add_argument("--n-arms", type=int, default=6)
    p.add_argument("--near-density", type=float, default=1.0)
    p.add_argument("--far-density", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)


# denoise -----------------------------------------------------------------


def _optimizer_config(args, sensor: CameraModel) -> OptimizerConfig:
    if args.motion == "flow":
        init = TileFlow.zeros(sensor, args.tile)
    else:
        init = AngularVelocity()
    return OptimizerConfig(max_iters=args.max_iters, initial_params=init, objective=args.objective, epsilon=args.epsilon)


def _load_input(args) -> EventSlice:
    camera = formats.read_camera(args.camera)
    return formats.read_events(args.events, camera)


def _run_denoise(s: EventSlice, args):
    """Returns (labels, JointResult or None)."""
    if args.method == "baf":
        return baf_filter(s, BafConfig(args.baf_window, args.baf_radius)), None
    if args.method == "random":
        return random_downsample(s, args.tau, args.seed), None
    cfg = _optimizer_config(args, s.sensor)
    res = joint_estimate(s, args.tau, ScoreKind(args.score), cfg, args.seed)
    return res.labels, res


def cmd_denoise(args) -> int:
    s = _load_input(args)
    if len(s) == 0:
        raise CliError("event file contains no events")
    out = _prepare(args.out)
    labels, res = _run_denoise(s, args)
    formats.write_labels(out / "labels" / "labels.txt", labels)
    formats.write_events(out / "events" / "denoised.txt", s.select(labels.labels))
    from . import plots

    ident = splat_image(s.x.astype(np.float64), s.y.astype(np.float64), s.sensor, args.epsilon)
    images = {"identity": ident}
    if res is not None:
        motion = res.motion.params
        split = split_iwe(s, motion, labels.labels, args.epsilon)
        images["warped all"] = split.image
        images["warped signal"] = split.signal_image
        formats.write_json(out / "metrics" / "motion.json", {
            **formats.motion_to_dict(motion),
            "objective": res.motion.objective_value,
            "iterations": res.motion.iterations_used,
            "converged": res.motion.converged,
        })
        n_par = len(res.history[0].params) if res.history else 0
        _csv(
            out / "metrics" / "history.csv",
            ["iteration", "objective", "threshold", "signal_count", "param_change"] + [f"p{i}" for i in range(n_par)],
            [[r.iteration, _fmt(r.objective), _fmt(r.threshold), r.signal_count, _fmt(r.param_change)] + [_fmt(v) for v in r.params]
             for r in res.history],
        )
        plots.history_figure(res.history, out / "figures" / "history.png")
    for name, img in images.items():
        stem = name.replace(" ", "_")
        formats.write_pgm(out / "iwe" / f"{stem}.pgm", img)
        formats.write_raw_image(out / "iwe" / f"{stem}.f64", img)
    plots.iwe_panels(images, out / "figures" / "iwe.png", title=f"method={args.method}")
    formats.write_json(out / "config.json", _config_dict(args))
    print(f"events={len(s)} signal={labels.num_signal} method={args.method}")
    return 0


def _add_denoise_args(p) -> None:
    p.add_argument("--method", choices=("joint", "baf", "random"), default="joint")
    p.add_argument("--tau", type=float, default=0.85, help="target signal fraction")
    p.add_argument("--score", choices=[k.value for k in ScoreKind], default=ScoreKind.LOCAL_CONTRAST.value)
    p.add_argument("--epsilon", type=float, default=1.0, help="IWE Gaussian kernel width in px")
    p.add_argument("--motion", choices=("rotation", "flow"), default="rotation")
    p.add_argument("--objective", choices=("gradient", "variance"), default="gradient")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--baf-window", type=float, default=5e-3, help="BAF time window in s")
    p.add_argument("--baf-radius", type=int, default=1, help="BAF Chebyshev radius in px")


# evaluate ----------------------------------------------------------------


def _motion_metrics(s: EventSlice, est, gt, gt_labels) -> dict:
    out = {"fwl": fwl(s, est)}
    if isinstance(est, AngularVelocity) and isinstance(gt, AngularVelocity):
        out["rms_deg_s"] = angvel_rms([est], [gt])
    elif isinstance(est, TileFlow) and isinstance(gt, TileFlow):
        epe, outliers = flow_epe(est, gt, s.duration, sensor=s.sensor)
        out["epe_px"] = epe
        out["outlier_pct"] = outliers
    return out


def cmd_evaluate(args) -> int:
    if not Path(args.gt).exists():
        raise CliError(f"ground-truth sidecar not found: {args.gt}")
    labels = formats.read_labels(args.labels)
    gt, gt_motion, noise_hz = formats.read_ground_truth(args.gt)
    if len(gt) != len(labels):
        raise formats.IndexMismatch(f"{len(labels)} labels but {len(gt)} ground-truth entries")
    out = _prepare(args.out)
    roc = roc_auc(labels.scores, gt)
    precision, recall = precision_recall(labels.labels, gt)
    metrics = {"auc": roc.auc, "precision": precision, "recall": recall, "n_events": len(gt),
               "signal_fraction": labels.num_signal / len(gt), "noise_hz": noise_hz}
    if args.motion is not None:
        if args.events is None or args.camera is None:
            raise CliError("--motion needs --events and --camera")
        s = _load_input(args)
        if len(s) != len(gt):
            raise formats.IndexMismatch(f"{len(s)} events but {len(gt)} ground-truth entries")
        with open(args.motion, encoding="ascii") as fh:
            est = formats.motion_from_dict(json.load(fh))
        metrics.update(_motion_metrics(s, est, gt_motion, gt))
    formats.write_json(out / "metrics" / "metrics.json", metrics)
    _csv(out / "metrics" / "roc.csv", ["threshold", "fpr", "tpr"],
         [[_fmt(t), _fmt(f), _fmt(p)] for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr)])
    from . import plots

    plots.roc_figure({"scores": roc}, out / "figures" / "roc.png")
    formats.write_json(out / "config.json", _config_dict(args))
    print(f"auc={roc.auc:.4f} precision={precision:.4f} recall={recall:.4f}")
    return 0


# sweep -------------------------------------------------------------------


def cmd_sweep(args) -> int:
    out = _prepare(args.out)
    rows, timing = [], []
    for rate in args.noise_hz:
        scene = _scene(args, rate)
        if np.all(scene.gt_labels):
            raise CliError(f"noise rate {rate} produced no noise events; AUC is undefined")
        s = scene.slice
        for tau in args.taus:
            cfg = _optimizer_config(args, s.sensor)
            t0 = time.perf_counter()
            res = joint_estimate(s, tau, ScoreKind(args.score), cfg, args.seed)
            runtime = time.perf_counter() - t0
            est = res.motion.params
            row = {"tau": tau, "noise_hz": rate, "auc": roc_auc(res.labels.scores, scene.gt_labels).auc, "fwl": fwl(s, est)}
            if isinstance(est, AngularVelocity) and isinstance(scene.gt_motion, AngularVelocity):
                row["rms"] = angvel_rms([est], [scene.gt_motion])
            elif isinstance(est, TileFlow) and isinstance(scene.gt_motion, TileFlow):
                row["rms"] = flow_epe(est, scene.gt_motion, scene.duration, sensor=s.sensor)[0]
            else:
                row["rms"] = float("nan")
            rows.append(row)
            timing.append(runtime)
    header = ["tau", "noise_hz", "auc", "fwl", "rms"] + (["runtime"] if args.timing_inline else [])
    _csv(out / "metrics" / "sweep.csv", header,
         [[_fmt(r[k]) for k in header[:5]] + ([_fmt(dt)] if args.timing_inline else []) for r, dt in zip(rows, timing)])
    if not args.timing_inline:
        _csv(out / "metrics" / "sweep_runtime.csv", ["tau", "noise_hz", "runtime"],
             [[_fmt(r["tau"]), _fmt(r["noise_hz"]), _fmt(dt)] for r, dt in zip(rows, timing)])
    from . import plots

    plots.sweep_figure(rows, out / "figures" / "sweep_auc.png", "auc")
    plots.sweep_figure(rows, out / "figures" / "sweep_rms.png", "rms")
    formats.write_json(out / "config.json", _config_dict(args))
    print(f"rows={len(rows)}")
    return 0


# entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmaxdenoise", description="Joint event denoising and motion estimation.")
    parser.add_argument("--dump-config", action="store_true", help="print the resolved configuration as JSON and exit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled synthetic event stream")
    _add_scene_args(p)
    p.add_argument("--noise-hz", type=float, default=1.0, help="BA noise rate per pixel")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("denoise", help="label events and estimate motion")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--camera", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_denoise_args(p)
    p.add_argument("--tile", type=int, default=16, help="flow tile size in px")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("evaluate", help="score labels against a ground-truth sidecar")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--motion", type=Path, default=None, help="motion JSON from denoise")
    p.add_argument("--events", type=Path, default=None)
    p.add_argument("--camera", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="joint estimation over tau and noise-rate grids on a simulated scene")
    _add_scene_args(p)
    _add_denoise_args(p)
    p.add_argument("--taus", type=_floats, default=[0.9, 0.7, 0.5, 0.3, 0.1])
    p.add_argument("--noise-hz", type=_floats, default=[1.0, 5.0, 10.0])
    p.add_argument("--timing-inline", action="store_true", help="add a runtime column to sweep.csv (not reproducible)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_config:
        print(json.dumps({"command": args.command, **_config_dict(args)}, indent=2, sort_keys=True))
        return 0
    try:
        return args.func(args)
    except (CliError, formats.FormatError, formats.IndexMismatch, SliceError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
