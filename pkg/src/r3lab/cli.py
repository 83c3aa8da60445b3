"""Command-line surface.

Subcommands: train, compare, schedule, dirac, rebalance, presets. Commands
that write delimited output also render a matplotlib figure next to it.
Every command is deterministic given its full argument set including seeds.
Exit codes: 0 success, 1 usage problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import figures
from .rebalance import ClassifierSettings, RebalanceConfig, run_rebalance_experiment
from .schedules import (
    PresetNotFoundError,
    ScheduleError,
    TrainingSchedule,
    list_presets,
    load_preset,
    preset_description,
    snapshot_at,
)
from .testbeds import DiracState, dirac_trajectory
from .training import ExperimentConfig, run_training

SCHEDULE_COLUMNS = ["progress", "lr", "gamma", "beta2", "ema_halflife_kimg", "aug_prob"]


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _experiment_config_from_args(args) -> ExperimentConfig:
    """Build a training config from an optional JSON file plus flag overrides."""
    file_values: dict = {}
    if getattr(args, "config", None):
        file_values = _load_json(args.config)
    schedule = None
    if "schedule" in file_values:
        schedule = TrainingSchedule.from_dict(file_values["schedule"])
    preset = args.preset or file_values.get("preset")
    if preset is not None:
        load_preset(preset)  # fail early with the preset list
    testbed = args.testbed or file_values.get("testbed", "ring_gmm")
    config = ExperimentConfig(
        preset=preset,
        schedule=schedule,
        testbed=testbed,
        batch_size=args.batch_size or file_values.get("batch_size", 16),
        eval_interval=args.eval_interval or file_values.get("eval_interval", 2000),
        seed=args.seed,
        out_dir=Path(args.out) if args.out else None,
        noise_dim=file_values.get("noise_dim", 8),
        g_hidden=tuple(file_values.get("g_hidden", (32, 32))),
        d_hidden=tuple(file_values.get("d_hidden", (32, 32))),
        eval_samples=file_values.get("eval_samples", 512),
        dataset_size=file_values.get("dataset_size", 360),
    )
    if config.preset is None and config.schedule is None:
        raise ScheduleError("provide --preset or a config file with a preset/schedule")
    return config


def cmd_train(args) -> int:
    config = _experiment_config_from_args(args)
    records, _ = run_training(config)
    if config.out_dir is not None:
        figures.save_training_curves(records, config.out_dir / "training_curves.png")
        print(f"wrote {config.out_dir}/metrics.jsonl ({len(records)} records), "
              f"checkpoints, samples, and training_curves.png")
    final = records[-1]
    print(f"final: images_seen={final.images_seen} proxy_fd={final.proxy_fd:.4f} "
          f"modes_covered={final.modes_covered} hq_fraction={final.hq_fraction}")
    return 0


def cmd_compare(args) -> int:
    presets = args.presets
    if len(presets) < 2:
        raise ScheduleError("compare needs at least 2 presets")
    if len(args.seeds) < 1:
        raise ScheduleError("compare needs at least 1 seed")
    for name in presets:
        load_preset(name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells: dict[str, list] = {name: [] for name in presets}
    failures: list[tuple[str, int, str]] = []
    for name in presets:
        for seed in args.seeds:
            cell_dir = out / name / f"seed_{seed}"
            config = ExperimentConfig(
                preset=name,
                testbed=args.testbed,
                batch_size=args.batch_size or 16,
                eval_interval=args.eval_interval or 2000,
                seed=seed,
                out_dir=cell_dir,
            )
            try:
                records, _ = run_training(config)
                cells[name].append(records[-1])
            except Exception as exc:  # partial failures leave the table intact
                failures.append((name, seed, str(exc)))
                print(f"cell ({name}, seed {seed}) failed: {exc}", file=sys.stderr)

    rows = []
    for name in presets:
        finals = cells[name]
        if not finals:
            continue
        row = {
            "preset": name,
            "median_final_proxy_fd": statistics.median(r.proxy_fd for r in finals),
            "median_modes_covered": (
                statistics.median(r.modes_covered for r in finals)
                if finals[0].modes_covered is not None else ""
            ),
            "median_hq_fraction": (
                statistics.median(r.hq_fraction for r in finals)
                if finals[0].hq_fraction is not None else ""
            ),
            "completed_runs": len(finals),
        }
        rows.append(row)
    rows.sort(key=lambda r: r["median_final_proxy_fd"])
    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "preset", "median_final_proxy_fd", "median_modes_covered",
            "median_hq_fraction", "completed_runs",
        ])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    figures.save_compare_figure(rows, out / "compare.png")
    for row in rows:
        print(f"{row['preset']}: median_final_proxy_fd={row['median_final_proxy_fd']:.4f} "
              f"modes={row['median_modes_covered']} hq={row['median_hq_fraction']}")
    if failures:
        print(f"{len(failures)} cell(s) failed; summary covers completed cells only",
              file=sys.stderr)
    return 0


def cmd_schedule_dump(args) -> int:
    if args.points < 2:
        raise ScheduleError("need at least 2 grid points")
    schedule = load_preset(args.preset)
    rows = []
    for i in range(args.points):
        # Grid progress snapped onto whole image counts, which is what the
        # trainer can actually realize.
        images = round(i / (args.points - 1) * schedule.total_images)
        snap = snapshot_at(schedule, images)
        rows.append({
            "progress": snap.progress,
            "lr": snap.lr,
            "gamma": snap.gamma,
            "beta2": snap.beta2,
            "ema_halflife_kimg": snap.ema_halflife_kimg,
            "aug_prob": snap.aug_prob,
        })
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(sink)
        writer.writerow(SCHEDULE_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) for c in SCHEDULE_COLUMNS])
    finally:
        if args.out:
            sink.close()
    if args.fig:
        figures.save_schedule_curves(rows, args.fig)
    return 0


def cmd_dirac(args) -> int:
    theta, psi = (float(v) for v in args.start.split(","))
    traj = dirac_trajectory(DiracState(theta, psi), args.lr, args.gamma, args.steps)
    norms = np.hypot(traj[:, 0], traj[:, 1])
    print(f"final_norm={norms[-1]:.6g} min_norm={norms.min():.6g} max_norm={norms.max():.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trajectory.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "theta", "psi"])
            for step, (th, ps) in enumerate(traj):
                writer.writerow([step, repr(float(th)), repr(float(ps))])
        figures.save_dirac_figure(traj, out / "dirac.png")
        print(f"wrote {out}/trajectory.csv and dirac.png")
    return 0


def _rebalance_config_from_args(args) -> RebalanceConfig:
    file_values: dict = {}
    if args.config:
        file_values = _load_json(args.config)
    clf_values = file_values.get("classifier", {})
    settings = ClassifierSettings(
        epochs=clf_values.get("epochs", 400),
        lr=clf_values.get("lr", 1.0),
        seed=clf_values.get("seed", args.seed + 2),
    )
    gan_schedule = None
    if "gan_schedule" in file_values and file_values["gan_schedule"] is not None:
        gan_schedule = TrainingSchedule.from_dict(file_values["gan_schedule"])
    config = RebalanceConfig(
        class_counts=tuple(file_values.get("class_counts", (441, 166, 455))),
        split=tuple(file_values.get("split", (0.7, 0.1, 0.2))),
        data_seed=args.seed,
        gan_preset=file_values.get("gan_preset", "exp017") if gan_schedule is None else None,
        gan_schedule=gan_schedule,
        gan_seed=args.seed + 1,
        synth_count=file_values.get("synth_count", 200),
        classifier=settings,
        batch_size=file_values.get("batch_size", 16),
        noise_dim=file_values.get("noise_dim", 32),
        g_hidden=tuple(file_values.get("g_hidden", (64, 64))),
        d_hidden=tuple(file_values.get("d_hidden", (64, 32))),
        out_dir=Path(args.out) if args.out else None,
    )
    if config.gan_preset is not None:
        load_preset(config.gan_preset)
    return config


def cmd_rebalance(args) -> int:
    config = _rebalance_config_from_args(args)
    report = run_rebalance_experiment(config)
    for section, rep in (("before", report.before), ("after", report.after)):
        print(f"{section}: macro_precision={rep.macro_precision:.4f} "
              f"macro_recall={rep.macro_recall:.4f} macro_f1={rep.macro_f1:.4f}")
    if config.out_dir is not None:
        figures.save_rebalance_figure(report, config.out_dir / "rebalance.png")
        print(f"wrote {config.out_dir}/rebalance_report.csv, rebalance_report.json, "
              f"and rebalance.png")
    return 0


def cmd_presets(args) -> int:
    for name in list_presets():
        schedule = load_preset(name)
        gamma = schedule.gamma
        print(f"{name}: gamma {gamma.initial:g}->{gamma.final:g} "
              f"({gamma.shape}, burn-in {gamma.burn_in_fraction:g}), "
              f"budget {schedule.total_images} images")
        print(f"    {preset_description(name)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="r3lab",
        description="Desk-scale GAN training lab: scheduled relativistic-pairing "
                    "training with zero-centered gradient penalties.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    p_train.add_argument("--preset", help="schedule preset name (see `presets`)")
    p_train.add_argument("--config", help="JSON experiment config; flags override file values")
    p_train.add_argument("--testbed", choices=["ring_gmm", "ring_image"], default=None)
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--out", required=True, help="output directory for artifacts")
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--eval-interval", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_cmp = sub.add_parser("compare", help="run a preset ladder over seeds and rank results")
    p_cmp.add_argument("--presets", nargs="+", required=True)
    p_cmp.add_argument("--seeds", nargs="+", type=int, required=True)
    p_cmp.add_argument("--testbed", choices=["ring_gmm", "ring_image"], default="ring_gmm")
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--batch-size", type=int, default=None)
    p_cmp.add_argument("--eval-interval", type=int, default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_sched = sub.add_parser("schedule", help="schedule curve utilities")
    sched_sub = p_sched.add_subparsers(dest="schedule_command", required=True)
    p_dump = sched_sub.add_parser("dump", help="emit hyperparameter curves as CSV")
    p_dump.add_argument("--preset", required=True)
    p_dump.add_argument("--points", type=int, default=101)
    p_dump.add_argument("--out", help="write CSV here instead of stdout")
    p_dump.add_argument("--fig", help="also render the curves to this image file")
    p_dump.set_defaults(func=cmd_schedule_dump)

    p_dirac = sub.add_parser("dirac", help="simulate the analytic point-mass game")
    p_dirac.add_argument("--lr", type=float, default=0.05)
    p_dirac.add_argument("--gamma", type=float, default=1.0)
    p_dirac.add_argument("--steps", type=int, default=5000)
    p_dirac.add_argument("--start", default="1,1", help="theta,psi starting point")
    p_dirac.add_argument("--out", help="directory for trajectory CSV and figure")
    p_dirac.set_defaults(func=cmd_dirac)

    p_reb = sub.add_parser("rebalance", help="run the class-rebalancing pipeline")
    p_reb.add_argument("--config", help="JSON rebalance config; flags override file values")
    p_reb.add_argument("--seed", type=int, required=True)
    p_reb.add_argument("--out", help="output directory for the report")
    p_reb.set_defaults(func=cmd_rebalance)

    p_presets = sub.add_parser("presets", help="list the preset ladder")
    p_presets.set_defaults(func=cmd_presets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (PresetNotFoundError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures: I/O, divergence, generation
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
