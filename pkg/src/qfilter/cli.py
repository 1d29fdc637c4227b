"""Command-line front end.

    qfilter run --preset fig1 --trajectories 100 --seed 1 --out fig1.csv
    qfilter sweep-angle --from 0 --to 90 --step 5 --out sweep.csv
    qfilter replay --preset fig1 --records dumps/ --out replayed.csv
    qfilter validate

``run`` executes a preset (both record modes unless --record narrows it)
and writes one CSV per mode; with two modes the output name gains a
``.full`` / ``.obr`` suffix before the extension.  ``--dump-records DIR``
additionally writes one OBR1 bit-record file per trajectory.

Exit codes: 0 success, 1 runtime failure (ensemble fully unstable, I/O),
2 usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .csvio import render_csv, write_csv, write_sweep_csv
from .engine import RecordMode
from .ensemble import EnsembleConfig, aggregate, run_ensemble, simulate_ensemble
from .errors import EnsembleFailure, QFilterError
from .feedback import FeedbackPolicy
from .obr import read_obr_file, write_obr_file
from .presets import DEFAULT_SEED, PRESETS, preset_config
from .replay import replay_filter

_POLICY_CHOICES = {
    "none": FeedbackPolicy.none,
    "rotate-to-axis": FeedbackPolicy.rotate_to_axis,
    "orthogonal-plane": FeedbackPolicy.orthogonal_plane,
    "local-rotate-to-axis": FeedbackPolicy.local_rotate_to_axis,
}


def _parse_policy(name: str | None, angle: float | None) -> FeedbackPolicy | None:
    if name is None:
        if angle is not None:
            return FeedbackPolicy.rotate_to_axis(angle)
        return None
    factory = _POLICY_CHOICES[name]
    if name == "rotate-to-axis":
        return factory(angle if angle is not None else 0.0)
    return factory()


def _mode_list(record: str | None, preset_name: str) -> list[RecordMode]:
    if record == "full":
        return [RecordMode.FULL]
    if record == "one-bit":
        return [RecordMode.ONE_BIT]
    return list(PRESETS[preset_name].record_modes)


def _suffixed(path: Path, tag: str) -> Path:
    if path.suffix:
        return path.with_suffix(f".{tag}{path.suffix}")
    return path.with_name(f"{path.name}.{tag}")


def _run_one(cfg: EnsembleConfig, out: Path, dump_dir: Path | None, workers: int | None) -> None:
    if dump_dir is None:
        stats = run_ensemble(cfg, workers=workers)
    else:
        data = simulate_ensemble(cfg, workers=workers, collect_bits=True)
        stats = aggregate(cfg, data)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for i in range(cfg.n_trajectories):
            write_obr_file(data.bits[i], cfg.dt, dump_dir / f"traj_{i:05d}.obr")
    write_csv(stats, out)
    final = stats.mean_fidelity[-1]
    print(
        f"wrote {out}  ({len(stats.times)} samples, final mean fidelity {final:.4f}, "
        f"{stats.n_unstable} unstable)"
    )


def _cmd_run(args) -> int:
    preset = args.preset
    if preset not in PRESETS:
        print(f"error: unknown preset {preset!r}; choose from {sorted(PRESETS)}", file=sys.stderr)
        return 2
    policy = _parse_policy(args.policy, args.angle)
    if preset == "fig2-inset":
        return _sweep(
            angles=list(PRESETS[preset].angle_sweep),
            args=args,
        )
    modes = _mode_list(args.record, preset)
    out = Path(args.out if args.out else f"{preset}.csv")
    dump = Path(args.dump_records) if args.dump_records else None
    for mode in modes:
        cfg = preset_config(
            preset,
            record_mode=mode,
            n_trajectories=args.trajectories,
            cycles=args.cycles,
            steps_per_cycle=args.steps_per_cycle,
            base_seed=args.seed,
            policy=policy,
            kappa=args.kappa,
        )
        tag = "full" if mode is RecordMode.FULL else "obr"
        path = _suffixed(out, tag) if len(modes) > 1 else out
        dump_dir = (dump / tag if len(modes) > 1 else dump) if dump else None
        _run_one(cfg, path, dump_dir, args.workers)
    return 0


def _sweep(angles, args) -> int:
    rows = []
    for angle in angles:
        cfg = preset_config(
            "fig2",
            record_mode=RecordMode.ONE_BIT if args.record in (None, "one-bit") else RecordMode.FULL,
            n_trajectories=args.trajectories,
            cycles=args.cycles,
            steps_per_cycle=args.steps_per_cycle,
            base_seed=args.seed,
            policy=FeedbackPolicy.rotate_to_axis(float(angle)),
        )
        stats = run_ensemble(cfg, workers=args.workers)
        rows.append((float(angle), float(stats.mean_fidelity[-1]), float(stats.sem_fidelity[-1])))
        print(f"angle {angle:5.1f} deg: final mean fidelity {rows[-1][1]:.4f}")
    out = Path(args.out if args.out else "sweep.csv")
    write_sweep_csv(rows, out)
    print(f"wrote {out}")
    return 0


def _cmd_sweep(args) -> int:
    if args.step <= 0:
        print("error: --step must be positive", file=sys.stderr)
        return 2
    if args.to < args.from_deg:
        print("error: --to must be >= --from", file=sys.stderr)
        return 2
    angles = list(np.arange(args.from_deg, args.to + 0.5 * args.step, args.step))
    return _sweep(angles, args)


def _cmd_replay(args) -> int:
    preset = args.preset
    if preset not in PRESETS:
        print(f"error: unknown preset {preset!r}", file=sys.stderr)
        return 2
    pre = PRESETS[preset]
    model = pre.build_model()
    policy = _parse_policy(args.policy, args.angle)
    if policy is None:
        policy = pre.policy
    records = sorted(Path(args.records).glob("*.obr"))
    if not records:
        print(f"error: no .obr files in {args.records}", file=sys.stderr)
        return 2
    purities = []
    times = None
    n_unstable = 0
    for path in records:
        bits, dt = read_obr_file(path)
        stride = max(1, int(round(2 * math.pi / dt)) // 100)
        res = replay_filter(bits, dt, model, policy, output_stride=stride)
        if res.flag_step >= 0:
            n_unstable += 1
            continue
        purities.append(res.purity)
        times = res.times
    if not purities:
        print("error: every replayed trajectory was unstable", file=sys.stderr)
        return 1
    arr = np.vstack(purities)
    mean = arr.mean(axis=0)
    sem = arr.std(axis=0, ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else np.zeros_like(mean)
    lines = ["time,mean_purity_filter,sem_purity_filter,n_unstable"]
    for i, t in enumerate(times):
        lines.append(f"{t:.12g},{mean[i]:.12g},{sem[i]:.12g},{n_unstable}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"replayed {len(records)} records -> {args.out} ({n_unstable} unstable)")
    return 0


def _cmd_validate(args) -> int:
    from .selfcheck import run_selfcheck

    return run_selfcheck(verbose=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qfilter",
        description="Quantum trajectory filtering with one-bit measurement records",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--trajectories", type=int, default=None, help="ensemble size (default 500)")
        sp.add_argument("--steps-per-cycle", type=int, default=None)
        sp.add_argument("--cycles", type=float, default=None)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--record", choices=["full", "one-bit"], default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (QFILTER_WORKERS caps; results identical)")
        sp.add_argument("--policy", choices=sorted(_POLICY_CHOICES), default=None)
        sp.add_argument("--angle", type=float, default=None,
                        help="rotate-to-axis target angle from the measurement axis, degrees")

    run_p = sub.add_parser("run", help="run a preset and write CSV statistics")
    run_p.add_argument("--preset", required=True)
    run_p.add_argument("--dump-records", default=None, help="directory for per-trajectory OBR1 files")
    run_p.add_argument("--kappa", type=float, default=None, help="ZZ coupling strength (two-qubit presets)")
    add_common(run_p)
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep-angle", help="final fidelity vs feedback target angle")
    sweep_p.add_argument("--from", dest="from_deg", type=float, required=True)
    sweep_p.add_argument("--to", type=float, required=True)
    sweep_p.add_argument("--step", type=float, required=True)
    add_common(sweep_p)
    sweep_p.set_defaults(func=_cmd_sweep)

    rep_p = sub.add_parser("replay", help="re-run the filter offline from OBR1 records")
    rep_p.add_argument("--preset", required=True)
    rep_p.add_argument("--records", required=True)
    add_common(rep_p)
    rep_p.set_defaults(func=_cmd_replay)

    val_p = sub.add_parser("validate", help="run the built-in invariant checks")
    val_p.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EnsembleFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QFilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
