#!/usr/bin/env python3
"""
LNO CLI - Command-line interface for the local neural operator engine

Usage:
    python -m lno kernels --n 12 --m 8 [--out kernels.csv]
    python -m lno corrosion --n-blocks 4 --window 12 --reps 2 --h 1
    python -m lno gen-data --equation burgers --param 0.01 --grid 64 --out burgers.lnod
    python -m lno train --config burgers1d --data burgers.lnod --out runs/burgers
    python -m lno rollout --checkpoint runs/burgers/model.lnoc --ic test.lnod --steps 40
    python -m lno validate --checkpoint runs/burgers/model.lnoc --data test.lnod --times 1,2
    python -m lno info <file>
    python -m lno replay <manifest.json>

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.
"""

import argparse
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import ConfigError, LnoError, NumericalError

logger = logging.getLogger("lno")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting with code 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def print_progress(current: int, total: int, message: str) -> None:
    percent = (current / total * 100) if total > 0 else 0
    print(f"\r[{percent:5.1f}%] {message}: {current}/{total}", end='', flush=True)
    if current >= total:
        print()


def _manifest(args, inputs, outputs, seed=None):
    from .manifest import RunManifest
    resolved = {k: v for k, v in vars(args).items() if k != 'func'}
    return RunManifest(subcommand=args.command, argv=list(args.argv), args=resolved, seed=seed,
                       inputs=[str(p) for p in inputs], outputs=[str(p) for p in outputs])


def cmd_kernels(args):
    """Dump 1-D Legendre kernels in the table layout; check against the reference tables"""
    from .legendre import make_kernels_1d
    from .tables import TABLE_MODES, TABLE_TOLERANCE, has_table, table_deviation

    kernels = make_kernels_1d(args.n, args.m)
    header = (["i"] + [f"phi_{m}" for m in range(args.m)] + [f"psi_{m}" for m in range(args.m)])
    rows = [[i] + [f"{v:.6f}" for v in kernels.phi[:, i]] + [f"{v:.6f}" for v in kernels.psi[:, i]]
            for i in range(args.n)]

    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
        _manifest(args, [], [out]).save(out)
        print(f"Saved: {out}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)

    if has_table(args.n, args.m):
        deviation = table_deviation(args.n, kernels.phi, kernels.psi)
        if deviation > TABLE_TOLERANCE:
            raise NumericalError(f"kernels for N={args.n} deviate from the reference table by "
                                 f"{deviation:.2e} (tolerance {TABLE_TOLERANCE:g})")
        print(f"Table check N={args.n}, first {TABLE_MODES} modes: max deviation {deviation:.2e}",
              file=sys.stderr)
    return EXIT_OK


def cmd_corrosion(args):
    """Print the corrosion widths of an architecture"""
    from .model import LnoConfig, corrosion

    config = LnoConfig(n=args.n_blocks, N=args.window, k=args.reps, H=args.h, M=1, width=1, d_u=1)
    report = corrosion(config)
    print(f"\n{'='*50}")
    print(f"  Corrosion (n={args.n_blocks}, N={args.window}, k={args.reps}, H={args.h})")
    print(f"{'='*50}")
    print(f"  Lifting r1:        {report.r1}")
    print(f"  Per block r2:      {report.r2}")
    print(f"  Projection r3:     {report.r3}")
    print(f"  Total R:           {report.R}")
    print(f"  Local range r_min: {report.r_min}")
    if args.dx:
        lengths = report.in_length(args.dx)
        print(f"  R / r_min (dx={args.dx:g}): {lengths['R']:.4g} / {lengths['r_min']:.4g}")
    print(f"{'='*50}\n")
    return EXIT_OK


def cmd_gen_data(args):
    """Generate a dataset with a reference solver"""
    from .format import DatasetFile
    from .solvers import generate_trajectory

    steps = int(round(args.seconds / args.dt))
    if steps < 1:
        raise ConfigError(f"--seconds {args.seconds} is shorter than one step of --dt {args.dt}")
    if args.count < 1:
        raise ConfigError(f"--count must be >= 1, got {args.count}")
    seeds = np.random.SeedSequence(args.seed).spawn(args.count)

    def one(seed):
        return generate_trajectory(args.equation, args.param, args.grid, args.dt, steps, seed)

    trajectories = []
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        for i, trajectory in enumerate(pool.map(one, seeds), start=1):
            trajectories.append(trajectory)
            if not args.quiet:
                print_progress(i, args.count, "Generating trajectories")

    dataset = DatasetFile.create(trajectories[0], seed=args.seed, compression=args.compression)
    for trajectory in trajectories[1:]:
        dataset.add_trajectory(trajectory)
    out = dataset.save(args.out)
    _manifest(args, [], [out], seed=args.seed).save(out)
    print(f"Saved: {out} ({dataset.trajectory_count} x {steps + 1} frames)")
    return EXIT_OK


def cmd_train(args):
    """Train a model on a dataset"""
    from dataclasses import replace
    from .config import load_config
    from .format import DatasetFile
    from .train import train_loop

    config, schedule = load_config(args.config)
    if args.iters is not None:
        schedule = replace(schedule, iterations=args.iters)
    if args.checkpoint_every is not None:
        schedule = replace(schedule, checkpoint_every=args.checkpoint_every)
    dataset = DatasetFile.load(args.data)

    result = train_loop(config, dataset, schedule, seed=args.seed, out_dir=args.out,
                        progress_callback=None if args.quiet else print_progress)
    _manifest(args, [args.data], [result.checkpoint, result.curve_path], seed=args.seed).save(args.out)
    print(f"Loss: {result.initial_loss:.4g} -> {result.final_loss:.4g}")
    print(f"Saved: {result.checkpoint}")
    return EXIT_OK


def cmd_rollout(args):
    """March a trained model from an initial condition"""
    from .boundary import BoundarySpec
    from .checkpoint import load_checkpoint
    from .export import export_frames
    from .format import DatasetFile
    from .ibm import IbmGeometry
    from .marching import rollout

    model = load_checkpoint(args.checkpoint)
    source = DatasetFile.load(args.ic)
    initial = source.get_trajectory(args.trajectory).frame(args.frame)
    spec = BoundarySpec.parse(args.boundary) if args.boundary else BoundarySpec.periodic(initial.d)
    geom = IbmGeometry.from_csv(args.ibm) if args.ibm else None

    trajectory = rollout(model, initial, args.steps, spec, geom,
                         progress_callback=None if args.quiet else print_progress)
    out = DatasetFile.create(trajectory).save(args.out)
    outputs = [out]
    if args.export:
        export_frames(trajectory, args.export, fmt=args.export_format, every=args.every)
        outputs.append(Path(args.export))
    inputs = [args.checkpoint, args.ic] + ([args.ibm] if args.ibm else [])
    _manifest(args, inputs, outputs).save(out)
    print(f"Saved: {out}")
    return EXIT_OK


def cmd_validate(args):
    """Mean L2 error of rollouts against reference trajectories"""
    from .checkpoint import load_checkpoint
    from .format import DatasetFile
    from .train import validate_error

    try:
        times = [float(t) for t in args.times.split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError(f"--times must be a comma-separated list of numbers: {args.times!r}") from e
    if not times:
        raise ConfigError("--times is empty")
    model = load_checkpoint(args.checkpoint)
    dataset = DatasetFile.load(args.data)
    trajectories = dataset.trajectories[:args.count] if args.count else dataset.trajectories

    errors = validate_error(model, trajectories, times,
                            progress_callback=None if args.quiet else print_progress)
    print("time,E_t")
    for time, error in errors.items():
        print(f"{time:g},{error:.6g}")
    if args.csv:
        out = Path(args.csv)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(["time", "E_t"])
            for time, error in errors.items():
                writer.writerow([time, repr(error)])
        _manifest(args, [args.checkpoint, args.data], [out]).save(out)
    return EXIT_OK


def cmd_info(args):
    """Show info about a dataset or checkpoint"""
    from .export import get_info

    info = get_info(args.input)
    print(f"\n{'='*50}")
    if info["kind"] == "checkpoint":
        config = info["config"]
        print(f"  LNO Checkpoint Info")
        print(f"{'='*50}")
        print(f"  Tool version: {info['tool_version']}")
        print(f"  Dimension:    {config['d']}-D, {config['d_u']} channel(s)")
        print(f"  Width:        {config['width']} (projection {config['proj_hidden']})")
        print(f"  Blocks:       {config['n']}")
        print(f"  Window:       N={config['N']}, M={config['M']}, k={config['k']}, H={config['H']}")
        print(f"  dx / dt:      {config['dx']:g} / {config['dt']:g}")
        print(f"  Weights:      {info['weight_count']:,}")
    else:
        print(f"  LNO Dataset Info")
        print(f"{'='*50}")
        print(f"  Equation:     {info['equation']} (parameter {info['parameter']:g})")
        print(f"  Created:      {info['created_at']}")
        print(f"  Grid:         {'x'.join(str(n) for n in info['dims'])}, dx={info['dx']:g}")
        print(f"  Channels:     {info['d_u']}")
        print(f"  Trajectories: {info['trajectory_count']}")
        print(f"  Frames:       {info['frame_count']} (dt={info['dt']:g})")
        print(f"  Duration:     {info['duration_seconds']:.2f} seconds")
        print(f"  Seed:         {info['seed']}")
        print(f"  Compression:  {info['compression']}")
    print(f"  File Size:    {info['file_size_mb']:.2f} MB")
    print(f"{'='*50}\n")
    return EXIT_OK


def cmd_replay(args):
    """Rerun the command recorded in a manifest"""
    from .manifest import RunManifest

    manifest = RunManifest.load(args.manifest)
    if manifest.subcommand == "replay":
        raise ConfigError("a replay manifest cannot be replayed")
    logger.info("Replaying: %s", " ".join(manifest.argv))
    return main(manifest.argv)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog='lno',
        description='LNO - local neural operator for transient PDEs',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  Check kernels:    python -m lno kernels --n 12 --m 8 --out s12.csv
  Corrosion:        python -m lno corrosion --n-blocks 4 --window 12 --reps 2 --h 1
  Generate data:    python -m lno gen-data --equation burgers --param 0.01 --grid 64 --dt 0.05 --seconds 5 --count 50 --out burgers.lnod
  Train:            python -m lno train --config burgers1d --data burgers.lnod --iters 2000 --out runs/b1
  Roll out:         python -m lno rollout --checkpoint runs/b1/model.lnoc --ic test.lnod --steps 40 --out pred.lnod
  Cascade:          python -m lno rollout --checkpoint ns.lnoc --ic ic.lnod --boundary "x:constant=1,0,y:periodic" --ibm foil.csv
  Validate:         python -m lno validate --checkpoint runs/b1/model.lnoc --data test.lnod --times 1,2
"""
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    parser.add_argument('-q', '--quiet', action='store_true', help='Warnings only, no progress')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    kernels = subparsers.add_parser('kernels', help='Dump Legendre decomposition/reconstruction kernels')
    kernels.add_argument('--n', type=int, required=True, help='Window size N')
    kernels.add_argument('--m', type=int, required=True, help='Mode count M')
    kernels.add_argument('--out', help='CSV output path (default: stdout)')
    kernels.set_defaults(func=cmd_kernels)

    corr = subparsers.add_parser('corrosion', help='Corrosion width of an architecture')
    corr.add_argument('--n-blocks', type=int, default=4, help='Inner blocks (default: 4)')
    corr.add_argument('--window', type=int, default=12, help='Window size N (default: 12)')
    corr.add_argument('--reps', type=int, default=2, help='Window repetitions k (default: 2)')
    corr.add_argument('--h', type=int, default=1, help='Physical kernel half-width H (default: 1)')
    corr.add_argument('--dx', type=float, help='Grid spacing, to print lengths')
    corr.set_defaults(func=cmd_corrosion)

    gen = subparsers.add_parser('gen-data', help='Generate trajectories with a reference solver')
    gen.add_argument('--equation', required=True, choices=['burgers', 'burgers2d', 'wave', 'ns'])
    gen.add_argument('--param', type=float, required=True, help='Viscosity, or wave speed')
    gen.add_argument('--grid', type=int, default=64, help='Points per axis on [-1, 1) (default: 64)')
    gen.add_argument('--dt', type=float, default=0.05, help='Time between frames (default: 0.05)')
    gen.add_argument('--seconds', type=float, default=5.0, help='Trajectory duration (default: 5)')
    gen.add_argument('--count', type=int, default=1, help='Number of trajectories (default: 1)')
    gen.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    gen.add_argument('--compression', choices=['none', 'zlib'], default='none')
    gen.add_argument('--workers', type=int, default=None, help='Worker threads')
    gen.add_argument('--out', required=True, help='Output dataset path')
    gen.set_defaults(func=cmd_gen_data)

    train = subparsers.add_parser('train', help='Train a model')
    train.add_argument('--config', default='burgers1d', help='Preset name or JSON config file')
    train.add_argument('--data', required=True, help='Training dataset')
    train.add_argument('--iters', type=int, help='Override the iteration count')
    train.add_argument('--checkpoint-every', type=int, help='Intermediate checkpoint cadence')
    train.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    train.add_argument('--out', required=True, help='Output directory')
    train.set_defaults(func=cmd_train)

    roll = subparsers.add_parser('rollout', help='March a trained model')
    roll.add_argument('--checkpoint', required=True)
    roll.add_argument('--ic', required=True, help='Dataset holding the initial condition')
    roll.add_argument('--trajectory', type=int, default=0, help='Trajectory index in --ic (default: 0)')
    roll.add_argument('--frame', type=int, default=0, help='Frame index in the trajectory (default: 0)')
    roll.add_argument('--steps', type=int, required=True)
    roll.add_argument('--boundary', help='Boundary string, e.g. "x:periodic,y:constant=1.0,0.0"')
    roll.add_argument('--ibm', help='Lagrange points CSV (x,y,u_bc,v_bc)')
    roll.add_argument('--out', default='rollout.lnod', help='Output dataset path')
    roll.add_argument('--export', help='Directory for per-frame exports')
    roll.add_argument('--export-format', choices=['txt', 'bin'], default='txt')
    roll.add_argument('--every', type=int, default=1, help='Export every n-th frame')
    roll.set_defaults(func=cmd_rollout)

    val = subparsers.add_parser('validate', help='Mean L2 error at given times')
    val.add_argument('--checkpoint', required=True)
    val.add_argument('--data', required=True, help='Reference dataset (unseen in training)')
    val.add_argument('--times', required=True, help='Comma-separated times, multiples of dt')
    val.add_argument('--count', type=int, default=10, help='Trajectories to use (default: 10, 0 = all)')
    val.add_argument('--csv', help='Also write the table to this CSV')
    val.set_defaults(func=cmd_validate)

    info = subparsers.add_parser('info', help='Show dataset or checkpoint info')
    info.add_argument('input')
    info.set_defaults(func=cmd_info)

    replay = subparsers.add_parser('replay', help='Rerun the command recorded in a manifest')
    replay.add_argument('manifest')
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    args.argv = argv

    if not logging.getLogger().handlers:
        level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except LnoError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (IndexError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
