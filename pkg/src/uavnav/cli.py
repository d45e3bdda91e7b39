"""Command-line entry point: train, eval, sweep, plot, replay, selftest."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .evaluate import RESULT_COLUMNS, ResultFormatError, SweepSpec, evaluate_cell, read_results, replay_episode, \
    rmse, run_sweep
from .filters import FilterConfig
from .noise import NoiseSpec
from .policy import ActorCritic, CheckpointError

# distinct exit codes per failure class; argparse itself uses 2 for bad flags
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG, EXIT_CHECKPOINT, EXIT_CSV = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _config(path):
    try:
        return load_config(path)
    except ConfigError as e:
        raise CliError(f"unreadable config: {e}", EXIT_CONFIG) from None


def _policy(path):
    try:
        return ActorCritic.load(path)
    except FileNotFoundError:
        raise CliError(f"checkpoint not found: {path}", EXIT_CHECKPOINT) from None
    except CheckpointError as e:
        raise CliError(f"bad checkpoint: {e}", EXIT_CHECKPOINT) from None


def _results(path):
    try:
        return read_results(path)
    except FileNotFoundError:
        raise CliError(f"results file not found: {path}", EXIT_CSV) from None
    except (ResultFormatError, UnicodeDecodeError, csv.Error) as e:
        raise CliError(f"malformed CSV: {e}", EXIT_CSV) from None


def cmd_train(args) -> int:
    cfg = _config(args.config)
    ppo = cfg.ppo if args.timesteps is None else replace(cfg.ppo, total_timesteps=args.timesteps)
    out = Path(args.out)
    t0 = time.perf_counter()
    from .ppo import train
    _, trainlog = train(cfg.env, cfg.effective_noise, cfg.filter, ppo, args.seed, out_dir=out)
    rows = trainlog.rows
    last = rows[-1] if rows else {}
    print(f"trained {ppo.total_timesteps} steps in {time.perf_counter() - t0:.1f}s; "
          f"episodes {len(rows)}; mean100_return {last.get('mean100_return', float('nan')):.1f}; "
          f"checkpoint {out / 'policy.ckpt'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args.config)
    policy = _policy(args.checkpoint)
    noise = cfg.effective_noise
    if args.mu is not None or args.sigma is not None:
        noise = NoiseSpec(noise.mu if args.mu is None else args.mu, noise.sigma if args.sigma is None else args.sigma)
    fcfg = cfg.filter if args.denoiser is None else replace(cfg.filter, kind=args.denoiser)
    episodes = args.episodes or cfg.sweep.episodes_per_cell
    seed = cfg.sweep.seed if args.seed is None else args.seed
    res = evaluate_cell(policy, cfg.env, noise, fcfg, episodes, seed, cfg.sweep.deterministic)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    w.writerow(res.as_row())
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args.config)
    policy = _policy(args.checkpoint)
    s = cfg.sweep
    kw = dict(denoisers=s.denoisers, episodes_per_cell=args.episodes or s.episodes_per_cell,
              seed=s.seed if args.seed is None else args.seed, deterministic=s.deterministic,
              checkpoint=str(args.checkpoint))
    kind = "biased_grid" if args.kind == "biased" else args.kind
    if kind == s.kind:
        kw.update(mu=s.mu, sigma=s.sigma)
    if args.denoisers:
        kw["denoisers"] = tuple(d.strip() for d in args.denoisers.split(",") if d.strip())
    try:
        spec = SweepSpec.preset(kind, **kw)
    except ValueError as e:
        raise CliError(f"invalid sweep: {e}", EXIT_CONFIG) from None
    out = Path(args.out or f"results_{kind}.csv")
    if out.exists() and out.stat().st_size > 0:
        _results(out)  # fail early on a file we cannot resume from
    n = len(spec.cells())
    t0 = time.perf_counter()

    def progress(done, total, res):
        if not args.quiet:
            print(f"[{done}/{total}] mu={res.mu:g} sigma={res.sigma:g} {res.denoiser}: "
                  f"success {res.success_rate:.3f}", file=sys.stderr)

    results = run_sweep(spec, policy, cfg.env, out, cfg.filter, workers=args.workers, progress=progress)
    print(f"{len(results)}/{n} cells in {out} ({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plots
    if args.kind == "train":
        try:
            log = plots.read_trainlog(args.csv)
        except FileNotFoundError:
            raise CliError(f"training log not found: {args.csv}", EXIT_CSV) from None
        except (plots.EmptyInputError, KeyError, ValueError) as e:
            raise CliError(f"malformed CSV: {e}", EXIT_CSV) from None
        out = plots.training_curves(log, args.out or Path(args.csv).with_suffix(".svg"))
    else:
        results = _results(args.csv)
        if not results:
            raise CliError(f"malformed CSV: {args.csv} has no result rows", EXIT_CSV)
        out = plots.render(args.kind, results, args.out or Path(args.csv).with_suffix(".svg"), args.title)
    print(out)
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _config(args.config)
    policy = _policy(args.checkpoint)
    noise = cfg.effective_noise
    if args.mu is not None or args.sigma is not None:
        noise = NoiseSpec(noise.mu if args.mu is None else args.mu, noise.sigma if args.sigma is None else args.sigma)
    fcfg = cfg.filter if args.denoiser is None else FilterConfig(args.denoiser, cfg.filter.lpf_cutoff_rad_s,
                                                                 cfg.filter.kalman_q, cfg.filter.kalman_r,
                                                                 cfg.filter.kalman_p0)
    traj = replay_episode(policy, cfg.env, noise, fcfg, args.seed)
    out = Path(args.out or f"replay_{args.seed}.svg")
    table = out.with_suffix(".csv")
    with open(table, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "true_x", "true_y", "noisy_x", "noisy_y", "est_x", "est_y", "ax", "ay", "az", "reward"])
        for i in range(len(traj)):
            a = traj.actions[i] if i < len(traj.actions) else (float("nan"),) * 3
            r = traj.rewards[i] if i < len(traj.rewards) else float("nan")
            w.writerow([i, *traj.true_pos[i], *traj.noisy_pos[i], *traj.est_pos[i], *a, r])
    from . import plots
    plots.trajectory(traj, cfg.env, out)
    print(f"outcome {traj.outcome}; steps {len(traj) - 1}; rmse noisy {rmse(traj.noisy_pos, traj.true_pos):.4f} "
          f"denoised {rmse(traj.est_pos, traj.true_pos):.4f}; wrote {out} and {table}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from . import selftest
    return EXIT_OK if selftest.run() else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavnav", description="Noisy UAV navigation: PPO training and noise sweeps.")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a policy from a config")
    t.add_argument("config")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="run")
    t.add_argument("--timesteps", type=int, help="override ppo.total_timesteps")
    t.set_defaults(func=cmd_train)

    denoisers = ("none", "lpf", "kalman")
    e = sub.add_parser("eval", help="evaluate one noise cell")
    e.add_argument("config")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--mu", type=float)
    e.add_argument("--sigma", type=float)
    e.add_argument("--denoiser", choices=denoisers)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="evaluate a grid of noise cells into a CSV (resumable)")
    s.add_argument("config")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--kind", required=True, choices=("unbiased", "bias_only", "biased"))
    s.add_argument("--episodes", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--denoisers", help="comma-separated, e.g. none,lpf,kalman")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, help="worker processes (default: $UAVNAV_WORKERS or 1)")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="render a result CSV or training log to SVG")
    pl.add_argument("csv")
    pl.add_argument("--kind", required=True, choices=("unbiased", "bias_only", "biased", "train"))
    pl.add_argument("--out")
    pl.add_argument("--title", default="")
    pl.set_defaults(func=cmd_plot)

    r = sub.add_parser("replay", help="record and render one episode")
    r.add_argument("config")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--mu", type=float)
    r.add_argument("--sigma", type=float)
    r.add_argument("--denoiser", choices=denoisers)
    r.add_argument("--out")
    r.set_defaults(func=cmd_replay)

    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"uavnav: error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
