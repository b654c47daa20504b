"""``salsa`` command-line interface.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 missing or invalid
prerequisite (autoencoder, bundle or trajectory file).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .action_grid import action_grid
from .autoencoder import TrainingDivergedError, train_autoencoder, uniform_dataset
from .envs import ENV_IDS, EnvConfig, NumericDomainError, load_env_config, make_env, parse_key_values
from .policy import ActionMask, PolicyFailure, collect_agent_actions, evaluate, rollout
from .stability import EigenConvergenceError, NoPeriodError, StabilityGateError, detect_period, floquet, \
    kreiss_report, spectral_series, stability_contour
from .trainer import TrainConfig, TrainingError, default_train_config, train

log = logging.getLogger("salsa")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_MISSING = 0, 2, 3, 4
NUMERIC_ERRORS = (NumericDomainError, PolicyFailure, TrainingError, TrainingDivergedError, StabilityGateError,
                  EigenConvergenceError, FloatingPointError, ArithmeticError)


class UsageError(Exception):
    pass


class MissingPrerequisite(Exception):
    pass


# ---------------------------------------------------------------------------
# argument handling


def _common(p: argparse.ArgumentParser, env_required: bool = False):
    p.add_argument("--env", choices=ENV_IDS, required=env_required, help="environment id")
    p.add_argument("--hd", type=int, default=3, help="latent dimension h_d (default 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="key=value file; env.* and train.* keys")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output root (default ./runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salsa", description="Latent linear-action policies and their stability analysis.",
        epilog="Environment parameters can be overridden with --env.KEY=VALUE (e.g. --env.gravity=15).")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-ae", help="pretrain and freeze the action autoencoder")
    _common(p, env_required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--samples", type=int, default=20_000, help="uniformly sampled actions")
    p.add_argument("--mse-target", type=float, default=1e-5, help="held-out MSE needed for exit code 0")
    p.add_argument("--dataset", choices=("uniform", "agent"), default="uniform",
                   help="uniform samples over the action box, or actions executed by --bundle")
    p.add_argument("--bundle", type=Path, help="trained bundle whose greedy actions form the agent dataset")

    p = sub.add_parser("train", help="train the dynamics network with a frozen autoencoder")
    _common(p, env_required=True)
    p.add_argument("--ae", type=Path, help="autoencoder file (default <out>/ae_<env>_hd<N>.json)")
    p.add_argument("--steps", type=int, help="environment steps (overrides the per-env default)")
    p.add_argument("--eval-episodes", type=int, default=50, help="greedy episodes scored after training")
    p.add_argument("--checkpoint-every", type=int, default=0, help="write a bundle every N episodes")

    p = sub.add_parser("rollout", help="run a trained bundle and export the trajectory")
    _common(p)
    p.add_argument("bundle", type=Path)
    p.add_argument("--steps", type=int, help="horizon (default: the environment's episode length)")
    p.add_argument("--mask", default="", help='zero-action intervals, e.g. "0:30,150:200"')
    p.add_argument("--state", help="initial internal state as comma-separated values, e.g. 3.14159,0")
    p.add_argument("--export", type=Path, help="output stem for <stem>.csv and <stem>.json")

    p = sub.add_parser("analyze", help="stability analysis of an exported trajectory")
    asub = p.add_subparsers(dest="analysis", required=True)
    a = asub.add_parser("contour", help="spectral grids around trajectory states")
    _common(a)
    a.add_argument("--bundle", type=Path, required=True)
    a.add_argument("--trajectory", type=Path, required=True)
    a.add_argument("--dims", default="0,1", help="one or two observation indices")
    a.add_argument("--res", type=int, default=32)
    a.add_argument("--every", type=int, default=10, help="analyse every k-th step")
    a.add_argument("--ranges", help='per-dim "lo:hi" separated by commas (default: from the trajectory)')
    a = asub.add_parser("kreiss", help="Kreiss constants of the locally stable steps")
    _common(a)
    a.add_argument("--trajectory", type=Path, required=True)
    a.add_argument("--mode", choices=("standard", "paper_literal"), default="standard")
    a.add_argument("--level", type=int, default=0, help="grid refinement level")
    a.add_argument("--epsilon", type=float, default=1e-8, help="normality threshold")
    a = asub.add_parser("floquet", help="Floquet multipliers over one period")
    _common(a)
    a.add_argument("--trajectory", type=Path, required=True)
    a.add_argument("--t1", type=int)
    a.add_argument("--t2", type=int)
    a.add_argument("--dt", type=float, default=1.0, help="time per step (default: one control step)")
    a.add_argument("--signal", default="rho", help='"rho" or an observation index used for period detection')
    a = asub.add_parser("action-grid", help="pendulum actions over the (theta, theta_dot) plane")
    _common(a)
    a.add_argument("--bundle", type=Path, required=True)
    a.add_argument("--res", type=int, default=101)
    a.add_argument("--prev-action", type=float, default=0.0)
    # ranges starting with a minus sign need the --opt=lo:hi spelling
    a.add_argument("--theta-range", default=f"{-np.pi!r}:{np.pi!r}", help="lo:hi, e.g. --theta-range=-3.14:3.14")
    a.add_argument("--thetadot-range", default="-8:8", help="lo:hi, e.g. --thetadot-range=-8:8")
    return parser


def _split_overrides(extra: list[str]) -> dict:
    out = {}
    for item in extra:
        if not item.startswith("--env.") or "=" not in item:
            raise UsageError(f"unrecognised argument {item!r}")
        key, value = item[2:].split("=", 1)
        out[key] = value
    return out


def _read_config(path: Path | None) -> tuple[dict, dict]:
    """Split a key=value file into environment and training settings."""
    if path is None:
        return {}, {}
    if not path.exists():
        raise MissingPrerequisite(f"config file {path} not found")
    values = parse_key_values(path.read_text().splitlines())
    train = {k.removeprefix("train."): v for k, v in values.items() if k.startswith("train.")}
    env = {k: v for k, v in values.items() if not k.startswith("train.")}
    return env, train


def _env_config(env_id, file_env: dict, overrides: dict, base: EnvConfig | None = None) -> EnvConfig:
    merged = dict(file_env)
    merged.update({k.removeprefix("env."): v for k, v in overrides.items()})
    if base is not None:
        values = {k: str(v) for k, v in base.to_dict().items() if k != "env_id"}
        values.update(merged)
        merged = values
    try:
        return load_env_config(None, env_id, merged)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad environment setting: {exc}") from None


def _train_config(env_id: str, file_train: dict, seed: int, steps: int | None) -> TrainConfig:
    typed = {}
    defaults = TrainConfig()
    for k, v in file_train.items():
        if not hasattr(defaults, k):
            raise UsageError(f"unknown training key {k!r}")
        cur = getattr(defaults, k)
        typed[k] = tuple(int(x) for x in v.split(",")) if isinstance(cur, tuple) else type(cur)(v)
    typed["seed"] = seed
    if steps is not None:
        typed["total_steps"] = steps
    return default_train_config(env_id, **typed)


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}; expected lo:hi") from None


def _require(path: Path | None, what: str, hint: str) -> Path:
    if path is None or not Path(path).exists():
        raise MissingPrerequisite(f"{what} {path} not found; {hint}")
    return Path(path)


def _load_bundle(path):
    path = _require(path, "model bundle", "create one with `salsa train`")
    try:
        return io.load_bundle(path)
    except (io.BundleError, KeyError) as exc:
        raise MissingPrerequisite(f"cannot use bundle {path}: {exc}") from None


def _load_traj(path):
    path = Path(path)
    _require(path.with_suffix(".json"), "trajectory sidecar", "export one with `salsa rollout --export`")
    return io.load_trajectory(path)


def _start(args, argv, command, config, inputs=None):
    run_dir = io.make_run_dir(args.out, args.seed)
    io.write_manifest(run_dir, command, argv, config, args.seed, inputs)
    log.info("run directory %s", run_dir)
    return run_dir


def _finish(run_dir, args, argv, command, config, inputs=None, outputs=None, status="ok"):
    io.write_manifest(run_dir, command, argv, config, args.seed, inputs, outputs, status)


# ---------------------------------------------------------------------------
# commands


def default_ae_path(out: Path, env_id: str, h_d: int) -> Path:
    return Path(out) / f"ae_{env_id}_hd{h_d}.json"


def cmd_train_ae(args, argv, overrides) -> int:
    file_env, _ = _read_config(args.config)
    env_cfg = _env_config(args.env, file_env, overrides)
    env = make_env(env_cfg)
    config = {"env": env_cfg.to_dict(), "h_d": args.hd, "epochs": args.epochs, "samples": args.samples,
              "mse_target": args.mse_target, "dataset": args.dataset}
    inputs = {}
    if args.dataset == "agent":
        bundle = _load_bundle(args.bundle)
        inputs["bundle"] = args.bundle
    run_dir = _start(args, argv, "train-ae", config, inputs)
    t0 = time.perf_counter()
    if args.dataset == "agent":
        data = collect_agent_actions(env, bundle.policy, args.samples, seed0=args.seed)
    else:
        data = uniform_dataset(env.action_low, env.action_high, args.samples, seed=args.seed)
    ae = train_autoencoder(data, args.hd, epochs=args.epochs, seed=args.seed)
    elapsed = time.perf_counter() - t0
    extra = {"seed": args.seed, "epochs": args.epochs, "samples": args.samples, "dataset": args.dataset}
    path = io.save_autoencoder(run_dir / "autoencoder.json", ae, args.env, extra)
    shared = io.save_autoencoder(default_ae_path(args.out, args.env, args.hd), ae, args.env, extra)
    ok = ae.heldout_mse <= args.mse_target
    print(f"held-out MSE {ae.heldout_mse:.3e} (target {args.mse_target:.1e}) {'met' if ok else 'NOT met'}; "
          f"{elapsed:.1f} s; weights {shared}")
    _finish(run_dir, args, argv, "train-ae", config, inputs, {"autoencoder": path, "shared": shared},
            status="ok" if ok else "mse-target-missed")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_train(args, argv, overrides) -> int:
    ae_path = args.ae or default_ae_path(args.out, args.env, args.hd)
    _require(ae_path, "pretrained autoencoder",
             f"run `salsa train-ae --env {args.env} --hd {args.hd} --out {args.out}` first")
    try:
        ae, ae_doc = io.load_autoencoder(ae_path)
    except (io.BundleError, KeyError) as exc:
        raise MissingPrerequisite(f"cannot use autoencoder {ae_path}: {exc}") from None
    if ae_doc["env_id"] != args.env or ae.h_d != args.hd:
        raise MissingPrerequisite(f"autoencoder {ae_path} was trained for env={ae_doc['env_id']} h_d={ae.h_d}; "
                                  f"run `salsa train-ae --env {args.env} --hd {args.hd}`")
    file_env, file_train = _read_config(args.config)
    env_cfg = _env_config(args.env, file_env, overrides)
    train_cfg = _train_config(args.env, file_train, args.seed, args.steps)
    config = {"env": env_cfg.to_dict(), "train": train_cfg.to_dict(), "h_d": args.hd,
              "eval_episodes": args.eval_episodes}
    inputs = {"autoencoder": ae_path}
    run_dir = _start(args, argv, "train", config, inputs)
    env = make_env(env_cfg)
    t0 = time.perf_counter()

    def checkpoint(res, episode):
        ckpt = io.ModelBundle(args.env, res.policy, res.critic, env_cfg, train_cfg,
                              {"episode": episode, "best_selection_eval": res.best_eval})
        io.save_bundle(run_dir / "checkpoints" / f"episode_{episode:06d}.json", ckpt)

    result = train(env, ae, train_cfg, h_d=args.hd, checkpoint=checkpoint, checkpoint_every=args.checkpoint_every)
    elapsed = time.perf_counter() - t0
    returns = evaluate(env, result.policy, args.eval_episodes) if args.eval_episodes > 0 else np.zeros(0)
    extra = {"best_selection_eval": result.best_eval, "steps": result.steps, "train_seconds": elapsed,
             "eval_episodes": args.eval_episodes,
             "eval_mean": float(np.mean(returns)) if len(returns) else None}
    bundle = io.ModelBundle(args.env, result.policy, result.critic, env_cfg, train_cfg, extra)
    bundle_path = io.save_bundle(run_dir / "bundle.json", bundle)
    curve_path = io.write_curve_csv(run_dir / "curve.csv", result.curve)
    if len(returns):
        print(f"mean greedy return {np.mean(returns):.2f} over {len(returns)} episodes")
    print(f"bundle {bundle_path}; {elapsed:.0f} s")
    _finish(run_dir, args, argv, "train", config, inputs, {"bundle": bundle_path, "curve": curve_path})
    return EXIT_OK


def cmd_rollout(args, argv, overrides) -> int:
    bundle = _load_bundle(args.bundle)
    file_env, _ = _read_config(args.config)
    env_cfg = _env_config(bundle.env_id, file_env, overrides, base=bundle.env_config)
    try:
        mask = ActionMask.parse(args.mask)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    state = None
    if args.state:
        try:
            state = np.array([float(x) for x in args.state.split(",")])
        except ValueError:
            raise UsageError(f"cannot parse --state {args.state!r}") from None
    env = make_env(env_cfg)
    horizon = args.steps or env.max_episode_steps
    try:
        mask.check_horizon(horizon)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = {"env": env_cfg.to_dict(), "steps": horizon, "mask": str(mask), "state": args.state}
    inputs = {"bundle": args.bundle}
    run_dir = _start(args, argv, "rollout", config, inputs)
    traj = rollout(env, bundle.policy, horizon, mask, seed=args.seed, initial_state=state)
    stem = args.export or run_dir / "trajectory"
    csv_path, json_path = io.export_trajectory(stem, traj, {"mask": str(mask), "bundle_hash": bundle.content_hash,
                                                            "env_config": env_cfg.to_dict()})
    print(f"{len(traj)} steps, return {traj.total_reward:.2f}; wrote {csv_path} and {json_path}")
    _finish(run_dir, args, argv, "rollout", config, inputs, {"csv": csv_path, "sidecar": json_path})
    return EXIT_OK


def cmd_analyze(args, argv, overrides) -> int:
    kind = args.analysis
    inputs = {}
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in ("verbose",)}
    if getattr(args, "trajectory", None) is not None:
        traj = _load_traj(args.trajectory)
        inputs["trajectory"] = Path(args.trajectory).with_suffix(".json")
    if getattr(args, "bundle", None) is not None:
        bundle = _load_bundle(args.bundle)
        inputs["bundle"] = args.bundle
    run_dir = _start(args, argv, f"analyze {kind}", config, inputs)
    outputs = {}
    if kind == "contour":
        try:
            dims = [int(d) for d in args.dims.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse --dims {args.dims!r}") from None
        ranges = None if args.ranges is None else [_range(r) for r in args.ranges.split(",")]
        try:
            frames = stability_contour(bundle.policy, traj, dims, ranges, args.res, args.every)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for f in frames:
            outputs[f"frame_{f.t}"] = io.write_json(run_dir / "contour" / f"frame_{f.t:05d}.json", f.to_dict())
        print(f"wrote {len(frames)} contour frames to {run_dir / 'contour'}")
    elif kind == "kreiss":
        report = kreiss_report(traj.A, mode=args.mode, epsilon=args.epsilon, level=args.level)
        outputs["kreiss"] = io.write_json(run_dir / "kreiss.json", report.to_dict())
        vals = report.values
        done = np.isfinite(vals)
        summary = f"max {np.nanmax(vals):.4g}, median {np.nanmedian(vals):.4g}" if done.any() else "no gated steps"
        print(f"Kreiss ({args.mode}) on {done.sum()}/{len(vals)} steps: {summary}; {outputs['kreiss']}")
    elif kind == "floquet":
        t1, t2 = args.t1, args.t2
        if t1 is None and t2 is None:
            signal = _signal(traj, args.signal)
            try:
                t1, t2 = detect_period(signal)
                log.info("detected period [%d, %d)", t1, t2)
            except NoPeriodError:
                t1, t2 = 0, len(traj)
                log.info("no period detected; using the whole trajectory")
        t1 = 0 if t1 is None else t1
        t2 = len(traj) if t2 is None else t2
        if not 0 <= t1 < t2 <= len(traj):
            raise UsageError(f"window [{t1}, {t2}) outside the trajectory (length {len(traj)})")
        report = floquet(traj.A, dt=args.dt, t1=t1, t2=t2)
        outputs["floquet"] = io.write_json(run_dir / "floquet.json", report.to_dict())
        mus = ", ".join(f"{m.real:+.4f}{m.imag:+.4f}j" for m in report.exponents)
        print(f"Floquet exponents over [{t1}, {t2}): {mus}; {outputs['floquet']}")
    elif kind == "action-grid":
        th, thd = _range(args.theta_range), _range(args.thetadot_range)
        try:
            grid = action_grid(bundle.policy, np.linspace(*th, args.res), np.linspace(*thd, args.res),
                               args.prev_action)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        outputs["action_grid"] = io.write_json(run_dir / "action_grid.json", grid.to_dict())
        print(f"wrote {args.res}x{args.res} action grid to {outputs['action_grid']}")
    _finish(run_dir, args, argv, f"analyze {kind}", config, inputs, outputs)
    return EXIT_OK


def _signal(traj, name: str) -> np.ndarray:
    if name == "rho":
        return spectral_series(traj.A)[0]
    try:
        return traj.observations[:, int(name)]
    except (ValueError, IndexError):
        raise UsageError(f"unknown period-detection signal {name!r}") from None


COMMANDS = {"train-ae": cmd_train_ae, "train": cmd_train, "rollout": cmd_rollout, "analyze": cmd_analyze}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _split_overrides(extra)
        return COMMANDS[args.command](args, argv, overrides)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"salsa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingPrerequisite as exc:
        print(f"salsa: missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NUMERIC_ERRORS as exc:
        print(f"salsa: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
