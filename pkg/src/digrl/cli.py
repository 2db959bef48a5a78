"""Command-line entry points for the full pipeline.

Subcommands: collect, encoders, train, finetune, eval, curve, teleop-serve.
`--config <file>` (JSON) overrides simulator, reward, and training defaults.
Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataset import collect_dataset, load_dataset, merge_datasets, save_dataset
from .encoders import load_encoder, save_encoder, train_autoencoder
from .episodes import RewardParams
from .errors import DigRLError
from .evalharness import (THRESHOLD_GRID, emit_report, evaluate_baseline,
                          evaluate_policy, evaluate_scripted,
                          jamming_free_curve, report_from_dict, report_to_dict)
from .iql import (IQLHyper, finetune, load_agent, resolve_z_demo, save_agent,
                  train_bc, train_iql)
from .sim import SimConfig
from .terrain import get_preset


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _sim_config(config: dict) -> SimConfig:
    cfg = SimConfig(**config.get("sim", {}))
    cfg.validate()
    return cfg


def _reward_params(config: dict) -> RewardParams:
    return RewardParams(**config.get("reward", {}))


def _hyper(config: dict, steps: int | None) -> IQLHyper:
    overrides = dict(config.get("iql", {}))
    if "hidden" in overrides:
        overrides["hidden"] = tuple(overrides["hidden"])
    if steps is not None:
        overrides["gradient_steps"] = steps
    return IQLHyper(**overrides)


def _terrain(name: str, config: dict):
    return get_preset(name, config.get("terrains"))


def _load_encoders(path: str):
    base = Path(path)
    return load_encoder(base / "current"), load_encoder(base / "demo")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="digrl",
        description="Surrogate excavation-penetration pipeline: collect "
                    "demonstrations, train encoders and offline RL policies, "
                    "evaluate, and serve live teleoperation.")
    parser.add_argument("--config", help="JSON file overriding defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect scripted demonstration episodes")
    p.add_argument("--terrain", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("encoders", help="train the trajectory auto-encoders")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=45)
    p.add_argument("--lr", type=float, default=1e-3)

    p = sub.add_parser("train", help="train an offline policy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--algo", choices=("iql", "bc"), required=True)
    p.add_argument("--encoders", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, help="gradient steps override")

    p = sub.add_parser("finetune", help="online fine-tuning on one terrain")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--terrain", required=True)
    p.add_argument("--trajectories", type=int, default=20)
    p.add_argument("--encoders", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps-per-traj", type=int, default=200)

    p = sub.add_parser("eval", help="evaluate a policy or reference baseline")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--baseline", action="store_true",
                     help="fixed vertical-downward trajectory")
    src.add_argument("--scripted", action="store_true",
                     help="uniform-random demonstration policy")
    p.add_argument("--terrain", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--encoders", help="required with --checkpoint")
    p.add_argument("--dataset", help="source for z_demo (10 trajectories)")

    p = sub.add_parser("curve", help="jamming-free-rate curves from eval records")
    p.add_argument("--records", nargs="+", required=True,
                   help="report.json files produced by eval")
    p.add_argument("--out", required=True)

    p = sub.add_parser("teleop-serve", help="serve live teleoperation sessions")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--terrain", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--transport", choices=("ws", "tcp"), default="ws")
    p.add_argument("--rate", type=float, default=10.0)
    p.add_argument("--max-sessions", type=int)

    p = sub.add_parser("merge", help="merge datasets into one")
    p.add_argument("--datasets", nargs="+", required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_collect(args, config) -> int:
    spec = _terrain(args.terrain, config)
    ds = collect_dataset(spec, args.episodes, seeds=args.seed,
                         cfg=_sim_config(config), reward=_reward_params(config))
    save_dataset(ds, args.out)
    outcomes = {o: sum(t.outcome == o for t in ds.trajectories)
                for o in ("success", "jam", "timeout")}
    print(f"collected {len(ds.trajectories)} episodes on {spec.name}: {outcomes}")
    return 0


def _cmd_encoders(args, config) -> int:
    ds = load_dataset(args.dataset)
    for role in ("current", "demo"):
        enc = train_autoencoder(ds, role, epochs=args.epochs, seed=args.seed,
                                lr=args.lr)
        save_encoder(Path(args.out) / role, enc)
        print(f"{role} encoder: loss {enc.loss_history[0]:.4f} -> "
              f"{enc.loss_history[-1]:.4f}")
    return 0


def _cmd_train(args, config) -> int:
    ds = load_dataset(args.dataset)
    enc_current, enc_demo = _load_encoders(args.encoders)
    hyper = _hyper(config, args.steps)
    if args.algo == "iql":
        ckpt = train_iql(ds, hyper, args.seed, enc_current, enc_demo)
    else:
        ckpt = train_bc(ds, args.seed, enc_current, enc_demo, hyper=hyper)
    ckpt.encoder_refs = {"current": str(Path(args.encoders) / "current"),
                         "demo": str(Path(args.encoders) / "demo")}
    save_agent(args.out, ckpt)
    print(f"trained {args.algo} for {ckpt.steps_trained} steps on "
          f"{ds.n_transitions()} transitions -> {args.out}")
    return 0


def _cmd_finetune(args, config) -> int:
    spec = _terrain(args.terrain, config)
    ckpt = load_agent(args.checkpoint)
    enc_current, enc_demo = _load_encoders(args.encoders)
    ds = load_dataset(args.dataset)
    cfg = _sim_config(config)
    reward = _reward_params(config)
    z_demo = resolve_z_demo(spec, ds, enc_demo, args.seed, cfg=cfg, reward=reward)
    sub = ds.by_terrain(spec.name)
    if sub:
        from .dataset import Dataset
        ds = Dataset(trajectories=sub, norm_stats=ds.norm_stats,
                     reward=ds.reward, generation_seeds=ds.generation_seeds)
    ckpt, record = finetune(ckpt, spec, args.trajectories, args.seed, ds,
                            enc_current, z_demo,
                            steps_per_trajectory=args.steps_per_traj,
                            cfg=cfg, reward=reward)
    save_agent(args.out, ckpt)
    (Path(args.out) / "finetune_record.json").write_text(
        json.dumps(record, indent=2) + "\n")
    print(f"finetuned on {spec.name} with {args.trajectories} trajectories "
          f"-> {args.out}")
    return 0


def _cmd_eval(args, config) -> int:
    spec = _terrain(args.terrain, config)
    cfg = _sim_config(config)
    reward = _reward_params(config)
    if args.baseline:
        report = evaluate_baseline(spec, args.trials, args.seed, cfg=cfg,
                                   reward=reward)
    elif args.scripted:
        report = evaluate_scripted(spec, args.trials, args.seed, cfg=cfg,
                                   reward=reward)
    else:
        if not args.encoders:
            print("eval: --encoders is required with --checkpoint",
                  file=sys.stderr)
            return 2
        ckpt = load_agent(args.checkpoint)
        enc_current, enc_demo = _load_encoders(args.encoders)
        ds = load_dataset(args.dataset) if args.dataset else None
        z_demo = resolve_z_demo(spec, ds, enc_demo, args.seed, cfg=cfg,
                                reward=reward)
        report = evaluate_policy(ckpt, enc_current, z_demo, spec, args.trials,
                                 args.seed, cfg=cfg, reward=reward)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report_to_dict(report), indent=2) + "\n")
    emit_report([report], {(report.policy_id, report.terrain):
                           jamming_free_curve(report.records)}, out)
    print(f"{report.policy_id} on {report.terrain}: "
          f"reward {report.reward_mean:.2f} +/- {report.reward_std:.2f}, "
          f"jams {report.jam_count}/{report.trials}")
    return 0


def _cmd_curve(args, config) -> int:
    reports = [report_from_dict(json.loads(Path(p).read_text()))
               for p in args.records]
    curves = {(r.policy_id, r.terrain): jamming_free_curve(r.records)
              for r in reports}
    written = emit_report(reports, curves, args.out)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def _cmd_teleop(args, config) -> int:
    from .teleop import serve
    spec = _terrain(args.terrain, config)
    print(f"serving teleop on 127.0.0.1:{args.port} ({args.transport}), "
          f"terrain {spec.name}; Ctrl-C to stop")
    serve(args.port, spec, args.seed, args.out, transport=args.transport,
          cfg=_sim_config(config), reward=_reward_params(config),
          rate_hz=args.rate, max_sessions=args.max_sessions)
    return 0


def _cmd_merge(args, config) -> int:
    merged = merge_datasets([load_dataset(p) for p in args.datasets])
    save_dataset(merged, args.out)
    print(f"merged {len(args.datasets)} datasets: "
          f"{len(merged.trajectories)} trajectories, terrains {merged.terrains}")
    return 0


_COMMANDS = {
    "collect": _cmd_collect,
    "encoders": _cmd_encoders,
    "train": _cmd_train,
    "finetune": _cmd_finetune,
    "eval": _cmd_eval,
    "curve": _cmd_curve,
    "teleop-serve": _cmd_teleop,
    "merge": _cmd_merge,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 2
    try:
        config = _load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except (DigRLError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
