"""Trainer CLI: collect / pretrain / finetune / export."""

import argparse
import logging
import sys
from pathlib import Path

from .collect import DEFAULT_TIMEOUTS, collect, generate_suite, load_trajectories
from .dataset import build_dataset
from .model import MagatModel, ModelConfig, export_bytes, import_bytes
from .train import TrainConfig, load_checkpoint, save_checkpoint, train


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        r_obs=args.r_obs, r_comm=args.r_comm, embed_dim=args.embed_dim,
        edge_dim=args.edge_dim, edge_hidden=args.edge_hidden,
        cnn_channels=tuple(args.cnn_channels), decoder_hidden=args.decoder_hidden,
    )


def cmd_collect(args) -> int:
    out = Path(args.out)
    if args.suite:
        suite = Path(args.suite)
        instances = [
            (m, m.with_suffix(".scen"), args.agents)
            for m in sorted(suite.glob("*.map"))
        ]
    else:
        instances = generate_suite(
            out / "instances", args.kind, args.size, args.agents,
            args.count, args.seed,
        )
    timeouts = [float(t) for t in args.timeouts.split(",")]
    trajs = collect(instances, out, timeouts=timeouts, seed=args.seed,
                    anytime=args.anytime, workers=args.workers)
    print(f"collected {len(trajs)}/{len(instances)} trajectories in {out}")
    return 0


def _run_training(args, model: MagatModel) -> int:
    trajs = load_trajectories(Path(args.data))
    if not trajs:
        print("error: no trajectories in data directory", file=sys.stderr)
        return 1
    samples = build_dataset(trajs, model.cfg)
    tcfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=args.lr,
        lr_min=args.lr_min, dagger_every=args.dagger_every, seed=args.seed,
    )
    ckpt = Path(args.checkpoint) if args.checkpoint else None
    try:
        history = train(model, samples, tcfg,
                        trajectories=trajs if args.dagger_every > 0 else None,
                        checkpoint_path=ckpt)
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    Path(args.out).write_bytes(export_bytes(model))
    if ckpt is not None:
        save_checkpoint(model, ckpt)
    final = history[-1] if history else float("nan")
    print(f"trained {args.epochs} epochs, final loss {final:.4f}, "
          f"weights -> {args.out}")
    return 0


def cmd_pretrain(args) -> int:
    return _run_training(args, MagatModel(_model_config(args)))


def cmd_finetune(args) -> int:
    model = import_bytes(Path(args.init).read_bytes())
    return _run_training(args, model)


def cmd_export(args) -> int:
    model = load_checkpoint(Path(args.checkpoint))
    Path(args.out).write_bytes(export_bytes(model))
    print(f"exported {args.checkpoint} -> {args.out}")
    return 0


def _add_model_args(p):
    p.add_argument("--r-obs", type=int, default=5)
    p.add_argument("--r-comm", type=int, default=7)
    p.add_argument("--embed-dim", type=int, default=128)
    p.add_argument("--edge-dim", type=int, default=32)
    p.add_argument("--edge-hidden", type=int, default=32)
    p.add_argument("--cnn-channels", type=int, nargs=2, default=(32, 64))
    p.add_argument("--decoder-hidden", type=int, default=64)


def _add_train_args(p):
    p.add_argument("--data", required=True, help="collected dataset directory")
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-min", type=float, default=1e-6)
    p.add_argument("--dagger-every", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magat-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect expert trajectories")
    p.add_argument("--suite", default=None, help="existing .map/.scen dir")
    p.add_argument("--kind", default="random")
    p.add_argument("--size", default="10x10")
    p.add_argument("--agents", type=int, default=8)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeouts",
                   default=",".join(str(t) for t in DEFAULT_TIMEOUTS))
    p.add_argument("--anytime", action="store_true")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("pretrain", help="train from scratch")
    _add_train_args(p)
    _add_model_args(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="warm-start from existing weights")
    _add_train_args(p)
    p.add_argument("--init", required=True, help="initial weight file")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("export", help="checkpoint -> weight file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
