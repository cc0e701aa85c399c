"""Command-line front end: corpus extraction, training, evaluation, the four
generation modes, and the inference service.

Every failure prints one machine-readable JSON line to stderr and exits
nonzero; argparse usage errors exit 2. Seeded invocations are reproducible
byte for byte.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .corpus import GrainConfig, build_manifest, load_manifest, save_manifest
from .model import ModelConfig
from .service import ENV_CHECKPOINT, ServiceConfig
from .synthesis import (
    PathSpec,
    conditional_sample,
    decode_embedding,
    free_path,
    interpolate_embeddings,
    resynthesize,
)
from .temporal import sample_prior
from .training import TrainConfig, evaluate, format_report_table, train, train_temporal
from .wavio import load_wav, save_wav


def _shared_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--checkpoint", help="checkpoint directory")
    p.add_argument("--out", help="output path")
    return p


def _load_config(args):
    if not args.config:
        return {}
    with open(args.config) as fh:
        return json.load(fh)


def _seed(args, fallback=0):
    return fallback if args.seed is None else args.seed


def _require_out(args):
    if not args.out:
        raise ValueError("--out is required")
    return Path(args.out)


def _open_checkpoint(args):
    path = args.checkpoint or os.environ.get(ENV_CHECKPOINT)
    if not path:
        raise ValueError(
            f"--checkpoint is required (or set {ENV_CHECKPOINT})"
        )
    return load_checkpoint(path)


def _condition(args):
    raw = getattr(args, "condition", None)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return raw


def _load_audio_at_model_rate(path, model):
    audio, sr = load_wav(path)
    want = model.config.grain.sample_rate
    if sr != want:
        raise ValueError(f"{path} is {sr} Hz but the model expects {want} Hz")
    return audio


def cmd_extract(args):
    out = _require_out(args)
    cfg = _load_config(args)
    grain = GrainConfig.from_dict(cfg["grain"]) if "grain" in cfg else None
    manifest = build_manifest(
        args.audio_dir,
        label_schema=cfg.get("label_schema"),
        config=grain,
        test_fraction=cfg.get("test_fraction", args.test_fraction),
        split_seed=_seed(args),
    )
    save_manifest(manifest, out)
    print(json.dumps({
        "manifest": str(out),
        "entries": len(manifest.entries),
        "label_schema": list(manifest.label_schema),
        "train": len(manifest.split["train"]),
        "test": len(manifest.split["test"]),
    }))
    return 0


def _model_config_from(cfg, manifest):
    section = dict(cfg.get("model", {}))
    if section.pop("conditional", False):
        section.setdefault("label_schema", list(manifest.label_schema))
    section.setdefault("grain", manifest.config.to_dict())
    if "loss" not in section:
        section["loss"] = None
    return ModelConfig.from_dict(section)


def cmd_train(args):
    if not args.checkpoint:
        raise ValueError("--checkpoint (output directory) is required")
    cfg = _load_config(args)
    manifest = load_manifest(args.manifest)
    train_cfg = TrainConfig.from_dict(dict(cfg.get("train", {})))
    if args.seed is not None:
        train_cfg = TrainConfig.from_dict({**train_cfg.to_dict(), "seed": args.seed})
    model_cfg = None if args.resume else _model_config_from(cfg, manifest)
    ckpt = train(manifest, train_cfg, model_cfg, out_dir=args.checkpoint,
                 resume=args.resume)
    summary = {
        "checkpoint": str(ckpt.path),
        "steps": train_cfg.total_epochs * train_cfg.steps_per_epoch,
        "variant": ckpt.config.variant,
    }
    if args.temporal or "temporal" in cfg:
        t_section = dict(cfg.get("temporal", {}))
        t_section.setdefault("learning_rate", 1e-3)
        t_section.setdefault("batch_size", train_cfg.batch_size)
        t_section.setdefault("total_epochs", train_cfg.total_epochs)
        t_section.setdefault("steps_per_epoch", train_cfg.steps_per_epoch)
        t_section.setdefault("seed", train_cfg.seed)
        t_cfg = TrainConfig.from_dict(t_section)
        ckpt = train_temporal(manifest, ckpt, t_cfg)
        summary["temporal_steps"] = t_cfg.total_epochs * t_cfg.steps_per_epoch
    print(json.dumps(summary))
    return 0


def cmd_eval(args):
    manifest = load_manifest(args.manifest)
    ckpt = _open_checkpoint(args)
    report = evaluate(manifest, ckpt, split=args.split)
    print(format_report_table([report]))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_sample(args):
    ckpt = _open_checkpoint(args)
    out = _require_out(args)
    seed = _seed(args)
    condition = _condition(args)
    if ckpt.config.conditional:
        audio = conditional_sample(condition, seed, ckpt)
    else:
        e = sample_prior(ckpt.config.embed_dim, seed)
        audio = decode_embedding(e, ckpt.model, ckpt.temporal,
                                 condition=condition, noise_seed=seed)
    save_wav(out, audio, ckpt.config.grain.sample_rate)
    print(json.dumps({"out": str(out), "samples": int(audio.shape[0]),
                      "seed": seed}))
    return 0


def cmd_resynth(args):
    ckpt = _open_checkpoint(args)
    out = _require_out(args)
    audio = _load_audio_at_model_rate(args.input, ckpt.model)
    result = resynthesize(audio, ckpt.model, condition=_condition(args),
                          fade=args.fade, noise_seed=_seed(args))
    save_wav(out, result, ckpt.config.grain.sample_rate)
    print(json.dumps({"out": str(out), "samples": int(result.shape[0])}))
    return 0


def cmd_path(args):
    ckpt = _open_checkpoint(args)
    out = _require_out(args)
    with open(args.spec) as fh:
        spec = PathSpec.from_dict(json.load(fh))
    audio = free_path(spec, ckpt.model, condition=_condition(args),
                      seed=_seed(args))
    save_wav(out, audio, ckpt.config.grain.sample_rate)
    print(json.dumps({"out": str(out), "samples": int(audio.shape[0]),
                      "num_points": spec.num_points}))
    return 0


def _embedding_arg(ckpt, seed, file, name):
    if file and seed is not None:
        raise ValueError(f"give --{name}-seed or --{name}-file, not both")
    if file:
        vec = np.asarray(json.loads(Path(file).read_text()), dtype=np.float32)
        if vec.shape != (ckpt.config.embed_dim,):
            raise ValueError(
                f"--{name}-file must hold {ckpt.config.embed_dim} numbers"
            )
        return vec
    if seed is None:
        raise ValueError(f"--{name}-seed or --{name}-file is required")
    return sample_prior(ckpt.config.embed_dim, seed)


def cmd_interp(args):
    ckpt = _open_checkpoint(args)
    out = _require_out(args)
    e1 = _embedding_arg(ckpt, args.e1_seed, args.e1_file, "e1")
    e2 = _embedding_arg(ckpt, args.e2_seed, args.e2_file, "e2")
    if args.seed is not None:
        noise_seed = args.seed
    elif args.e1_seed is not None:
        noise_seed = args.e1_seed  # alpha=0 then matches `sample --seed e1_seed`
    else:
        noise_seed = 0
    audio = interpolate_embeddings(e1, e2, args.alpha, ckpt.model, ckpt.temporal,
                                   condition=_condition(args),
                                   noise_seed=noise_seed)
    save_wav(out, audio, ckpt.config.grain.sample_rate)
    print(json.dumps({"out": str(out), "alpha": args.alpha,
                      "samples": int(audio.shape[0])}))
    return 0


def cmd_serve(args):
    from .service import serve

    config = ServiceConfig(
        checkpoint=args.checkpoint or os.environ.get(ENV_CHECKPOINT),
        host=args.host,
        port=args.port,
        max_renders=args.max_renders,
        default_seed=_seed(args),
    )
    serve(config)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ngs",
        description="granular sound synthesis with a latent grain space",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    shared = _shared_flags()

    p = sub.add_parser("extract", parents=[shared],
                       help="scan a directory of WAVs into a corpus manifest")
    p.add_argument("audio_dir")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[shared],
                       help="fit the grain VAE (and optionally the temporal stage)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint directory's saved state")
    p.add_argument("--temporal", action="store_true",
                   help="fit the temporal stage after the grain VAE")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared],
                       help="reconstruction scores over a manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", parents=[shared],
                       help="one-shot generation from the embedding prior")
    p.add_argument("--class", dest="condition",
                   help="label name or index for conditional models")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("resynth", parents=[shared],
                       help="re-render target audio through the grain space")
    p.add_argument("input")
    p.add_argument("--class", dest="condition")
    p.add_argument("--fade", type=int, default=None,
                   help="crossfade between decoded segments, in samples")
    p.set_defaults(func=cmd_resynth)

    p = sub.add_parser("path", parents=[shared],
                       help="free synthesis along a latent trajectory")
    p.add_argument("--spec", required=True, help="PathSpec JSON file")
    p.add_argument("--class", dest="condition")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("interp", parents=[shared],
                       help="decode a blend of two temporal embeddings")
    p.add_argument("--e1-seed", type=int, default=None)
    p.add_argument("--e2-seed", type=int, default=None)
    p.add_argument("--e1-file", help="JSON file with an explicit embedding")
    p.add_argument("--e2-file")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--class", dest="condition")
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("serve", parents=[shared], help="run the inference service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--max-renders", type=int, default=2)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit nonzero
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
