"""Command-line entry points: dataset generation, training, evaluation,
sweeps, one-shot reshaping, the gradient suite, and the HTTP service."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

import numpy as np

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

log = logging.getLogger("semtraj")


def _load_config(path):
    from .chomp import ChompConfig
    from .dataset import PipelineConfig
    from .geom import WorldGenConfig
    from .language import Lexicon, default_lexicon

    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    lexicon = Lexicon.load(doc["lexicon"]) if "lexicon" in doc else default_lexicon()
    world_doc = doc.get("world", {})
    world = WorldGenConfig(labels=lexicon.labels,
                           **{k: v for k, v in world_doc.items() if k != "labels"})
    chomp_doc = dict(doc.get("chomp", {}))
    if "intensity_multipliers" in chomp_doc:
        from .language import Intensity

        chomp_doc["intensity_multipliers"] = {
            Intensity(k): float(v) for k, v in chomp_doc["intensity_multipliers"].items()}
    cfg = PipelineConfig(lexicon=lexicon, world=world, chomp=ChompConfig(**chomp_doc),
                         **{k: v for k, v in doc.items()
                            if k in ("grid_resolution", "obstacle_radius",
                                     "compliance_threshold", "max_attempts_per_seed")})
    return cfg


def _model_config(args):
    from .model import ModelConfig

    cfg = ModelConfig.paper() if getattr(args, "paper_preset", False) else ModelConfig()
    if getattr(args, "encoder", None):
        cfg.encoder = args.encoder
        if args.encoder == "table":
            if not getattr(args, "embeddings", None):
                raise SystemExit("--encoder table requires --embeddings FILE")
            from .language import TableEncoder

            cfg.d_lang = TableEncoder.load(args.embeddings).dim
    if getattr(args, "use_norm", False):
        cfg.use_norm = True
    return cfg


def cmd_gen_data(args) -> int:
    from .dataset import generate_dataset, split

    cfg = _load_config(args.config)
    if args.pinned:
        cfg = cfg.pinned()
    generate_dataset(args.n, args.seed, args.out, cfg, workers=args.workers)
    print(f"wrote {args.n} samples to {args.out}")
    if args.split:
        outs = split(args.out)
        print("split into " + ", ".join(outs))
    return EXIT_OK


def cmd_train(args) -> int:
    from .model import FcnConfig
    from .training import TrainConfig, train, train_fcn

    pipeline = _load_config(args.config)
    model_cfg = _model_config(args)
    cfg = TrainConfig(stage_a_epochs=args.stage_a_epochs, stage_b_epochs=args.stage_b_epochs,
                      batch_size=args.batch_size, base_lr=args.lr,
                      warmup_epochs=args.warmup_epochs, seed=args.seed, model=model_cfg,
                      embedding_file=args.embeddings,
                      stage_b_samples=args.stage_b_samples)
    if args.arch == "fcn":
        fcn_cfg = FcnConfig(width=args.fcn_width, d_lang=model_cfg.d_lang,
                            max_objects=model_cfg.max_objects)
        result = train_fcn(args.data, cfg, fcn_cfg, args.out, lr=args.fcn_lr,
                           pipeline=pipeline)
    else:
        result = train(args.data, cfg, args.out, pipeline, progress=True)
    print(f"checkpoint: {result.checkpoint}")
    print(f"best checkpoint: {result.best_checkpoint} (val {result.best_val_loss:.6f})")
    print(f"metrics: {result.metrics}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .training import evaluate_loss, evaluate_semantics

    report = evaluate_loss(args.checkpoint, args.data, args.embeddings)
    if args.semantics:
        report.update(evaluate_semantics(args.checkpoint, args.data, args.embeddings))
    print(json.dumps(report, indent=2, default=float))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .dataset import load_dataset
    from .training import sweep

    samples = load_dataset(args.data, validate=False)
    sample = samples[args.index]
    result = sweep(args.checkpoint, sample, args.embeddings,
                   holdout_variants=args.holdout)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(result, f)
    print(f"wrote {len(result['grid'])} trajectories to {args.out}")
    return EXIT_OK


def cmd_reshape(args) -> int:
    from .geom import SceneObject, World
    from .planner import plan_initial_trajectory
    from .service import ReshapeService, ServiceError

    service = ReshapeService(args.checkpoint, args.embeddings, _load_config(args.config))
    if args.world:
        with open(args.world, encoding="utf-8") as f:
            doc = json.load(f)
        wdoc = doc.get("world", doc)
        world = World(objects=[SceneObject(o["label"], np.array(o["pos"], dtype=np.float64))
                               for o in wdoc["objects"]],
                      start=np.array(wdoc["start"], dtype=np.float64),
                      goal=np.array(wdoc["goal"], dtype=np.float64))
        xi_o = np.array(doc["xi_o"], dtype=np.float64) if "xi_o" in doc else \
            plan_initial_trajectory(world)
    else:
        world, xi_o = service._sample_problem(args.seed)
    try:
        traj, sim = service.reshape(world, xi_o, args.command, args.engine)
    except ServiceError as e:
        if e.status == 422:
            print(f"parse error: {e.reason}", file=sys.stderr)
            return EXIT_USAGE
        print(f"error: {e.reason}", file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps({"command": args.command, "engine": args.engine,
                      "similarity": list(map(float, sim)),
                      "trajectory": [[float(x), float(y)] for x, y in traj]}))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    import subprocess

    cmd = [sys.executable, "-m", "pytest", "-q", "-x",
           "tests/test_autodiff.py", "tests/test_model.py::test_end_to_end_grad_check_tiny"]
    try:
        proc = subprocess.run(cmd, cwd=args.root)
        status = proc.returncode
    except FileNotFoundError:
        status = _gradcheck_inline()
    if status == 0:
        print("gradient suite passed")
        return EXIT_OK
    print("gradient suite FAILED", file=sys.stderr)
    return EXIT_FAILURE


def _gradcheck_inline() -> int:
    """Standalone gradient sweep when the test tree is unavailable."""
    from . import autodiff as ad

    rng = np.random.Generator(np.random.PCG64(0))
    x = ad.parameter(rng.standard_normal((4, 6)), dtype=np.float64)
    w = ad.parameter(rng.standard_normal((6, 3)), dtype=np.float64)

    def f(ps):
        return ad.huber_loss(ad.relu(ad.matmul(ps[0], ps[1])), np.zeros((4, 3)))

    err = ad.grad_check(f, [x, w], eps=1e-5)
    return EXIT_OK if err < 1e-5 else EXIT_FAILURE


def cmd_serve(args) -> int:
    from .service import serve

    logging.getLogger("semtraj.service").setLevel(logging.INFO)
    serve(args.checkpoint, args.host, args.port, args.static, args.embeddings)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semtraj",
                                     description="natural-language trajectory reshaping")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen-data", help="generate a dataset file")
    common(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--out", default="dataset.jsonl")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--split", action="store_true", help="also write train/val/test files")
    p.add_argument("--pinned", action="store_true", help="corner-pinned start/goal")

    p = sub.add_parser("train", help="train the reshaper or the FCN baseline")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="run")
    p.add_argument("--arch", choices=["transformer", "fcn"], default="transformer")
    p.add_argument("--stage-a-epochs", type=int, default=40)
    p.add_argument("--stage-b-epochs", type=int, default=10)
    p.add_argument("--stage-b-samples", type=int, default=800)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--warmup-epochs", type=int, default=15)
    p.add_argument("--paper-preset", action="store_true",
                   help="paper-scale model (d_model 256, ffn 512)")
    p.add_argument("--use-norm", action="store_true")
    p.add_argument("--encoder", choices=["scratch", "table"])
    p.add_argument("--embeddings", help="embedding file for the table encoder")
    p.add_argument("--fcn-width", type=int, default=128)
    p.add_argument("--fcn-lr", type=float, default=1e-3)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--semantics", action="store_true")

    p = sub.add_parser("sweep", help="direction x intensity sweep on one scene")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", default="sweep.json")
    p.add_argument("--holdout", action="store_true")
    p.add_argument("--embeddings")

    p = sub.add_parser("reshape", help="reshape one trajectory from a command")
    common(p)
    p.add_argument("--command", required=True)
    p.add_argument("--world", help="world JSON file (optional; else sampled from --seed)")
    p.add_argument("--engine", choices=["model", "oracle"], default="oracle")
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")

    p = sub.add_parser("gradcheck", help="run the gradient suite")
    common(p)
    p.add_argument("--root", default=".")

    p = sub.add_parser("serve", help="start the HTTP session service")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--static", help="directory with the built UI bundle")
    return parser


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "reshape": cmd_reshape,
    "gradcheck": cmd_gradcheck,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
