"""Two-stage imitation training, checkpointing, and evaluation.

Stage A trains on the dataset with a fresh random rotation/rescale of each
planning problem every epoch; stage B fine-tunes on regenerated problems
whose start and goal sit in the lower-left and upper-right corners. Losses
are teacher-forced Huber on waypoint coordinates under AdamW with linear
warmup. Per-epoch metrics append to a JSONL file; the best-validation and
final weights are both checkpointed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import chomp, geom
from .autodiff import adamw_state, adamw_step, backward, warmup_schedule
from .dataset import PipelineConfig, Sample, generate_sample, load_dataset, split_assign
from .geom import AugmentationRejected, transform
from .language import (
    CommandAst,
    Direction,
    Intensity,
    Lexicon,
    ScratchEncoder,
    TableEncoder,
    default_lexicon,
    encode_text,
    generate_command,
    similarity_vector,
    tokenize,
)
from .model import (
    FcnConfig,
    ModelConfig,
    fcn_forward,
    init_fcn_weights,
    init_weights,
    naive_predict,
    param_count,
    predict_rollout,
    predict_teacher,
)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "semtraj-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    stage_a_epochs: int = 40
    stage_b_epochs: int = 10
    batch_size: int = 64
    base_lr: float = 1e-4
    warmup_epochs: int = 15
    weight_decay: float = 0.01
    rotation_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    scale_range: tuple[float, float] = (0.7, 1.3)
    seed: int = 0
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    stage_b_samples: int = 800
    stage_b_base_seed: int = 5_000_000
    augment_tries: int = 20
    input_noise: float = 0.02
    model: ModelConfig = field(default_factory=ModelConfig)
    embedding_file: str | None = None  # required for the table encoder

    def validate(self):
        if self.stage_a_epochs < 0 or self.stage_b_epochs < 0 or \
                self.stage_a_epochs + self.stage_b_epochs < 1:
            raise ValueError("at least one epoch is required")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        self.model.validate()


# --------------------------- language features ---------------------------


class FeatureExtractor:
    """Caches per-sample token ids / embeddings for the configured encoder."""

    def __init__(self, cfg: ModelConfig, weights: dict | None = None,
                 embedding_file: str | None = None, lexicon: Lexicon | None = None):
        self.cfg = cfg
        self.lexicon = lexicon or default_lexicon()
        if cfg.encoder == "scratch":
            self.scratch = ScratchEncoder(dim=cfg.d_lang, n_buckets=cfg.n_buckets)
            if weights is not None and "scratch_table" in weights:
                self.scratch.table = weights["scratch_table"].data
            self.table = None
        else:
            if embedding_file is None:
                raise ValueError("table encoder requires an embedding file")
            self.table = TableEncoder.load(embedding_file)
            if self.table.dim != cfg.d_lang:
                raise ValueError(f"embedding file dim {self.table.dim} != d_lang {cfg.d_lang}")
            self.scratch = None

    @property
    def encoder(self):
        return self.scratch if self.scratch is not None else self.table

    def command_tokens(self, text: str) -> list[str]:
        return tokenize(text)

    def z_in(self, text: str) -> np.ndarray:
        return encode_text(tokenize(text), self.encoder)

    def sim(self, text: str, world) -> np.ndarray:
        return similarity_vector(self.z_in(text), world, self.encoder)

    def bucket_row(self, text: str, max_len: int):
        ids = self.scratch.bucket_ids(tokenize(text))
        row = np.zeros(max_len, dtype=np.int64)
        pool = np.zeros(max_len, dtype=np.float32)
        k = min(len(ids), max_len)
        if k:
            row[:k] = ids[:k]
            pool[:k] = 1.0 / k
        return row, pool


MAX_CMD_TOKENS = 12


def make_batch(samples: list[Sample], feats: FeatureExtractor, cfg: ModelConfig,
               texts: list[str] | None = None) -> dict:
    """Stack samples into model arrays: trajectories, padded/masked objects,
    similarity, and the encoder-specific language features."""
    b = len(samples)
    n = cfg.n_waypoints
    m = cfg.max_objects
    xi_o = np.stack([s.xi_o for s in samples]).astype(np.float32)
    xi_mod = np.stack([s.xi_mod for s in samples]).astype(np.float32)
    obj_pos = np.zeros((b, m, 2), dtype=np.float32)
    obj_mask = np.zeros((b, m), dtype=np.float32)
    sim = np.zeros((b, m), dtype=np.float32)
    z_in = np.zeros((b, cfg.d_lang), dtype=np.float32)
    ids = np.zeros((b, MAX_CMD_TOKENS), dtype=np.int64)
    pool = np.zeros((b, MAX_CMD_TOKENS), dtype=np.float32)
    for i, s in enumerate(samples):
        text = texts[i] if texts is not None else s.command_text
        k = min(len(s.world.objects), m)
        if k:
            obj_pos[i, :k] = s.world.positions()[:k]
            obj_mask[i, :k] = 1.0
            sim[i, :k] = feats.sim(text, s.world)[:k]
        z_in[i] = feats.z_in(text)
        if feats.scratch is not None:
            ids[i], pool[i] = feats.bucket_row(text, MAX_CMD_TOKENS)
    return {"xi_o": xi_o, "xi_mod": xi_mod, "obj_pos": obj_pos, "obj_mask": obj_mask,
            "sim": sim, "z_in": z_in, "bucket_ids": ids, "pool": pool}


# ------------------------------ checkpoints ------------------------------


def save_checkpoint(path, weights: dict, model_cfg, meta: dict | None = None):
    """Manifest line (config, tensor table, checksum) followed by one blob of
    little-endian float32 values in manifest order."""
    names = sorted(weights)
    blobs = []
    tensors = []
    offset = 0
    for name in names:
        arr = weights[name].data.astype("<f4")
        blobs.append(arr.tobytes())
        tensors.append({"name": name, "offset": offset, "shape": list(arr.shape)})
        offset += arr.nbytes
    blob = b"".join(blobs)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": "fcn" if isinstance(model_cfg, FcnConfig) else "transformer",
        "model": asdict(model_cfg),
        "tensors": tensors,
        "blob_bytes": len(blob),
        "checksum": "sha256:" + hashlib.sha256(blob).hexdigest(),
        "meta": meta or {},
    }
    with open(path, "wb") as f:
        f.write(json.dumps(manifest, separators=(",", ":"), sort_keys=True).encode())
        f.write(b"\n")
        f.write(blob)


def load_checkpoint(path):
    """Returns (weights, config, meta); raises CheckpointError on corruption,
    naming the offending tensor for shape mismatches."""
    try:
        with open(path, "rb") as f:
            header = f.readline()
            blob = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    try:
        manifest = json.loads(header.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: bad manifest: {e}") from e
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(f"{path}: truncated blob "
                              f"({len(blob)} of {manifest['blob_bytes']} bytes)")
    digest = "sha256:" + hashlib.sha256(blob).hexdigest()
    if digest != manifest["checksum"]:
        raise CheckpointError(f"{path}: checksum mismatch")
    if manifest["arch"] == "fcn":
        cfg = FcnConfig(**manifest["model"])
    else:
        model_doc = dict(manifest["model"])
        for key in ("rotation_range", "scale_range"):
            model_doc.pop(key, None)
        cfg = ModelConfig(**model_doc)
    weights = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: tensor {entry['name']} overruns the blob")
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(shape).copy()
        weights[entry["name"]] = ad.parameter(arr, dtype=np.float32)
    return weights, cfg, manifest.get("meta", {})


# ------------------------------- training -------------------------------


def split_samples(samples: list[Sample], fractions) -> tuple[list, list, list]:
    parts: tuple[list, list, list] = ([], [], [])
    for s in samples:
        parts[split_assign(s.seed, fractions)].append(s)
    return parts


# counter-clockwise quarter-turn ring: the object side named by each lateral
# direction rotates with the problem, so the command is remapped in step
_QUARTER_TURN = {
    Direction.RIGHT: Direction.BACK,
    Direction.BACK: Direction.LEFT,
    Direction.LEFT: Direction.FRONT,
    Direction.FRONT: Direction.RIGHT,
}


def _remap_direction(direction: Direction, quarter_turns: int) -> Direction:
    if direction not in _QUARTER_TURN:
        return direction  # closer/further are rotation-invariant
    for _ in range(quarter_turns % 4):
        direction = _QUARTER_TURN[direction]
    return direction


def _augmented(sample: Sample, rng, cfg: TrainConfig, lexicon: Lexicon) -> Sample:
    """Random quarter-turn rotation plus rescale of the whole problem.

    Rotations are restricted to multiples of 90 degrees and the commanded
    direction is rotated along with the geometry (its surface text is
    re-rendered), so axis-aligned direction semantics stay coherent;
    arbitrary angles would decouple the words from the ground truth.
    """
    for _ in range(cfg.augment_tries):
        k = int(rng.integers(0, 4))
        rot = k * math.pi / 2.0
        scl = rng.uniform(*cfg.scale_range)
        try:
            world, xi_o = transform(sample.world, sample.xi_o, rot, scl)
            _, xi_mod = transform(sample.world, sample.xi_mod, rot, scl)
        except AugmentationRejected:
            continue
        ast = sample.command_ast
        text = sample.command_text
        if k and ast.direction in _QUARTER_TURN:
            ast = CommandAst(_remap_direction(ast.direction, k), ast.intensity,
                             ast.target_index)
            text = generate_command(ast, lexicon, seed=sample.seed, split="train",
                                    label=world.objects[ast.target_index].label)
        return Sample(world=world, xi_o=xi_o, command_text=text,
                      command_ast=ast, xi_mod=xi_mod, seed=sample.seed)
    return sample


def _epoch_loss(samples, feats, cfg: TrainConfig, weights, params, state,
                epoch: int, stage: str, rng, optimizer_on=True) -> float:
    order = rng.permutation(len(samples))
    total = 0.0
    count = 0
    lr = warmup_schedule(epoch, cfg.base_lr, cfg.warmup_epochs)
    for b0 in range(0, len(order), cfg.batch_size):
        idx = order[b0:b0 + cfg.batch_size]
        chosen = [samples[i] for i in idx]
        if stage == "A":
            chosen = [_augmented(s, rng, cfg, feats.lexicon) for s in chosen]
        batch = make_batch(chosen, feats, cfg.model)
        loss, _ = predict_teacher(batch, weights, cfg.model, train=True,
                                  seed=epoch * 100_003 + b0,
                                  input_noise=cfg.input_noise)
        backward(loss)
        grads = {k: p.grad for k, p in params.items() if p.grad is not None}
        adamw_step(params, grads, state, lr=lr, weight_decay=cfg.weight_decay)
        for p in params.values():
            p.zero_grad()
        total += loss.item() * len(chosen)
        count += len(chosen)
    return total / max(count, 1)


def teacher_loss(samples, feats, cfg: ModelConfig, weights, batch_size=256) -> float:
    total = 0.0
    with ad.no_grad():
        for b0 in range(0, len(samples), batch_size):
            chosen = samples[b0:b0 + batch_size]
            batch = make_batch(chosen, feats, cfg)
            loss, _ = predict_teacher(batch, weights, cfg)
            total += loss.item() * len(chosen)
    return total / max(len(samples), 1)


@dataclass
class TrainResult:
    checkpoint: str
    best_checkpoint: str
    metrics: str
    final_val_loss: float
    best_val_loss: float


def train(dataset_path, cfg: TrainConfig, out_dir, pipeline: PipelineConfig | None = None,
          progress: bool = False) -> TrainResult:
    """Full two-stage run; returns checkpoint and metrics paths."""
    import os

    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    lexicon = (pipeline or PipelineConfig()).lexicon
    samples = load_dataset(dataset_path, lexicon, validate=False)
    train_set, val_set, _ = split_samples(samples, cfg.split_fractions)
    if not train_set or not val_set:
        raise ValueError("dataset too small to split into train/val")

    weights = init_weights(cfg.model, seed=cfg.seed)
    params = {k: v for k, v in weights.items()}
    state = adamw_state(params)
    feats = FeatureExtractor(cfg.model, weights, cfg.embedding_file, lexicon)

    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    ckpt_path = os.path.join(out_dir, "checkpoint.bin")
    best_path = os.path.join(out_dir, "checkpoint.best.bin")
    meta = {"train_config": _train_cfg_doc(cfg), "params": param_count(weights)}

    best_val = math.inf
    epoch_index = 0

    stage_b_set: list[Sample] = []
    if cfg.stage_b_epochs > 0:
        pin_pipeline = (pipeline or PipelineConfig()).pinned()
        stage_b_set = [generate_sample(cfg.stage_b_base_seed + cfg.seed * 1000 + i,
                                       pin_pipeline)
                       for i in range(cfg.stage_b_samples)]

    with open(metrics_path, "a", encoding="utf-8") as mf:
        for stage, n_epochs, pool in (("A", cfg.stage_a_epochs, train_set),
                                      ("B", cfg.stage_b_epochs, stage_b_set)):
            for e in range(n_epochs):
                rng = np.random.default_rng(np.random.PCG64(
                    np.random.SeedSequence([cfg.seed, 0 if stage == "A" else 1, e])))
                t0 = time.time()
                train_loss = _epoch_loss(pool, feats, cfg, weights, params, state,
                                         epoch_index, stage, rng)
                if not math.isfinite(train_loss):
                    save_checkpoint(ckpt_path, weights, cfg.model,
                                    {**meta, "aborted_epoch": epoch_index})
                    raise FloatingPointError(
                        f"non-finite loss at epoch {epoch_index}; "
                        f"last checkpoint kept at {ckpt_path}")
                val_loss = teacher_loss(val_set, feats, cfg.model, weights)
                record = {"epoch": epoch_index, "stage": stage,
                          "lr": warmup_schedule(epoch_index, cfg.base_lr, cfg.warmup_epochs),
                          "train_loss": round(train_loss, 8),
                          "val_loss": round(val_loss, 8)}
                if stage == "B":
                    record["pinned_train"] = True
                mf.write(json.dumps(record) + "\n")
                mf.flush()
                if progress:
                    log.info("epoch %d stage %s train %.5f val %.5f (%.1fs)",
                             epoch_index, stage, train_loss, val_loss, time.time() - t0)
                if val_loss < best_val:
                    best_val = val_loss
                    save_checkpoint(best_path, weights, cfg.model,
                                    {**meta, "epoch": epoch_index, "val_loss": val_loss})
                epoch_index += 1

    final_val = teacher_loss(val_set, feats, cfg.model, weights)
    save_checkpoint(ckpt_path, weights, cfg.model, {**meta, "val_loss": final_val})
    if not math.isfinite(best_val):
        save_checkpoint(best_path, weights, cfg.model, meta)
        best_val = final_val
    return TrainResult(checkpoint=ckpt_path, best_checkpoint=best_path,
                       metrics=metrics_path, final_val_loss=final_val,
                       best_val_loss=best_val)


def _train_cfg_doc(cfg: TrainConfig) -> dict:
    doc = asdict(cfg)
    doc["model"] = asdict(cfg.model)
    return doc


def train_fcn(dataset_path, cfg: TrainConfig, fcn_cfg: FcnConfig, out_dir,
              lr: float = 1e-3, epochs: int | None = None,
              pipeline: PipelineConfig | None = None) -> TrainResult:
    """Train the fully-connected baseline on the same split with its own
    (grid-searched) learning rate; language features come from the frozen
    initial encoder."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    lexicon = (pipeline or PipelineConfig()).lexicon
    samples = load_dataset(dataset_path, lexicon, validate=False)
    train_set, val_set, _ = split_samples(samples, cfg.split_fractions)

    feat_cfg = replace(cfg.model, encoder=cfg.model.encoder)
    feats = FeatureExtractor(feat_cfg, None, cfg.embedding_file, lexicon)
    weights = init_fcn_weights(fcn_cfg, seed=cfg.seed)
    params = dict(weights)
    state = adamw_state(params)
    n_epochs = epochs if epochs is not None else cfg.stage_a_epochs + cfg.stage_b_epochs

    metrics_path = os.path.join(out_dir, "fcn.metrics.jsonl")
    ckpt_path = os.path.join(out_dir, "fcn.checkpoint.bin")
    best = math.inf
    with open(metrics_path, "a", encoding="utf-8") as mf:
        for e in range(n_epochs):
            rng = np.random.default_rng(np.random.PCG64(
                np.random.SeedSequence([cfg.seed, 2, e])))
            order = rng.permutation(len(train_set))
            total = 0.0
            for b0 in range(0, len(order), cfg.batch_size):
                chosen = [_augmented(train_set[i], rng, cfg, lexicon)
                          for i in order[b0:b0 + cfg.batch_size]]
                batch = make_batch(chosen, feats, feat_cfg)
                loss, _ = fcn_forward(batch, weights, fcn_cfg)
                backward(loss)
                grads = {k: p.grad for k, p in params.items() if p.grad is not None}
                adamw_step(params, grads, state,
                           lr=warmup_schedule(e, lr, cfg.warmup_epochs),
                           weight_decay=cfg.weight_decay)
                for p in params.values():
                    p.zero_grad()
                total += loss.item() * len(chosen)
            val = _fcn_loss(val_set, feats, feat_cfg, fcn_cfg, weights)
            mf.write(json.dumps({"epoch": e, "stage": "FCN", "lr": lr,
                                 "train_loss": round(total / len(train_set), 8),
                                 "val_loss": round(val, 8)}) + "\n")
            if val < best:
                best = val
                save_checkpoint(ckpt_path, weights, fcn_cfg,
                                {"epoch": e, "val_loss": val, "lr": lr,
                                 "params": param_count(weights)})
    if not math.isfinite(best):
        save_checkpoint(ckpt_path, weights, fcn_cfg, {"params": param_count(weights)})
    return TrainResult(checkpoint=ckpt_path, best_checkpoint=ckpt_path,
                       metrics=metrics_path, final_val_loss=best, best_val_loss=best)


def _fcn_loss(samples, feats, feat_cfg, fcn_cfg, weights, batch_size=256) -> float:
    total = 0.0
    with ad.no_grad():
        for b0 in range(0, len(samples), batch_size):
            batch = make_batch(samples[b0:b0 + batch_size], feats, feat_cfg)
            loss, _ = fcn_forward(batch, weights, fcn_cfg)
            total += loss.item() * len(batch["xi_o"])
    return total / max(len(samples), 1)


# ------------------------------ evaluation ------------------------------


def naive_loss(samples: list[Sample]) -> float:
    """Huber loss of copying the original trajectory, by direct scan."""
    total = 0.0
    for s in samples:
        e = s.xi_o - s.xi_mod
        abs_e = np.abs(e)
        vals = np.where(abs_e <= 1.0, 0.5 * e * e, abs_e - 0.5)
        total += float(vals.mean())
    return total / max(len(samples), 1)


def rollout_loss(samples, feats, cfg: ModelConfig, weights, batch_size=128):
    """Autoregressive Huber loss plus the rolled-out trajectories."""
    outs = []
    total = 0.0
    for b0 in range(0, len(samples), batch_size):
        chosen = samples[b0:b0 + batch_size]
        batch = make_batch(chosen, feats, cfg)
        pred = predict_rollout(batch, weights, cfg)
        e = pred - batch["xi_mod"]
        abs_e = np.abs(e)
        vals = np.where(abs_e <= 1.0, 0.5 * e * e, abs_e - 0.5)
        total += float(vals.mean()) * len(chosen)
        outs.append(pred)
    return total / max(len(samples), 1), np.concatenate(outs) if outs else np.zeros((0,))


def evaluate_loss(checkpoint_path, dataset_path, embedding_file=None,
                  lexicon: Lexicon | None = None) -> dict:
    """Autoregressive and teacher-forced Huber for a checkpoint, with the
    naive-copy loss for the same split computed by direct scan."""
    weights, cfg, meta = load_checkpoint(checkpoint_path)
    if not isinstance(cfg, ModelConfig):
        raise CheckpointError("evaluate_loss expects a transformer checkpoint")
    lexicon = lexicon or default_lexicon()
    samples = load_dataset(dataset_path, lexicon, validate=False)
    feats = FeatureExtractor(cfg, weights, embedding_file, lexicon)
    auto, _ = rollout_loss(samples, feats, cfg, weights)
    teacher = teacher_loss(samples, feats, cfg, weights)
    return {
        "n_samples": len(samples),
        "autoregressive_huber": auto,
        "teacher_forced_huber": teacher,
        "naive_huber": naive_loss(samples),
        "params": meta.get("params"),
    }


def evaluate_semantics(checkpoint_path, dataset_path, embedding_file=None,
                       lexicon: Lexicon | None = None,
                       intensity_scenes: int = 50) -> dict:
    """Per-direction sign-compliance rates and the intensity-monotonicity
    rate of autoregressive outputs, using the workspace distance metrics."""
    weights, cfg, _ = load_checkpoint(checkpoint_path)
    lexicon = lexicon or default_lexicon()
    samples = load_dataset(dataset_path, lexicon, validate=False)
    feats = FeatureExtractor(cfg, weights, embedding_file, lexicon)

    rates: dict[str, list[int]] = {d.value: [] for d in Direction}
    _, preds = rollout_loss(samples, feats, cfg, weights)
    for s, pred in zip(samples, preds):
        delta = chomp.compliance_delta(s.xi_o, pred.astype(np.float64), s.command_ast, s.world)
        rates[s.command_ast.direction.value].append(1 if delta > 1e-3 else 0)

    order = [Intensity.SLIGHT, Intensity.NEUTRAL, Intensity.STRONG, Intensity.VERY_STRONG]
    scenes = samples[:intensity_scenes]
    variants = []
    for s in scenes:
        for intensity in order:
            ast = CommandAst(s.command_ast.direction, intensity, s.command_ast.target_index)
            text = generate_command(ast, lexicon, seed=0,
                                    label=s.world.objects[ast.target_index].label)
            variants.append(Sample(world=s.world, xi_o=s.xi_o, command_text=text,
                                   command_ast=ast, xi_mod=s.xi_mod, seed=s.seed))
    _, preds = rollout_loss(variants, feats, cfg, weights)
    mono_ok = 0
    mono_total = len(scenes)
    for k, s in enumerate(scenes):
        disps = [float(np.linalg.norm(preds[4 * k + j] - s.xi_o, axis=1).max())
                 for j in range(4)]
        if all(disps[i + 1] >= disps[i] - 1e-6 for i in range(len(disps) - 1)):
            mono_ok += 1

    per_direction = {d: (sum(v) / len(v) if v else None) for d, v in rates.items()}
    counted = [r for r in rates.values() if r]
    overall = sum(sum(v) for v in counted) / max(sum(len(v) for v in counted), 1)
    return {
        "per_direction": per_direction,
        "overall_compliance": overall,
        "intensity_monotonicity": mono_ok / max(mono_total, 1),
        "n_samples": len(samples),
    }


def evaluate_fcn_loss(checkpoint_path, dataset_path, model_cfg: ModelConfig,
                      embedding_file=None, lexicon: Lexicon | None = None) -> dict:
    """Test loss of a trained FCN checkpoint; features come from the frozen
    initial encoder exactly as during its training."""
    weights, fcn_cfg, meta = load_checkpoint(checkpoint_path)
    if not isinstance(fcn_cfg, FcnConfig):
        raise CheckpointError("evaluate_fcn_loss expects an fcn checkpoint")
    lexicon = lexicon or default_lexicon()
    samples = load_dataset(dataset_path, lexicon, validate=False)
    feats = FeatureExtractor(model_cfg, None, embedding_file, lexicon)
    loss = _fcn_loss(samples, feats, model_cfg, fcn_cfg, weights)
    return {"fcn_huber": loss, "n_samples": len(samples), "params": meta.get("params")}


def sweep(checkpoint_path, sample: Sample, embedding_file=None,
          lexicon: Lexicon | None = None, holdout_variants: bool = False) -> dict:
    """Decode all 6 directions x 4 intensities for one scene; optionally add
    the same grid rendered with holdout synonyms."""
    weights, cfg, _ = load_checkpoint(checkpoint_path)
    lexicon = lexicon or default_lexicon()
    feats = FeatureExtractor(cfg, weights, embedding_file, lexicon)
    return sweep_with(weights, cfg, feats, sample, lexicon, holdout_variants)


def sweep_with(weights, cfg: ModelConfig, feats: FeatureExtractor, sample: Sample,
               lexicon: Lexicon, holdout_variants: bool = False) -> dict:
    target = sample.command_ast.target_index
    label = sample.world.objects[target].label
    grid = []
    splits = ["train"] + (["holdout"] if holdout_variants else [])
    variants = []
    texts = []
    for split_name in splits:
        for d in Direction:
            for i in Intensity:
                ast = CommandAst(d, i, target)
                text = generate_command(ast, lexicon, seed=0, split=split_name, label=label)
                variants.append(Sample(world=sample.world, xi_o=sample.xi_o,
                                       command_text=text, command_ast=ast,
                                       xi_mod=sample.xi_mod, seed=sample.seed))
                texts.append((split_name, d.value, i.value, text))
    batch = make_batch(variants, feats, cfg)
    preds = predict_rollout(batch, weights, cfg)
    for (split_name, d, i, text), pred in zip(texts, preds):
        grid.append({"split": split_name, "direction": d, "intensity": i,
                     "command": text, "trajectory": pred.tolist()})
    return {"target": target, "label": label, "xi_o": sample.xi_o.tolist(), "grid": grid}


def compare_baselines(rows: list[dict], path):
    """Emit a tab-separated (model, params, test loss) table."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("model\tparams\ttest_loss\n")
        for row in rows:
            f.write(f"{row['model']}\t{row['params']}\t{row['test_loss']:.6f}\n")
    return path
