"""Command grammar, surface-text generation, parsing, and text encoding.

The command space is direction x intensity x target object. Surface text is
produced from a Lexicon of templates and synonym phrases; each synonym is
marked train-visible or holdout so vocabulary generalization can be tested.
Text encoders are pluggable: a trainable hash-bag encoder and a frozen
lookup-table encoder fed from an embedding file.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from .geom import World


class Direction(Enum):
    CLOSER = "closer"
    FURTHER = "further"
    LEFT = "left"
    RIGHT = "right"
    FRONT = "front"
    BACK = "back"


class Intensity(Enum):
    SLIGHT = "slight"
    NEUTRAL = "neutral"
    STRONG = "strong"
    VERY_STRONG = "very_strong"


class ParseError(ValueError):
    """Command text could not be resolved to a (direction, intensity, target)."""


class LexiconError(ValueError):
    """Lexicon is structurally invalid (e.g., empty template set)."""


class EmbeddingFileError(ValueError):
    """Embedding file missing, corrupt, or dimensionally inconsistent."""


@dataclass(frozen=True)
class CommandAst:
    direction: Direction
    intensity: Intensity
    target_index: int


@dataclass(frozen=True)
class Phrase:
    """A synonym surface form; holdout phrases never appear in training text."""

    text: str
    holdout: bool = False


@dataclass
class Lexicon:
    """Templates plus synonym phrase sets with a train/holdout split.

    templates[direction] are format strings with {intensity}, {dir} and
    {label} slots. direction_phrases/intensity_phrases hold the synonym
    surface forms substituted into those slots.
    """

    templates: dict[Direction, list[str]]
    direction_phrases: dict[Direction, list[Phrase]]
    intensity_phrases: dict[Intensity, list[Phrase]]
    labels: list[str] = field(default_factory=list)

    def validate(self):
        for d in Direction:
            if not self.templates.get(d):
                raise LexiconError(f"no templates for direction {d.value}")
            if not [p for p in self.direction_phrases.get(d, []) if not p.holdout]:
                raise LexiconError(f"no train-visible phrase for direction {d.value}")
            for i in Intensity:
                if len(self.visible_surfaces(d, i, "train")) < 2:
                    raise LexiconError(f"fewer than 2 train surfaces for ({d.value}, {i.value})")

    def phrases(self, kind, key, split: str) -> list[str]:
        table = self.direction_phrases if kind == "dir" else self.intensity_phrases
        pool = table.get(key, [])
        if split == "train":
            pool = [p for p in pool if not p.holdout]
        elif split == "holdout":
            held = [p for p in pool if p.holdout]
            pool = held or pool  # fall back to train forms when nothing is held out
        return [p.text for p in pool]

    def visible_surfaces(self, d: Direction, i: Intensity, split: str) -> list[str]:
        out = []
        for tpl in self.templates[d]:
            for dp in self.phrases("dir", d, split):
                for ip in self.phrases("int", i, split):
                    out.append(_render(tpl, ip, dp, "<label>"))
        return out

    def holdout_words(self) -> set[str]:
        """Tokens that occur only in holdout phrases, never in train text."""
        train_tokens: set[str] = set()
        for d in Direction:
            for tpl in self.templates[d]:
                train_tokens.update(tokenize(tpl.replace("{intensity}", " ")
                                              .replace("{dir}", " ").replace("{label}", " ")))
            for p in self.direction_phrases[d]:
                if not p.holdout:
                    train_tokens.update(tokenize(p.text))
        for i in Intensity:
            for p in self.intensity_phrases.get(i, []):
                if not p.holdout:
                    train_tokens.update(tokenize(p.text))
        held: set[str] = set()
        for table in (self.direction_phrases, self.intensity_phrases):
            for pool in table.values():
                for p in pool:
                    if p.holdout:
                        held.update(tokenize(p.text))
        return held - train_tokens

    def holdout_phrases(self) -> list[list[str]]:
        """Token sequences of every holdout synonym phrase."""
        out = []
        for table in (self.direction_phrases, self.intensity_phrases):
            for pool in table.values():
                out.extend(tokenize(p.text) for p in pool if p.holdout)
        return out

    def contains_holdout(self, text: str) -> bool:
        tokens = tokenize(text)
        return any(_find_subsequence(tokens, ph) >= 0 for ph in self.holdout_phrases())

    def to_json(self) -> str:
        doc = {
            "format": "semtraj-lexicon",
            "version": 1,
            "templates": {d.value: self.templates[d] for d in Direction},
            "direction_phrases": {
                d.value: [{"text": p.text, "holdout": p.holdout}
                          for p in self.direction_phrases[d]] for d in Direction},
            "intensity_phrases": {
                i.value: [{"text": p.text, "holdout": p.holdout}
                          for p in self.intensity_phrases[i]] for i in Intensity},
            "labels": self.labels,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Lexicon":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise LexiconError(f"lexicon is not valid JSON: {e}") from e
        if doc.get("format") != "semtraj-lexicon":
            raise LexiconError("not a semtraj lexicon document")
        lex = cls(
            templates={Direction(k): v for k, v in doc["templates"].items()},
            direction_phrases={Direction(k): [Phrase(p["text"], p["holdout"]) for p in v]
                               for k, v in doc["direction_phrases"].items()},
            intensity_phrases={Intensity(k): [Phrase(p["text"], p["holdout"]) for p in v]
                               for k, v in doc["intensity_phrases"].items()},
            labels=list(doc.get("labels", [])),
        )
        lex.validate()
        return lex

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(f.read())


def default_lexicon(labels: list[str] | None = None) -> Lexicon:
    """The shipped command grammar: two templates per direction, synonym sets
    with held-out surface forms for the novel-vocabulary checks."""
    lex = Lexicon(
        templates={
            Direction.FURTHER: ["stay {intensity} {dir} the {label}",
                                "keep {intensity} {dir} the {label}"],
            Direction.CLOSER: ["go {intensity} {dir} the {label}",
                               "move {intensity} {dir} the {label}"],
            Direction.LEFT: ["pass {intensity} {dir} the {label}",
                             "go {intensity} {dir} the {label}"],
            Direction.RIGHT: ["pass {intensity} {dir} the {label}",
                              "go {intensity} {dir} the {label}"],
            Direction.FRONT: ["pass {intensity} {dir} the {label}",
                              "stay {intensity} {dir} the {label}"],
            Direction.BACK: ["pass {intensity} {dir} the {label}",
                             "stay {intensity} {dir} the {label}"],
        },
        direction_phrases={
            Direction.FURTHER: [Phrase("further away from"), Phrase("farther away from"),
                                Phrase("away from"), Phrase("more distant from", holdout=True)],
            Direction.CLOSER: [Phrase("closer to"), Phrase("nearer to"),
                               Phrase("towards", holdout=True)],
            Direction.LEFT: [Phrase("to the left of"), Phrase("on the left side of"),
                             Phrase("leftward of", holdout=True)],
            Direction.RIGHT: [Phrase("to the right of"), Phrase("on the right side of"),
                              Phrase("rightward of", holdout=True)],
            Direction.FRONT: [Phrase("in front of"), Phrase("on the front side of"),
                              Phrase("ahead of", holdout=True)],
            Direction.BACK: [Phrase("behind"), Phrase("on the back side of"),
                             Phrase("beyond", holdout=True)],
        },
        intensity_phrases={
            Intensity.SLIGHT: [Phrase("a bit"), Phrase("a little"),
                               Phrase("slightly", holdout=True)],
            Intensity.NEUTRAL: [Phrase("")],
            Intensity.STRONG: [Phrase("much"), Phrase("a lot", holdout=True)],
            Intensity.VERY_STRONG: [Phrase("very much"), Phrase("way", holdout=True)],
        },
        labels=labels if labels is not None else load_default_labels(),
    )
    lex.validate()
    return lex


def load_default_labels() -> list[str]:
    """The shipped 1,000-entry object-label vocabulary."""
    text = resources.files("semtraj").joinpath("assets/labels.txt").read_text("utf-8")
    labels = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return labels


def _render(template: str, intensity_phrase: str, dir_phrase: str, label: str) -> str:
    text = template.format(intensity=intensity_phrase, dir=dir_phrase, label=label)
    return " ".join(text.split())  # collapse the gap left by an empty intensity


def generate_command(ast: CommandAst, lexicon: Lexicon, seed: int = 0,
                     split: str = "train", label: str | None = None) -> str:
    """Deterministic surface sentence for an AST.

    Template/phrase choices are drawn from the split-visible pools by mixed
    radix decomposition of the seed, so seed 0 selects the canonical forms.
    """
    if label is None:
        if not lexicon.labels or ast.target_index >= len(lexicon.labels):
            raise LexiconError("no label available for the target index")
        label = lexicon.labels[ast.target_index]
    templates = lexicon.templates.get(ast.direction, [])
    dirs = lexicon.phrases("dir", ast.direction, split)
    ints = lexicon.phrases("int", ast.intensity, split)
    if not templates or not dirs or not ints:
        raise LexiconError(f"empty template set for ({ast.direction.value}, {ast.intensity.value})")
    h = abs(int(seed))
    t = h % len(templates)
    h //= len(templates)
    d = h % len(dirs)
    h //= len(dirs)
    i = h % len(ints)
    return _render(templates[t], ints[i], dirs[d], label)


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation."""
    return _TOKEN_RE.findall(text.lower())


def _find_subsequence(haystack: list[str], needle: list[str]) -> int:
    """First index where needle occurs contiguously in haystack, else -1."""
    if not needle or len(needle) > len(haystack):
        return -1
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i:i + len(needle)] == needle:
            return i
    return -1


def parse_command(text: str, lexicon: Lexicon, labels: list[str]) -> CommandAst:
    """Resolve text to an AST by longest-match phrase detection.

    Direction and intensity phrases match anywhere in the token stream
    (longest first); the target is the longest label whose tokens occur in
    the text, ties broken by lowest object index. Raises ParseError when no
    direction phrase or no label matches.
    """
    tokens = tokenize(text)

    best_dir = None
    best_len = 0
    for d in Direction:
        for p in lexicon.direction_phrases.get(d, []):
            ptoks = tokenize(p.text)
            if len(ptoks) > best_len and _find_subsequence(tokens, ptoks) >= 0:
                best_dir, best_len = d, len(ptoks)
    if best_dir is None:
        raise ParseError(f"no direction phrase found in: {text!r}")

    intensity = Intensity.NEUTRAL
    best_len = 0
    for i in Intensity:
        if i is Intensity.NEUTRAL:
            continue
        for p in lexicon.intensity_phrases.get(i, []):
            ptoks = tokenize(p.text)
            if ptoks and len(ptoks) > best_len and _find_subsequence(tokens, ptoks) >= 0:
                intensity, best_len = i, len(ptoks)

    target = -1
    best_len = 0
    for idx, lbl in enumerate(labels):
        ltoks = tokenize(lbl)
        if ltoks and len(ltoks) > best_len and _find_subsequence(tokens, ltoks) >= 0:
            target, best_len = idx, len(ltoks)
    if target < 0:
        raise ParseError(f"no object label found in: {text!r}")

    return CommandAst(direction=best_dir, intensity=intensity, target_index=target)


# --------------------------- text encoders ---------------------------


class ScratchEncoder:
    """Trainable hash-bag encoder: each token hashes to one of n_buckets rows
    of an embedding table; a token list encodes to the mean of its rows."""

    kind = "scratch"

    def __init__(self, dim: int = 256, n_buckets: int = 4096, seed: int = 0):
        self.dim = dim
        self.n_buckets = n_buckets
        rng = np.random.Generator(np.random.PCG64(seed))
        self.table = (rng.standard_normal((n_buckets, dim)) / np.sqrt(dim)).astype(np.float32)

    def bucket(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % self.n_buckets

    def bucket_ids(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.bucket(t) for t in tokens], dtype=np.int64)

    def encode(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        return self.table[self.bucket_ids(tokens)].mean(axis=0)


class TableEncoder:
    """Frozen exact-match lookup of precomputed per-token vectors; tokens not
    in the table map to the zero vector."""

    kind = "table"

    def __init__(self, vectors: dict[str, np.ndarray], dim: int, path: str | None = None):
        self.vectors = vectors
        self.dim = dim
        self.path = path

    @classmethod
    def load(cls, path) -> "TableEncoder":
        try:
            with open(path, encoding="utf-8") as f:
                header = f.readline().strip()
                m = re.fullmatch(r"#dim (\d+)", header)
                if not m:
                    raise EmbeddingFileError(f"{path}: first line must be '#dim D', got {header!r}")
                dim = int(m.group(1))
                vectors: dict[str, np.ndarray] = {}
                for lineno, line in enumerate(f, start=2):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    try:
                        token, values = line.split("\t", 1)
                        vec = np.array(values.split(), dtype=np.float32)
                    except ValueError as e:
                        raise EmbeddingFileError(f"{path}:{lineno}: malformed record") from e
                    if vec.shape != (dim,):
                        raise EmbeddingFileError(
                            f"{path}:{lineno}: expected {dim} values, got {vec.shape[0]}")
                    vectors[token] = vec
        except OSError as e:
            raise EmbeddingFileError(f"cannot read embedding file {path}: {e}") from e
        return cls(vectors, dim, path=str(path))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"#dim {self.dim}\n")
            for token in sorted(self.vectors):
                vals = " ".join(repr(float(v)) for v in self.vectors[token])
                f.write(f"{token}\t{vals}\n")

    def encode(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        acc = np.zeros(self.dim, dtype=np.float64)
        for t in tokens:
            vec = self.vectors.get(t)
            if vec is not None:
                acc += vec
        return (acc / len(tokens)).astype(np.float32)


TextEncoder = ScratchEncoder | TableEncoder


def encode_text(tokens: list[str], encoder: TextEncoder) -> np.ndarray:
    """Mean-pooled embedding of a token list (zero vector when empty)."""
    return encoder.encode(tokens)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)) / (na * nb))


def similarity_vector(command_embedding: np.ndarray, world: World,
                      encoder: TextEncoder) -> np.ndarray:
    """Per-object cosine similarity between the command embedding and each
    object-label embedding; length M, entries in [-1, 1]."""
    sims = np.zeros(len(world.objects), dtype=np.float32)
    for i, obj in enumerate(world.objects):
        sims[i] = cosine(command_embedding, encode_text(tokenize(obj.label), encoder))
    return sims


def command_features(text: str, world: World, encoder: TextEncoder):
    """(z_in, similarity) for a command against a world."""
    z = encode_text(tokenize(text), encoder)
    return z, similarity_vector(z, world, encoder)


def write_synonym_embeddings(lexicon: Lexicon, labels: list[str], dim: int,
                             seed: int, path):
    """Emit a synonym-aware embedding file covering the lexicon and labels.

    Tokens of synonym phrases for one direction/intensity share a base vector
    plus a small perturbation, standing in for a pretrained text encoder that
    maps synonyms to nearby points. All other tokens get independent vectors.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    vectors: dict[str, np.ndarray] = {}

    def base_vec():
        v = rng.standard_normal(dim)
        return v / np.linalg.norm(v)

    def assign_group(phrases: list[Phrase]):
        shared = {}
        anchor = base_vec()
        for p in phrases:
            for tok in tokenize(p.text):
                if tok in vectors:
                    continue
                if tok not in shared:
                    noise = rng.standard_normal(dim) * 0.05
                    shared[tok] = anchor + noise
                vectors[tok] = shared[tok]

    for d in Direction:
        assign_group(lexicon.direction_phrases[d])
    for i in Intensity:
        assign_group(lexicon.intensity_phrases.get(i, []))

    extra_tokens: set[str] = set()
    for d in Direction:
        for tpl in lexicon.templates[d]:
            extra_tokens.update(tokenize(tpl.replace("{intensity}", " ")
                                         .replace("{dir}", " ").replace("{label}", " ")))
    for lbl in labels:
        extra_tokens.update(tokenize(lbl))
    for tok in sorted(extra_tokens):
        if tok not in vectors:
            vectors[tok] = base_vec()

    enc = TableEncoder({k: v.astype(np.float32) for k, v in vectors.items()}, dim)
    enc.save(path)
    return enc
