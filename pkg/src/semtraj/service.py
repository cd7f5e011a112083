"""HTTP session service: create a scene, reshape its current trajectory with
natural-language commands, undo, compare engines.

Sessions are in-memory with idle eviction; each session serializes its own
mutations behind a lock while distinct sessions run concurrently. The model
engine rolls out a trained checkpoint; the oracle engine parses the command
and runs the ground-truth optimizer. Both reshape the CURRENT trajectory, so
commands refine iteratively.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import chomp
from .dataset import PipelineConfig, Sample
from .geom import World
from .language import CommandAst, Direction, Intensity, ParseError, parse_command
from .model import ModelConfig, predict_rollout
from .planner import InfeasibleWorldError, PlanningError, plan_initial_trajectory
from .training import FeatureExtractor, load_checkpoint, make_batch, sweep_with
from . import __version__

log = logging.getLogger(__name__)

SESSION_IDLE_SECONDS = 3600


class ServiceError(Exception):
    def __init__(self, status: int, reason: str):
        super().__init__(reason)
        self.status = status
        self.reason = reason


@dataclass
class Session:
    id: str
    world: World
    engine: str  # "model" | "oracle"
    history: list[tuple[str, np.ndarray]]  # (command_text, trajectory)
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_used: float = field(default_factory=time.time)

    @property
    def current(self) -> np.ndarray:
        return self.history[-1][1]


def world_doc(world: World) -> dict:
    return {
        "start": [float(world.start[0]), float(world.start[1])],
        "goal": [float(world.goal[0]), float(world.goal[1])],
        "objects": [{"label": o.label, "pos": [float(o.position[0]), float(o.position[1])]}
                    for o in world.objects],
    }


def traj_doc(traj: np.ndarray) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in traj]


class ReshapeService:
    """Engine dispatch plus the session store; transport-agnostic."""

    def __init__(self, checkpoint: str | None = None, embedding_file: str | None = None,
                 pipeline: PipelineConfig | None = None):
        self.pipeline = pipeline or PipelineConfig()
        self.lexicon = self.pipeline.lexicon
        self.sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        self.checkpoint_path = checkpoint
        if checkpoint is not None:
            self.weights, self.model_cfg, self.meta = load_checkpoint(checkpoint)
            if not isinstance(self.model_cfg, ModelConfig):
                raise ValueError("serve requires a transformer checkpoint")
            self.feats = FeatureExtractor(self.model_cfg, self.weights, embedding_file,
                                          self.lexicon)
        else:
            self.weights = None
            self.model_cfg = None
            self.feats = None

    # ------------------------- session lifecycle -------------------------

    def create_session(self, seed: int | None, engine: str) -> Session:
        if engine not in ("model", "oracle"):
            raise ServiceError(400, f"unknown engine {engine!r}")
        if engine == "model" and self.weights is None:
            raise ServiceError(400, "service started without a checkpoint; "
                                    "model engine unavailable")
        if seed is None:
            seed = int(uuid.uuid4().int % (2 ** 31))
        world, xi_o = self._sample_problem(seed)
        session = Session(id=uuid.uuid4().hex[:16], world=world, engine=engine,
                          history=[("", xi_o)])
        with self._store_lock:
            self._evict_idle()
            self.sessions[session.id] = session
        return session

    def _sample_problem(self, seed: int):
        for attempt in range(64):
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence([seed, attempt])))
            world_seed = int(rng.integers(0, 2 ** 62))
            try:
                from .geom import gen_random_world

                world = gen_random_world(world_seed, self.pipeline.world)
                xi_o = plan_initial_trajectory(world, self.pipeline.grid_resolution,
                                               self.pipeline.obstacle_radius)
                return world, xi_o
            except (InfeasibleWorldError, PlanningError):
                continue
        raise ServiceError(500, f"could not sample a feasible world for seed {seed}")

    def get_session(self, sid: str) -> Session:
        with self._store_lock:
            session = self.sessions.get(sid)
        if session is None:
            raise ServiceError(404, f"unknown session {sid}")
        session.last_used = time.time()
        return session

    def _evict_idle(self):
        cutoff = time.time() - SESSION_IDLE_SECONDS
        for sid in [sid for sid, s in self.sessions.items() if s.last_used < cutoff]:
            del self.sessions[sid]

    # ---------------------------- reshaping ----------------------------

    def reshape(self, world: World, current: np.ndarray, text: str, engine: str):
        """Apply one command to the current trajectory; returns the new
        trajectory and the per-object similarity readout."""
        if engine == "oracle":
            try:
                ast = parse_command(text, self.lexicon, world.labels)
            except ParseError as e:
                raise ServiceError(422, str(e)) from e
            new = chomp.reshape_with_command(current, ast, world, self.pipeline.chomp)
            sim = self._similarity(text, world)
            return new, sim
        if self.weights is None:
            raise ServiceError(400, "model engine unavailable without a checkpoint")
        sample = Sample(world=world, xi_o=current, command_text=text,
                        command_ast=CommandAst(Direction.CLOSER, Intensity.NEUTRAL, 0),
                        xi_mod=current, seed=0)
        batch = make_batch([sample], self.feats, self.model_cfg)
        pred = predict_rollout(batch, self.weights, self.model_cfg)[0]
        return pred.astype(np.float64), batch["sim"][0][:len(world.objects)].tolist()

    def _similarity(self, text: str, world: World) -> list[float]:
        if self.feats is not None:
            return [float(v) for v in self.feats.sim(text, world)]
        from .language import ScratchEncoder, similarity_vector, tokenize, encode_text

        enc = ScratchEncoder(dim=64)
        return [float(v) for v in similarity_vector(encode_text(tokenize(text), enc),
                                                    world, enc)]

    def command(self, sid: str, text: str, engine: str | None = None) -> dict:
        session = self.get_session(sid)
        with session.lock:
            used = engine or session.engine
            t0 = time.time()
            new, sim = self.reshape(session.world, session.current, text, used)
            session.history.append((text, np.asarray(new)))
            return {
                "trajectory": traj_doc(session.current),
                "similarity": list(sim),
                "engine": used,
                "elapsed_ms": round((time.time() - t0) * 1000.0, 3),
            }

    def preview(self, sid: str, text: str, engine: str | None = None) -> dict:
        """Reshape without pushing history (engine comparison overlay)."""
        session = self.get_session(sid)
        with session.lock:
            used = engine or session.engine
            t0 = time.time()
            new, sim = self.reshape(session.world, session.current, text, used)
            return {
                "trajectory": traj_doc(np.asarray(new)),
                "similarity": list(sim),
                "engine": used,
                "elapsed_ms": round((time.time() - t0) * 1000.0, 3),
            }

    def undo(self, sid: str) -> dict:
        session = self.get_session(sid)
        with session.lock:
            if len(session.history) <= 1:
                raise ServiceError(409, "cannot undo past the original trajectory")
            session.history.pop()
            return {"trajectory": traj_doc(session.current),
                    "history_length": len(session.history)}

    def sweep(self, sid: str, target_index: int | None = None) -> dict:
        session = self.get_session(sid)
        with session.lock:
            world = session.world
            if target_index is None:
                valid = chomp.valid_targets(session.history[0][1], world)
                target_index = valid[0] if valid else 0
            if not 0 <= target_index < len(world.objects):
                raise ServiceError(400, f"target index {target_index} out of range")
            xi_o = session.history[0][1]
            if session.engine == "model" and self.weights is not None:
                sample = Sample(world=world, xi_o=xi_o, command_text="",
                                command_ast=CommandAst(Direction.CLOSER,
                                                       Intensity.NEUTRAL, target_index),
                                xi_mod=xi_o, seed=0)
                return sweep_with(self.weights, self.model_cfg, self.feats, sample,
                                  self.lexicon)
            grid = []
            for d in Direction:
                for i in Intensity:
                    ast = CommandAst(d, i, target_index)
                    traj = chomp.reshape_with_command(xi_o, ast, world, self.pipeline.chomp)
                    grid.append({"split": "train", "direction": d.value,
                                 "intensity": i.value, "command": "",
                                 "trajectory": traj_doc(traj)})
            return {"target": target_index,
                    "label": world.objects[target_index].label,
                    "xi_o": traj_doc(xi_o), "grid": grid}

    def session_doc(self, session: Session) -> dict:
        return {
            "id": session.id,
            "engine": session.engine,
            "world": world_doc(session.world),
            "trajectory": traj_doc(session.current),
            "history": [{"command": text, "trajectory": traj_doc(traj)}
                        for text, traj in session.history],
        }

    def health(self) -> dict:
        return {"status": "ok", "checkpoint": self.checkpoint_path, "version": __version__}


# ------------------------------ HTTP layer ------------------------------


class _Handler(BaseHTTPRequestHandler):
    service: ReshapeService = None
    static_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, status: int, doc: dict):
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ServiceError(400, f"malformed request body: {e}") from e
        if not isinstance(doc, dict):
            raise ServiceError(400, "request body must be a JSON object")
        return doc

    def do_GET(self):
        try:
            if self.path == "/api/v1/health":
                return self._send(200, self.service.health())
            if self.path.startswith("/api/v1/session/"):
                sid = self.path.rsplit("/", 1)[-1]
                session = self.service.get_session(sid)
                return self._send(200, self.service.session_doc(session))
            return self._serve_static()
        except ServiceError as e:
            return self._send(e.status, {"error": e.reason})
        except Exception as e:  # pragma: no cover - defensive
            log.exception("GET %s failed", self.path)
            return self._send(500, {"error": str(e)})

    def do_POST(self):
        try:
            body = self._body()
            if self.path == "/api/v1/session":
                seed = body.get("seed")
                if seed is not None and not isinstance(seed, int):
                    raise ServiceError(400, "seed must be an integer")
                engine = body.get("engine", "oracle" if self.service.weights is None
                                  else "model")
                session = self.service.create_session(seed, engine)
                return self._send(200, {"id": session.id,
                                        "engine": session.engine,
                                        "world": world_doc(session.world),
                                        "trajectory": traj_doc(session.current)})
            parts = self.path.strip("/").split("/")
            if len(parts) == 5 and parts[:3] == ["api", "v1", "session"]:
                sid, action = parts[3], parts[4]
                if action == "command":
                    text = body.get("text")
                    if not isinstance(text, str) or not text.strip():
                        raise ServiceError(400, "command text is required")
                    return self._send(200, self.service.command(sid, text,
                                                                body.get("engine")))
                if action == "preview":
                    text = body.get("text")
                    if not isinstance(text, str) or not text.strip():
                        raise ServiceError(400, "command text is required")
                    return self._send(200, self.service.preview(sid, text,
                                                                body.get("engine")))
                if action == "undo":
                    return self._send(200, self.service.undo(sid))
                if action == "sweep":
                    return self._send(200, self.service.sweep(sid, body.get("target")))
            raise ServiceError(404, f"no such endpoint {self.path}")
        except ServiceError as e:
            return self._send(e.status, {"error": e.reason})
        except Exception as e:  # pragma: no cover - defensive
            log.exception("POST %s failed", self.path)
            return self._send(500, {"error": str(e)})

    def _serve_static(self):
        if self.static_dir is None:
            raise ServiceError(404, f"no such endpoint {self.path}")
        rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            raise ServiceError(404, f"no such file {rel}")
        ctype = {"html": "text/html", "js": "text/javascript", "css": "text/css",
                 "map": "application/json", "svg": "image/svg+xml"}.get(
            target.suffix.lstrip("."), "application/octet-stream")
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(service: ReshapeService, host: str = "127.0.0.1", port: int = 8787,
                static_dir: str | None = None) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "static_dir": Path(static_dir) if static_dir else None,
    })
    return ThreadingHTTPServer((host, port), handler)


def serve(checkpoint: str | None, host: str, port: int, static_dir: str | None = None,
          embedding_file: str | None = None):
    service = ReshapeService(checkpoint, embedding_file)
    server = make_server(service, host, port, static_dir)
    log.info("serving on http://%s:%d", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
