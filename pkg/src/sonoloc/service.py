"""Real-time session endpoint.

One WebSocket connection carries one session: probe positions stream in,
sound parameters stream back, markings are collected, and finished trials
are scored and appended to a JSON Lines session file as they complete (so
a crash between trials loses nothing already finished).

Frames are single JSON objects. Client -> server: start_session,
start_trial, probe, mark_margin, mark_seed, finish_trial, end_session.
Server -> client: session_ack, trial_ack, params, score, ack, error.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .errors import SonolocError, ValidationError
from .geometry import Shape2D, compute_features
from .session import (
    SessionRecord,
    Trial,
    _trial_to_dict,
    load_pool,
    score_trial,
    select_trials,
    session_header,
    ShapePool,
)
from .sonification import MappingConfig, ModelKind, map_params
from .synth import RenderConfig, instrument_for, render, write_wav
from .session import replay


class LatencyStats:
    """Server-side probe processing times, in seconds."""

    def __init__(self):
        self.samples: list[float] = []

    def record(self, dt: float) -> None:
        self.samples.append(dt)

    def percentile(self, q: float) -> float:
        if not self.samples:
            return 0.0
        return float(np.percentile(np.array(self.samples), q))

    def summary(self) -> dict:
        return {
            "count": len(self.samples),
            "p50_ms": self.percentile(50.0) * 1000.0,
            "p99_ms": self.percentile(99.0) * 1000.0,
            "max_ms": max(self.samples, default=0.0) * 1000.0,
        }


def _err(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


class LiveSession:
    """Per-connection state machine; synchronous and fully deterministic
    given the message sequence."""

    def __init__(
        self,
        pool: ShapePool,
        config: MappingConfig,
        out_dir: Path,
        latency: LatencyStats,
        record_audio: bool = False,
        trial_seed: int = 0,
    ):
        self.pool = pool
        self.base_config = config
        self.out_dir = Path(out_dir)
        self.latency = latency
        self.record_audio = record_audio
        self.trial_seed = trial_seed
        self.record: SessionRecord | None = None
        self.trial: Trial | None = None
        self._trace: list[list[float]] = []
        self._margin: list[list[float]] | None = None
        self._seed_mark: list[float] | None = None
        self._trial_count = 0
        self._fh = None
        self._selection: list[str] = []
        self._closed = False

    # -- message dispatch ----------------------------------------------

    def handle(self, msg: dict) -> list[dict]:
        if not isinstance(msg, dict) or "type" not in msg:
            return [_err("bad_message", "frame must be a JSON object with a 'type' field")]
        kind = msg["type"]
        handler = getattr(self, f"_on_{kind}", None)
        if handler is None:
            return [_err("bad_message", f"unknown message type {kind!r}")]
        try:
            return handler(msg)
        except (KeyError, TypeError, ValueError) as exc:
            return [_err("bad_message", f"malformed {kind} message: {exc}")]
        except SonolocError as exc:
            return [_err("domain_error", str(exc))]

    def _on_start_session(self, msg: dict) -> list[dict]:
        if self.record is not None:
            return [_err("session_active", "session already started")]
        cfg = self.base_config
        if msg.get("config"):
            cfg = MappingConfig.from_dict({**self.base_config.to_dict(), **msg["config"]})
        session_id = msg.get("session_id") or f"live-{uuid.uuid4().hex[:12]}"
        self.record = SessionRecord(session_id=session_id, participant=str(msg.get("participant", "")), config=cfg)
        self._selection = select_trials(self.pool, len(self.pool.shapes), self.trial_seed)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        try:
            self._fh = open(self.out_dir / f"{session_id}.jsonl", "w", encoding="utf-8")
            self._fh.write(json.dumps(session_header(self.record)) + "\n")
            self._fh.flush()
        except OSError as exc:
            return [_err("io_error", f"cannot open session file: {exc}")]
        return [
            {
                "type": "session_ack",
                "session_id": session_id,
                "pool_meta": {
                    "n_shapes": len(self.pool.shapes),
                    "shape_ids": self.pool.ids(),
                    "board_mm": self.pool.board_mm,
                },
            }
        ]

    def _on_start_trial(self, msg: dict) -> list[dict]:
        if self.record is None:
            return [_err("no_session", "start_session first")]
        if self.trial is not None:
            return [_err("trial_active", "finish the current trial first")]
        model = ModelKind(msg["model"])
        shape_id = msg.get("shape_id")
        if shape_id is None:
            shape_id = self._selection[self._trial_count % len(self._selection)]
        entry = self.pool.get(shape_id)  # validates the id
        trial_id = f"t{self._trial_count:03d}"
        self._trial_count += 1
        self.trial = Trial(
            trial_id=trial_id,
            shape_id=entry.id,
            model=model,
            trace=np.empty((0, 3)),
            started_ms=float(msg.get("t_ms", 0.0)),
        )
        self._trace = []
        self._margin = None
        self._seed_mark = None
        return [{"type": "trial_ack", "trial_id": trial_id, "model": model.value}]

    def _on_probe(self, msg: dict) -> list[dict]:
        t0 = time.perf_counter()
        if self.trial is None:
            return [_err("no_active_trial", "probe outside a trial")]
        t_ms = float(msg["t_ms"])
        if self._trace and t_ms <= self._trace[-1][0]:
            return [_err("bad_timestamp", "probe timestamps must be strictly increasing")]
        x = float(msg["x_mm"])
        y = float(msg["y_mm"])
        entry = self.pool.get(self.trial.shape_id)
        features = compute_features(entry.shape, entry.seed, (x, y))
        params = map_params(self.trial.model, features, self.record.config)
        self._trace.append([t_ms, x, y])
        reply = {"type": "params", "t_ms": t_ms, "params": params.to_dict()}
        self.latency.record(time.perf_counter() - t0)
        return [reply]

    def _on_mark_margin(self, msg: dict) -> list[dict]:
        if self.trial is None:
            return [_err("no_active_trial", "mark_margin outside a trial")]
        path = msg["path"]
        if not isinstance(path, list) or len(path) < 3:
            return [_err("invalid_marking", "margin path needs at least 3 points")]
        self._margin = [[float(p[0]), float(p[1])] for p in path]
        return [{"type": "ack", "of": "mark_margin"}]

    def _on_mark_seed(self, msg: dict) -> list[dict]:
        if self.trial is None:
            return [_err("no_active_trial", "mark_seed outside a trial")]
        self._seed_mark = [float(msg["x_mm"]), float(msg["y_mm"])]
        return [{"type": "ack", "of": "mark_seed"}]

    def _on_finish_trial(self, msg: dict) -> list[dict]:
        if self.trial is None:
            return [_err("no_active_trial", "finish_trial outside a trial")]
        if self._margin is None or self._seed_mark is None:
            return [_err("missing_marking", "both margin and seed markings are required")]
        trial = self.trial
        trial.trace = np.asarray(self._trace, dtype=np.float64).reshape(-1, 3)
        try:
            trial.margin_marking = Shape2D(self._margin)
        except ValidationError as exc:
            return [_err("invalid_marking", str(exc))]
        trial.seed_marking = np.asarray(self._seed_mark)
        trial.ended_ms = float(msg.get("t_ms", trial.trace[-1, 0] if len(trial.trace) else 0.0))
        trial.report = score_trial(trial, self.pool)
        self.record.trials.append(trial)
        self._persist_trial(trial)
        if self.record_audio and len(trial.trace):
            self._render_trial_audio(trial)
        entry = self.pool.get(trial.shape_id)
        reply = {
            "type": "score",
            "trial_id": trial.trial_id,
            "report": trial.report.to_dict(),
            "gt": {
                "vertices_mm": entry.shape.vertices.tolist(),
                "seed_mm": entry.seed.position.tolist(),
                "seed_radius_mm": entry.seed.radius_mm,
            },
        }
        self.trial = None
        self._trace = []
        self._margin = None
        self._seed_mark = None
        return [reply]

    def _on_end_session(self, msg: dict) -> list[dict]:
        if self.record is None:
            return [_err("no_session", "no session to end")]
        self.close()
        return [{"type": "ack", "of": "end_session"}]

    # -- persistence ----------------------------------------------------

    def _persist_trial(self, trial: Trial) -> None:
        if self._fh is None:
            return
        try:
            self._fh.write(json.dumps(_trial_to_dict(trial)) + "\n")
            self._fh.flush()
        except OSError:
            pass  # state stays in memory; close() retries nothing further

    def _render_trial_audio(self, trial: Trial) -> None:
        streams = replay(self.record, self.pool)
        events = streams[trial.trial_id]
        duration = events[-1].t_ms / 1000.0 + 1.5 if events else 1.0
        buf = render(events, duration, RenderConfig(), instrument=instrument_for(trial.model))
        write_wav(buf, self.out_dir / f"{self.record.session_id}-{trial.trial_id}.wav")

    def close(self) -> None:
        """Flush a partial trial (flagged) and close the file; idempotent."""
        if self._closed:
            return
        self._closed = True
        if self.trial is not None and self._fh is not None:
            partial = self.trial
            partial.trace = np.asarray(self._trace, dtype=np.float64).reshape(-1, 3)
            partial.partial = True
            try:
                self._fh.write(json.dumps(_trial_to_dict(partial)) + "\n")
            except OSError:
                pass
            self.trial = None
        if self._fh is not None:
            try:
                self._fh.close()
            except OSError:
                pass
            self._fh = None


def create_app(
    pool: ShapePool,
    config: MappingConfig,
    out_dir,
    record_audio: bool = False,
    trial_seed: int = 0,
):
    """FastAPI app exposing the /ws protocol endpoint and /stats."""
    app = FastAPI(title="sonoloc service")
    app.state.latency = LatencyStats()
    app.state.pool = pool
    app.state.config = config

    @app.get("/stats")
    def stats():
        return app.state.latency.summary()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        live = LiveSession(
            pool, config, Path(out_dir), app.state.latency, record_audio=record_audio, trial_seed=trial_seed
        )
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(_err("bad_message", "frame is not valid JSON")))
                    continue
                if isinstance(msg, dict) and msg.get("type") == "probe":
                    replies = live.handle(msg)  # hot path: keep on the loop
                else:
                    replies = await asyncio.to_thread(live.handle, msg)
                for reply in replies:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            live.close()

    return app


def serve(
    bind: str,
    pool_path,
    config_path=None,
    out_dir="sessions",
    record_audio: bool = False,
    trial_seed: int = 0,
) -> None:
    """Run the WebSocket service until interrupted."""
    import uvicorn

    pool = load_pool(pool_path)
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            config = MappingConfig.from_dict(json.load(fh))
    else:
        config = MappingConfig()
    host, _, port = bind.partition(":")
    app = create_app(pool, config, out_dir, record_audio=record_audio, trial_seed=trial_seed)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8765), log_level="info")
