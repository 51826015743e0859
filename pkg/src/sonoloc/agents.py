"""Scripted probe agents producing synthetic sessions.

Agents interact with a scene only through the sound parameters a live
session would stream to them, never through the hidden geometry. They are
simulation stand-ins for study participants and make no claim of
reproducing human performance figures.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .geometry import Shape2D, compute_features
from .session import SessionRecord, Trial, score_trial, select_trials, ShapePool
from .sonification import MappingConfig, ModelKind, SoundParams, map_params

SEED_ONLY_CIRCLE_RADIUS_MM = 15.0
MARGIN_RAY_COUNT = 72
GATE_TOLERANCE_MM = 0.05


class _Ear:
    """What the agent is allowed to sense: params at a probe position."""

    def __init__(self, shape, seed, model: ModelKind, cfg: MappingConfig):
        self._shape = shape
        self._seed = seed
        self._model = model
        self._cfg = cfg
        self.probes: list[np.ndarray] = []

    def listen(self, p) -> SoundParams:
        self.probes.append(np.asarray(p, dtype=np.float64))
        return map_params(self._model, compute_features(self._shape, self._seed, p), self._cfg)

    def listen_many(self, pts: np.ndarray) -> list[SoundParams]:
        return [self.listen(p) for p in pts]


def _locate_seed(ear: _Ear, board_mm: float) -> np.ndarray:
    """Hill-climb the audible seed cues on successively finer grids.

    Beat rate rises toward the seed for the beep-like models; volume and
    pad terms keep the search informative for the tick/pad models."""
    center = np.array([board_mm / 2.0, board_mm / 2.0])
    span = board_mm / 2.0
    best = center
    for _ in range(6):
        offsets = np.linspace(-span, span, 7)
        gx, gy = np.meshgrid(best[0] + offsets, best[1] + offsets)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        np.clip(pts, 1.0, board_mm - 1.0, out=pts)
        scores = []
        for p in pts:
            heard = ear.listen(p)
            scores.append(heard.beat_rate_hz + heard.beat_volume + 0.5 * heard.pad_volume)
        best = pts[int(np.argmax(scores))]
        span *= 0.3
    return best


def _trace_pad_gate(ear: _Ear, seed_estimate: np.ndarray, max_radius_mm: float) -> np.ndarray:
    """Walk rays outward from the seed and bisect the pad on/off boundary."""
    angles = np.linspace(0.0, 2.0 * np.pi, MARGIN_RAY_COUNT, endpoint=False)
    boundary = np.empty((MARGIN_RAY_COUNT, 2))
    for i, ang in enumerate(angles):
        direction = np.array([np.cos(ang), np.sin(ang)])
        lo = 0.0
        hi = None
        r = 4.0
        while r <= max_radius_mm:
            if ear.listen(seed_estimate + r * direction).pad_volume > 0.0:
                lo = r
            else:
                hi = r
                break
            r *= 1.6
        if hi is None:
            hi = max_radius_mm
        while hi - lo > GATE_TOLERANCE_MM:
            mid = 0.5 * (lo + hi)
            if ear.listen(seed_estimate + mid * direction).pad_volume > 0.0:
                lo = mid
            else:
                hi = mid
        boundary[i] = seed_estimate + (0.5 * (lo + hi)) * direction
    return boundary


def _circle(center, radius_mm, n=64) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([center[0] + radius_mm * np.cos(theta), center[1] + radius_mm * np.sin(theta)])


def run_agent_trial(
    pool: ShapePool,
    shape_id: str,
    policy: str,
    model: ModelKind,
    cfg: MappingConfig,
    rng: np.random.Generator,
    noise_mm: float = 0.0,
    trial_id: str = "t000",
) -> Trial:
    entry = pool.get(shape_id)
    ear = _Ear(entry.shape, entry.seed, model, cfg)
    seed_est = _locate_seed(ear, pool.board_mm)

    if policy == "seed-only":
        marked_seed = seed_est + rng.normal(0.0, noise_mm, size=2) if noise_mm > 0 else seed_est
        margin = _circle(marked_seed, SEED_ONLY_CIRCLE_RADIUS_MM)
    elif policy == "margin-following":
        probe = map_params(model, compute_features(entry.shape, entry.seed, seed_est), cfg)
        if probe.pad_volume <= 0.0:
            raise ValidationError(f"policy 'margin-following' needs a model with a tumor pad, not {model.value}")
        boundary = _trace_pad_gate(ear, seed_est, max_radius_mm=pool.board_mm / 2.0)
        if noise_mm > 0:
            boundary = boundary + rng.normal(0.0, noise_mm, size=boundary.shape)
        margin = boundary
        marked_seed = seed_est + rng.normal(0.0, noise_mm, size=2) if noise_mm > 0 else seed_est
    else:
        raise ValidationError(f"unknown policy {policy!r}")

    # keep the stored trace compact: decimate the probe history
    probes = np.asarray(ear.probes)
    step = max(1, len(probes) // 400)
    kept = probes[::step]
    t = 10.0 * np.arange(1, len(kept) + 1)
    trace = np.column_stack([t, kept])
    return Trial(
        trial_id=trial_id,
        shape_id=shape_id,
        model=model,
        trace=trace,
        margin_marking=Shape2D(margin),
        seed_marking=marked_seed,
        started_ms=0.0,
        ended_ms=float(t[-1]) if len(t) else 0.0,
    )


def run_agent_session(
    pool: ShapePool,
    policy: str,
    model: ModelKind,
    n_trials: int,
    rng_seed: int,
    cfg: MappingConfig | None = None,
    noise_mm: float = 0.0,
    score: bool = True,
) -> SessionRecord:
    """Run n_trials over shapes drawn from the pool (cycled when n_trials
    exceeds the pool size); deterministic per rng_seed."""
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    cfg = cfg or MappingConfig()
    rng = np.random.default_rng(rng_seed)
    order = select_trials(pool, len(pool.shapes), rng_seed)
    record = SessionRecord(
        session_id=f"agent-{policy}-{model.value}-{rng_seed}",
        participant=f"agent:{policy}",
        config=cfg,
    )
    for i in range(n_trials):
        shape_id = order[i % len(order)]
        trial = run_agent_trial(
            pool, shape_id, policy, model, cfg, rng, noise_mm=noise_mm, trial_id=f"t{i:03d}"
        )
        if score:
            trial.report = score_trial(trial, pool)
        record.trials.append(trial)
    return record
