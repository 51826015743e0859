"""Trial orchestration and persistence: shape pools, trial records,
scoring and replay."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError
from .geometry import (
    Seed,
    Shape2D,
    compute_features,
    fit_plane,
    project_to_plane,
    signed_distance,
)
from .metrics import (
    MetricsReport,
    RasterGrid,
    area_ratio,
    board_grid,
    connected_components,
    dice,
    intercentroid,
    isolate_tumor,
    rasterize,
)
from .sonification import MappingConfig, ModelKind, ParamEvent, map_params

SESSION_FILE_VERSION = 1
SEED_MARK_RADIUS_MM = 1.5  # dot radius used when rasterizing seed marks
DEFAULT_BOARD_MM = 150.0


@dataclass(frozen=True)
class PoolShape:
    id: str
    shape: Shape2D
    seed: Seed


@dataclass(frozen=True)
class ShapePool:
    shapes: tuple[PoolShape, ...]
    rng_seed: int | None = None
    board_mm: float = DEFAULT_BOARD_MM

    def __post_init__(self):
        ids = [s.id for s in self.shapes]
        if len(set(ids)) != len(ids):
            raise ValidationError("pool shape ids must be unique")
        for s in self.shapes:
            if signed_distance(s.shape, s.seed.position) >= 0:
                raise ValidationError(f"seed of shape {s.id!r} is not strictly inside its margin")

    def get(self, shape_id: str) -> PoolShape:
        for s in self.shapes:
            if s.id == shape_id:
                return s
        raise ValidationError(f"unknown shape id {shape_id!r}")

    def ids(self) -> list[str]:
        return [s.id for s in self.shapes]


def fourier_blob(r_major: float, aspect: float, rotation: float, n_vertices: int, coeffs, phases):
    """Radially Fourier-perturbed ellipse (harmonics k = 2..5); star-shaped,
    hence always simple. All-zero coeffs give the plain ellipse."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_vertices, endpoint=False)
    a = r_major
    b = r_major * aspect
    r_ellipse = a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)
    bump = np.ones_like(theta)
    for k, (ck, pk) in enumerate(zip(coeffs, phases), start=2):
        bump += ck * np.cos(k * theta + pk)
    r = r_ellipse * bump
    x = r * np.cos(theta + rotation)
    y = r * np.sin(theta + rotation)
    return np.column_stack([x, y]), float(r.min())


def generate_pool(
    n: int,
    rng_seed: int,
    size_range_mm: tuple[float, float] = (25.0, 50.0),
    board_mm: float = DEFAULT_BOARD_MM,
    seed_margin_mm: float = 5.0,
    n_vertices: int = 64,
) -> ShapePool:
    """Deterministically generate target shapes with interior seeds.

    Shapes are Fourier-perturbed ellipses (radial coefficients k = 2..5,
    |a_k| <= 0.15) discretized at `n_vertices`; seeds are drawn uniformly
    from the interior eroded by `seed_margin_mm`.
    """
    if n < 1:
        raise ValidationError("pool size must be >= 1")
    lo, hi = size_range_mm
    if not (0 < lo <= hi):
        raise ValidationError("bad size range")
    if hi / 2.0 * 1.6 > board_mm / 2.0 - 10.0:
        raise ValidationError("size range does not fit the board")
    rng = np.random.default_rng(rng_seed)
    shapes = []
    for i in range(n):
        for _ in range(64):  # redraw until the seed placement is feasible
            r_major = rng.uniform(lo, hi) / 2.0
            aspect = rng.uniform(0.55, 0.95)
            rotation = rng.uniform(0.0, np.pi)
            coeffs = rng.uniform(-0.15, 0.15, size=4)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=4)
            verts, r_min = fourier_blob(r_major, aspect, rotation, n_vertices, coeffs, phases)
            if r_min < seed_margin_mm + 2.0:
                continue
            extent = verts.max(axis=0) - verts.min(axis=0)
            margin = 15.0
            span = np.array([board_mm, board_mm]) - extent - 2 * margin
            if span.min() <= 0:
                continue
            center = margin - verts.min(axis=0) + rng.uniform(0.0, 1.0, size=2) * span
            shape = Shape2D(verts + center)
            seed_pos = _sample_interior(rng, shape, seed_margin_mm)
            if seed_pos is None:
                continue
            shapes.append(PoolShape(id=f"s{i:02d}", shape=shape, seed=Seed(position=seed_pos)))
            break
        else:
            raise ValidationError("could not generate a feasible shape; widen the size range")
    return ShapePool(shapes=tuple(shapes), rng_seed=rng_seed, board_mm=board_mm)


def _sample_interior(rng, shape: Shape2D, margin_mm: float):
    lo, hi = shape.bounds()
    for _ in range(256):
        p = rng.uniform(lo, hi)
        if signed_distance(shape, p) <= -margin_mm:
            return p
    return None


def select_trials(pool: ShapePool, k: int, rng_seed: int) -> list[str]:
    """Uniform selection without replacement; deterministic per seed."""
    if k < 0 or k > len(pool.shapes):
        raise ValidationError("k must lie in [0, pool size]")
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(len(pool.shapes))
    ids = pool.ids()
    return [ids[i] for i in order[:k]]


def save_pool(pool: ShapePool, path) -> None:
    doc = {
        "shapes": [
            {
                "id": s.id,
                "vertices_mm": s.shape.vertices.tolist(),
                "seed_mm": s.seed.position.tolist(),
                "seed_radius_mm": s.seed.radius_mm,
            }
            for s in pool.shapes
        ],
        "rng_seed": pool.rng_seed,
        "board_mm": pool.board_mm,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_pool(path) -> ShapePool:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        shapes = tuple(
            PoolShape(
                id=str(e["id"]),
                shape=Shape2D(e["vertices_mm"]),
                seed=Seed(position=e["seed_mm"], radius_mm=e.get("seed_radius_mm", 2.0)),
            )
            for e in doc["shapes"]
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed pool file {path}: {exc}") from exc
    return ShapePool(shapes=shapes, rng_seed=doc.get("rng_seed"), board_mm=doc.get("board_mm", DEFAULT_BOARD_MM))


@dataclass
class Trial:
    """One localization attempt: probe trace plus user markings."""

    trial_id: str
    shape_id: str
    model: ModelKind
    trace: np.ndarray  # (k, 3) rows of (t_ms, x_mm, y_mm)
    margin_marking: Shape2D | None = None
    seed_marking: np.ndarray | None = None
    started_ms: float = 0.0
    ended_ms: float = 0.0
    partial: bool = False
    report: MetricsReport | None = None
    # surface-context fields (3-D trials); ground truth is the projected outline
    margin_points_3d: np.ndarray | None = None
    seed_point_3d: np.ndarray | None = None
    gt_margin_points_3d: np.ndarray | None = None
    gt_seed_point_3d: np.ndarray | None = None

    def __post_init__(self):
        self.trace = np.asarray(self.trace, dtype=np.float64).reshape(-1, 3)
        if len(self.trace) > 1 and not np.all(np.diff(self.trace[:, 0]) > 0):
            raise ValidationError("trace timestamps must be strictly increasing")
        if self.seed_marking is not None:
            self.seed_marking = np.asarray(self.seed_marking, dtype=np.float64).reshape(2)


@dataclass
class SessionRecord:
    session_id: str
    participant: str
    config: MappingConfig
    trials: list[Trial] = field(default_factory=list)

    def get_trial(self, trial_id: str) -> Trial:
        for t in self.trials:
            if t.trial_id == trial_id:
                return t
        raise ValidationError(f"unknown trial id {trial_id!r}")


def _circle_polygon(center, radius_mm: float, n: int = 32) -> Shape2D:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return Shape2D(np.column_stack([center[0] + radius_mm * np.cos(theta), center[1] + radius_mm * np.sin(theta)]))


def _seed_component(point, grid: RasterGrid):
    mask = rasterize(_circle_polygon(point, SEED_MARK_RADIUS_MM), grid)
    comps = connected_components(mask)
    if not comps:
        raise ValidationError("seed mark rasterized to nothing (outside the grid?)")
    return max(comps, key=lambda c: c.area_px)


def score_trial(trial: Trial, pool: ShapePool, grid: RasterGrid | None = None) -> MetricsReport:
    """Rasterize ground truth and markings, isolate components and compute
    the overlap metrics. Surface trials are first flattened onto the plane
    best fitting the projected ground-truth outline."""
    if trial.margin_marking is None and trial.margin_points_3d is None:
        raise ValidationError("trial has no margin marking")
    if trial.seed_marking is None and trial.seed_point_3d is None:
        raise ValidationError("trial has no seed marking")
    entry = pool.get(trial.shape_id)

    if trial.margin_points_3d is not None:
        if trial.gt_margin_points_3d is None or trial.gt_seed_point_3d is None:
            raise ValidationError("surface trial lacks projected ground truth")
        plane = fit_plane(trial.gt_margin_points_3d)
        gt_outline = project_to_plane(trial.gt_margin_points_3d, plane)
        ds_outline = project_to_plane(trial.margin_points_3d, plane)
        gt_seed_pt = project_to_plane(trial.gt_seed_point_3d.reshape(1, 3), plane)[0]
        ds_seed_pt = project_to_plane(trial.seed_point_3d.reshape(1, 3), plane)[0]
        gt_shape = Shape2D(gt_outline)
        ds_shape = Shape2D(ds_outline)
        if grid is None:
            grid = _grid_around(np.vstack([gt_outline, ds_outline]))
    else:
        gt_shape = entry.shape
        ds_shape = trial.margin_marking
        gt_seed_pt = entry.seed.position
        ds_seed_pt = trial.seed_marking
        if grid is None:
            grid = board_grid(pool.board_mm)

    gt_mask = rasterize(gt_shape, grid)
    ds_mask = rasterize(ds_shape, grid)
    gt_comp, _ = isolate_tumor(gt_mask)
    ds_comp, _ = isolate_tumor(ds_mask)
    gt_tumor = gt_comp.mask(grid)
    ds_tumor = ds_comp.mask(grid)
    seed_dist = intercentroid(_seed_component(ds_seed_pt, grid), _seed_component(gt_seed_pt, grid))
    return MetricsReport(
        dice=dice(ds_tumor, gt_tumor),
        area_ratio=area_ratio(ds_tumor, gt_tumor),
        intercentroid_mm=seed_dist,
        crr=None,
    )


def _grid_around(points_2d: np.ndarray, pad_mm: float = 10.0, resolution: float = 0.5) -> RasterGrid:
    lo = points_2d.min(axis=0) - pad_mm
    hi = points_2d.max(axis=0) + pad_mm
    w = int(np.ceil((hi[0] - lo[0]) / resolution))
    h = int(np.ceil((hi[1] - lo[1]) / resolution))
    return RasterGrid(width_px=w, height_px=h, resolution_mm_per_px=resolution, origin_mm=(float(lo[0]), float(lo[1])))


def _opt(arr):
    return None if arr is None else np.asarray(arr).tolist()


def _trial_to_dict(t: Trial) -> dict:
    return {
        "type": "trial",
        "trial_id": t.trial_id,
        "shape_id": t.shape_id,
        "model": t.model.value,
        "trace": t.trace.tolist(),
        "margin_marking": None if t.margin_marking is None else t.margin_marking.vertices.tolist(),
        "seed_marking": _opt(t.seed_marking),
        "started_ms": t.started_ms,
        "ended_ms": t.ended_ms,
        "partial": t.partial,
        "report": None if t.report is None else t.report.to_dict(),
        "margin_points_3d": _opt(t.margin_points_3d),
        "seed_point_3d": _opt(t.seed_point_3d),
        "gt_margin_points_3d": _opt(t.gt_margin_points_3d),
        "gt_seed_point_3d": _opt(t.gt_seed_point_3d),
    }


def _trial_from_dict(d: dict) -> Trial:
    def arr(key):
        v = d.get(key)
        return None if v is None else np.asarray(v, dtype=np.float64)

    return Trial(
        trial_id=d["trial_id"],
        shape_id=d["shape_id"],
        model=ModelKind(d["model"]),
        trace=np.asarray(d["trace"], dtype=np.float64).reshape(-1, 3),
        margin_marking=None if d.get("margin_marking") is None else Shape2D(d["margin_marking"]),
        seed_marking=arr("seed_marking"),
        started_ms=d.get("started_ms", 0.0),
        ended_ms=d.get("ended_ms", 0.0),
        partial=d.get("partial", False),
        report=None if d.get("report") is None else MetricsReport.from_dict(d["report"]),
        margin_points_3d=arr("margin_points_3d"),
        seed_point_3d=arr("seed_point_3d"),
        gt_margin_points_3d=arr("gt_margin_points_3d"),
        gt_seed_point_3d=arr("gt_seed_point_3d"),
    )


def session_header(record: SessionRecord) -> dict:
    return {
        "type": "header",
        "version": SESSION_FILE_VERSION,
        "session_id": record.session_id,
        "participant": record.participant,
        "config": record.config.to_dict(),
    }


def save_session(record: SessionRecord, path) -> None:
    """JSON Lines: one header line, then one line per trial."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(session_header(record)) + "\n")
        for t in record.trials:
            fh.write(json.dumps(_trial_to_dict(t)) + "\n")


def load_session(path) -> SessionRecord:
    record = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
            try:
                if doc.get("type") == "header":
                    if doc.get("version") != SESSION_FILE_VERSION:
                        raise FormatError(f"{path}: line {lineno}: unsupported session version")
                    record = SessionRecord(
                        session_id=doc["session_id"],
                        participant=doc.get("participant", ""),
                        config=MappingConfig.from_dict(doc["config"]),
                    )
                elif doc.get("type") == "trial":
                    if record is None:
                        raise FormatError(f"{path}: line {lineno}: trial before header")
                    record.trials.append(_trial_from_dict(doc))
                else:
                    raise FormatError(f"{path}: line {lineno}: unknown record type {doc.get('type')!r}")
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(f"{path}: line {lineno}: malformed record: {exc}") from exc
    if record is None:
        raise FormatError(f"{path}: missing header line")
    return record


def replay(record: SessionRecord, pool: ShapePool) -> dict[str, list[ParamEvent]]:
    """Re-run the mappings over each trial's stored trace.

    Produces the exact parameter stream the participant heard: same
    features, same mapping, same config snapshot."""
    if record.config is None:
        raise ValidationError("session record has no config snapshot")
    streams: dict[str, list[ParamEvent]] = {}
    for trial in record.trials:
        entry = pool.get(trial.shape_id)
        events = []
        for t_ms, x, y in trial.trace:
            f = compute_features(entry.shape, entry.seed, (x, y))
            events.append(ParamEvent(t_ms=float(t_ms), params=map_params(trial.model, f, record.config)))
        streams[trial.trial_id] = events
    return streams
