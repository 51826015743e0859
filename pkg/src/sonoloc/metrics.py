"""Scoring pipeline: rasterization, connected components, circularity,
Dice, area ratio, intercentroid distance, resection ratio and IQR outlier
filtering.

Conventions that the original analysis left open are fixed here and kept
stable for reproducibility: quartiles interpolate order statistics
linearly, and component perimeter is the 8-connected chain-code contour
length with Kulpa's unbiased step weights (0.948 axial, 0.948*sqrt(2)
diagonal; the raw weights overestimate smooth contours by ~5.5%, which
would push disk circularity well below 1).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ComponentNotFoundError, GridMismatchError, ValidationError
from .geometry import Shape2D

DEFAULT_RESOLUTION_MM = 0.5
TUMOR_CIRCULARITY_MIN = 0.3


@dataclass(frozen=True)
class RasterGrid:
    width_px: int
    height_px: int
    resolution_mm_per_px: float = DEFAULT_RESOLUTION_MM
    origin_mm: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValidationError("grid dimensions must be positive")
        if not self.resolution_mm_per_px > 0:
            raise ValidationError("resolution must be positive")

    @property
    def extent_mm(self) -> tuple[float, float]:
        return (self.width_px * self.resolution_mm_per_px, self.height_px * self.resolution_mm_per_px)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        res = self.resolution_mm_per_px
        xs = self.origin_mm[0] + (np.arange(self.width_px) + 0.5) * res
        ys = self.origin_mm[1] + (np.arange(self.height_px) + 0.5) * res
        return xs, ys


def board_grid(size_mm: float = 150.0, resolution_mm_per_px: float = DEFAULT_RESOLUTION_MM) -> RasterGrid:
    """Square drawing-board grid (default 15 x 15 cm at 0.5 mm/px)."""
    n = int(round(size_mm / resolution_mm_per_px))
    return RasterGrid(width_px=n, height_px=n, resolution_mm_per_px=resolution_mm_per_px)


@dataclass
class RasterMask:
    """Row-major boolean image; bits[y, x] covers pixel (x, y)."""

    bits: np.ndarray
    grid: RasterGrid

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != (self.grid.height_px, self.grid.width_px):
            raise ValidationError("bits shape does not match grid")
        self.bits = b

    @property
    def area_px(self) -> int:
        return int(self.bits.sum())

    def same_grid(self, other: "RasterMask") -> bool:
        return self.grid == other.grid


def rasterize(shape: Shape2D, grid: RasterGrid) -> RasterMask:
    """Even-odd fill: a pixel is set iff its center lies inside the polygon.

    Even-odd filling doubles as the cleaning rule for self-intersecting
    user-drawn margins.
    """
    lo, hi = shape.bounds()
    gx0, gy0 = grid.origin_mm
    ex, ey = grid.extent_mm
    if lo[0] < gx0 or lo[1] < gy0 or hi[0] > gx0 + ex or hi[1] > gy0 + ey:
        raise ValidationError("shape exceeds the raster grid")
    xs, ys = grid.pixel_centers()
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    inside = kernels.polygon_contains_batch(shape.vertices, pts)
    return RasterMask(bits=inside.reshape(grid.height_px, grid.width_px).astype(bool), grid=grid)


@dataclass
class Component:
    """8-connected pixel component of a raster mask."""

    label: int
    pixels_yx: np.ndarray  # (k, 2) int row/col indices
    area_px: int
    perimeter_px: float
    centroid_mm: np.ndarray
    circularity: float

    def mask(self, grid: RasterGrid) -> RasterMask:
        bits = np.zeros((grid.height_px, grid.width_px), dtype=bool)
        bits[self.pixels_yx[:, 0], self.pixels_yx[:, 1]] = True
        return RasterMask(bits=bits, grid=grid)


_MOORE = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
CHAIN_STEP_AXIAL = 0.948
CHAIN_STEP_DIAGONAL = 0.948 * math.sqrt(2.0)
_STEP_LEN = (CHAIN_STEP_AXIAL, CHAIN_STEP_DIAGONAL) * 4


def _chain_perimeter(is_set, start_yx, max_steps: int) -> float:
    """Moore-neighbor boundary trace from the component's first raster pixel.

    Stops when the first move repeats (Jacob's criterion); isolated pixels
    use the convention P = 4.
    """
    y0, x0 = start_yx
    if not any(is_set(y0 + dy, x0 + dx) for dy, dx in _MOORE):
        return 4.0
    y, x = y0, x0
    backtrack = 4  # raster scan arrives at the first pixel from the west
    perimeter = 0.0
    first_move = None
    for _ in range(max_steps):
        d = (backtrack + 1) % 8
        found = None
        for _ in range(8):
            dy, dx = _MOORE[d]
            if is_set(y + dy, x + dx):
                found = d
                break
            d = (d + 1) % 8
        move = (y, x, found)
        if first_move is None:
            first_move = move
        elif move == first_move:
            break
        perimeter += _STEP_LEN[found]
        y += _MOORE[found][0]
        x += _MOORE[found][1]
        backtrack = (found + 4) % 8
    return perimeter


def connected_components(mask: RasterMask) -> list[Component]:
    """Partition set pixels into 8-connected components.

    Components come back ordered by the raster position of their first
    pixel. An empty mask yields an empty list.
    """
    labels, count = kernels.label_8connected(mask.bits)
    if count == 0:
        return []
    res = mask.grid.resolution_mm_per_px
    ox, oy = mask.grid.origin_mm
    h, w = labels.shape
    comps = []
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(labels == lab)
        area = len(ys)
        cx = ox + (xs.mean() + 0.5) * res
        cy = oy + (ys.mean() + 0.5) * res

        def is_set(y, x, _lab=lab):
            return 0 <= y < h and 0 <= x < w and labels[y, x] == _lab

        start = (int(ys[0]), int(xs[0]))
        perim = _chain_perimeter(is_set, start, max_steps=8 * area + 64) if area > 1 else 4.0
        comps.append(
            Component(
                label=lab,
                pixels_yx=np.column_stack([ys, xs]),
                area_px=area,
                perimeter_px=perim,
                centroid_mm=np.array([cx, cy]),
                circularity=circularity_value(area, perim),
            )
        )
    return comps


def circularity_value(area: float, perimeter: float) -> float:
    """Perimeter-corrected circularity of a region.

    circularity = (4 pi A / P^2) * (1 - 0.5/r)^2 with r = P/(2 pi) + 0.5.
    The squared correction compensates the digital perimeter bias that
    otherwise drags small regions' 4 pi A / P^2 away from 1.
    """
    if perimeter <= 0:
        raise ValidationError("perimeter must be > 0")
    r = perimeter / (2.0 * math.pi) + 0.5
    return (4.0 * math.pi * area / (perimeter * perimeter)) * (1.0 - 0.5 / r) ** 2


def circularity(c: Component) -> float:
    return circularity_value(c.area_px, c.perimeter_px)


def isolate_tumor(mask: RasterMask, min_circularity: float = TUMOR_CIRCULARITY_MIN) -> tuple[Component, bool]:
    """Largest sufficiently circular component.

    Returns (component, fallback) where fallback is True when no component
    met the circularity threshold and the largest overall was returned.
    """
    comps = connected_components(mask)
    if not comps:
        raise ComponentNotFoundError("mask has no set pixels")
    circular = [c for c in comps if c.circularity >= min_circularity]
    if circular:
        return max(circular, key=lambda c: c.area_px), False
    return max(comps, key=lambda c: c.area_px), True


def _filled_region(comp: Component, grid: RasterGrid) -> np.ndarray:
    bits = comp.mask(grid).bits
    return ndimage.binary_fill_holes(bits)


def isolate_seed(mask: RasterMask, tumor: Component) -> Component:
    """Largest non-tumor component whose centroid falls inside the tumor's
    filled region."""
    comps = connected_components(mask)
    filled = _filled_region(tumor, mask.grid)
    res = mask.grid.resolution_mm_per_px
    ox, oy = mask.grid.origin_mm
    h, w = filled.shape
    candidates = []
    for c in comps:
        if c.label == tumor.label and c.area_px == tumor.area_px:
            continue
        ix = int((c.centroid_mm[0] - ox) / res)
        iy = int((c.centroid_mm[1] - oy) / res)
        if 0 <= iy < h and 0 <= ix < w and filled[iy, ix]:
            candidates.append(c)
    if not candidates:
        raise ComponentNotFoundError("no component lies inside the tumor region")
    return max(candidates, key=lambda c: c.area_px)


def _require_same_grid(a: RasterMask, b: RasterMask) -> None:
    if not a.same_grid(b):
        raise GridMismatchError("masks are on different grids")


def dice(a: RasterMask, b: RasterMask) -> float:
    """Sorensen-Dice overlap 2|A n B| / (|A| + |B|); both empty => 1."""
    _require_same_grid(a, b)
    na = a.area_px
    nb = b.area_px
    if na + nb == 0:
        return 1.0
    return 2.0 * int((a.bits & b.bits).sum()) / (na + nb)


def area_ratio(ds: RasterMask, gt: RasterMask) -> float:
    """Drawn-over-ground-truth area ratio."""
    _require_same_grid(ds, gt)
    if gt.area_px == 0:
        raise ValidationError("ground-truth mask is empty")
    return ds.area_px / gt.area_px


def intercentroid(ds_seed: Component, gt_seed: Component) -> float:
    """Euclidean distance between component centroids, in mm."""
    d = ds_seed.centroid_mm - gt_seed.centroid_mm
    return float(np.hypot(d[0], d[1]))


@dataclass(frozen=True)
class MetricsReport:
    dice: float
    area_ratio: float
    intercentroid_mm: float
    crr: float | None = None

    def to_dict(self) -> dict:
        return {
            "dice": self.dice,
            "area_ratio": self.area_ratio,
            "intercentroid_mm": self.intercentroid_mm,
            "crr": self.crr,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            dice=d["dice"],
            area_ratio=d["area_ratio"],
            intercentroid_mm=d["intercentroid_mm"],
            crr=d.get("crr"),
        )


@dataclass
class VoxelMask:
    """Isotropic voxel grid; bits[z, y, x]."""

    bits: np.ndarray
    voxel_size_mm: float

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 3 or min(b.shape) == 0:
            raise ValidationError("voxel mask must be non-empty 3-D")
        if not self.voxel_size_mm > 0:
            raise ValidationError("voxel size must be > 0")
        self.bits = b

    @property
    def volume_voxels(self) -> int:
        return int(self.bits.sum())


def crr(trv: VoxelMask, tumor: VoxelMask, margin_mm: float = 2.0) -> float:
    """Resection ratio: total resection volume over optimal resection volume.

    ORV is the tumor dilated by a Euclidean ball of `margin_mm` (radius in
    voxels = round(margin / voxel size)).
    """
    if trv.bits.shape != tumor.bits.shape or trv.voxel_size_mm != tumor.voxel_size_mm:
        raise GridMismatchError("voxel masks are on different grids")
    if tumor.volume_voxels == 0:
        raise ValidationError("tumor mask is empty")
    radius_vox = round(margin_mm / tumor.voxel_size_mm)
    dist = ndimage.distance_transform_edt(~tumor.bits)
    orv = dist <= radius_vox
    return trv.volume_voxels / int(orv.sum())


def iqr_filter(values) -> tuple[np.ndarray, np.ndarray]:
    """Split values into (kept, removed) by the 1.5 IQR fence.

    Quartiles use linear interpolation of order statistics; input order is
    preserved in both outputs.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or len(arr) < 4:
        raise ValidationError("need at least 4 values for the IQR fence")
    q1, q3 = np.percentile(arr, [25.0, 75.0])
    iqr = q3 - q1
    lo = q1 - 1.5 * iqr
    hi = q3 + 1.5 * iqr
    keep = (arr >= lo) & (arr <= hi)
    return arr[keep], arr[~keep]


def save_pgm(mask: RasterMask, path) -> None:
    """Binary PGM (P5), 255 = set pixel."""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mask.grid.width_px} {mask.grid.height_px}\n255\n".encode("ascii"))
        fh.write((mask.bits.astype(np.uint8) * 255).tobytes())


def load_pgm(path, resolution_mm_per_px: float = DEFAULT_RESOLUTION_MM, origin_mm=(0.0, 0.0)) -> RasterMask:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        tokens = []
        pos = 0
        while len(tokens) < 4:
            if data[pos : pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            if end > pos:
                tokens.append(data[pos:end])
            pos = end + 1
        if tokens[0] != b"P5":
            raise ValidationError("not a P5 PGM file")
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        raw = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w)
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"malformed PGM file: {exc}") from exc
    grid = RasterGrid(width_px=w, height_px=h, resolution_mm_per_px=resolution_mm_per_px, origin_mm=tuple(origin_mm))
    return RasterMask(bits=raw > maxval // 2, grid=grid)


REPORT_COLUMNS = ["session_id", "trial_id", "model", "dice", "area_ratio", "intercentroid_mm", "crr", "outlier_flag"]


def write_report_csv(rows: list[dict], path) -> None:
    """Metric report rows -> CSV with the fixed column set."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for col in ("dice", "area_ratio", "intercentroid_mm", "crr"):
                v = out.get(col)
                out[col] = "" if v is None else f"{v:.9g}"
            writer.writerow(out)


def flag_outliers(rows: list[dict], columns=("dice", "area_ratio", "intercentroid_mm", "crr")) -> None:
    """Fill each row's outlier_flag with the metric columns where the value
    falls outside the IQR fence (computed per column over all rows)."""
    for row in rows:
        row.setdefault("outlier_flag", "")
    for col in columns:
        vals = [(i, row[col]) for i, row in enumerate(rows) if row.get(col) is not None]
        if len(vals) < 4:
            continue
        arr = np.array([v for _, v in vals])
        q1, q3 = np.percentile(arr, [25.0, 75.0])
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        for i, v in vals:
            if v < lo or v > hi:
                flag = rows[i]["outlier_flag"]
                rows[i]["outlier_flag"] = f"{flag};{col}" if flag else col
