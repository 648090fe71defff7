"""Simulated object detection and dominant-color recognition.

Detection boxes come from projecting each object's 3D bounding-box corners
through the camera (a ground-truth stand-in for a learned detector), with
optional corner jitter and per-object misses. Colors inside each box are
named by k-means clustering of the RGB crop against a fixed palette.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DepthZero, EmptyCrop
from .geometry import CameraIntrinsics, RigidTransform, WorldGrasp, deproject, normalize_angle, project
from .scene import DepthImage, RgbImage, Scene, SceneObject, render_rgb

DEFAULT_PALETTE: tuple[tuple[str, tuple[int, int, int]], ...] = (
    ("Red", (220, 20, 60)),
    ("Green", (0, 128, 0)),
    ("Blue", (0, 0, 255)),
    ("Yellow", (255, 215, 0)),
    ("Pink", (255, 105, 180)),
    ("Orange", (255, 140, 0)),
    ("Black", (20, 20, 20)),
    ("White", (240, 240, 240)),
    ("Brown", (139, 69, 19)),
    ("Purple", (128, 0, 128)),
    ("Gray", (128, 128, 128)),
)

PALETTE_NAMES = tuple(name for name, _ in DEFAULT_PALETTE)

# detection crops are widened by this margin before color naming; real
# detector boxes are loose, and the margin is what lets background color
# bleed into the reported colors (e.g. a banana listing the table's green)
COLOR_CROP_MARGIN_PX = 2


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, u_min <= u_max and v_min <= v_max."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self) -> None:
        if self.u_min > self.u_max or self.v_min > self.v_max:
            raise ValueError("degenerate bbox: min exceeds max")

    @property
    def width(self) -> float:
        return self.u_max - self.u_min

    @property
    def height(self) -> float:
        return self.v_max - self.v_min

    def expanded(self, margin: float, width: int, height: int) -> "BBox":
        return BBox(max(self.u_min - margin, 0.0), max(self.v_min - margin, 0.0),
                    min(self.u_max + margin, width - 1.0), min(self.v_max + margin, height - 1.0))


@dataclass(frozen=True)
class Detection:
    index: int
    bbox: BBox
    label: str
    confidence: float
    colors: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class DetectorNoise:
    """Bounding-box corner jitter and per-object miss probability."""

    jitter_sigma: float = 0.0
    miss_p: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if not (0.0 <= self.miss_p < 1.0):
            raise ValueError("miss_p must be in [0, 1)")


NO_DETECTOR_NOISE = DetectorNoise()


def box_center(b: BBox) -> tuple[float, float]:
    """Center of the box: corner averages."""
    return ((b.u_min + b.u_max) / 2.0, (b.v_min + b.v_max) / 2.0)


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    sse_per_iteration: tuple[float, ...]


# crops with at most this many distinct values get an exact seeding: the
# best weighted partition of distinct values (identical points always share
# an optimal cluster) is found by enumeration and handed to Lloyd, which is
# already a fixed point there; farthest-point init alone can capture an
# outlier and settle far from the best partition on tiny crops
_EXACT_SEED_LIMIT = 10
_FALLBACK_RESTARTS = 8


def _lloyd(pts: np.ndarray, centers: np.ndarray, max_iter: int, tol: float) -> KMeansResult:
    n = len(pts)
    centers = centers.astype(float).copy()
    sse_history = []
    assignment = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assignment = np.argmin(dists, axis=1)
        sse_history.append(float(dists[np.arange(n), assignment].sum()))
        new_centers = centers.copy()
        for j in range(len(centers)):
            member = assignment == j
            if member.any():
                new_centers[j] = pts[member].mean(axis=0)
        movement = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if movement < tol:
            break
    dists = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assignment = np.argmin(dists, axis=1)
    sse_history.append(float(dists[np.arange(n), assignment].sum()))
    return KMeansResult(centroids=centers, assignment=assignment,
                        sse_per_iteration=tuple(sse_history))


def _farthest_point_centers(pts: np.ndarray, k: int, first: int) -> np.ndarray:
    centroids = [pts[first]]
    d2 = np.sum((pts - centroids[0]) ** 2, axis=1)
    while len(centroids) < k:
        far = int(np.argmax(d2))
        if d2[far] == 0.0:
            break
        centroids.append(pts[far])
        d2 = np.minimum(d2, np.sum((pts - centroids[-1]) ** 2, axis=1))
    return np.array(centroids)


def _best_weighted_partition_centers(values: np.ndarray, weights: np.ndarray,
                                     k: int) -> np.ndarray:
    """Optimal SSE grouping of weighted distinct values into <= k groups.

    Canonical enumeration (value 0 in group 0, each next value opens at most
    one new group) visits every set partition once; ties keep the first.
    """
    d = len(values)
    w_sq = weights * np.sum(values * values, axis=1)
    w_val = weights[:, None] * values
    best_sse = math.inf
    best_assign: tuple[int, ...] | None = None
    stack: list[tuple[tuple[int, ...], int]] = [((0,), 0)]
    while stack:
        assignment, max_used = stack.pop()
        if len(assignment) == d:
            sse = 0.0
            for g in range(max_used + 1):
                members = [i for i, a in enumerate(assignment) if a == g]
                total_w = weights[members].sum()
                mean = w_val[members].sum(axis=0) / total_w
                sse += w_sq[members].sum() - total_w * float(mean @ mean)
            if sse < best_sse - 1e-12:
                best_sse, best_assign = sse, assignment
            continue
        for g in range(min(max_used + 1, k - 1) + 1):
            stack.append((assignment + (g,), max(max_used, g)))
    groups = max(best_assign) + 1
    centers = np.empty((groups, values.shape[1]))
    for g in range(groups):
        members = [i for i, a in enumerate(best_assign) if a == g]
        centers[g] = w_val[members].sum(axis=0) / weights[members].sum()
    return centers


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 50,
           tol: float = 1e-3) -> KMeansResult:
    """Deterministic k-means: Lloyd iterations from a swept initialization.

    Crops with few distinct values (the common case for detection crops) are
    seeded with the exact optimal grouping of the weighted distinct values,
    where Lloyd is already a fixed point, so the result attains the
    exhaustive-partition SSE optimum. High-cardinality inputs fall back to
    seeded farthest-point initialization with a fixed number of restarts.
    All tie-breaks are by enumeration order, so identical inputs and seed
    give identical output.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        raise ValueError("kmeans requires at least one point")
    if not (1 <= k <= n):
        raise ValueError(f"k={k} out of range for {n} points")

    distinct, counts = np.unique(pts, axis=0, return_counts=True)
    k_eff = min(k, len(distinct))
    if len(distinct) <= _EXACT_SEED_LIMIT:
        centers = _best_weighted_partition_centers(distinct, counts.astype(float), k_eff)
        return _lloyd(pts, centers, max_iter, tol)

    best: KMeansResult | None = None
    rng = np.random.default_rng(seed)
    firsts = [int(rng.integers(n)) for _ in range(_FALLBACK_RESTARTS)]
    for first in firsts:
        result = _lloyd(pts, _farthest_point_centers(pts, k_eff, first), max_iter, tol)
        if best is None or result.sse_per_iteration[-1] < best.sse_per_iteration[-1] - 1e-12:
            best = result
    return best


def _crop_pixels(img: RgbImage, b: BBox) -> np.ndarray:
    u0 = int(round(b.u_min))
    u1 = int(round(b.u_max))
    v0 = int(round(b.v_min))
    v1 = int(round(b.v_max))
    u0, u1 = max(u0, 0), min(u1, img.width - 1)
    v0, v1 = max(v0, 0), min(v1, img.height - 1)
    if u1 < u0 or v1 < v0:
        raise EmptyCrop(f"bbox ({b.u_min}, {b.v_min}, {b.u_max}, {b.v_max}) contains no pixels")
    return img.values[v0:v1 + 1, u0:u1 + 1].reshape(-1, 3).astype(float)


def name_color(rgb, palette=DEFAULT_PALETTE) -> str:
    """Nearest palette anchor by Euclidean RGB distance; ties to palette order."""
    anchors = np.array([a for _, a in palette], dtype=float)
    d = np.sum((anchors - np.asarray(rgb, dtype=float)) ** 2, axis=1)
    return palette[int(np.argmin(d))][0]


def dominant_colors(img: RgbImage, b: BBox, k: int = 3,
                    palette=DEFAULT_PALETTE, seed: int = 0) -> list[tuple[str, float]]:
    """Name the dominant colors inside a box by k-means over its RGB pixels.

    Clusters named alike are merged with their fractions summed; the output
    is sorted by descending fraction, ties broken by palette order.
    """
    pixels = _crop_pixels(img, b)
    result = kmeans(pixels, min(k, len(pixels)), seed=seed)
    order = {name: i for i, (name, _) in enumerate(palette)}
    merged: dict[str, float] = {}
    counts = np.bincount(result.assignment, minlength=len(result.centroids))
    for j, centroid in enumerate(result.centroids):
        if counts[j] == 0:
            continue
        name = name_color(centroid, palette)
        merged[name] = merged.get(name, 0.0) + counts[j] / len(pixels)
    return sorted(merged.items(), key=lambda item: (-item[1], order[item[0]]))


def _object_corners(obj: SceneObject) -> np.ndarray:
    """World-frame corners of the object's 3D bounding box."""
    if obj.shape == "box":
        hx, hy, hz = obj.dims[0] / 2.0, obj.dims[1] / 2.0, obj.dims[2]
        c, s = math.cos(obj.yaw), math.sin(obj.yaw)
        corners = []
        for sx in (-hx, hx):
            for sy in (-hy, hy):
                wx = obj.x + c * sx - s * sy
                wy = obj.y + s * sx + c * sy
                corners.append((wx, wy, 0.0))
                corners.append((wx, wy, hz))
        return np.array(corners)
    r = obj.dims[0] / 2.0
    top = obj.dims[0] if obj.shape == "sphere" else obj.dims[2]
    corners = []
    for sx in (-r, r):
        for sy in (-r, r):
            corners.append((obj.x + sx, obj.y + sy, 0.0))
            corners.append((obj.x + sx, obj.y + sy, top))
    return np.array(corners)


def detect(scene: Scene, cam: RigidTransform, k: CameraIntrinsics,
           noise: DetectorNoise = NO_DETECTOR_NOISE,
           rgb: RgbImage | None = None,
           palette=DEFAULT_PALETTE) -> list[Detection]:
    """Detect every non-missed object as a labeled, color-annotated box.

    Boxes bound the projected 3D bounding-box corners, jittered and clipped
    to the image. Output is ordered by (u_min, v_min) and indexed 0..n-1.
    Draws from the noise stream happen in scene-object order so results are
    reproducible regardless of output ordering.
    """
    if rgb is None:
        rgb = render_rgb(scene, cam, k)
    cam_inv = cam.inverse()
    rng = np.random.default_rng(noise.seed)
    raw = []
    for obj in scene.objects:
        missed = rng.random() < noise.miss_p
        jitter = rng.normal(0.0, 1.0, 4) * noise.jitter_sigma
        if missed:
            continue
        pixels = [project(k, cam_inv.apply(corner)) for corner in _object_corners(obj)]
        us = [p[0] for p in pixels]
        vs = [p[1] for p in pixels]
        u_min = min(us) + jitter[0]
        v_min = min(vs) + jitter[1]
        u_max = max(us) + jitter[2]
        v_max = max(vs) + jitter[3]
        u_min, u_max = min(u_min, u_max), max(u_min, u_max)
        v_min, v_max = min(v_min, v_max), max(v_min, v_max)
        bbox = BBox(float(np.clip(u_min, 0, k.width - 1)), float(np.clip(v_min, 0, k.height - 1)),
                    float(np.clip(u_max, 0, k.width - 1)), float(np.clip(v_max, 0, k.height - 1)))
        confidence = float(np.clip(
            1.0 - np.mean(np.abs(jitter)) / (3.0 * noise.jitter_sigma + 1e-9), 0.5, 1.0))
        color_seed = int(np.random.SeedSequence((noise.seed, obj.id)).generate_state(1)[0])
        colors = dominant_colors(rgb, bbox.expanded(COLOR_CROP_MARGIN_PX, k.width, k.height),
                                 k=3, palette=palette, seed=color_seed)
        raw.append((bbox, obj.class_label, confidence, tuple(colors)))

    raw.sort(key=lambda item: (item[0].u_min, item[0].v_min))
    return [Detection(index=i, bbox=b, label=label, confidence=conf, colors=colors)
            for i, (b, label, conf, colors) in enumerate(raw)]


def _depth_near(depth: DepthImage, u: float, v: float, radius: int = 3) -> float:
    """Depth at the nearest non-zero pixel within ``radius`` of (u, v).

    Candidates are scanned in deterministic order (distance, then row-major).
    Raises DepthZero when every candidate is zero or out of bounds.
    """
    ui, vi = int(round(u)), int(round(v))
    offsets = sorted(((dv * dv + du * du, dv, du)
                      for dv in range(-radius, radius + 1)
                      for du in range(-radius, radius + 1)))
    for _, dv, du in offsets:
        uu, vv = ui + du, vi + dv
        if 0 <= uu < depth.width and 0 <= vv < depth.height:
            d = float(depth.values[vv, uu])
            if d > 0:
                return d
    raise DepthZero(f"no valid depth within {radius} px of ({u:.1f}, {v:.1f})")


def detection_to_world_grasp(d: Detection, depth: DepthImage, k: CameraIntrinsics,
                             t_rc: RigidTransform, w_max: float = 0.085) -> WorldGrasp:
    """Box-center grasp: deproject the bbox center, grasp across the shorter side.

    A strictly taller box is grasped at phi=0, otherwise (including square
    boxes) at phi=pi/2. Width is the shorter box side in meters at the
    center depth plus 1 cm, capped at the gripper maximum.
    """
    uc, vc = box_center(d.bbox)
    depth_value = _depth_near(depth, uc, vc)
    p = t_rc.apply(deproject(k, uc, vc, depth_value))
    phi = 0.0 if d.bbox.width < d.bbox.height else math.pi / 2.0
    shorter_px = min(d.bbox.width, d.bbox.height)
    w = min(shorter_px * depth_value / k.fx + 0.01, w_max)
    return WorldGrasp(x=float(p[0]), y=float(p[1]), z=float(p[2]),
                      phi=normalize_angle(phi), w=float(w), q=float(d.confidence))
