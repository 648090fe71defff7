"""Ground-truth tabletop world model and synthetic depth/RGB rendering.

Objects rest on the table plane z=0 and are one of three analytic
primitives: box (yaw about z), vertical cylinder, or sphere. Rendering is
an exact per-pixel raycast against these primitives plus the table plane;
a pixel's depth is the Euclidean distance along the ray to the nearest
hit, 0 when nothing is hit. Sensor corruption (Gaussian jitter, then
dropout to 0) is applied after the raycast from its own seeded stream so
geometric truth and noise can be toggled independently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CameraBelowTable, ParseError, ValidationError
from .geometry import CameraIntrinsics, RigidTransform

CLASS_VOCABULARY = ("banana", "apple", "block", "bottle", "orange", "spoon", "bowl", "cup")
CONTAINER_CLASSES = frozenset({"bowl", "cup"})
SHAPES = ("box", "cylinder", "sphere")

DEFAULT_TABLE_COLOR = (0, 128, 0)


@dataclass(frozen=True)
class SceneObject:
    """One tabletop object; base rests on the table plane z=0."""

    id: int
    class_label: str
    shape: str
    dims: tuple[float, float, float]
    pose: tuple[float, float, float]  # x, y, yaw
    color: tuple[int, int, int]
    container: bool = False

    @property
    def x(self) -> float:
        return self.pose[0]

    @property
    def y(self) -> float:
        return self.pose[1]

    @property
    def yaw(self) -> float:
        return self.pose[2]

    @property
    def radius(self) -> float:
        """Footprint radius: half-diameter for round shapes, circumradius for boxes."""
        if self.shape == "box":
            return math.hypot(self.dims[0], self.dims[1]) / 2.0
        return self.dims[0] / 2.0

    @property
    def top_z(self) -> float:
        if self.shape == "sphere":
            return self.dims[0]
        return self.dims[2]

    @property
    def min_footprint_extent(self) -> float:
        if self.shape == "box":
            return min(self.dims[0], self.dims[1])
        return self.dims[0]

    def extent_across(self, phi: float) -> float:
        """Width of the footprint measured along the direction at angle phi."""
        if self.shape == "box":
            rel = phi - self.yaw
            return self.dims[0] * abs(math.cos(rel)) + self.dims[1] * abs(math.sin(rel))
        return self.dims[0]


@dataclass(frozen=True)
class Scene:
    """Immutable tabletop snapshot; the executor mutates by producing a new Scene."""

    table_size: tuple[float, float]
    table_color: tuple[int, int, int]
    seed: int
    objects: tuple[SceneObject, ...]

    def labels_present(self) -> frozenset[str]:
        return frozenset(obj.class_label for obj in self.objects)

    def object_by_id(self, object_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def replace_object(self, updated: SceneObject) -> "Scene":
        objs = tuple(updated if o.id == updated.id else o for o in self.objects)
        return replace(self, objects=objs)

    def remove_object(self, object_id: int) -> "Scene":
        objs = tuple(o for o in self.objects if o.id != object_id)
        return replace(self, objects=objs)


@dataclass(frozen=True)
class SensorNoise:
    """Depth sensor corruption: Gaussian jitter then dropout-to-zero."""

    dropout_p: float = 0.0
    jitter_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.dropout_p <= 1.0):
            raise ValueError("dropout_p must be in [0, 1]")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


NO_NOISE = SensorNoise()


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major depth in meters; 0 encodes invalid/missing depth."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Row-major RGB triples, uint8."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.uint8)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


# --- scene documents -------------------------------------------------------

def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise ValidationError(f"{context}: missing required key '{key}'")
    return doc[key]


def _color_triple(value, context: str) -> tuple[int, int, int]:
    if (not isinstance(value, (list, tuple))) or len(value) != 3:
        raise ValidationError(f"{context}: color must be a 3-element list")
    triple = []
    for c in value:
        if not isinstance(c, (int, float)) or not (0 <= c <= 255):
            raise ValidationError(f"{context}: color components must be in 0..255")
        triple.append(int(c))
    return tuple(triple)


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise ValidationError("scene document must be an object")
    table = _require(doc, "table", "scene")
    size_x = float(_require(table, "size_x", "table"))
    size_y = float(_require(table, "size_y", "table"))
    if size_x <= 0 or size_y <= 0:
        raise ValidationError("table extents must be positive")
    table_color = _color_triple(table.get("color", DEFAULT_TABLE_COLOR), "table")
    seed = int(doc.get("seed", 0))

    objects = []
    seen_ids = set()
    for entry in _require(doc, "objects", "scene"):
        context = f"object {entry.get('id', '?')}"
        obj_id = int(_require(entry, "id", context))
        if obj_id in seen_ids:
            raise ValidationError(f"{context}: duplicate id")
        seen_ids.add(obj_id)
        label = _require(entry, "class", context)
        if label not in CLASS_VOCABULARY:
            raise ValidationError(f"{context}: unknown class '{label}'")
        shape = _require(entry, "shape", context)
        if shape not in SHAPES:
            raise ValidationError(f"{context}: unknown shape '{shape}'")
        dims = tuple(float(d) for d in _require(entry, "dims", context))
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValidationError(f"{context}: dims must be 3 positive extents")
        pose = _require(entry, "pose", context)
        x = float(_require(pose, "x", context))
        y = float(_require(pose, "y", context))
        yaw = float(pose.get("yaw", 0.0))
        color = _color_triple(_require(entry, "color", context), context)
        container = bool(entry.get("container", label in CONTAINER_CLASSES))
        obj = SceneObject(id=obj_id, class_label=label, shape=shape, dims=dims,
                          pose=(x, y, yaw), color=color, container=container)
        if abs(x) + obj.radius > size_x / 2 + 1e-9 or abs(y) + obj.radius > size_y / 2 + 1e-9:
            raise ValidationError(f"{context}: footprint outside table bounds")
        objects.append(obj)

    return Scene(table_size=(size_x, size_y), table_color=table_color,
                 seed=seed, objects=tuple(objects))


def load_scene(text: str) -> Scene:
    """Parse and validate a UTF-8 JSON scene document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scene document is not valid JSON: {exc}") from exc
    return scene_from_dict(doc)


def scene_to_dict(scene: Scene) -> dict:
    return {
        "table": {
            "size_x": scene.table_size[0],
            "size_y": scene.table_size[1],
            "color": list(scene.table_color),
        },
        "seed": scene.seed,
        "objects": [
            {
                "id": o.id,
                "class": o.class_label,
                "shape": o.shape,
                "dims": list(o.dims),
                "pose": {"x": o.pose[0], "y": o.pose[1], "yaw": o.pose[2]},
                "color": list(o.color),
                "container": o.container,
            }
            for o in scene.objects
        ],
    }


def dump_scene(scene: Scene) -> str:
    """Canonical JSON serialization (sorted keys, compact separators)."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"))


# --- raycasting ------------------------------------------------------------

def _pixel_rays(cam: RigidTransform, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """World-frame unit ray directions for every pixel, plus the common origin."""
    u = (np.arange(k.width, dtype=float) - k.cx) / k.fx
    v = (np.arange(k.height, dtype=float) - k.cy) / k.fy
    d = np.empty((k.height, k.width, 3))
    d[..., 0] = u[None, :]
    d[..., 1] = v[:, None]
    d[..., 2] = 1.0
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    return d @ cam.rotation.T, cam.translation


def _slab(o: float, d: np.ndarray, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    inside = (lo <= o) & (o <= hi)
    parallel = d == 0
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    return near, far


def _raycast_box(obj: SceneObject, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    c, s = math.cos(-obj.yaw), math.sin(-obj.yaw)
    ox = origin[0] - obj.x
    oy = origin[1] - obj.y
    lox = c * ox - s * oy
    loy = s * ox + c * oy
    ldx = c * dirs[..., 0] - s * dirs[..., 1]
    ldy = s * dirs[..., 0] + c * dirs[..., 1]
    hx, hy, hz = obj.dims[0] / 2.0, obj.dims[1] / 2.0, obj.dims[2]
    n1, f1 = _slab(lox, ldx, -hx, hx)
    n2, f2 = _slab(loy, ldy, -hy, hy)
    n3, f3 = _slab(origin[2], dirs[..., 2], 0.0, hz)
    tmin = np.maximum(np.maximum(n1, n2), n3)
    tmax = np.minimum(np.minimum(f1, f2), f3)
    hit = (tmin <= tmax) & (tmin > 1e-9)
    return np.where(hit, tmin, np.inf)


def _raycast_cylinder(obj: SceneObject, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    r = obj.dims[0] / 2.0
    h = obj.dims[2]
    ox = origin[0] - obj.x
    oy = origin[1] - obj.y
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]

    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    cc = ox * ox + oy * oy - r * r
    disc = b * b - 4.0 * a * cc
    ok = (disc >= 0) & (a > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = np.where(ok, (-b - sq) / (2.0 * a), np.inf)
    z_side = origin[2] + t_side * dz
    t_side = np.where((t_side > 1e-9) & (z_side >= 0.0) & (z_side <= h), t_side, np.inf)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_top = np.where(dz != 0, (h - origin[2]) / dz, np.inf)
    px = ox + t_top * dx
    py = oy + t_top * dy
    t_top = np.where((t_top > 1e-9) & (px * px + py * py <= r * r), t_top, np.inf)
    return np.minimum(t_side, t_top)


def _raycast_sphere(obj: SceneObject, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    r = obj.dims[0] / 2.0
    center = np.array([obj.x, obj.y, r])
    oc = origin - center
    b = np.tensordot(dirs, oc, axes=([2], [0]))
    cc = float(oc @ oc) - r * r
    disc = b * b - cc
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = np.where(ok, -b - sq, np.inf)
    return np.where(t > 1e-9, t, np.inf)


_SHAPE_CASTERS = {"box": _raycast_box, "cylinder": _raycast_cylinder, "sphere": _raycast_sphere}


def raycast(scene: Scene, cam: RigidTransform, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel nearest hit: (distance along ray, index).

    Index is the object's position in ``scene.objects``, -1 for the table
    plane, -2 for no hit. Raises CameraBelowTable when the camera cannot see
    the table plane at all.
    """
    if cam.translation[2] <= 0:
        raise CameraBelowTable("camera is at or below the table plane")
    dirs, origin = _pixel_rays(cam, k)

    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = np.where(dz < -1e-12, -origin[2] / dz, np.inf)
    if not np.isfinite(t_plane).any():
        raise CameraBelowTable("no camera ray reaches the table plane")

    best_t = t_plane
    best_idx = np.where(np.isfinite(t_plane), -1, -2)
    for i, obj in enumerate(scene.objects):
        t_obj = _SHAPE_CASTERS[obj.shape](obj, origin, dirs)
        closer = t_obj < best_t
        best_t = np.where(closer, t_obj, best_t)
        best_idx = np.where(closer, i, best_idx)
    return best_t, best_idx


def apply_sensor_noise(depth: DepthImage, noise: SensorNoise) -> DepthImage:
    """Corrupt a depth image: Gaussian jitter on valid pixels, then dropout to 0."""
    rng = np.random.default_rng(noise.seed)
    values = depth.values.copy()
    jitter = rng.normal(0.0, 1.0, values.shape) * noise.jitter_sigma
    drop = rng.random(values.shape) < noise.dropout_p
    valid = values > 0
    values = np.where(valid, np.maximum(values + jitter, 0.0), values)
    values[drop] = 0.0
    return DepthImage(values)


def render_depth(scene: Scene, cam: RigidTransform, k: CameraIntrinsics,
                 noise: SensorNoise = NO_NOISE) -> DepthImage:
    """Raycast depth (distance along the ray to the nearest hit), then apply noise."""
    t, idx = raycast(scene, cam, k)
    depth = DepthImage(np.where(idx >= -1, t, 0.0))
    if noise.dropout_p == 0.0 and noise.jitter_sigma == 0.0:
        return depth
    return apply_sensor_noise(depth, noise)


def render_rgb(scene: Scene, cam: RigidTransform, k: CameraIntrinsics) -> RgbImage:
    """Flat-shaded nearest-hit colors: object color, table color, black for no hit."""
    _, idx = raycast(scene, cam, k)
    palette = np.zeros((len(scene.objects) + 2, 3), dtype=np.uint8)
    palette[0] = (0, 0, 0)
    palette[1] = scene.table_color
    for i, obj in enumerate(scene.objects):
        palette[i + 2] = obj.color
    return RgbImage(palette[idx + 2])


def render_frames(scene: Scene, cam: RigidTransform, k: CameraIntrinsics) -> tuple[DepthImage, RgbImage]:
    """Render depth and RGB from a single raycast."""
    t, idx = raycast(scene, cam, k)
    depth = DepthImage(np.where(idx >= -1, t, 0.0))
    palette = np.zeros((len(scene.objects) + 2, 3), dtype=np.uint8)
    palette[0] = (0, 0, 0)
    palette[1] = scene.table_color
    for i, obj in enumerate(scene.objects):
        palette[i + 2] = obj.color
    return depth, RgbImage(palette[idx + 2])
