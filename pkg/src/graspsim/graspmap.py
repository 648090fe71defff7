"""Pixel-wise grasp synthesis from a depth image.

Produces the per-pixel quality/angle/width planes (Q, Phi, W) and extracts
the best grasp by quality argmax. The synthesizer is analytic:

* object mask: pixels strictly between 0 and the table depth minus a margin;
* Q: Euclidean distance transform of the mask, tilted gently toward the
  component centroid so that flat medial ridges (elongated objects) peak
  at the enclosure-tolerant center instead of tying along the ridge, then
  normalized to [0, 1] per connected component so small objects can still
  win ties;
* Phi: orientation of the minor eigenvector of the mask-pixel covariance in
  a window around each pixel (the grasp axis runs across the object's
  narrow dimension);
* W: mask extent through the pixel along Phi plus a clearance, clamped to
  the pixel equivalent of the gripper's maximum width at the local depth.

Angles follow the u-right/v-up convention of :mod:`graspsim.geometry` and
are normalized to [-pi/2, pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DepthZero, NoGrasp
from .geometry import CameraIntrinsics, ImageGrasp, RigidTransform, WorldGrasp, image_grasp_to_world
from .scene import DepthImage

# per-pixel divisor slope applied to the distance transform by distance from
# the component centroid; large enough to dominate pixelization ripple along
# a medial ridge, small enough to never pull the peak off the ridge
_CENTER_BIAS = 0.05


@dataclass(frozen=True)
class GraspSynthParams:
    """Tuning for the analytic grasp synthesizer.

    ``table_depth`` is the ray distance to the table plane at the principal
    point; the object mask assumes near-axis objects so a scalar threshold
    suffices. ``fx`` is needed to clamp W to the gripper limit in pixels.
    """

    table_depth: float = 0.5
    mask_margin: float = 0.005
    window_radius: int = 15
    q_min: float = 0.2
    w_max: float = 0.085
    clearance_px: float = 4.0
    fx: float = 110.0

    def __post_init__(self) -> None:
        if self.mask_margin <= 0:
            raise ValueError("mask_margin must be positive")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if not (0.0 < self.q_min < 1.0):
            raise ValueError("q_min must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class GraspMap:
    """Per-pixel grasp planes sharing the source depth image's dimensions."""

    q: np.ndarray
    phi: np.ndarray
    w: np.ndarray


def _window_sums(arr: np.ndarray, radius: int) -> np.ndarray:
    """Sum of ``arr`` over a (2r+1)^2 window around each pixel, clipped at borders."""
    h, w = arr.shape
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = arr.cumsum(axis=0).cumsum(axis=1)
    i0 = np.maximum(np.arange(h) - radius, 0)
    i1 = np.minimum(np.arange(h) + radius, h - 1) + 1
    j0 = np.maximum(np.arange(w) - radius, 0)
    j1 = np.minimum(np.arange(w) + radius, w - 1) + 1
    return (sat[np.ix_(i1, j1)] - sat[np.ix_(i0, j1)]
            - sat[np.ix_(i1, j0)] + sat[np.ix_(i0, j0)])


def object_mask(depth: DepthImage, params: GraspSynthParams) -> np.ndarray:
    """Pixels with valid depth strictly above the table plane by the margin."""
    d = depth.values
    return (d > 0) & (d < params.table_depth - params.mask_margin)


def _angle_plane(mask: np.ndarray, radius: int) -> np.ndarray:
    """Minor-eigenvector orientation of windowed mask-pixel covariance.

    Computed in closed form from windowed first/second moments; the angle is
    converted to the u-right/v-up convention and wrapped to [-pi/2, pi/2).
    """
    h, w = mask.shape
    m = mask.astype(float)
    vv, uu = np.indices((h, w), dtype=float)
    n = _window_sums(m, radius)
    n_safe = np.where(n > 0, n, 1.0)
    su = _window_sums(m * uu, radius)
    sv = _window_sums(m * vv, radius)
    suu = _window_sums(m * uu * uu, radius)
    svv = _window_sums(m * vv * vv, radius)
    suv = _window_sums(m * uu * vv, radius)
    mu = su / n_safe
    mv = sv / n_safe
    cuu = suu / n_safe - mu * mu
    cvv = svv / n_safe - mv * mv
    cuv = suv / n_safe - mu * mv
    # major-axis orientation in raster coordinates; minor axis is +pi/2 from it
    theta_major = 0.5 * np.arctan2(2.0 * cuv, cuu - cvv)
    phi = -(theta_major + math.pi / 2.0)
    phi = (phi + math.pi / 2.0) % math.pi - math.pi / 2.0
    return np.where(mask, phi, 0.0)


def _width_plane(mask: np.ndarray, phi: np.ndarray, depth: np.ndarray,
                 params: GraspSynthParams) -> np.ndarray:
    """Mask extent through each mask pixel along its grasp axis, plus clearance."""
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return np.zeros_like(phi)
    ang = phi[ys, xs]
    du = np.cos(ang)
    dv = -np.sin(ang)
    d_here = depth[ys, xs]
    with np.errstate(divide="ignore"):
        w_px_cap = np.where(d_here > 0, params.w_max * params.fx / d_here, np.inf)
    t_cap = int(min(math.ceil(np.max(w_px_cap[np.isfinite(w_px_cap)], initial=1.0))
                    + params.clearance_px + 2, max(h, w)))

    def first_exit(sign: float) -> np.ndarray:
        exit_t = np.full(ys.shape, t_cap + 1, dtype=float)
        alive = np.ones(ys.shape, dtype=bool)
        for t in range(1, t_cap + 1):
            pu = np.rint(xs + sign * t * du).astype(int)
            pv = np.rint(ys + sign * t * dv).astype(int)
            inb = (pu >= 0) & (pu < w) & (pv >= 0) & (pv < h)
            on_mask = np.zeros(ys.shape, dtype=bool)
            on_mask[inb] = mask[pv[inb], pu[inb]]
            newly_dead = alive & ~on_mask
            exit_t[newly_dead] = t
            alive &= on_mask
            if not alive.any():
                break
        return exit_t

    extent = first_exit(1.0) + first_exit(-1.0) - 1.0
    widths = np.minimum(extent + params.clearance_px, w_px_cap)
    plane = np.zeros_like(phi)
    plane[ys, xs] = widths
    return plane


def synthesize_grasp_map(depth: DepthImage, params: GraspSynthParams) -> GraspMap:
    """Build the (Q, Phi, W) planes for a depth image.

    An all-zero Q plane is a valid result for scenes with no object pixels.
    """
    mask = object_mask(depth, params)
    if not mask.any():
        zeros = np.zeros_like(depth.values)
        return GraspMap(q=zeros, phi=zeros.copy(), w=zeros.copy())

    labels, n_comp = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    dist = ndimage.distance_transform_edt(mask)
    # tilt the transform toward each component's centroid: a medial ridge is
    # flat along an elongated object, and without the tilt the argmax would
    # sit at whichever ridge end row-major order reaches first
    indices = np.arange(1, n_comp + 1)
    centers = ndimage.center_of_mass(mask, labels=labels, index=indices)
    cv = np.concatenate(([0.0], [c[0] for c in centers]))
    cu = np.concatenate(([0.0], [c[1] for c in centers]))
    vv, uu = np.indices(mask.shape, dtype=float)
    center_dist = np.hypot(uu - cu[labels], vv - cv[labels])
    tilted = dist / (1.0 + _CENTER_BIAS * center_dist)
    comp_max = ndimage.maximum(tilted, labels=labels, index=indices)
    max_lookup = np.concatenate(([1.0], np.atleast_1d(comp_max)))
    q = np.where(mask, tilted / max_lookup[labels], 0.0)

    phi = _angle_plane(mask, params.window_radius)
    w = _width_plane(mask, phi, depth.values, params)
    return GraspMap(q=q, phi=phi, w=w)


def best_image_grasp(grasp_map: GraspMap, depth: DepthImage, params: GraspSynthParams) -> ImageGrasp:
    """Quality argmax as an ImageGrasp; ties break to the lowest row-major index.

    Raises NoGrasp when no pixel reaches ``q_min`` and DepthZero when the
    depth image reads 0 at the selected pixel (the sensor-failure path: the
    map may come from a cleaner frame than the raw depth being read).
    """
    if grasp_map.q.shape != depth.values.shape:
        raise ValueError("grasp map and depth image dimensions differ")
    flat_index = int(np.argmax(grasp_map.q))
    v, u = divmod(flat_index, grasp_map.q.shape[1])
    q = float(grasp_map.q[v, u])
    if q < params.q_min:
        raise NoGrasp(f"max quality {q:.3f} below threshold {params.q_min}")
    d = float(depth.values[v, u])
    if d == 0:
        raise DepthZero(f"depth is 0 at grasp pixel ({u}, {v})")
    return ImageGrasp(u=float(u), v=float(v), phi_img=float(grasp_map.phi[v, u]),
                      w_img=float(grasp_map.w[v, u]), q=q, depth=d)


def best_world_grasp(depth: DepthImage, params: GraspSynthParams,
                     k: CameraIntrinsics, t_rc: RigidTransform) -> WorldGrasp:
    """Synthesize, take the argmax grasp, and convert it to the robot frame."""
    grasp_map = synthesize_grasp_map(depth, params)
    g_img = best_image_grasp(grasp_map, depth, params)
    return image_grasp_to_world(k, t_rc, g_img)
