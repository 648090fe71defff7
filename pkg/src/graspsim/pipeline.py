"""Perception glue shared by the session engine and the report renderer.

A capture holds the geometric depth, the sensor (noisy) depth, and the RGB
frame from one camera shot. Grasp maps are synthesized from the geometric
depth while grasp-point depths are read from the sensor depth: that split
is what makes the zero-depth sensor failure reachable (a confident grasp
whose measured depth reads 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, ImageGrasp, RigidTransform, WorldGrasp, deproject, image_grasp_to_world
from .graspmap import GraspMap, GraspSynthParams, best_image_grasp, synthesize_grasp_map
from .detector import Detection, _depth_near
from .scene import DepthImage, RgbImage, Scene, SensorNoise, apply_sensor_noise, render_frames


@dataclass(frozen=True)
class Capture:
    depth_clean: DepthImage
    depth_raw: DepthImage
    rgb: RgbImage


def capture_frames(scene: Scene, cam: RigidTransform, k: CameraIntrinsics,
                   noise: SensorNoise) -> Capture:
    depth_clean, rgb = render_frames(scene, cam, k)
    depth_raw = apply_sensor_noise(depth_clean, noise)
    return Capture(depth_clean=depth_clean, depth_raw=depth_raw, rgb=rgb)


@dataclass(frozen=True)
class GraspResult:
    world: WorldGrasp
    image: ImageGrasp
    grasp_map: GraspMap


def best_grasp_from_capture(capture: Capture, params: GraspSynthParams,
                            k: CameraIntrinsics, t_rc: RigidTransform) -> GraspResult:
    """Synthesize from the clean depth, read the grasp depth from the sensor frame.

    Raises NoGrasp / DepthZero from the underlying steps.
    """
    grasp_map = synthesize_grasp_map(capture.depth_clean, params)
    g_img = best_image_grasp(grasp_map, capture.depth_raw, params)
    return GraspResult(world=image_grasp_to_world(k, t_rc, g_img), image=g_img, grasp_map=grasp_map)


def detection_place_point(det: Detection, capture: Capture, k: CameraIntrinsics,
                          t_rc: RigidTransform) -> np.ndarray:
    """World point of a detection's box center, read from the sensor depth.

    Raises DepthZero when no valid depth exists near the center.
    """
    uc = (det.bbox.u_min + det.bbox.u_max) / 2.0
    vc = (det.bbox.v_min + det.bbox.v_max) / 2.0
    depth_value = _depth_near(capture.depth_raw, uc, vc)
    return t_rc.apply(deproject(k, uc, vc, depth_value))
