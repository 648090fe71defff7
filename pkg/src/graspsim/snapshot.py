"""Scene snapshots as ASCII PPM/PGM files.

ASCII formats are byte-exact across platforms: RGB as P3 with maxval 255,
depth as P2 in integer millimeters with maxval 65535 (0 stays the invalid
marker). One image row per line, values space-separated.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, RigidTransform
from .scene import DepthImage, RgbImage, Scene, render_frames


def ppm_bytes(rgb: RgbImage) -> bytes:
    lines = [f"P3", f"{rgb.width} {rgb.height}", "255"]
    flat = rgb.values.reshape(rgb.height, rgb.width * 3)
    for row in flat:
        lines.append(" ".join(str(int(v)) for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def pgm_bytes(depth: DepthImage) -> bytes:
    mm = np.clip(np.rint(depth.values * 1000.0), 0, 65535).astype(int)
    lines = [f"P2", f"{depth.width} {depth.height}", "65535"]
    for row in mm:
        lines.append(" ".join(str(int(v)) for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def snapshot(scene: Scene, cam: RigidTransform, k: CameraIntrinsics,
             out_prefix) -> tuple[Path, Path]:
    """Render the scene and write ``<prefix>_rgb.ppm`` and ``<prefix>_depth.pgm``."""
    out_prefix = Path(out_prefix)
    depth, rgb = render_frames(scene, cam, k)
    rgb_path = out_prefix.parent / (out_prefix.name + "_rgb.ppm")
    depth_path = out_prefix.parent / (out_prefix.name + "_depth.pgm")
    rgb_path.write_bytes(ppm_bytes(rgb))
    depth_path.write_bytes(pgm_bytes(depth))
    return rgb_path, depth_path
