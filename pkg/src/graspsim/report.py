"""Figure rendering for the report path.

``generate_report`` replays a scripted session, writes the delimited
transcript next to a set of matplotlib figures (sensor frames, grasp map
planes with the chosen grasp, detection overlays, and the top-down scene),
and returns the written paths.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as mpatches
import matplotlib.pyplot as plt
import numpy as np

from .detector import Detection
from .geometry import ImageGrasp
from .graspmap import GraspMap
from .pipeline import Capture
from .scene import Scene
from .session import SessionConfig, run_session, transcript_text


def save_sensor_figure(capture: Capture, path: Path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.2))
    axes[0].imshow(capture.rgb.values)
    axes[0].set_title("RGB")
    im = axes[1].imshow(capture.depth_raw.values, cmap="viridis")
    axes[1].set_title("depth (m)")
    fig.colorbar(im, ax=axes[1], fraction=0.046)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_graspmap_figure(grasp_map: GraspMap, grasp: ImageGrasp | None, path: Path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, plane, title in zip(axes, (grasp_map.q, grasp_map.phi, grasp_map.w),
                                ("quality", "angle (rad)", "width (px)")):
        im = ax.imshow(plane, cmap="viridis")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    if grasp is not None:
        half = grasp.w_img / 2.0
        du, dv = math.cos(grasp.phi_img), -math.sin(grasp.phi_img)
        axes[0].plot([grasp.u - half * du, grasp.u + half * du],
                     [grasp.v - half * dv, grasp.v + half * dv], "r-", linewidth=2)
        axes[0].plot(grasp.u, grasp.v, "r+")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_detections_figure(capture: Capture, detections: list[Detection], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.imshow(capture.rgb.values)
    for det in detections:
        b = det.bbox
        ax.add_patch(mpatches.Rectangle((b.u_min, b.v_min), b.width, b.height,
                                        fill=False, edgecolor="red", linewidth=1.5))
        names = ", ".join(name for name, _ in det.colors)
        ax.text(b.u_min, max(b.v_min - 2, 0), f"{det.index}: {det.label} [{names}]",
                color="white", fontsize=7,
                bbox=dict(facecolor="red", edgecolor="none", pad=1))
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title("detections")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scene_figure(scene: Scene, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    sx, sy = scene.table_size
    ax.add_patch(mpatches.Rectangle((-sx / 2, -sy / 2), sx, sy,
                                    facecolor=np.array(scene.table_color) / 255.0,
                                    edgecolor="black"))
    for obj in scene.objects:
        color = np.array(obj.color) / 255.0
        if obj.shape == "box":
            rect = mpatches.Rectangle((-obj.dims[0] / 2, -obj.dims[1] / 2),
                                      obj.dims[0], obj.dims[1],
                                      facecolor=color, edgecolor="black")
            transform = (matplotlib.transforms.Affine2D()
                         .rotate(obj.yaw).translate(obj.x, obj.y) + ax.transData)
            rect.set_transform(transform)
            ax.add_patch(rect)
        else:
            ax.add_patch(mpatches.Circle((obj.x, obj.y), obj.dims[0] / 2,
                                         facecolor=color, edgecolor="black"))
        ax.annotate(obj.class_label, (obj.x, obj.y), ha="center", fontsize=7)
    margin = 0.05
    ax.set_xlim(-sx / 2 - margin, sx / 2 + margin)
    ax.set_ylim(-sy / 2 - margin, sy / 2 + margin)
    ax.set_aspect("equal")
    ax.set_title("table (top-down)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def generate_report(config: SessionConfig, script: str, out_dir) -> list[Path]:
    """Run the session, then write transcript + figures into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    events, engine = run_session(config, script)

    written: list[Path] = []
    transcript_path = out_dir / "transcript.txt"
    transcript_path.write_text(transcript_text(events), encoding="utf-8")
    written.append(transcript_path)

    if engine.capture is None:
        engine.refresh_capture()
    sensor_path = out_dir / "sensor.png"
    save_sensor_figure(engine.capture, sensor_path)
    written.append(sensor_path)

    if engine.last_grasp is not None:
        grasp_path = out_dir / "graspmap.png"
        save_graspmap_figure(engine.last_grasp.grasp_map, engine.last_grasp.image, grasp_path)
        written.append(grasp_path)

    if engine.last_detections:
        det_path = out_dir / "detections.png"
        save_detections_figure(engine.capture, engine.last_detections, det_path)
        written.append(det_path)

    scene_path = out_dir / "scene.png"
    save_scene_figure(engine.scene, scene_path)
    written.append(scene_path)
    return written
