import json
from pathlib import Path

import pytest

from graspsim.geometry import DEFAULT_INTRINSICS, top_down_camera_pose
from graspsim.scene import scene_from_dict

REPO_ROOT = Path(__file__).resolve().parent.parent
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def load_demo_scene(name: str):
    doc = json.loads((REPO_ROOT / "demo" / "scenes" / f"{name}.json").read_text("utf-8"))
    return scene_from_dict(doc)


def demo_scene_doc(name: str) -> dict:
    return json.loads((REPO_ROOT / "demo" / "scenes" / f"{name}.json").read_text("utf-8"))


@pytest.fixture
def default_camera():
    return top_down_camera_pose(0.5)


@pytest.fixture
def intrinsics():
    return DEFAULT_INTRINSICS


@pytest.fixture
def demo_scene():
    return load_demo_scene("demo")


@pytest.fixture
def banana_bowl_scene():
    return load_demo_scene("banana_bowl")
