"""Kinematic arm simulator: waypoint plans and geometric grasp execution.

There is no dynamics model. A grasp closing at a pose succeeds iff three
geometric predicates hold against the target object (alignment, width,
and, for boxes, angle against a face-normal pair), which keeps execution
exact and checkable by direct computation. Releasing over a container
snaps the held object to the container center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import OutOfReach, SamePose
from .geometry import WorldGrasp, normalize_angle
from .scene import Scene, SceneObject

HOME = "Home"
PRE_GRASP = "PreGrasp"
DESCEND = "Descend"
CLOSE = "Close"
LIFT = "Lift"
HANDOVER = "Handover"
PRE_PLACE = "PrePlace"
OPEN = "Open"
RETURN_HOME = "ReturnHome"

WAYPOINT_LABELS = (HOME, PRE_GRASP, DESCEND, CLOSE, LIFT, HANDOVER, PRE_PLACE, OPEN, RETURN_HOME)

MISSED_OBJECT = "MissedObject"
WIDTH_TOO_SMALL = "WidthTooSmall"
ANGLE_INFEASIBLE = "AngleInfeasible"
NOTHING_HELD = "NothingHeld"


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    yaw: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class ArmConfig:
    reach: float = 0.6
    approach_clearance: float = 0.10
    drop_height: float = 0.02
    box_angle_tolerance: float = math.radians(20.0)
    max_width: float = 0.085
    home_pose: Pose = Pose(0.0, -0.25, 0.25, 0.0)
    handover_pose: Pose = Pose(0.0, -0.35, 0.20, 0.0)


DEFAULT_ARM_CONFIG = ArmConfig()


@dataclass(frozen=True)
class ArmState:
    tool_pose: Pose
    gripper_width: float
    holding: int | None = None
    at_home: bool = True

    @classmethod
    def initial(cls, config: ArmConfig = DEFAULT_ARM_CONFIG) -> "ArmState":
        return cls(tool_pose=config.home_pose, gripper_width=config.max_width)


@dataclass(frozen=True)
class Waypoint:
    label: str
    pose: Pose
    gripper: float | None = None  # target width; None = hold current


@dataclass(frozen=True)
class MotionPlan:
    kind: str  # "handover" or "pick_place"
    waypoints: tuple[Waypoint, ...]


@dataclass(frozen=True)
class ExecutionReport:
    success: bool
    failure_reason: str | None
    events: tuple[tuple[str, Pose], ...]
    scene: Scene
    arm: ArmState
    handed_over: int | None = None

    def __post_init__(self) -> None:
        if self.success == (self.failure_reason is not None):
            raise ValueError("success and failure_reason must be mutually exclusive")


def _check_reach(position, config: ArmConfig, what: str) -> None:
    r = float(np.linalg.norm(np.asarray(position, dtype=float)))
    if r > config.reach:
        raise OutOfReach(f"{what} at radius {r:.3f} m exceeds reach {config.reach} m")


def plan_grasp_handover(g: WorldGrasp, config: ArmConfig = DEFAULT_ARM_CONFIG) -> MotionPlan:
    """Home, approach from above, close, lift, hand over at the table edge."""
    _check_reach(g.position, config, "grasp")
    grasp_pose = Pose(g.x, g.y, g.z, g.phi)
    above = replace(grasp_pose, z=g.z + config.approach_clearance)
    lifted = replace(grasp_pose, z=g.z + config.approach_clearance)
    return MotionPlan(kind="handover", waypoints=(
        Waypoint(HOME, config.home_pose, config.max_width),
        Waypoint(PRE_GRASP, above, config.max_width),
        Waypoint(DESCEND, grasp_pose, config.max_width),
        Waypoint(CLOSE, grasp_pose, g.w),
        Waypoint(LIFT, lifted),
        Waypoint(HANDOVER, config.handover_pose),
        Waypoint(OPEN, config.handover_pose, config.max_width),
        Waypoint(RETURN_HOME, config.home_pose),
    ))


def plan_pick_place(g: WorldGrasp, place, config: ArmConfig = DEFAULT_ARM_CONFIG) -> MotionPlan:
    """Pick as above, then release at the place point plus the drop height."""
    place = np.asarray(place, dtype=float).reshape(3)
    if float(np.linalg.norm(g.position - place)) < 0.01:
        raise SamePose("pick and place poses coincide")
    _check_reach(g.position, config, "grasp")
    _check_reach(place, config, "place")
    grasp_pose = Pose(g.x, g.y, g.z, g.phi)
    above = replace(grasp_pose, z=g.z + config.approach_clearance)
    pre_place = Pose(place[0], place[1], place[2] + config.approach_clearance, g.phi)
    drop = Pose(place[0], place[1], place[2] + config.drop_height, g.phi)
    return MotionPlan(kind="pick_place", waypoints=(
        Waypoint(HOME, config.home_pose, config.max_width),
        Waypoint(PRE_GRASP, above, config.max_width),
        Waypoint(DESCEND, grasp_pose, config.max_width),
        Waypoint(CLOSE, grasp_pose, g.w),
        Waypoint(LIFT, above),
        Waypoint(PRE_PLACE, pre_place),
        Waypoint(DESCEND, drop),
        Waypoint(OPEN, drop, config.max_width),
        Waypoint(RETURN_HOME, config.home_pose),
    ))


def _angle_to_face_normals(phi: float, yaw: float) -> float:
    """Angular distance from phi to the nearest box face normal (multiples of pi/2)."""
    rel = (phi - yaw) % (math.pi / 2.0)
    return min(rel, math.pi / 2.0 - rel)


def _grasp_check(pose: Pose, width: float, obj: SceneObject, config: ArmConfig) -> str | None:
    dist = math.hypot(pose.x - obj.x, pose.y - obj.y)
    if dist > obj.min_footprint_extent / 2.0:
        return MISSED_OBJECT
    if width < obj.extent_across(pose.yaw):
        return WIDTH_TOO_SMALL
    if obj.shape == "box" and _angle_to_face_normals(pose.yaw, obj.yaw) > config.box_angle_tolerance:
        return ANGLE_INFEASIBLE
    return None


def _nearest_object(pose: Pose, scene: Scene, exclude: int | None) -> SceneObject | None:
    best = None
    best_d = math.inf
    for obj in scene.objects:
        if obj.id == exclude:
            continue
        d = math.hypot(pose.x - obj.x, pose.y - obj.y)
        if d < best_d:
            best, best_d = obj, d
    return best


def _container_at(pose: Pose, scene: Scene, exclude: int) -> SceneObject | None:
    for obj in scene.objects:
        if obj.id == exclude or not obj.container:
            continue
        if math.hypot(pose.x - obj.x, pose.y - obj.y) <= obj.min_footprint_extent / 2.0:
            return obj
    return None


def execute(plan: MotionPlan, scene: Scene, arm: ArmState,
            config: ArmConfig = DEFAULT_ARM_CONFIG) -> ExecutionReport:
    """Apply a plan's waypoints in order against the scene.

    Failures are reported, never raised: a failed Close (or an Open with
    nothing held) aborts the remaining plan and returns the arm home with
    the scene unchanged apart from any prior mutation.
    """
    events: list[tuple[str, Pose]] = []
    holding = arm.holding
    width = arm.gripper_width
    failure: str | None = None
    handed: int | None = None
    pose = arm.tool_pose

    for wp in plan.waypoints:
        pose = wp.pose
        if wp.label == CLOSE:
            target = _nearest_object(pose, scene, exclude=None)
            commanded = wp.gripper if wp.gripper is not None else width
            if target is None:
                failure = MISSED_OBJECT
            else:
                failure = _grasp_check(pose, commanded, target, config)
            if failure is not None:
                events.append((wp.label, pose))
                break
            holding = target.id
            width = target.extent_across(pose.yaw)
        elif wp.label == OPEN:
            if holding is None:
                failure = NOTHING_HELD
                events.append((wp.label, pose))
                break
            held = scene.object_by_id(holding)
            hp = config.handover_pose
            if abs(pose.x - hp.x) < 1e-9 and abs(pose.y - hp.y) < 1e-9:
                scene = scene.remove_object(holding)
                handed = holding
            else:
                container = _container_at(pose, scene, exclude=holding)
                if container is not None:
                    new_pose = (container.x, container.y, held.yaw)
                else:
                    new_pose = (pose.x, pose.y, held.yaw)
                scene = scene.replace_object(replace(held, pose=new_pose))
            holding = None
            width = wp.gripper if wp.gripper is not None else width
        elif wp.gripper is not None:
            width = wp.gripper
        events.append((wp.label, pose))

    if failure is not None:
        pose = config.home_pose
        holding = None
        width = config.max_width
        events.append((RETURN_HOME, pose))

    at_home = (abs(pose.x - config.home_pose.x) < 1e-9
               and abs(pose.y - config.home_pose.y) < 1e-9
               and abs(pose.z - config.home_pose.z) < 1e-9)
    new_arm = ArmState(tool_pose=pose, gripper_width=width, holding=holding, at_home=at_home)
    return ExecutionReport(success=failure is None, failure_reason=failure,
                           events=tuple(events), scene=scene, arm=new_arm,
                           handed_over=handed)
