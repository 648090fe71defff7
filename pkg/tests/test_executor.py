import math

import numpy as np
import pytest

from graspsim.errors import OutOfReach, SamePose
from graspsim.executor import (ArmConfig, ArmState, CLOSE, DESCEND, HANDOVER, HOME, LIFT,
                               MotionPlan, OPEN, PRE_GRASP, PRE_PLACE, RETURN_HOME,
                               execute, plan_grasp_handover, plan_pick_place)
from graspsim.geometry import WorldGrasp
from graspsim.scene import scene_from_dict

CONFIG = ArmConfig()


def make_scene(*objects):
    return scene_from_dict({"table": {"size_x": 0.6, "size_y": 0.6, "color": [0, 128, 0]},
                            "seed": 0, "objects": list(objects)})


def obj_doc(id=0, cls="apple", shape="sphere", dims=(0.04, 0.04, 0.04), x=0.0, y=0.0,
            yaw=0.0, color=(220, 20, 60)):
    return {"id": id, "class": cls, "shape": shape, "dims": list(dims),
            "pose": {"x": x, "y": y, "yaw": yaw}, "color": list(color)}


def grasp(x=0.0, y=0.0, z=0.03, phi=0.0, w=0.05, q=1.0) -> WorldGrasp:
    return WorldGrasp(x=x, y=y, z=z, phi=phi, w=w, q=q)


# --- planning ----------------------------------------------------------------

def test_handover_plan_waypoint_order():
    plan = plan_grasp_handover(grasp(0.3, 0.1, 0.03))
    labels = [wp.label for wp in plan.waypoints]
    assert labels == [HOME, PRE_GRASP, DESCEND, CLOSE, LIFT, HANDOVER, OPEN, RETURN_HOME]
    assert len(plan.waypoints) == 8
    assert plan.waypoints[1].pose.z == pytest.approx(0.13)  # grasp + 0.10 clearance


def test_out_of_reach():
    with pytest.raises(OutOfReach):
        plan_grasp_handover(grasp(0.9, 0.0, 0.03))
    with pytest.raises(OutOfReach):
        plan_pick_place(grasp(0.1, 0.0, 0.03), (0.9, 0.0, 0.0))


def test_plans_end_at_home():
    for plan in (plan_grasp_handover(grasp(0.2, 0.0, 0.02)),
                 plan_pick_place(grasp(0.2, 0.0, 0.02), (-0.1, 0.1, 0.04))):
        assert plan.waypoints[-1].label == RETURN_HOME
        assert plan.waypoints[-1].pose == CONFIG.home_pose


def test_pick_place_plan_shape():
    plan = plan_pick_place(grasp(-0.1, 0.05, 0.03), (0.15, -0.05, 0.045))
    labels = [wp.label for wp in plan.waypoints]
    assert labels == [HOME, PRE_GRASP, DESCEND, CLOSE, LIFT, PRE_PLACE, DESCEND, OPEN, RETURN_HOME]
    assert labels.count(CLOSE) == 1 and labels.count(OPEN) == 1
    # place descend = place + drop height
    assert plan.waypoints[6].pose.z == pytest.approx(0.045 + CONFIG.drop_height)


def test_same_pose_rejected():
    g = grasp(0.1, 0.0, 0.03)
    with pytest.raises(SamePose):
        plan_pick_place(g, (0.1, 0.0, 0.031))


# --- execution ---------------------------------------------------------------

def test_grasp_sphere_at_center_succeeds_and_hands_over():
    scene = make_scene(obj_doc(x=0.1, y=0.05))
    arm = ArmState.initial()
    report = execute(plan_grasp_handover(grasp(0.1, 0.05, 0.04, w=0.05)), scene, arm)
    # oracle by direct predicate computation: distance 0 <= 0.02, width 0.05 >= 0.04
    assert report.success
    assert report.failure_reason is None
    assert report.handed_over == 0
    assert len(report.scene.objects) == 0
    assert report.arm.at_home
    assert report.arm.holding is None


def test_grasp_far_off_center_misses():
    scene = make_scene(obj_doc(x=0.0, y=0.0, dims=(0.04, 0.04, 0.04)))
    # 5 cm off center of a 4 cm object: 0.05 > min_extent/2 = 0.02
    report = execute(plan_grasp_handover(grasp(0.05, 0.0, 0.04, w=0.05)), scene, ArmState.initial())
    assert not report.success
    assert report.failure_reason == "MissedObject"
    assert len(report.scene.objects) == 1
    assert report.arm.at_home


def test_narrow_gripper_fails_width_check():
    scene = make_scene(obj_doc(dims=(0.06, 0.06, 0.06)))
    report = execute(plan_grasp_handover(grasp(0.0, 0.0, 0.05, w=0.04)), scene, ArmState.initial())
    assert report.failure_reason == "WidthTooSmall"


def test_box_angle_tolerance():
    scene = make_scene(obj_doc(cls="block", shape="box", dims=(0.08, 0.03, 0.03), yaw=0.0))
    ok = execute(plan_grasp_handover(grasp(0.0, 0.0, 0.02, phi=math.pi / 2 - 0.2, w=0.05)),
                 scene, ArmState.initial())
    assert ok.success
    bad = execute(plan_grasp_handover(grasp(0.0, 0.0, 0.02, phi=math.pi / 4, w=0.085)),
                  scene, ArmState.initial())
    assert bad.failure_reason == "AngleInfeasible"


def test_sphere_any_angle():
    scene = make_scene(obj_doc(dims=(0.04, 0.04, 0.04)))
    report = execute(plan_grasp_handover(grasp(0.0, 0.0, 0.03, phi=1.1, w=0.05)),
                     scene, ArmState.initial())
    assert report.success


def test_pick_place_into_bowl_snaps_to_container_center():
    scene = make_scene(
        obj_doc(id=0, cls="banana", shape="box", dims=(0.14, 0.035, 0.035), x=-0.08, y=0.02),
        obj_doc(id=1, cls="bowl", shape="cylinder", dims=(0.12, 0.12, 0.045), x=0.14, y=-0.02,
                color=(240, 240, 240)),
    )
    g = grasp(-0.08, 0.02, 0.03, phi=math.pi / 2, w=0.05)
    report = execute(plan_pick_place(g, (0.14, -0.02, 0.045)), scene, ArmState.initial())
    assert report.success
    banana = report.scene.object_by_id(0)
    assert banana.pose[0] == pytest.approx(0.14)
    assert banana.pose[1] == pytest.approx(-0.02)
    assert report.arm.at_home
    assert len(report.scene.objects) == 2  # nothing handed over


def test_place_away_from_container_drops_at_tool():
    scene = make_scene(obj_doc(id=0, cls="block", shape="box", dims=(0.04, 0.04, 0.04),
                               x=-0.05, y=0.0))
    g = grasp(-0.05, 0.0, 0.03, phi=0.0, w=0.05)
    report = execute(plan_pick_place(g, (0.12, 0.08, 0.0)), scene, ArmState.initial())
    assert report.success
    block = report.scene.object_by_id(0)
    assert block.pose[0] == pytest.approx(0.12)
    assert block.pose[1] == pytest.approx(0.08)


def test_empty_plan_is_identity():
    scene = make_scene(obj_doc())
    arm = ArmState.initial()
    report = execute(MotionPlan(kind="handover", waypoints=()), scene, arm)
    assert report.success
    assert report.scene == scene
    assert report.arm == arm


def test_conservation_of_objects():
    scene = make_scene(obj_doc(id=0, x=-0.1), obj_doc(id=1, x=0.1))
    report = execute(plan_grasp_handover(grasp(-0.1, 0.0, 0.04, w=0.05)), scene, ArmState.initial())
    remaining = {o.id for o in report.scene.objects}
    handed = {report.handed_over} if report.handed_over is not None else set()
    assert remaining | handed == {0, 1}
    assert remaining & handed == set()


def test_attach_consistency_holding_between_close_and_open():
    scene = make_scene(obj_doc(id=0, x=0.05))
    plan = plan_grasp_handover(grasp(0.05, 0.0, 0.04, w=0.05))
    # execute prefix plans to observe the holding flag around Close/Open
    labels = [wp.label for wp in plan.waypoints]
    close_at = labels.index(CLOSE)
    open_at = labels.index(OPEN)
    for cut in range(1, len(labels) + 1):
        prefix = MotionPlan(kind="handover", waypoints=plan.waypoints[:cut])
        report = execute(prefix, scene, ArmState.initial())
        if close_at < cut <= open_at:
            assert report.arm.holding == 0
        else:
            assert report.arm.holding is None


def test_open_with_nothing_held_reports_failure():
    scene = make_scene()
    plan = MotionPlan(kind="handover", waypoints=(
        plan_grasp_handover(grasp(0.0, 0.0, 0.03)).waypoints[6],  # the Open waypoint
    ))
    report = execute(plan, scene, ArmState.initial())
    assert report.failure_reason == "NothingHeld"


def test_execution_events_in_waypoint_order():
    scene = make_scene(obj_doc(id=0, x=0.05))
    plan = plan_grasp_handover(grasp(0.05, 0.0, 0.04, w=0.05))
    report = execute(plan, scene, ArmState.initial())
    assert [label for label, _ in report.events] == [wp.label for wp in plan.waypoints]
