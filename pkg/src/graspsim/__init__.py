"""Deterministic tabletop simulator of an interactive robot-grasping system."""

from .geometry import (CameraIntrinsics, DEFAULT_INTRINSICS, ImageGrasp, RigidTransform,
                       WorldGrasp, apply_transform, deproject, image_grasp_to_world,
                       normalize_angle, project, top_down_camera_pose, wrist_camera_offset)
from .scene import (DepthImage, RgbImage, Scene, SceneObject, SensorNoise, apply_sensor_noise,
                    dump_scene, load_scene, render_depth, render_rgb)
from .graspmap import GraspMap, GraspSynthParams, best_image_grasp, best_world_grasp, synthesize_grasp_map
from .detector import (BBox, Detection, DetectorNoise, DEFAULT_PALETTE, box_center,
                       detect, detection_to_world_grasp, dominant_colors)
from .nlu import Intent, IntentKind, Lexicons, parse_intent, tokenize
from .dialogue import (ActionRequest, DialogueState, GraspAndHandover, Mode, Phase, PickPlace,
                       Redetect, RobotSay, Shutdown, handle_key, handle_result, handle_utterance,
                       observe, phrase, pick_place_distance, start_session)
from .executor import (ArmConfig, ArmState, ExecutionReport, MotionPlan, Pose, Waypoint,
                       execute, plan_grasp_handover, plan_pick_place)
from .session import SessionConfig, SessionEngine, SessionEvent, run_session, run_transcript

__version__ = "0.1.0"
