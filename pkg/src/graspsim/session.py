"""Session engine: drives one dialogue over a scene and emits typed events.

The engine is the single writer for a session: inbound utterances and key
presses are processed strictly in arrival order, each producing an ordered
batch of SessionEvents with strictly increasing sequence numbers. Time is
a simulation tick (one per inbound message), never wall-clock, so a replay
of the same config and script is byte-identical.

Event kinds: RobotSay, UserUtterance, KeyPress, Detections, GraspChosen,
WaypointDone, SceneState, Error, SessionEnd. The transcript format is one
line per event: ``seq|kind|canonical-payload`` with payload floats rounded
to 6 decimals and keys sorted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dialogue as dlg
from .detector import Detection, DetectorNoise, detect, detection_to_world_grasp
from .errors import DepthZero, NoGrasp, OutOfReach, SamePose, ScriptError, ValidationError
from .executor import (ArmConfig, ArmState, ExecutionReport, MotionPlan, Pose,
                       execute, plan_grasp_handover, plan_pick_place)
from .geometry import CameraIntrinsics, DEFAULT_INTRINSICS, RigidTransform, WorldGrasp, top_down_camera_pose
from .graspmap import GraspSynthParams
from .nlu import DEFAULT_LEXICONS, parse_intent
from .pipeline import Capture, GraspResult, best_grasp_from_capture, capture_frames, detection_place_point
from .scene import Scene, SensorNoise, dump_scene, load_scene, scene_from_dict

DEFAULT_CAMERA_HEIGHT = 0.5

EVENT_KINDS = ("RobotSay", "UserUtterance", "KeyPress", "Detections", "GraspChosen",
               "WaypointDone", "SceneState", "Error", "SessionEnd")


def canonicalize(value):
    """Round floats to 6 decimals (normalizing -0.0) for stable serialization."""
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        rounded = round(value, 6)
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return canonicalize(float(value))
    if isinstance(value, np.ndarray):
        return [canonicalize(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [canonicalize(v) for v in value]
    if isinstance(value, dict):
        return {str(k): canonicalize(v) for k, v in value.items()}
    raise TypeError(f"cannot canonicalize {type(value)!r}")


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    kind: str
    tick: int
    payload: dict

    def payload_json(self) -> str:
        return json.dumps(canonicalize(self.payload), sort_keys=True, separators=(",", ":"))

    def to_line(self) -> str:
        return f"{self.seq}|{self.kind}|{self.payload_json()}"

    def to_wire(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "tick": self.tick,
                "payload": canonicalize(self.payload)}


@dataclass(frozen=True)
class SessionConfig:
    mode: dlg.Mode
    scene: Scene
    seed: int = 0
    sensor_dropout_p: float = 0.0
    sensor_jitter_sigma: float = 0.0
    detector_jitter_sigma: float = 0.0
    detector_miss_p: float = 0.0
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    camera_height: float = DEFAULT_CAMERA_HEIGHT
    camera_yaw: float = 0.0
    arm: ArmConfig = field(default_factory=ArmConfig)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "SessionConfig":
        if not isinstance(doc, dict):
            raise ValidationError("session config must be an object")
        try:
            mode = dlg.Mode(doc.get("mode", "mode1"))
        except ValueError as exc:
            raise ValidationError(f"unknown mode {doc.get('mode')!r}") from exc
        if "scene" in doc:
            scene = scene_from_dict(doc["scene"])
        elif "scene_path" in doc:
            path = Path(doc["scene_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            scene = load_scene(path.read_text("utf-8"))
        else:
            raise ValidationError("config needs 'scene' or 'scene_path'")
        sensor = doc.get("sensor_noise", {})
        det = doc.get("detector_noise", {})
        intr = doc.get("intrinsics", {})
        intrinsics = CameraIntrinsics(
            fx=float(intr.get("fx", DEFAULT_INTRINSICS.fx)),
            fy=float(intr.get("fy", DEFAULT_INTRINSICS.fy)),
            cx=float(intr.get("cx", DEFAULT_INTRINSICS.cx)),
            cy=float(intr.get("cy", DEFAULT_INTRINSICS.cy)),
            width=int(intr.get("width", DEFAULT_INTRINSICS.width)),
            height=int(intr.get("height", DEFAULT_INTRINSICS.height)),
        )
        camera = doc.get("camera", {})
        return cls(mode=mode, scene=scene, seed=int(doc.get("seed", 0)),
                   sensor_dropout_p=float(sensor.get("dropout_p", 0.0)),
                   sensor_jitter_sigma=float(sensor.get("jitter_sigma", 0.0)),
                   detector_jitter_sigma=float(det.get("jitter_sigma", 0.0)),
                   detector_miss_p=float(det.get("miss_p", 0.0)),
                   intrinsics=intrinsics,
                   camera_height=float(camera.get("height", DEFAULT_CAMERA_HEIGHT)),
                   camera_yaw=float(camera.get("yaw", 0.0)))

    @classmethod
    def from_file(cls, path) -> "SessionConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)


def _derive_seed(base: int, *parts: int) -> int:
    return int(np.random.SeedSequence((base,) + parts).generate_state(1)[0])


class SessionEngine:
    """One live session; also serves as the dialogue's perception backend."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.k = config.intrinsics
        self.camera = top_down_camera_pose(config.camera_height, config.camera_yaw)
        self.t_rc = self.camera
        self.params = GraspSynthParams(table_depth=config.camera_height, fx=self.k.fx)
        self.scene = config.scene
        self.arm = ArmState.initial(config.arm)
        self.seq = 0
        self.tick = 0
        self.capture_count = 0
        self.detect_count = 0
        self.capture: Capture | None = None
        self.ended = False
        self.state: dlg.DialogueState | None = None
        # latest perception products, kept for report figures
        self.last_grasp: GraspResult | None = None
        self.last_detections: list[Detection] = []

    # --- event plumbing ---

    def _event(self, kind: str, payload: dict, batch: list[SessionEvent]) -> None:
        batch.append(SessionEvent(seq=self.seq, kind=kind, tick=self.tick, payload=payload))
        self.seq += 1

    def _scene_payload(self) -> dict:
        return {
            "table": {"size_x": self.scene.table_size[0], "size_y": self.scene.table_size[1],
                      "color": list(self.scene.table_color)},
            "objects": [
                {"id": o.id, "class": o.class_label, "shape": o.shape, "dims": list(o.dims),
                 "pose": {"x": o.x, "y": o.y, "yaw": o.yaw}, "color": list(o.color),
                 "container": o.container}
                for o in self.scene.objects
            ],
            "arm": {"pose": [self.arm.tool_pose.x, self.arm.tool_pose.y,
                             self.arm.tool_pose.z, self.arm.tool_pose.yaw],
                    "gripper_width": self.arm.gripper_width,
                    "holding": self.arm.holding, "at_home": self.arm.at_home,
                    "home": [self.config.arm.home_pose.x, self.config.arm.home_pose.y],
                    "handover": [self.config.arm.handover_pose.x, self.config.arm.handover_pose.y]},
            "view": {"fx": self.k.fx, "fy": self.k.fy, "cx": self.k.cx, "cy": self.k.cy,
                     "width": self.k.width, "height": self.k.height,
                     "camera_height": self.config.camera_height},
        }

    @staticmethod
    def _detections_payload(detections: list[Detection]) -> dict:
        return {"items": [
            {"index": d.index, "label": d.label,
             "bbox": [d.bbox.u_min, d.bbox.v_min, d.bbox.u_max, d.bbox.v_max],
             "confidence": d.confidence,
             "colors": [[name, fraction] for name, fraction in d.colors]}
            for d in detections
        ]}

    @staticmethod
    def _grasp_payload(g: WorldGrasp) -> dict:
        return {"x": g.x, "y": g.y, "z": g.z, "phi": g.phi, "w": g.w, "q": g.q}

    # --- perception backend (dialogue TurnContext delegate) ---

    def labels_present(self) -> frozenset[str]:
        return self.scene.labels_present()

    def _sensor_noise(self) -> SensorNoise:
        seed = _derive_seed(self.config.seed, 1, self.capture_count)
        return SensorNoise(dropout_p=self.config.sensor_dropout_p,
                           jitter_sigma=self.config.sensor_jitter_sigma, seed=seed)

    def _detector_noise(self) -> DetectorNoise:
        seed = _derive_seed(self.config.seed, 2, self.detect_count)
        return DetectorNoise(jitter_sigma=self.config.detector_jitter_sigma,
                             miss_p=self.config.detector_miss_p, seed=seed)

    def _ensure_capture(self) -> Capture:
        if self.capture is None:
            self.refresh_capture()
        return self.capture

    def refresh_capture(self) -> None:
        noise = self._sensor_noise()
        self.capture_count += 1
        self.capture = capture_frames(self.scene, self.camera, self.k, noise)

    def best_grasp(self) -> WorldGrasp:
        capture = self._ensure_capture()
        try:
            result = best_grasp_from_capture(capture, self.params, self.k, self.t_rc)
        except (NoGrasp, DepthZero) as exc:
            raise dlg.PerceptionError(type(exc).__name__, str(exc)) from exc
        self.last_grasp = result
        return result.world

    def detection_grasp(self, index: int) -> WorldGrasp:
        detections = self.state.detections if self.state else []
        if not (0 <= index < len(detections)):
            raise dlg.PerceptionError("NoGrasp", f"no detection at index {index}")
        capture = self._ensure_capture()
        try:
            return detection_to_world_grasp(detections[index], capture.depth_raw,
                                            self.k, self.t_rc, w_max=self.config.arm.max_width)
        except (NoGrasp, DepthZero) as exc:
            raise dlg.PerceptionError(type(exc).__name__, str(exc)) from exc

    def detection_place(self, index: int) -> np.ndarray:
        detections = self.state.detections if self.state else []
        if not (0 <= index < len(detections)):
            raise dlg.PerceptionError("NoGrasp", f"no detection at index {index}")
        capture = self._ensure_capture()
        try:
            return detection_place_point(detections[index], capture, self.k, self.t_rc)
        except (NoGrasp, DepthZero) as exc:
            raise dlg.PerceptionError(type(exc).__name__, str(exc)) from exc

    def redetect(self) -> list[Detection]:
        self.refresh_capture()
        noise = self._detector_noise()
        self.detect_count += 1
        detections = detect(self.scene, self.camera, self.k, noise, rgb=self.capture.rgb)
        self.last_detections = detections
        return detections

    # --- inbound handling ---

    def start(self) -> list[SessionEvent]:
        batch: list[SessionEvent] = []
        self.state, greeting = dlg.start_session(self.config.mode)
        self._event("RobotSay", {"text": greeting.text}, batch)
        if self.config.mode is not dlg.Mode.MODE1:
            self._event("SceneState", self._scene_payload(), batch)
            detections = self.redetect()
            self._event("Detections", self._detections_payload(detections), batch)
            self.state, says = dlg.observe(self.state, detections)
            for say in says:
                self._event("RobotSay", {"text": say.text}, batch)
        return batch

    def handle_utterance(self, text: str) -> list[SessionEvent]:
        if self.ended:
            return []
        self.tick += 1
        batch: list[SessionEvent] = []
        self._event("UserUtterance", {"text": text}, batch)
        intent = parse_intent(text, DEFAULT_LEXICONS)
        ctx = dlg.TurnContext(self)
        self.state = dlg.step_utterance(self.state, intent, ctx)
        self._process_items(ctx.items, batch)
        return batch

    def handle_key(self, key: str) -> list[SessionEvent]:
        if self.ended:
            return []
        self.tick += 1
        batch: list[SessionEvent] = []
        self._event("KeyPress", {"key": key}, batch)
        ctx = dlg.TurnContext(self)
        self.state = dlg.step_key(self.state, key, ctx)
        self._process_items(ctx.items, batch)
        return batch

    def handle_end(self, reason: str = "client_end") -> list[SessionEvent]:
        if self.ended:
            return []
        batch: list[SessionEvent] = []
        self._event("SessionEnd", {"reason": reason}, batch)
        self.ended = True
        return batch

    def emit_protocol_error(self, message: str) -> list[SessionEvent]:
        if self.ended:
            return []
        batch: list[SessionEvent] = []
        self._event("Error", {"error": "Protocol", "detail": message}, batch)
        return batch

    # --- action processing ---

    def _process_items(self, items: list[dlg.TurnItem], batch: list[SessionEvent]) -> None:
        for item in items:
            if isinstance(item, dlg.SayItem):
                self._event("RobotSay", {"text": item.text}, batch)
            elif isinstance(item, dlg.ErrorItem):
                self._event("Error", {"error": item.kind, "redetect": item.redetect}, batch)
            elif isinstance(item, dlg.DetectionsItem):
                self._event("Detections", self._detections_payload(item.detections), batch)
            elif isinstance(item, dlg.ActionItem):
                self._perform(item.action, batch)

    def _perform(self, action: dlg.ActionRequest, batch: list[SessionEvent]) -> None:
        if isinstance(action, dlg.Shutdown):
            self._event("SessionEnd", {"reason": "shutdown"}, batch)
            self.ended = True
            return
        if isinstance(action, dlg.Redetect):
            return  # the paired Detections item carries the result
        if isinstance(action, dlg.GraspAndHandover):
            payload = {"kind": "handover", "grasp": self._grasp_payload(action.grasp)}
            if action.detection_index is not None:
                payload["detection_index"] = action.detection_index
                payload["label"] = action.label
            elif action.label is not None:
                # mode 1 grasps the best visible grasp, which is label-blind;
                # record what the user asked for, not what was grasped
                payload["requested_label"] = action.label
            self._event("GraspChosen", payload, batch)
            self._execute(action, lambda: plan_grasp_handover(action.grasp, self.config.arm), batch)
            return
        if isinstance(action, dlg.PickPlace):
            payload = {"kind": "pick_place", "grasp": self._grasp_payload(action.grasp),
                       "place": list(action.place), "distance": action.distance,
                       "grasp_index": action.grasp_index, "place_index": action.place_index}
            self._event("GraspChosen", payload, batch)
            self._execute(action, lambda: plan_pick_place(action.grasp, action.place, self.config.arm), batch)
            return
        raise TypeError(f"unknown action {action!r}")

    def _execute(self, action: dlg.ActionRequest, planner, batch: list[SessionEvent]) -> None:
        try:
            plan: MotionPlan = planner()
        except (OutOfReach, SamePose) as exc:
            self._event("Error", {"error": type(exc).__name__, "detail": str(exc)}, batch)
            outcome = dlg.ExecutionOutcome(action=action, report=None,
                                           planning_error=type(exc).__name__)
        else:
            report: ExecutionReport = execute(plan, self.scene, self.arm, self.config.arm)
            for label, pose in report.events:
                self._event("WaypointDone", {"label": label,
                                             "pose": [pose.x, pose.y, pose.z, pose.yaw]}, batch)
            self.scene = report.scene
            self.arm = report.arm
            self.capture = None  # the world changed; next perception re-captures
            self._event("SceneState", self._scene_payload(), batch)
            if not report.success:
                self._event("Error", {"error": report.failure_reason, "redetect": True}, batch)
            outcome = dlg.ExecutionOutcome(action=action, report=report)
        ctx = dlg.TurnContext(self)
        self.state = dlg.step_result(self.state, outcome, ctx)
        self._process_items(ctx.items, batch)

    def final_scene_json(self) -> str:
        return dump_scene(self.scene)


# --- scripted replay ---------------------------------------------------------

def parse_script(text: str) -> list[tuple[str, str]]:
    """Script lines: ``say <utterance>`` or ``key <digit>``; # comments allowed."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("say "):
            steps.append(("say", line[4:].strip()))
        elif line.startswith("key "):
            key = line[4:].strip()
            if len(key) != 1 or not key.isdigit():
                raise ScriptError(f"line {lineno}: key must be a single digit, got {key!r}")
            steps.append(("key", key))
        else:
            raise ScriptError(f"line {lineno}: expected 'say ...' or 'key <digit>', got {raw!r}")
    return steps


def run_session(config: SessionConfig, script: str) -> tuple[list[SessionEvent], SessionEngine]:
    """Run a full scripted session synchronously; returns all events and the engine."""
    steps = parse_script(script)
    engine = SessionEngine(config)
    events = engine.start()
    for kind, value in steps:
        if engine.ended:
            break
        if kind == "say":
            events.extend(engine.handle_utterance(value))
        else:
            events.extend(engine.handle_key(value))
    events.extend(engine.handle_end(reason="script_end"))
    return events, engine


def transcript_text(events: list[SessionEvent]) -> str:
    return "\n".join(e.to_line() for e in events) + "\n"


def run_transcript(config: SessionConfig, script: str) -> str:
    """Deterministic, canonical line-per-event transcript of a scripted session."""
    events, _ = run_session(config, script)
    return transcript_text(events)
