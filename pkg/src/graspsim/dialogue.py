"""Three-mode interaction state machine.

Modes:

* mode1  -- spoken retrieval: "Take the banana" picks the best visible
  grasp and hands the object over, looping back for the next request.
* mode2a -- color-driven: the robot enumerates detections with their
  colors, asks to confirm when the requested color matches, and grasps on
  "yes"; any non-yes answer continues the enumeration.
* mode2b -- announce-then-choose: all detections are announced at once and
  the user picks by number (or by naming the object/color); key 6
  redetects, key 9 shuts down.
* mode3  -- mode2b plus key 8, which arms a pick-and-place of two chosen
  detections (grasp the first, release at the second).

Transitions write their utterances and action requests, in order, through
a TurnContext; the engine replays them as session events. Perception
failures (zero depth, no grasp) trigger one automatic redetect and then a
spoken failure line. The phrase table is a versioned package resource so
goldens and the UI share the exact strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

import numpy as np

from .detector import Detection
from .errors import GraspSimError
from .executor import ExecutionReport
from .geometry import WorldGrasp
from .nlu import Intent, IntentKind

MAX_LISTED_DETECTIONS = 6  # digits 0-5 select; 6/8/9 are commands


@lru_cache(maxsize=1)
def phrase_table() -> dict[str, str]:
    text = resources.files("graspsim.resources").joinpath("phrases.json").read_text("utf-8")
    return json.loads(text)["phrases"]


def phrase(name: str, **kwargs) -> str:
    template = phrase_table()[name]
    return template.format(**kwargs) if kwargs else template


def _article(label: str) -> str:
    return "an" if label[:1].lower() in "aeiou" else "a"


def _join_colors(names: list[str]) -> str:
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def _detection_color_names(det: Detection) -> list[str]:
    return [name for name, _ in det.colors]


class Mode(Enum):
    MODE1 = "mode1"
    MODE2A = "mode2a"
    MODE2B = "mode2b"
    MODE3 = "mode3"


class Phase(Enum):
    GREETING = "greeting"
    AWAIT_REQUEST = "await_request"
    AWAIT_CONFIRM = "await_confirm"
    AWAIT_COMMAND = "await_command"
    AWAIT_SECOND_PICK = "await_second_pick"
    EXECUTING = "executing"


@dataclass(frozen=True)
class RobotSay:
    text: str


@dataclass(frozen=True)
class GraspAndHandover:
    grasp: WorldGrasp
    detection_index: int | None = None
    label: str | None = None


@dataclass(frozen=True, eq=False)
class PickPlace:
    grasp: WorldGrasp
    place: np.ndarray
    distance: float
    grasp_index: int
    place_index: int
    grasp_label: str
    place_label: str


@dataclass(frozen=True)
class Redetect:
    pass


@dataclass(frozen=True)
class Shutdown:
    pass


ActionRequest = GraspAndHandover | PickPlace | Redetect | Shutdown


@dataclass
class DialogueState:
    mode: Mode
    phase: Phase
    detections: list[Detection] = field(default_factory=list)
    desired_color: str | None = None
    confirm_index: int | None = None
    pick_armed: bool = False
    first_pick: int | None = None
    shutting_down: bool = False


class PerceptionError(GraspSimError):
    """A grasp could not be derived from the current capture."""

    def __init__(self, kind: str, message: str = ""):
        super().__init__(message or kind)
        self.kind = kind


@dataclass(frozen=True)
class ExecutionOutcome:
    """What came back from acting on a request; report is None when planning failed."""

    action: ActionRequest
    report: ExecutionReport | None
    planning_error: str | None = None

    @property
    def success(self) -> bool:
        return self.report is not None and self.report.success


# --- turn recording ---------------------------------------------------------

@dataclass(frozen=True)
class SayItem:
    text: str


@dataclass(frozen=True)
class ErrorItem:
    kind: str
    redetect: bool


@dataclass(frozen=True)
class DetectionsItem:
    detections: list[Detection]


@dataclass(frozen=True)
class ActionItem:
    action: ActionRequest


TurnItem = SayItem | ErrorItem | DetectionsItem | ActionItem


class TurnContext:
    """Ordered record of one transition's outputs, plus perception access.

    ``backend`` supplies perception: labels_present(), best_grasp(),
    detection_grasp(i), detection_place(i), refresh_capture(), redetect().
    """

    def __init__(self, backend):
        self.backend = backend
        self.items: list[TurnItem] = []

    def say(self, text: str) -> None:
        self.items.append(SayItem(text))

    def act(self, action: ActionRequest) -> None:
        self.items.append(ActionItem(action))

    def error(self, kind: str, redetect: bool) -> None:
        self.items.append(ErrorItem(kind, redetect))

    def labels_present(self) -> frozenset[str]:
        return self.backend.labels_present()

    def best_grasp(self) -> WorldGrasp:
        return self.backend.best_grasp()

    def detection_grasp(self, index: int) -> WorldGrasp:
        return self.backend.detection_grasp(index)

    def detection_place(self, index: int) -> np.ndarray:
        return self.backend.detection_place(index)

    def refresh_capture(self) -> None:
        self.backend.refresh_capture()

    def redetect(self) -> list[Detection]:
        self.items.append(ActionItem(Redetect()))
        detections = self.backend.redetect()
        self.items.append(DetectionsItem(detections))
        return detections

    @property
    def says(self) -> list[RobotSay]:
        return [RobotSay(i.text) for i in self.items if isinstance(i, SayItem)]

    @property
    def actions(self) -> list[ActionRequest]:
        return [i.action for i in self.items if isinstance(i, ActionItem)]


# --- session entry points ---------------------------------------------------

def start_session(mode: Mode) -> tuple[DialogueState, RobotSay]:
    """Fresh state plus the fixed greeting."""
    phase = Phase.AWAIT_REQUEST if mode in (Mode.MODE1, Mode.MODE2A) else Phase.GREETING
    return DialogueState(mode=mode, phase=phase), RobotSay(phrase("greeting"))


def pick_place_distance(p1, p2) -> float:
    """Euclidean distance between the two chosen objects' world points."""
    return float(np.linalg.norm(np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)))


def _announce_all(state: DialogueState, ctx: TurnContext) -> None:
    for det in state.detections[:MAX_LISTED_DETECTIONS]:
        ctx.say(phrase("item_line", index=det.index, article=_article(det.label),
                       label=det.label, colors=_join_colors(_detection_color_names(det))))
    if len(state.detections) > MAX_LISTED_DETECTIONS:
        ctx.say(phrase("more_items"))
    ctx.say(phrase("which_object"))
    ctx.say(phrase("guidance_mode3" if state.mode is Mode.MODE3 else "guidance_mode2b"))
    state.phase = Phase.AWAIT_COMMAND


def _enumerate_for_color(state: DialogueState, ctx: TurnContext, start: int) -> None:
    for det in state.detections[start:]:
        ctx.say(phrase("see_object", article=_article(det.label), label=det.label,
                       colors=_join_colors(_detection_color_names(det))))
        names = {name.lower() for name in _detection_color_names(det)}
        if state.desired_color is not None and state.desired_color.lower() in names:
            ctx.say(phrase("confirm_object"))
            state.confirm_index = det.index
            state.phase = Phase.AWAIT_CONFIRM
            return
    ctx.say(phrase("no_color_match"))
    state.desired_color = None
    state.confirm_index = None
    state.phase = Phase.AWAIT_REQUEST


def observe(state: DialogueState, detections: list[Detection]) -> tuple[DialogueState, list[RobotSay]]:
    """Install fresh detections; announce them in the keyed modes."""
    state.detections = list(detections)
    ctx = TurnContext(backend=None)
    if state.mode in (Mode.MODE2B, Mode.MODE3):
        _announce_all(state, ctx)
    elif state.mode is Mode.MODE2A and state.desired_color is not None:
        _enumerate_for_color(state, ctx, start=0)
    return state, ctx.says


def _grasp_with_retry(state: DialogueState, ctx: TurnContext, getter) -> WorldGrasp | None:
    """One automatic redetect on perception failure, then the spoken failure line."""
    try:
        return getter()
    except PerceptionError as exc:
        ctx.error(exc.kind, redetect=True)
        if state.mode is Mode.MODE1:
            ctx.refresh_capture()
        else:
            state.detections = ctx.redetect()
        try:
            return getter()
        except PerceptionError as exc2:
            ctx.error(exc2.kind, redetect=False)
            ctx.say(phrase("perception_failure"))
            return None


def _request_detection_grasp(state: DialogueState, ctx: TurnContext, index: int) -> None:
    det = state.detections[index]
    grasp = _grasp_with_retry(state, ctx, lambda: ctx.detection_grasp(index))
    if grasp is None:
        state.phase = Phase.AWAIT_COMMAND if state.mode in (Mode.MODE2B, Mode.MODE3) else Phase.AWAIT_REQUEST
        return
    ctx.act(GraspAndHandover(grasp=grasp, detection_index=index, label=det.label))
    state.phase = Phase.EXECUTING


def step_utterance(state: DialogueState, intent: Intent, ctx: TurnContext) -> DialogueState:
    if state.shutting_down:
        return state
    if intent.kind is IntentKind.QUIT:
        ctx.say(phrase("goodbye"))
        ctx.act(Shutdown())
        state.shutting_down = True
        return state

    if state.mode is Mode.MODE1:
        if intent.kind is IntentKind.RETRIEVE:
            if intent.noun in ctx.labels_present():
                ctx.say(phrase("accept_grasp"))
                grasp = _grasp_with_retry(state, ctx, ctx.best_grasp)
                if grasp is None:
                    state.phase = Phase.AWAIT_REQUEST
                else:
                    ctx.act(GraspAndHandover(grasp=grasp, label=intent.noun))
                    state.phase = Phase.EXECUTING
            else:
                ctx.say(phrase("not_seen", article=_article(intent.noun), label=intent.noun))
        else:
            ctx.say(phrase("reprompt"))
        return state

    if state.mode is Mode.MODE2A:
        if state.phase is Phase.AWAIT_CONFIRM:
            if intent.kind is IntentKind.AFFIRM:
                ctx.say(phrase("accept_grasp"))
                _request_detection_grasp(state, ctx, state.confirm_index)
            else:
                # any non-yes answer keeps the enumeration going
                _enumerate_for_color(state, ctx, start=state.confirm_index + 1)
            return state
        if intent.kind is IntentKind.COLOR_REQUEST:
            state.desired_color = intent.color
            _enumerate_for_color(state, ctx, start=0)
        else:
            ctx.say(phrase("reprompt"))
        return state

    # mode2b / mode3
    if state.phase is Phase.AWAIT_COMMAND:
        if intent.kind is IntentKind.RETRIEVE:
            for det in state.detections:
                if det.label == intent.noun:
                    ctx.say(phrase("accept_grasp"))
                    _request_detection_grasp(state, ctx, det.index)
                    return state
            ctx.say(phrase("not_seen", article=_article(intent.noun), label=intent.noun))
            return state
        if intent.kind is IntentKind.COLOR_REQUEST:
            for det in state.detections:
                names = {name.lower() for name in _detection_color_names(det)}
                if intent.color in names:
                    ctx.say(phrase("accept_grasp"))
                    _request_detection_grasp(state, ctx, det.index)
                    return state
            ctx.say(phrase("no_color_match"))
            return state
    ctx.say(phrase("reprompt"))
    return state


def _request_pick_place(state: DialogueState, ctx: TurnContext, place_index: int) -> None:
    grasp_index = state.first_pick
    grasp_det = state.detections[grasp_index]
    place_det = state.detections[place_index]

    def compute() -> tuple[WorldGrasp, np.ndarray]:
        grasp = ctx.detection_grasp(grasp_index)
        place = ctx.detection_place(place_index)
        return grasp, place

    result = _grasp_with_retry(state, ctx, compute)
    state.pick_armed = False
    state.first_pick = None
    if result is None:
        state.phase = Phase.AWAIT_COMMAND
        return
    grasp, place = result
    ctx.say(phrase("pickplace_go", grasp_label=grasp_det.label, place_label=place_det.label))
    ctx.act(PickPlace(grasp=grasp, place=place,
                      distance=pick_place_distance(grasp.position, place),
                      grasp_index=grasp_index, place_index=place_index,
                      grasp_label=grasp_det.label, place_label=place_det.label))
    state.phase = Phase.EXECUTING


def step_key(state: DialogueState, key: str, ctx: TurnContext) -> DialogueState:
    if state.shutting_down:
        return state
    if key == "9":
        ctx.say(phrase("goodbye"))
        ctx.act(Shutdown())
        state.shutting_down = True
        return state
    if state.mode not in (Mode.MODE2B, Mode.MODE3):
        ctx.say(phrase("reprompt"))
        return state

    if state.phase is Phase.AWAIT_COMMAND:
        if key == "6":
            ctx.say(phrase("look_again"))
            state.detections = ctx.redetect()
            _announce_all(state, ctx)
            return state
        if key == "8":
            if state.mode is Mode.MODE3:
                state.pick_armed = True
                ctx.say(phrase("pickplace_prompt"))
            else:
                ctx.say(phrase("reprompt"))
            return state
        if key.isdigit() and int(key) < MAX_LISTED_DETECTIONS:
            index = int(key)
            if index >= len(state.detections):
                ctx.say(phrase("reprompt"))
                return state
            if state.pick_armed:
                state.first_pick = index
                ctx.say(phrase("pickplace_second"))
                state.phase = Phase.AWAIT_SECOND_PICK
            else:
                ctx.say(phrase("grasp_index", index=index))
                _request_detection_grasp(state, ctx, index)
            return state
        ctx.say(phrase("reprompt"))
        return state

    if state.phase is Phase.AWAIT_SECOND_PICK:
        if key.isdigit() and int(key) < MAX_LISTED_DETECTIONS:
            index = int(key)
            if index < len(state.detections) and index != state.first_pick:
                _request_pick_place(state, ctx, index)
                return state
        ctx.say(phrase("reprompt"))
        return state

    ctx.say(phrase("reprompt"))
    return state


def step_result(state: DialogueState, outcome: ExecutionOutcome, ctx: TurnContext) -> DialogueState:
    """React to a completed (or failed) action request."""
    if state.shutting_down:
        return state
    if outcome.success:
        if isinstance(outcome.action, PickPlace):
            ctx.say(phrase("pickplace_done", grasp_label=outcome.action.grasp_label,
                           place_label=outcome.action.place_label))
        else:
            ctx.say(phrase("after_handover"))
    else:
        ctx.say(phrase("execution_failure"))

    if state.mode is Mode.MODE1:
        state.phase = Phase.AWAIT_REQUEST
    elif state.mode is Mode.MODE2A:
        state.detections = ctx.redetect()
        if state.desired_color is not None:
            _enumerate_for_color(state, ctx, start=0)
        else:
            state.phase = Phase.AWAIT_REQUEST
    else:
        state.detections = ctx.redetect()
        _announce_all(state, ctx)
    return state


# --- spec-shaped wrappers ----------------------------------------------------

def handle_utterance(state: DialogueState, intent: Intent, backend
                     ) -> tuple[DialogueState, list[RobotSay], list[ActionRequest]]:
    ctx = TurnContext(backend)
    state = step_utterance(state, intent, ctx)
    return state, ctx.says, ctx.actions


def handle_key(state: DialogueState, key: str, backend
               ) -> tuple[DialogueState, list[RobotSay], list[ActionRequest]]:
    ctx = TurnContext(backend)
    state = step_key(state, key, ctx)
    return state, ctx.says, ctx.actions


def handle_result(state: DialogueState, outcome: ExecutionOutcome, backend
                  ) -> tuple[DialogueState, list[RobotSay], list[ActionRequest]]:
    ctx = TurnContext(backend)
    state = step_result(state, outcome, ctx)
    return state, ctx.says, ctx.actions
