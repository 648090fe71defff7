import math

import numpy as np
import pytest

from graspsim.detector import BBox, Detection
from graspsim.dialogue import (ActionItem, DialogueState, ErrorItem, ExecutionOutcome,
                               GraspAndHandover, Mode, PerceptionError, Phase, PickPlace,
                               Redetect, SayItem, Shutdown, TurnContext, handle_key,
                               handle_result, handle_utterance, observe, phrase,
                               pick_place_distance, start_session, step_key, step_utterance)
from graspsim.executor import ArmState, ExecutionReport, Pose
from graspsim.geometry import WorldGrasp
from graspsim.nlu import parse_intent
from graspsim.scene import scene_from_dict

GRASP = WorldGrasp(x=0.1, y=0.0, z=0.03, phi=0.0, w=0.05, q=1.0)


def det(index, label, colors) -> Detection:
    return Detection(index=index, bbox=BBox(10 * index, 10, 10 * index + 8, 18),
                     label=label, confidence=1.0, colors=tuple(colors))


DETS = [det(0, "banana", [("Yellow", 0.6), ("Green", 0.4)]),
        det(1, "apple", [("Red", 0.7), ("Green", 0.3)]),
        det(2, "block", [("Pink", 0.5), ("Green", 0.5)])]


class FakeBackend:
    """Scripted perception: a queue of grasps or PerceptionError kinds."""

    def __init__(self, labels=("banana", "apple", "block"), grasps=None, detections=DETS):
        self.labels = frozenset(labels)
        self.grasps = list(grasps if grasps is not None else [GRASP])
        self.detections = list(detections)
        self.refresh_count = 0
        self.redetect_count = 0

    def _next(self):
        item = self.grasps.pop(0) if self.grasps else GRASP
        if isinstance(item, str):
            raise PerceptionError(item)
        return item

    def labels_present(self):
        return self.labels

    def best_grasp(self):
        return self._next()

    def detection_grasp(self, index):
        return self._next()

    def detection_place(self, index):
        return np.array([0.2, -0.1, 0.05])

    def refresh_capture(self):
        self.refresh_count += 1

    def redetect(self):
        self.redetect_count += 1
        return list(self.detections)


def success_report() -> ExecutionReport:
    scene = scene_from_dict({"table": {"size_x": 0.6, "size_y": 0.6, "color": [0, 128, 0]},
                             "seed": 0, "objects": []})
    return ExecutionReport(success=True, failure_reason=None, events=(),
                           scene=scene, arm=ArmState.initial())


def failed_report(reason="MissedObject") -> ExecutionReport:
    scene = scene_from_dict({"table": {"size_x": 0.6, "size_y": 0.6, "color": [0, 128, 0]},
                             "seed": 0, "objects": []})
    return ExecutionReport(success=False, failure_reason=reason, events=(),
                           scene=scene, arm=ArmState.initial())


def texts(says):
    return [s.text for s in says]


# --- session start -----------------------------------------------------------

def test_start_session_greeting():
    state, say = start_session(Mode.MODE1)
    assert say.text == "Hello, do you need some help?"
    assert state.phase is Phase.AWAIT_REQUEST
    assert not state.shutting_down


def test_mode2b_observe_announces_and_prompts():
    state, _ = start_session(Mode.MODE2B)
    state, says = observe(state, DETS)
    lines = texts(says)
    assert lines[0] == "Object 0: a banana with colors Yellow and Green."
    assert any("input the object number" in line for line in lines)
    assert state.phase is Phase.AWAIT_COMMAND


def test_mode3_observe_mentions_key8():
    state, _ = start_session(Mode.MODE3)
    state, says = observe(state, DETS)
    assert any("press 8" in line for line in texts(says))


def test_observe_lists_at_most_six_and_flags_more():
    many = [det(i, "block", [("Pink", 1.0)]) for i in range(8)]
    state, _ = start_session(Mode.MODE2B)
    state, says = observe(state, many)
    lines = texts(says)
    assert sum(1 for l in lines if l.startswith("Object ")) == 6
    assert any("press 6 to refresh" in l for l in lines)


# --- mode 1 ------------------------------------------------------------------

def test_mode1_retrieve_accepts_and_requests_grasp():
    state, _ = start_session(Mode.MODE1)
    backend = FakeBackend()
    state, says, actions = handle_utterance(state, parse_intent("Take the banana"), backend)
    assert texts(says) == ["Ok, I will help you to grasp it!!"]
    assert len(actions) == 1
    assert isinstance(actions[0], GraspAndHandover)
    assert actions[0].grasp == GRASP
    assert state.phase is Phase.EXECUTING


def test_mode1_post_handover_line_and_loop_closure():
    state, _ = start_session(Mode.MODE1)
    backend = FakeBackend()
    state, _, actions = handle_utterance(state, parse_intent("Take the banana"), backend)
    outcome = ExecutionOutcome(action=actions[0], report=success_report())
    state, says, actions = handle_result(state, outcome, backend)
    assert texts(says) == ["Here you are. What else do you want to get?"]
    assert actions == []
    assert state.phase is Phase.AWAIT_REQUEST


def test_mode1_unknown_noun_not_seen():
    state, _ = start_session(Mode.MODE1)
    backend = FakeBackend(labels=("apple",))
    state, says, actions = handle_utterance(state, parse_intent("take the banana"), backend)
    assert actions == []
    assert "cannot see" in texts(says)[0]
    assert state.phase is Phase.AWAIT_REQUEST


def test_mode1_unknown_utterance_reprompts():
    state, _ = start_session(Mode.MODE1)
    state, says, actions = handle_utterance(state, parse_intent("fly me to the moon"), FakeBackend())
    assert texts(says) == ["Sorry, I did not catch that. What do you want to get?"]
    assert actions == []


def test_mode1_depth_zero_retries_once_then_fails():
    state, _ = start_session(Mode.MODE1)
    backend = FakeBackend(grasps=["DepthZero", "DepthZero"])
    ctx = TurnContext(backend)
    state = step_utterance(state, parse_intent("Take the banana"), ctx)
    kinds = [type(i).__name__ for i in ctx.items]
    assert kinds == ["SayItem", "ErrorItem", "ErrorItem", "SayItem"]
    assert ctx.items[1].redetect is True
    assert ctx.items[2].redetect is False
    assert ctx.items[3].text == "I could not see it clearly. Let me adjust and try again."
    assert backend.refresh_count == 1
    assert state.phase is Phase.AWAIT_REQUEST


def test_mode1_depth_zero_recovers_on_retry():
    state, _ = start_session(Mode.MODE1)
    backend = FakeBackend(grasps=["DepthZero", GRASP])
    state, says, actions = handle_utterance(state, parse_intent("Take the banana"), backend)
    assert len(actions) == 1
    assert isinstance(actions[0], GraspAndHandover)


# --- mode 2a -----------------------------------------------------------------

def test_mode2a_color_request_enumerates_to_match():
    state, _ = start_session(Mode.MODE2A)
    state, _ = observe(state, DETS)
    backend = FakeBackend()
    state, says, actions = handle_utterance(state, parse_intent("I want something pink"), backend)
    lines = texts(says)
    assert lines[0].startswith("I see a banana")
    assert lines[1].startswith("I see an apple")
    assert lines[2].startswith("I see a block")
    assert lines[3] == "Do you want to get this object?"
    assert state.phase is Phase.AWAIT_CONFIRM
    assert state.confirm_index == 2
    assert actions == []


def test_mode2a_affirm_grasps_current_detection():
    state, _ = start_session(Mode.MODE2A)
    state, _ = observe(state, DETS)
    backend = FakeBackend()
    state, _, _ = handle_utterance(state, parse_intent("I want something pink"), backend)
    state, says, actions = handle_utterance(state, parse_intent("yes"), backend)
    assert isinstance(actions[0], GraspAndHandover)
    assert actions[0].detection_index == 2
    assert state.phase is Phase.EXECUTING


def test_mode2a_non_yes_continues_enumeration():
    state, _ = start_session(Mode.MODE2A)
    dets = [det(0, "block", [("Pink", 1.0)]), det(1, "banana", [("Pink", 0.6), ("Green", 0.4)])]
    state, _ = observe(state, dets)
    backend = FakeBackend(detections=dets)
    state, _, _ = handle_utterance(state, parse_intent("something pink"), backend)
    assert state.confirm_index == 0
    state, says, actions = handle_utterance(state, parse_intent("no"), backend)
    assert state.confirm_index == 1
    assert state.phase is Phase.AWAIT_CONFIRM
    assert actions == []


def test_mode2a_exhausted_enumeration_resets():
    state, _ = start_session(Mode.MODE2A)
    state, _ = observe(state, DETS)
    backend = FakeBackend()
    state, says, actions = handle_utterance(state, parse_intent("something blue"), backend)
    assert texts(says)[-1] == "That is all I can see. What else do you want to get?"
    assert state.phase is Phase.AWAIT_REQUEST
    assert state.desired_color is None


def test_mode2a_restarts_enumeration_after_grasp():
    state, _ = start_session(Mode.MODE2A)
    state, _ = observe(state, DETS)
    backend = FakeBackend()
    state, _, _ = handle_utterance(state, parse_intent("something pink"), backend)
    state, _, actions = handle_utterance(state, parse_intent("yes"), backend)
    outcome = ExecutionOutcome(action=actions[0], report=success_report())
    state, says, actions = handle_result(state, outcome, backend)
    assert texts(says)[0] == "Here you are. What else do you want to get?"
    assert backend.redetect_count == 1
    assert any(isinstance(a, Redetect) for a in actions)
    # enumeration restarted from index 0 with the same color
    assert texts(says)[1].startswith("I see a banana")


# --- mode 2b / 3 keys ----------------------------------------------------------

def mode_with_detections(mode):
    state, _ = start_session(mode)
    state, _ = observe(state, DETS)
    return state


def test_key_digit_grasps_detection():
    state = mode_with_detections(Mode.MODE2B)
    backend = FakeBackend()
    state, says, actions = handle_key(state, "1", backend)
    assert texts(says)[0] == "Ok, I will get object 1 for you."
    assert isinstance(actions[0], GraspAndHandover)
    assert actions[0].detection_index == 1


def test_key_out_of_range_reprompts_state_unchanged():
    state = mode_with_detections(Mode.MODE2B)
    phase_before = state.phase
    state, says, actions = handle_key(state, "5", FakeBackend())
    assert texts(says) == ["Sorry, I did not catch that. What do you want to get?"]
    assert actions == []
    assert state.phase is phase_before


def test_key_6_redetects_and_reannounces():
    state = mode_with_detections(Mode.MODE2B)
    backend = FakeBackend()
    state, says, actions = handle_key(state, "6", backend)
    assert backend.redetect_count == 1
    assert any(isinstance(a, Redetect) for a in actions)
    assert any("Which object do you want to get?" in t for t in texts(says))


def test_key_8_is_mode3_only():
    state = mode_with_detections(Mode.MODE2B)
    state, says, actions = handle_key(state, "8", FakeBackend())
    assert actions == []
    assert texts(says) == ["Sorry, I did not catch that. What do you want to get?"]

    state = mode_with_detections(Mode.MODE3)
    state, says, actions = handle_key(state, "8", FakeBackend())
    assert state.pick_armed
    assert "choose two objects" in texts(says)[0].lower()


def test_mode3_pick_place_flow():
    state = mode_with_detections(Mode.MODE3)
    backend = FakeBackend()
    state, _, _ = handle_key(state, "8", backend)
    state, says, _ = handle_key(state, "0", backend)
    assert state.phase is Phase.AWAIT_SECOND_PICK
    assert state.first_pick == 0
    state, says, actions = handle_key(state, "2", backend)
    assert len(actions) == 1
    pp = actions[0]
    assert isinstance(pp, PickPlace)
    assert pp.grasp_index == 0 and pp.place_index == 2
    assert pp.grasp_label == "banana" and pp.place_label == "block"
    assert pp.distance == pytest.approx(pick_place_distance(GRASP.position, [0.2, -0.1, 0.05]))
    assert texts(says)[0] == "Ok, I will put the banana into the block."
    assert state.phase is Phase.EXECUTING


def test_mode3_same_index_rejected():
    state = mode_with_detections(Mode.MODE3)
    backend = FakeBackend()
    state, _, _ = handle_key(state, "8", backend)
    state, _, _ = handle_key(state, "0", backend)
    state, says, actions = handle_key(state, "0", backend)
    assert actions == []
    assert state.phase is Phase.AWAIT_SECOND_PICK


def test_key_9_shuts_down_from_any_state():
    for mode in Mode:
        state, _ = start_session(mode)
        state, says, actions = handle_key(state, "9", FakeBackend())
        assert texts(says) == ["Ok, goodbye!"]
        assert any(isinstance(a, Shutdown) for a in actions)
        assert state.shutting_down


def test_shutdown_is_absorbing():
    state = mode_with_detections(Mode.MODE2B)
    state, _, _ = handle_key(state, "9", FakeBackend())
    for key in "0123456789":
        state, says, actions = handle_key(state, key, FakeBackend())
        assert says == [] and actions == []
    state, says, actions = handle_utterance(state, parse_intent("take the banana"), FakeBackend())
    assert says == [] and actions == []


def test_keys_in_mode1_reprompt():
    state, _ = start_session(Mode.MODE1)
    state, says, actions = handle_key(state, "3", FakeBackend())
    assert actions == []
    assert texts(says) == ["Sorry, I did not catch that. What do you want to get?"]


def test_executor_failure_spoken_and_redetected():
    state = mode_with_detections(Mode.MODE2B)
    backend = FakeBackend()
    state, _, actions = handle_key(state, "1", backend)
    outcome = ExecutionOutcome(action=actions[0], report=failed_report())
    state, says, actions = handle_result(state, outcome, backend)
    assert "could not grasp it" in texts(says)[0]
    assert backend.redetect_count == 1
    assert state.phase is Phase.AWAIT_COMMAND


# --- distance ----------------------------------------------------------------

def test_pick_place_distance_examples():
    assert pick_place_distance((0, 0, 0), (3, 4, 0)) == 5.0
    assert pick_place_distance((0.2, -0.1, 0.0), (0.2, -0.1, 0.0)) == 0.0


def test_pick_place_distance_random_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p1 = rng.uniform(-1, 1, 3)
        p2 = rng.uniform(-1, 1, 3)
        # direct summation oracle
        expected = math.sqrt(sum((a - b) ** 2 for a, b in zip(p1, p2)))
        assert abs(pick_place_distance(p1, p2) - expected) < 1e-12


# --- fuzzing -----------------------------------------------------------------

def test_random_input_sequences_never_break_the_machine():
    rng = np.random.default_rng(120)
    utterances = ["take the banana", "yes", "no", "something pink", "gibberish",
                  "put the spoon into the bowl", "", "stop it now"]
    for trial in range(200):
        mode = list(Mode)[trial % 4]
        state, _ = start_session(mode)
        if mode is not Mode.MODE1:
            state, _ = observe(state, DETS)
        backend = FakeBackend(grasps=[GRASP, "DepthZero", GRASP, "NoGrasp"] * 4)
        for _ in range(12):
            if rng.random() < 0.5:
                state, _, actions = handle_key(state, str(rng.integers(0, 10)), backend)
            else:
                text = utterances[rng.integers(0, len(utterances))]
                state, _, actions = handle_utterance(state, parse_intent(text), backend)
            assert state.phase in Phase
            for action in actions:
                if isinstance(action, (GraspAndHandover, PickPlace)):
                    outcome = ExecutionOutcome(action=action, report=success_report())
                    state, _, _ = handle_result(state, outcome, backend)
            if state.shutting_down:
                break
