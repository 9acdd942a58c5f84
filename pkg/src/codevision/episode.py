"""Multi-turn environment: presents a (possibly corrupted) image plus a
question, executes tool-program actions against the working image, feeds
results or error logs back, enforces the turn budget, and judges answers.

An agent turn is ``<think>...</think>`` followed by exactly one
``<code>program</code>`` or ``<answer>text</answer>`` block. Code turns run
through the interpreter; a failure leaves the working image untouched and
returns the error log verbatim. The first answer ends the episode.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import toolprog
from .raster import (
    BBox,
    KIND_FOR_TOOL,
    MUST_USE_TOOLS,
    Raster,
    apply_transform,
)
from .toolprog import ExecFailure, ExecOutcome, ExecSuccess, Registry

TASK_TYPES = ("single-tool", "multi-tool", "multi-crop", "error-handling", "no-tool")

ANSWERED = "answered"
TURN_BUDGET_EXHAUSTED = "turn-budget-exhausted"
ABORTED = "aborted"
TERMINATIONS = (ANSWERED, TURN_BUDGET_EXHAUSTED, ABORTED)

FORMAT_ERROR_FEEDBACK = (
    "FORMAT ERROR: respond with <think>...</think> followed by exactly one "
    "<code>...</code> or <answer>...</answer> block"
)


class InvalidTask(Exception):
    pass


class EpisodeTerminated(Exception):
    pass


@dataclass(frozen=True)
class TaskSpec:
    """One environment task: question, corrupted and canonical images, the
    gold answer, and the reward metadata (required tools, target box)."""

    id: str
    question: str
    initial_image: Raster
    canonical_image: Raster
    gold_answer: str
    task_type: str
    s_req: tuple[str, ...]
    target_box: BBox | None
    max_turns: int
    # scripted first step for error-handling items; policy fixture metadata
    fault_script: str | None = None


def orientation_members(s_req: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(t for t in s_req if t in KIND_FOR_TOOL)


def validate_task(task: TaskSpec) -> None:
    """Raise InvalidTask on any TaskSpec invariant violation."""
    if task.task_type not in TASK_TYPES:
        raise InvalidTask(f"unknown task type {task.task_type!r}")
    if task.max_turns < 1:
        raise InvalidTask(f"max_turns must be >= 1, got {task.max_turns}")
    for tool in task.s_req:
        if tool not in MUST_USE_TOOLS:
            raise InvalidTask(f"s_req entry {tool!r} is not a must-use tool")
    if (len(task.s_req) == 0) != (task.task_type == "no-tool"):
        raise InvalidTask("s_req must be empty iff task type is no-tool")
    has_crop = "crop" in task.s_req
    if has_crop != (task.target_box is not None):
        raise InvalidTask("target_box must be present iff 'crop' is required")
    if task.target_box is not None:
        c = task.canonical_image
        if task.target_box.x1 > c.width or task.target_box.y1 > c.height:
            raise InvalidTask("target_box exceeds canonical image bounds")
    img = task.initial_image
    for tool in orientation_members(task.s_req):
        img = apply_transform(img, KIND_FOR_TOOL[tool])
    if img != task.canonical_image:
        raise InvalidTask(
            "applying the required orientation tools to initial_image does "
            "not recover the canonical image"
        )


# tempered dots: block bodies may not contain their own closing tag, so a
# second block after the first cannot be absorbed by backtracking
_ACTION_RE = re.compile(
    r"\A\s*<think>(?P<think>(?:(?!</think>).)*)</think>\s*"
    r"(?:<code>(?P<code>(?:(?!</code>).)*)</code>"
    r"|<answer>(?P<answer>(?:(?!</answer>).)*)</answer>)\s*\Z",
    re.DOTALL,
)


@dataclass(frozen=True)
class AgentAction:
    """A raw assistant turn plus its parsed blocks; malformed turns keep the
    raw text and have all parsed fields None."""

    raw_text: str
    think: str | None = None
    code: str | None = None
    answer: str | None = None

    @property
    def well_formed(self) -> bool:
        return self.think is not None and (self.code is None) != (self.answer is None)


def parse_action(raw: str) -> AgentAction:
    m = _ACTION_RE.match(raw)
    if m is None:
        return AgentAction(raw)
    return AgentAction(raw, m.group("think"), m.group("code"), m.group("answer"))


@dataclass(frozen=True)
class Turn:
    action: AgentAction
    outcome: ExecOutcome | None  # present iff the action was a code action
    image_after: Raster


@dataclass(frozen=True)
class Trajectory:
    task: TaskSpec
    turns: tuple[Turn, ...]
    final_answer: str | None
    termination: str


@dataclass(frozen=True)
class Observation:
    question: str
    image: Raster
    tools_doc: str


def check_answer(pred: str, gold: str) -> bool:
    """Exact match after normalization: whitespace collapse, casefold, and
    trailing .,;:!? stripped."""
    return _normalize(pred) == _normalize(gold)


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold().rstrip(".,;:!? \t")


def format_ok(traj: Trajectory) -> bool:
    """True iff every turn is a well-formed tagged action."""
    return all(t.action.well_formed for t in traj.turns)


def feedback_text(outcome: ExecOutcome) -> str:
    """Deterministic rendering of an execution outcome for the agent."""
    if isinstance(outcome, ExecSuccess):
        return (
            f"EXEC OK applied=[{', '.join(outcome.applied)}] "
            f"image={outcome.result.width}x{outcome.result.height}"
        )
    return f"EXEC ERROR {outcome.error_kind}: {outcome.message} at {outcome.line}:{outcome.col}"


ANSWER_FEEDBACK = "ANSWER RECEIVED"


def initial_prompt(task: TaskSpec, registry: Registry | None = None) -> str:
    """The user-side opening message shown to a policy (and stored for SFT)."""
    reg = registry if registry is not None else toolprog.DEFAULT_REGISTRY
    doc = "\n".join(reg.doc_lines())
    return (
        f"QUESTION: {task.question}\n"
        f"IMAGE: {task.initial_image.width}x{task.initial_image.height} attached\n"
        f"TOOLS:\n{doc}\n"
        "Respond with <think>...</think> followed by exactly one "
        "<code>program</code> or <answer>text</answer> block."
    )


class Episode:
    """Single-owner episode state machine; distinct episodes are independent."""

    def __init__(self, task: TaskSpec, registry: Registry | None = None,
                 crop_mode: str = "clip", validate: bool = True):
        if validate:
            validate_task(task)
        self.task = task
        self._registry = registry if registry is not None else toolprog.DEFAULT_REGISTRY
        self._crop_mode = crop_mode
        self._reset_state()

    def _reset_state(self) -> None:
        self._image = self.task.initial_image
        self._turns: list[Turn] = []
        self._final_answer: str | None = None
        self._termination: str | None = None

    def reset(self) -> Observation:
        """Fresh episode state; returns the opening observation."""
        self._reset_state()
        return Observation(
            self.task.question, self._image, "\n".join(self._registry.doc_lines())
        )

    @property
    def working_image(self) -> Raster:
        return self._image

    @property
    def done(self) -> bool:
        return self._termination is not None

    @property
    def turn_count(self) -> int:
        return len(self._turns)

    def step(self, action: AgentAction | str) -> tuple[str, bool]:
        """Apply one agent action; returns (feedback text, done)."""
        if self._termination is not None:
            raise EpisodeTerminated(f"episode for task {self.task.id!r} is finished")
        act = parse_action(action) if isinstance(action, str) else action
        outcome: ExecOutcome | None = None
        if act.well_formed and act.code is not None:
            outcome = toolprog.execute(
                act.code, self._image, self._registry, self._crop_mode
            )
            if isinstance(outcome, ExecSuccess):
                self._image = outcome.result
            feedback = feedback_text(outcome)
        elif act.well_formed and act.answer is not None:
            self._final_answer = act.answer
            self._termination = ANSWERED
            feedback = ANSWER_FEEDBACK
        else:
            feedback = FORMAT_ERROR_FEEDBACK
        self._turns.append(Turn(act, outcome, self._image))
        if self._termination is None and len(self._turns) >= self.task.max_turns:
            self._termination = TURN_BUDGET_EXHAUSTED
        return feedback, self._termination is not None

    def abort(self) -> None:
        if self._termination is None:
            self._termination = ABORTED

    def trajectory(self) -> Trajectory:
        """Snapshot of the episode; termination is ABORTED if still live."""
        term = self._termination if self._termination is not None else ABORTED
        return Trajectory(self.task, tuple(self._turns), self._final_answer, term)


def replay(traj: Trajectory, registry: Registry | None = None,
           crop_mode: str = "clip") -> list[tuple[str, Raster]]:
    """Re-run a trajectory's actions through a fresh episode.

    Returns the per-step (feedback, image) pairs; deterministic, so replaying
    a recorded trajectory reproduces its feedbacks and images byte-exactly.
    """
    ep = Episode(traj.task, registry, crop_mode)
    ep.reset()
    out = []
    for turn in traj.turns:
        fb, _ = ep.step(turn.action.raw_text)
        out.append((fb, ep.working_image))
    return out
