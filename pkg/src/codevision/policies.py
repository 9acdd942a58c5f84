"""Deterministic scripted agents.

These are behavioral fixtures, not solvers: Oracle reads the task metadata
and plays the required tools perfectly, TrialAndError rotates until the view
matches the canonical image, RewardHacker keeps calling orientation tools to
farm strategy reward, Clumsy makes one scripted mistake and then recovers,
and Random emits grammar-valid noise. Given the same (task, seed) a policy
always produces the same action sequence.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .datagen.generate import multicrop_windows
from .episode import Episode, TaskSpec, Trajectory
from .raster import BBox, KIND_FOR_TOOL, Raster
from .reward import GroupEntry, GroupStats, outcome_reward, uses_optional_tool
from .toolprog import Registry

POLICY_KINDS = ("oracle", "oracle-enhance", "trial", "hacker", "clumsy", "random")


@dataclass(frozen=True)
class PolicyView:
    """What a policy sees when choosing its next action."""

    question: str
    image: Raster
    feedback: str | None
    turn_index: int
    history: tuple[tuple[str, str], ...]  # (raw action, feedback) pairs


def _think(text: str, body: str) -> str:
    return f"<think>{text}</think>{body}"


def _code(text: str, prog: str) -> str:
    return _think(text, f"<code>{prog}</code>")


def _answer(text: str, ans: str) -> str:
    return _think(text, f"<answer>{ans}</answer>")


def _crop_call(box: BBox) -> str:
    return f"crop(x0={box.x0}, y0={box.y0}, x1={box.x1}, y1={box.y1})"


def _required_steps(task: TaskSpec) -> list[str]:
    """One program per required tool, with crop boxes translated into the
    frame left by the preceding crops (orientation members come first in
    generated tasks, so crops run in canonical coordinates)."""
    n_crops = sum(1 for t in task.s_req if t == "crop")
    windows: list[BBox] = []
    if n_crops == 1:
        windows = [task.target_box]
    elif n_crops > 1:
        windows = list(multicrop_windows(
            task.target_box, task.canonical_image.size, n_crops))
    steps = []
    ox = oy = 0
    wi = 0
    for tool in task.s_req:
        if tool == "crop":
            w = windows[wi]
            wi += 1
            rel = BBox(w.x0 - ox, w.y0 - oy, w.x1 - ox, w.y1 - oy)
            steps.append(_crop_call(rel))
            ox, oy = w.x0, w.y0
        else:
            steps.append(f"{tool}()")
    return steps


class OraclePolicy:
    """Plays s_req in order with exact crop boxes, then answers the gold
    answer; with enhance=True it first runs one optional grayscale call."""

    def __init__(self, enhance: bool = False):
        self.enhance = enhance

    def act(self, task: TaskSpec, view: PolicyView) -> str:
        plan = []
        if self.enhance:
            plan.append(_code("a grayscale view may read better", "grayscale()"))
        plan.extend(
            _code(f"the task needs {tool}", step)
            for tool, step in zip(task.s_req, _required_steps(task))
        )
        plan.append(_answer("the region is readable now", task.gold_answer))
        return plan[view.turn_index]


class TrialAndErrorPolicy:
    """Cycles rotate90/rotate180/rotate270 until the working image matches
    the canonical image, then answers; flips never match, so flip-corrupted
    tasks run out the turn budget."""

    ROTATIONS = ("rotate90", "rotate180", "rotate270")

    def act(self, task: TaskSpec, view: PolicyView) -> str:
        if view.image == task.canonical_image:
            return _answer("the view matches the expected orientation", task.gold_answer)
        tool = self.ROTATIONS[view.turn_index % 3]
        return _code(f"still looks wrong, trying {tool}", f"{tool}()")


class RewardHackerPolicy:
    """Solves the required tools, then keeps emitting orientation calls until
    the budget forces a (wrong) answer; mirrors reward-farming behavior."""

    JUNK = ("rotate90", "rotate180", "rotate270")

    def act(self, task: TaskSpec, view: PolicyView) -> str:
        steps = _required_steps(task)
        i = view.turn_index
        if i < len(steps):
            return _code(f"the task needs {task.s_req[i]}", steps[i])
        if i < task.max_turns - 1:
            tool = self.JUNK[(i - len(steps)) % 3]
            return _code(f"one more {tool} for good measure", f"{tool}()")
        return _answer("out of budget", "i cannot tell")


class ClumsyPolicy:
    """One scripted wrong step, then recovery.

    On error-handling tasks the wrong step is the task's fault script (a
    failing call); on other tool tasks it is a wrong-but-valid orientation
    call (or a failing crop when crops are required, so the later exact crop
    boxes still line up); on no-tool tasks it is a malformed program.
    """

    def _wrong_step(self, task: TaskSpec) -> str:
        if task.fault_script is not None:
            return _code("zooming in should help", task.fault_script)
        if not task.s_req:
            return _think("let me look closer", "<code>oops(</code>")
        if "crop" in task.s_req:
            return _code("cropping first", "crop(x0=1)")
        wrong = "flip-horizontal" if task.s_req[0] != "flip-horizontal" else "rotate180"
        return _code(f"this looks mirrored, trying {wrong}", f"{wrong}()")

    def act(self, task: TaskSpec, view: PolicyView) -> str:
        if view.turn_index == 0:
            return self._wrong_step(task)
        steps = _required_steps(task)
        i = view.turn_index - 1
        if i < len(steps):
            return _code(
                f"that failed, the right tool is {task.s_req[i]}", steps[i]
            )
        return _answer("recovered and read the region", task.gold_answer)


class RandomPolicy:
    """Grammar-valid random programs, then a random answer."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def act(self, task: TaskSpec, view: PolicyView) -> str:
        rng = random.Random(f"random:{self.seed}:{task.id}:{view.turn_index}")
        n_code = min(task.max_turns - 1, rng.randint(1, 3))
        if view.turn_index >= n_code:
            from .datagen.font import LEXICON

            return _answer("guessing", rng.choice(LEXICON).lower())
        calls = []
        for _ in range(rng.randint(1, 2)):
            tool = rng.choice(
                ("rotate90", "rotate180", "rotate270", "flip-horizontal",
                 "flip-vertical", "crop", "grayscale", "brightness", "contrast")
            )
            if tool == "crop":
                w, h = view.image.size
                x0 = rng.randrange(w)
                y0 = rng.randrange(h)
                calls.append(
                    f"crop(x0={x0}, y0={y0}, x1={rng.randint(x0 + 1, w)}, "
                    f"y1={rng.randint(y0 + 1, h)})"
                )
            elif tool in ("brightness", "contrast"):
                calls.append(f"{tool}(factor={round(rng.uniform(0.5, 2.0), 2)})")
            else:
                calls.append(f"{tool}()")
        return _code("poking at the image", " | ".join(calls))


def make_policy(kind: str, seed: int = 0):
    if kind == "oracle":
        return OraclePolicy()
    if kind == "oracle-enhance":
        return OraclePolicy(enhance=True)
    if kind == "trial":
        return TrialAndErrorPolicy()
    if kind == "hacker":
        return RewardHackerPolicy()
    if kind == "clumsy":
        return ClumsyPolicy()
    if kind == "random":
        return RandomPolicy(seed)
    raise ValueError(f"unknown policy kind {kind!r}; choose from {POLICY_KINDS}")


def run_episode(policy, task: TaskSpec, registry: Registry | None = None) -> Trajectory:
    """Drive one episode with a scripted policy; returns its trajectory."""
    ep = Episode(task, registry)
    obs = ep.reset()
    history: list[tuple[str, str]] = []
    feedback: str | None = None
    done = False
    while not done:
        view = PolicyView(obs.question, ep.working_image, feedback,
                          ep.turn_count, tuple(history))
        action = policy.act(task, view)
        feedback, done = ep.step(action)
        history.append((action, feedback))
    return ep.trajectory()


def rollout_group(policies, task: TaskSpec,
                  registry: Registry | None = None) -> tuple[GroupStats, list[Trajectory]]:
    """Run one episode per policy and assemble the group-barrier stats the
    necessity reward consumes."""
    if len(policies) < 2:
        raise ValueError("a rollout group needs at least 2 policies")
    trajs = [run_episode(p, task, registry) for p in policies]
    entries = []
    for t in trajs:
        r_acc, _ = outcome_reward(t)
        entries.append(GroupEntry(uses_optional_tool(t), r_acc))
    return GroupStats(task.id, tuple(entries)), trajs
