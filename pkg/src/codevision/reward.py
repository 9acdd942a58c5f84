"""Dense multi-component trajectory reward.

Per trajectory the total combines an outcome term (answer accuracy plus tag
formatting), a strategy term (the 1/N must-use budget with IoU-improvement
crop credit and the exact-trajectory bonus, plus the suggested-tool bonuses),
and three 0/1 constraint penalties:

    total = (r_acc + w_fmt * r_fmt)
          + beta1 * (w_must * (must_use + traj_match) + w_sugg * (nec + opt))
          - beta2 * (turn_limit + poor_reasoning + inappropriate_tool)

Scoring is two-phase: `score_trajectory` is pure and per-trajectory; the
group-level inferred-necessity bonus requires all K rollouts of a task, so
`finalize_group` runs after the group barrier and rewrites the totals of the
eligible trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .episode import Trajectory, check_answer, format_ok, orientation_members
from .raster import (
    BBox,
    ENHANCEMENT_TOOLS,
    INVERSE_KIND,
    KIND_FOR_TOOL,
    TransformKind,
    iou,
    map_box,
)
from .toolprog import AppliedCall, ExecSuccess


class NotTerminated(Exception):
    pass


class NoRequirement(Exception):
    pass


class IncompleteGroup(Exception):
    pass


@dataclass(frozen=True)
class RewardConfig:
    beta1: float = 1.0
    beta2: float = 0.5
    w_fmt: float = 0.1
    w_must: float = 1.0
    w_sugg: float = 0.2
    traj_match_bonus: float = 0.5
    optional_tool_bonus: float = 0.1
    iou_floor: float = 0.1
    group_k: int = 8

    def __post_init__(self):
        for name in ("beta1", "beta2", "w_fmt", "w_must", "w_sugg",
                     "traj_match_bonus", "optional_tool_bonus"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (0 < self.iou_floor < 1):
            raise ValueError("iou_floor must be in (0,1)")
        if self.group_k < 2:
            raise ValueError("group_k must be >= 2")

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "RewardConfig":
        kwargs = {}
        for key, raw in pairs.items():
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown reward config key {key!r}")
            kwargs[key] = int(raw) if key == "group_k" else float(raw)
        return cls(**kwargs)


@dataclass(frozen=True)
class LedgerEntry:
    tool: str
    amount: float
    turn: int


@dataclass(frozen=True)
class Penalties:
    turn_limit: int = 0
    poor_reasoning: int = 0
    inappropriate_tool: int = 0

    @property
    def total(self) -> int:
        return self.turn_limit + self.poor_reasoning + self.inappropriate_tool


@dataclass(frozen=True)
class RewardBreakdown:
    task_id: str
    r_acc: int
    r_fmt: int
    must_use_total: float
    ledger: tuple[LedgerEntry, ...]
    traj_match: float  # 0 or traj_match_bonus
    nec_bonus: float
    opt_bonus: float
    penalties: Penalties
    total: float
    best_crop_iou: float = 0.0
    uses_optional_tool: bool = False


def combine_total(b: RewardBreakdown, cfg: RewardConfig) -> float:
    """Closed-form recombination of a breakdown's parts."""
    outcome = b.r_acc + cfg.w_fmt * b.r_fmt
    strategy = cfg.w_must * (b.must_use_total + b.traj_match) + cfg.w_sugg * (
        b.nec_bonus + b.opt_bonus
    )
    return outcome + cfg.beta1 * strategy - cfg.beta2 * b.penalties.total


# --- coordinate frame tracking -------------------------------------------------

class _Frame:
    """Maps boxes in the current working image back to canonical coordinates.

    Tracks the chain of geometry-changing steps applied since the canonical
    image: the generator's corruption (inverse of the required orientation
    tools) plus every successfully executed orientation or crop call.
    """

    def __init__(self, canonical_size: tuple[int, int]):
        self._steps: list[tuple] = []  # ("orient", kind, after_w, after_h) | ("crop", ox, oy)
        self._size = canonical_size

    @classmethod
    def for_task(cls, task) -> "_Frame":
        frame = cls(task.canonical_image.size)
        members = orientation_members(task.s_req)
        # executing s_req m1..mk restores canonical, so the corruption applied
        # at generation time was inv(mk), ..., inv(m1) in that order
        for tool in reversed(members):
            frame.push_orient(INVERSE_KIND[KIND_FOR_TOOL[tool]])
        return frame

    def push_orient(self, kind: TransformKind) -> None:
        w, h = self._size
        if kind in (TransformKind.ROT90, TransformKind.ROT270):
            self._size = (h, w)
        self._steps.append(("orient", kind, self._size[0], self._size[1]))

    def push_crop(self, box: BBox) -> None:
        self._steps.append(("crop", box.x0, box.y0))
        self._size = (box.width, box.height)

    def to_canonical(self, box: BBox) -> BBox:
        for step in reversed(self._steps):
            if step[0] == "crop":
                _, ox, oy = step
                box = BBox(box.x0 + ox, box.y0 + oy, box.x1 + ox, box.y1 + oy)
            else:
                _, kind, aw, ah = step
                box = map_box(box, INVERSE_KIND[kind], aw, ah)
        return box


def _successful_calls(traj: Trajectory) -> tuple[list[tuple[AppliedCall, int]], bool]:
    """(calls from successful code turns with their turn index, any_failure).

    Calls inside a failed program are excluded even if they ran before the
    failure: the episode rolls their image effects back.
    """
    calls: list[tuple[AppliedCall, int]] = []
    any_failure = False
    for i, turn in enumerate(traj.turns):
        if turn.outcome is None:
            continue
        if isinstance(turn.outcome, ExecSuccess):
            calls.extend((c, i) for c in turn.outcome.calls)
        else:
            any_failure = True
    return calls, any_failure


def _crop_attempts(traj: Trajectory) -> list[tuple[float, int]]:
    """IoU of every successfully executed crop against the target box,
    evaluated in canonical coordinates, in execution order."""
    task = traj.task
    if task.target_box is None:
        return []
    frame = _Frame.for_task(task)
    out: list[tuple[float, int]] = []
    calls, _ = _successful_calls(traj)
    for call, turn_idx in calls:
        if call.tool in KIND_FOR_TOOL:
            frame.push_orient(KIND_FOR_TOOL[call.tool])
        elif call.tool == "crop":
            args = dict(call.args)
            box = BBox(args["x0"], args["y0"], args["x1"], args["y1"])
            out.append((iou(frame.to_canonical(box), task.target_box), turn_idx))
            frame.push_crop(box)
    return out


def best_crop_iou(traj: Trajectory) -> float:
    return max((v for v, _ in _crop_attempts(traj)), default=0.0)


# --- reward components ----------------------------------------------------------

def outcome_reward(traj: Trajectory) -> tuple[int, int]:
    """(r_acc, r_fmt); requires a terminated trajectory."""
    from .episode import TERMINATIONS

    if traj.termination not in TERMINATIONS:
        raise NotTerminated(f"trajectory termination {traj.termination!r} is not set")
    r_acc = int(
        traj.final_answer is not None
        and check_answer(traj.final_answer, traj.task.gold_answer)
    )
    return r_acc, int(format_ok(traj))


def must_use_reward(traj: Trajectory) -> tuple[float, tuple[LedgerEntry, ...]]:
    """1/N budget per required tool.

    Categorical tools credit 1/N at their first successful execution
    (multiset name matching). Crop entries pool their budget and credit it
    on IoU improvement over the best attempt so far, so the total crop
    credit is (crop entries / N) * best IoU achieved.
    """
    task = traj.task
    if not task.s_req:
        raise NoRequirement(f"task {task.id!r} has an empty required tool set")
    n = len(task.s_req)
    share = 1.0 / n
    pending = [t for t in task.s_req if t != "crop"]
    crop_entries = sum(1 for t in task.s_req if t == "crop")
    ledger: list[LedgerEntry] = []
    total = 0.0
    calls, _ = _successful_calls(traj)
    for call, turn_idx in calls:
        if call.tool in pending:
            pending.remove(call.tool)
            ledger.append(LedgerEntry(call.tool, share, turn_idx))
            total += share
    if crop_entries:
        crop_share = crop_entries * share
        best = 0.0
        for value, turn_idx in _crop_attempts(traj):
            if value > best:
                ledger.append(LedgerEntry("crop", crop_share * (value - best), turn_idx))
                total += crop_share * (value - best)
                best = value
    return total, tuple(ledger)


def traj_match(traj: Trajectory) -> int:
    """1 iff the successful call sequence equals s_req exactly, in order,
    with no redundant or incorrect steps; any failed call forfeits it."""
    task = traj.task
    if not task.s_req:
        return 0
    calls, any_failure = _successful_calls(traj)
    if any_failure:
        return 0
    return int(tuple(c.tool for c, _ in calls) == tuple(task.s_req))


def uses_optional_tool(traj: Trajectory) -> bool:
    """True iff any successfully executed enhancement tool is outside s_req."""
    calls, _ = _successful_calls(traj)
    return any(
        c.tool in ENHANCEMENT_TOOLS and c.tool not in traj.task.s_req
        for c, _ in calls
    )


def optional_bonus(traj: Trajectory, cfg: RewardConfig | None = None,
                   r_acc: int | None = None) -> float:
    cfg = cfg if cfg is not None else RewardConfig()
    if r_acc is None:
        r_acc, _ = outcome_reward(traj)
    return cfg.optional_tool_bonus if (r_acc == 1 and uses_optional_tool(traj)) else 0.0


def penalties(traj: Trajectory, cfg: RewardConfig | None = None,
              r_acc: int | None = None) -> Penalties:
    """The three 0/1 guardrails.

    turn_limit: code turns beyond the |s_req|+1 budget (no-tool tasks get 1).
    poor_reasoning: correct answer on a crop-required task whose best crop
    IoU stays under the floor (strictly).
    inappropriate_tool: any orientation tool executed on a no-tool task.
    """
    cfg = cfg if cfg is not None else RewardConfig()
    if r_acc is None:
        r_acc, _ = outcome_reward(traj)
    task = traj.task
    n_code = sum(1 for t in traj.turns if t.action.code is not None)
    turn_limit = int(n_code > len(task.s_req) + 1)
    poor = 0
    if r_acc == 1 and "crop" in task.s_req:
        poor = int(best_crop_iou(traj) < cfg.iou_floor)
    inappropriate = 0
    if not task.s_req:
        calls, _ = _successful_calls(traj)
        inappropriate = int(any(c.tool in KIND_FOR_TOOL for c, _ in calls))
    return Penalties(turn_limit, poor, inappropriate)


def score_trajectory(traj: Trajectory, cfg: RewardConfig | None = None) -> RewardBreakdown:
    """Phase one: everything except the group-level necessity bonus."""
    cfg = cfg if cfg is not None else RewardConfig()
    r_acc, r_fmt = outcome_reward(traj)
    if traj.task.s_req:
        must_total, ledger = must_use_reward(traj)
        match_amt = cfg.traj_match_bonus * traj_match(traj)
    else:
        must_total, ledger, match_amt = 0.0, (), 0.0
    opt = optional_bonus(traj, cfg, r_acc)
    pen = penalties(traj, cfg, r_acc)
    b = RewardBreakdown(
        task_id=traj.task.id,
        r_acc=r_acc,
        r_fmt=r_fmt,
        must_use_total=must_total,
        ledger=ledger,
        traj_match=match_amt,
        nec_bonus=0.0,
        opt_bonus=opt,
        penalties=pen,
        total=0.0,
        best_crop_iou=best_crop_iou(traj),
        uses_optional_tool=uses_optional_tool(traj),
    )
    return replace(b, total=combine_total(b, cfg))


# --- group phase -----------------------------------------------------------------

@dataclass(frozen=True)
class GroupEntry:
    uses_tool: bool
    r_acc: int


@dataclass(frozen=True)
class GroupStats:
    """K scored rollouts of one task, partitioned by optional-tool use."""

    task_id: str
    entries: tuple[GroupEntry, ...]

    def __post_init__(self):
        if len(self.entries) < 2:
            raise ValueError("a rollout group needs at least 2 trajectories")

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def n_tool(self) -> int:
        return sum(1 for e in self.entries if e.uses_tool)

    @property
    def n_notool(self) -> int:
        return self.k - self.n_tool

    @property
    def succ_tool(self) -> int:
        return sum(e.r_acc for e in self.entries if e.uses_tool)

    @property
    def succ_notool(self) -> int:
        return sum(e.r_acc for e in self.entries if not e.uses_tool)


def necessity_reward(group: GroupStats) -> float:
    """Success-rate gap between the tool-using and no-tool partitions.

    Zero unless both partitions are non-empty, the tool-using group has the
    strictly higher success rate, and the no-tool group has at most one
    success; invariant under permutation of the group.
    """
    for e in group.entries:
        if e.r_acc not in (0, 1):
            raise IncompleteGroup(f"group for {group.task_id!r} has unscored entries")
    if group.n_tool == 0 or group.n_notool == 0:
        return 0.0
    if group.succ_notool > 1:
        return 0.0
    mean_tool = group.succ_tool / group.n_tool
    mean_notool = group.succ_notool / group.n_notool
    if mean_tool <= mean_notool:
        return 0.0
    return mean_tool - mean_notool


def finalize_group(
    trajs: list[Trajectory],
    breakdowns: list[RewardBreakdown],
    cfg: RewardConfig | None = None,
) -> tuple[GroupStats, list[RewardBreakdown]]:
    """Phase two: compute r_nec for the group and add it (weighted by
    w_sugg * beta1 inside the total) to every successful tool-using rollout."""
    cfg = cfg if cfg is not None else RewardConfig()
    if len(trajs) != len(breakdowns):
        raise ValueError("trajectories and breakdowns must align")
    ids = {t.task.id for t in trajs}
    if len(ids) != 1:
        raise ValueError(f"rollout group spans multiple tasks: {sorted(ids)}")
    group = GroupStats(
        trajs[0].task.id,
        tuple(GroupEntry(b.uses_optional_tool, b.r_acc) for b in breakdowns),
    )
    r_nec = necessity_reward(group)
    out = []
    for b in breakdowns:
        if r_nec > 0.0 and b.uses_optional_tool and b.r_acc == 1:
            b = replace(b, nec_bonus=r_nec)
            b = replace(b, total=combine_total(b, cfg))
        out.append(b)
    return group, out
