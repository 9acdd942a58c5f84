"""Persistence: JSONL archives for tasks, trajectories, reward breakdowns,
and masked training examples, with content-addressed PPM image storage.

Serialization is canonical (sorted keys, compact separators, shortest
round-trip floats), so writing the same record twice yields identical bytes
and same-seed pipelines produce checksum-equal artifacts. Images live in an
`images/` directory keyed by SHA-256 of their PPM bytes and are verified on
load.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .episode import (
    ANSWER_FEEDBACK,
    FORMAT_ERROR_FEEDBACK,
    TERMINATIONS,
    TaskSpec,
    Trajectory,
    Turn,
    feedback_text,
    initial_prompt,
    parse_action,
)
from .raster import BBox, Raster, ppm_bytes
from .reward import LedgerEntry, Penalties, RewardBreakdown
from .toolprog import AppliedCall, ExecFailure, ExecSuccess
from .reward import NotTerminated

SCHEMA_VERSION = 1


class CorruptRecord(Exception):
    def __init__(self, path, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno
        self.reason = reason


class ChecksumMismatch(Exception):
    pass


# --- training examples -------------------------------------------------------

ROLES = ("user", "assistant", "tool-return")


@dataclass(frozen=True)
class TrainingSegment:
    """One dialogue segment with its loss mask; the mask is fully determined
    by the role: only assistant segments train."""

    role: str
    text: str
    mask: int

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown segment role {self.role!r}")
        expected = 1 if self.role == "assistant" else 0
        if self.mask != expected:
            raise ValueError(
                f"segment with role {self.role!r} must have mask {expected}"
            )


@dataclass(frozen=True)
class TrainingExample:
    task_id: str
    final_answer: str | None
    segments: tuple[TrainingSegment, ...]

    def __post_init__(self):
        if not any(s.role == "assistant" for s in self.segments):
            raise ValueError("a training example needs at least one assistant segment")


def to_training_example(traj: Trajectory) -> TrainingExample:
    """Interleave the opening prompt, assistant turns (mask 1) and cached
    tool feedback (mask 0); lossless with respect to replaying the episode."""
    if traj.termination not in TERMINATIONS:
        raise NotTerminated(f"trajectory termination {traj.termination!r} is not set")
    segs = [TrainingSegment("user", initial_prompt(traj.task), 0)]
    for turn in traj.turns:
        segs.append(TrainingSegment("assistant", turn.action.raw_text, 1))
        if turn.outcome is not None:
            segs.append(TrainingSegment("tool-return", feedback_text(turn.outcome), 0))
        elif turn.action.answer is None:
            segs.append(TrainingSegment("tool-return", FORMAT_ERROR_FEEDBACK, 0))
    return TrainingExample(traj.task.id, traj.final_answer, tuple(segs))


# --- image store ---------------------------------------------------------------

class ImageStore:
    """Content-addressed PPM files under <root>/images/."""

    def __init__(self, root):
        self.root = Path(root)
        self.dir = self.root / "images"

    def save(self, img: Raster) -> dict:
        data = ppm_bytes(img)
        digest = hashlib.sha256(data).hexdigest()
        rel = f"images/{digest}.ppm"
        path = self.root / rel
        if not path.exists():
            self.dir.mkdir(parents=True, exist_ok=True)
            _atomic_write_bytes(path, data)
        return {"path": rel, "sha256": digest}

    def load(self, ref: dict) -> Raster:
        path = self.root / ref["path"]
        data = path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != ref["sha256"]:
            raise ChecksumMismatch(
                f"{path}: expected sha256 {ref['sha256']}, found {digest}"
            )
        from .raster import parse_ppm

        return parse_ppm(data)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# --- record codecs ---------------------------------------------------------------

def dumps_canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def task_to_record(task: TaskSpec, store: ImageStore) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "task",
        "id": task.id,
        "question": task.question,
        "task_type": task.task_type,
        "s_req": list(task.s_req),
        "target_box": list(task.target_box.as_tuple()) if task.target_box else None,
        "max_turns": task.max_turns,
        "gold_answer": task.gold_answer,
        "fault_script": task.fault_script,
        "initial_image": store.save(task.initial_image),
        "canonical_image": store.save(task.canonical_image),
    }


def task_from_record(rec: dict, store: ImageStore) -> TaskSpec:
    return TaskSpec(
        id=rec["id"],
        question=rec["question"],
        initial_image=store.load(rec["initial_image"]),
        canonical_image=store.load(rec["canonical_image"]),
        gold_answer=rec["gold_answer"],
        task_type=rec["task_type"],
        s_req=tuple(rec["s_req"]),
        target_box=BBox(*rec["target_box"]) if rec["target_box"] else None,
        max_turns=rec["max_turns"],
        fault_script=rec.get("fault_script"),
    )


def _outcome_to_record(outcome) -> dict:
    if isinstance(outcome, ExecSuccess):
        return {
            "status": "success",
            "applied": list(outcome.applied),
            "calls": [
                {
                    "tool": c.tool,
                    "args": [[n, v] for n, v in c.args],
                    "in_size": list(c.in_size),
                    "out_size": list(c.out_size),
                }
                for c in outcome.calls
            ],
            "log": outcome.log,
        }
    return {
        "status": "failure",
        "error_kind": outcome.error_kind,
        "message": outcome.message,
        "span": list(outcome.span),
        "line": outcome.line,
        "col": outcome.col,
        "applied_prefix": list(outcome.applied_prefix),
    }


def _outcome_from_record(rec: dict, image_after: Raster):
    if rec["status"] == "success":
        return ExecSuccess(
            result=image_after,
            applied=tuple(rec["applied"]),
            calls=tuple(
                AppliedCall(
                    c["tool"],
                    tuple((n, v) for n, v in c["args"]),
                    tuple(c["in_size"]),
                    tuple(c["out_size"]),
                )
                for c in rec["calls"]
            ),
            log=rec["log"],
        )
    return ExecFailure(
        error_kind=rec["error_kind"],
        message=rec["message"],
        span=tuple(rec["span"]),
        line=rec["line"],
        col=rec["col"],
        applied_prefix=tuple(rec["applied_prefix"]),
    )


def trajectory_to_record(traj: Trajectory, store: ImageStore) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "trajectory",
        "task": task_to_record(traj.task, store),
        "turns": [
            {
                "action": t.action.raw_text,
                "outcome": _outcome_to_record(t.outcome) if t.outcome else None,
                "image_after": store.save(t.image_after),
            }
            for t in traj.turns
        ],
        "final_answer": traj.final_answer,
        "termination": traj.termination,
    }


def trajectory_from_record(rec: dict, store: ImageStore) -> Trajectory:
    task = task_from_record(rec["task"], store)
    turns = []
    for t in rec["turns"]:
        image_after = store.load(t["image_after"])
        outcome = _outcome_from_record(t["outcome"], image_after) if t["outcome"] else None
        turns.append(Turn(parse_action(t["action"]), outcome, image_after))
    return Trajectory(task, tuple(turns), rec["final_answer"], rec["termination"])


def breakdown_to_record(b: RewardBreakdown) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "reward",
        "task_id": b.task_id,
        "r_acc": b.r_acc,
        "r_fmt": b.r_fmt,
        "must_use_total": b.must_use_total,
        "ledger": [[e.tool, e.amount, e.turn] for e in b.ledger],
        "traj_match": b.traj_match,
        "nec_bonus": b.nec_bonus,
        "opt_bonus": b.opt_bonus,
        "penalties": {
            "turn_limit": b.penalties.turn_limit,
            "poor_reasoning": b.penalties.poor_reasoning,
            "inappropriate_tool": b.penalties.inappropriate_tool,
        },
        "total": b.total,
        "best_crop_iou": b.best_crop_iou,
        "uses_optional_tool": b.uses_optional_tool,
    }


def breakdown_from_record(rec: dict) -> RewardBreakdown:
    return RewardBreakdown(
        task_id=rec["task_id"],
        r_acc=rec["r_acc"],
        r_fmt=rec["r_fmt"],
        must_use_total=rec["must_use_total"],
        ledger=tuple(LedgerEntry(t, a, i) for t, a, i in rec["ledger"]),
        traj_match=rec["traj_match"],
        nec_bonus=rec["nec_bonus"],
        opt_bonus=rec["opt_bonus"],
        penalties=Penalties(**rec["penalties"]),
        total=rec["total"],
        best_crop_iou=rec["best_crop_iou"],
        uses_optional_tool=rec["uses_optional_tool"],
    )


def diagnostic_to_record(item, store: ImageStore) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "diagnostic",
        "id": item.id,
        "options": list(item.options),
        "gold": item.gold,
        "canonical": store.save(item.canonical),
        "observed": store.save(item.observed),
    }


def diagnostic_from_record(rec: dict, store: ImageStore):
    from .datagen.generate import DiagnosticItem

    return DiagnosticItem(
        id=rec["id"],
        canonical=store.load(rec["canonical"]),
        observed=store.load(rec["observed"]),
        options=tuple(rec["options"]),
        gold=rec["gold"],
    )


def save_diagnostics(out_dir, items, filename: str = "diagnostic.jsonl") -> Path:
    out_dir = Path(out_dir)
    store = ImageStore(out_dir)
    path = out_dir / filename
    write_records(path, (diagnostic_to_record(i, store) for i in items))
    return path


def load_diagnostics(path):
    path = Path(path)
    store = ImageStore(path.parent)
    return [diagnostic_from_record(r, store) for r in read_records(path, "diagnostic")]


def example_to_record(ex: TrainingExample) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "sft-example",
        "task_id": ex.task_id,
        "final_answer": ex.final_answer,
        "segments": [
            {"role": s.role, "text": s.text, "mask": s.mask} for s in ex.segments
        ],
    }


def example_from_record(rec: dict) -> TrainingExample:
    return TrainingExample(
        task_id=rec["task_id"],
        final_answer=rec["final_answer"],
        segments=tuple(
            TrainingSegment(s["role"], s["text"], s["mask"]) for s in rec["segments"]
        ),
    )


# --- jsonl files -----------------------------------------------------------------

def write_records(path, records: Iterable[dict]) -> int:
    """Write records as canonical JSONL atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    n = 0
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_canonical(rec))
            fh.write("\n")
            n += 1
    os.replace(tmp, path)
    return n


def read_records(path, expect_kind: str | None = None) -> list[dict]:
    path = Path(path)
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorruptRecord(path, lineno, f"bad json: {e}") from e
            if not isinstance(rec, dict) or "kind" not in rec or "schema" not in rec:
                raise CorruptRecord(path, lineno, "record lacks kind/schema fields")
            if expect_kind is not None and rec["kind"] != expect_kind:
                raise CorruptRecord(
                    path, lineno, f"expected kind {expect_kind!r}, found {rec['kind']!r}"
                )
            out.append(rec)
    return out


# --- directory archives ------------------------------------------------------------

def save_tasks(out_dir, tasks: Iterable[TaskSpec], filename: str = "tasks.jsonl") -> Path:
    out_dir = Path(out_dir)
    store = ImageStore(out_dir)
    path = out_dir / filename
    write_records(path, (task_to_record(t, store) for t in tasks))
    return path


def load_tasks(path) -> list[TaskSpec]:
    path = Path(path)
    store = ImageStore(path.parent)
    return [task_from_record(r, store) for r in read_records(path, "task")]


def save_trajectories(out_dir, trajs: Iterable[Trajectory],
                      filename: str = "trajectories.jsonl") -> Path:
    out_dir = Path(out_dir)
    store = ImageStore(out_dir)
    path = out_dir / filename
    write_records(path, (trajectory_to_record(t, store) for t in trajs))
    return path


def load_trajectories(path) -> list[Trajectory]:
    path = Path(path)
    store = ImageStore(path.parent)
    return [trajectory_from_record(r, store) for r in read_records(path, "trajectory")]


def save_breakdowns(path, breakdowns: Iterable[RewardBreakdown]) -> Path:
    path = Path(path)
    write_records(path, (breakdown_to_record(b) for b in breakdowns))
    return path


def load_breakdowns(path) -> list[RewardBreakdown]:
    return [breakdown_from_record(r) for r in read_records(path, "reward")]


def save_examples(path, examples: Iterable[TrainingExample]) -> Path:
    path = Path(path)
    write_records(path, (example_to_record(e) for e in examples))
    return path


def load_examples(path) -> list[TrainingExample]:
    return [example_from_record(r) for r in read_records(path, "sft-example")]
