"""Acceptance gate: one test per release criterion, each printing a
PASS line (visible with `pytest -v -rA` or in captured output)."""
import hashlib
import itertools
import random
import time
from collections import Counter
from pathlib import Path

import pytest

from codevision import store
from codevision.cli import main
from codevision.datagen import (
    GenConfig,
    NoCandidate,
    answer_diagnostic,
    audit_positional,
    diagnostic_images,
    difficulty_filter,
    gen_diagnostic,
    gen_mvtool,
    make_task,
    multicrop_windows,
    scene_stream,
)
from codevision.datagen.generate import TaskMeta
from codevision.episode import ANSWERED, Episode
from codevision.policies import ClumsyPolicy, OraclePolicy, RewardHackerPolicy, run_episode
from codevision.raster import (
    BBox,
    MUST_USE_TOOLS,
    ORIENTATION_TOOLS,
    Raster,
    TransformKind,
    apply_transform,
    iou,
    map_box,
)
from codevision.reward import (
    GroupEntry,
    GroupStats,
    RewardConfig,
    necessity_reward,
    penalties,
    score_trajectory,
)
from codevision.store import to_training_example
from codevision.toolprog import ExecFailure, ExecSuccess, ParseError, ToolProgram, execute, parse
from conftest import answer_action, build_task, code_action, rand_raster


def report(name):
    print(f"ACCEPTANCE {name}: PASS")


SMALL_CFG = GenConfig(scene_size=512, area_threshold=0.01, words_per_scene=10)


def _tasks_of_type(task_type: str, count: int, seed: int, cfg=SMALL_CFG):
    """Generated tasks of one type, drawing fresh scenes as needed."""
    rng = random.Random(f"accept:{seed}:{task_type}")
    scenes = scene_stream(seed, cfg)
    scene = next(scenes)
    out = []
    fresh = 0
    while len(out) < count:
        if task_type == "single-tool":
            tools = (rng.choice(MUST_USE_TOOLS),)
        elif task_type == "multi-tool":
            tools = (rng.choice(ORIENTATION_TOOLS), "crop")
        elif task_type == "multi-crop":
            tools = ("crop",) * cfg.multicrop_steps
        elif task_type == "error-handling":
            tools = (rng.choice(ORIENTATION_TOOLS),)
        else:
            tools = ()
        try:
            out.append(make_task(scene, TaskMeta(task_type, tools), cfg, rng,
                                 f"acc-{task_type}-{len(out)}"))
            fresh += 1
            if fresh >= 8:
                scene = next(scenes)
                fresh = 0
        except NoCandidate:
            scene = next(scenes)
            fresh = 0
    return out


def test_dihedral_group_laws():
    """1,000 random rasters: every group identity holds byte-exactly, <10s."""
    rng = random.Random(20240801)
    t0 = time.perf_counter()
    for _ in range(1000):
        w = rng.randint(1, 64)
        h = rng.randint(1, 64)
        img = Raster(w, h, rng.randbytes(w * h * 3))
        r90 = apply_transform(img, TransformKind.ROT90)
        r180 = apply_transform(img, TransformKind.ROT180)
        r270 = apply_transform(img, TransformKind.ROT270)
        fh = apply_transform(img, TransformKind.FLIP_H)
        fv = apply_transform(img, TransformKind.FLIP_V)
        assert apply_transform(
            apply_transform(r90, TransformKind.ROT90), TransformKind.ROT180
        ) == img  # rot90^2 = rot180 and rot180^2 = id
        assert apply_transform(r90, TransformKind.ROT90) == r180
        assert apply_transform(r180, TransformKind.ROT180) == img
        assert apply_transform(r90, TransformKind.ROT270) == img
        assert apply_transform(r270, TransformKind.ROT90) == img
        assert apply_transform(fh, TransformKind.FLIP_H) == img
        assert apply_transform(fv, TransformKind.FLIP_V) == img
        assert apply_transform(fh, TransformKind.FLIP_V) == r180
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"group-law sweep took {elapsed:.1f}s"
    report("dihedral-group-laws")


def test_iou_oracle_equivalence():
    """1e5 random box pairs on a 12x12 grid match the pixel-count oracle."""
    masks = {}

    def mask(b):
        m = masks.get(b)
        if m is None:
            m = 0
            for y in range(b[1], b[3]):
                for x in range(b[0], b[2]):
                    m |= 1 << (y * 12 + x)
            masks[b] = m
        return m

    rng = random.Random(31337)

    def rand_box():
        x0 = rng.randrange(12)
        y0 = rng.randrange(12)
        return (x0, y0, rng.randint(x0 + 1, 12), rng.randint(y0 + 1, 12))

    for _ in range(100000):
        a, b = rand_box(), rand_box()
        inter = (mask(a) & mask(b)).bit_count()
        union = (mask(a) | mask(b)).bit_count()
        got = iou(BBox(*a), BBox(*b))
        assert abs(got - inter / union) < 1e-12
    report("iou-oracle-equivalence")


def test_diagnostic_oracle():
    """200 five-way MCQs: detector answers 200/200; histogram within 3 sigma."""
    images = diagnostic_images(200, 424242)
    items = gen_diagnostic(images, 424242)
    assert len(items) == 200
    correct = sum(answer_diagnostic(it) == it.gold for it in items)
    assert correct == 200
    hist = Counter(it.gold for it in items)
    sigma3 = 3 * (200 * 0.2 * 0.8) ** 0.5
    for tool in ORIENTATION_TOOLS:
        assert abs(hist[tool] - 40) <= sigma3, (tool, hist[tool])
    report("diagnostic-oracle")


class TestRewardArithmetic:
    TYPES = ("single-tool", "multi-tool", "multi-crop", "error-handling", "no-tool")

    @pytest.mark.parametrize("task_type", TYPES)
    def test_oracle_closed_form_and_hacker_dominated(self, task_type):
        tasks = _tasks_of_type(task_type, 100, seed=77)
        expected_total = 1.1 if task_type == "no-tool" else 2.6
        for task in tasks:
            b = score_trajectory(run_episode(OraclePolicy(), task))
            assert abs(b.total - expected_total) < 1e-9, (task.id, b)
            assert b.penalties.total == 0
            h = score_trajectory(run_episode(RewardHackerPolicy(), task))
            assert h.total < b.total, (task.id, h.total, b.total)
        report(f"reward-arithmetic-{task_type}")

    def test_necessity_worked_example(self):
        group = GroupStats("acc", tuple(
            [GroupEntry(True, 1)] * 3 + [GroupEntry(True, 0)]
            + [GroupEntry(False, 1)] + [GroupEntry(False, 0)] * 3
        ))
        assert necessity_reward(group) == 0.5
        report("reward-arithmetic-necessity")


class TestPenaltyGuardrails:
    CANONICAL = Raster(20, 20, random.Random(5).randbytes(20 * 20 * 3))
    TARGET = BBox(0, 0, 10, 10)
    IOU_BOX = {0.5: (0, 0, 10, 5), 0.1: (0, 0, 10, 1), 0.05: (0, 0, 5, 1)}

    def _build(self, n_turns, sreq, iou_val, orient, acc):
        target = self.TARGET if "crop" in sreq else None
        ttype = ("no-tool" if not sreq else
                 "multi-tool" if len(sreq) > 1 else "single-tool")
        task = build_task("pen", self.CANONICAL, sreq, target=target,
                          task_type=ttype, max_turns=n_turns + 1)
        progs = []
        if sreq == ("rotate90", "crop") and orient:
            progs.append("rotate90()")
        if "crop" in sreq and len(progs) < n_turns:
            box = BBox(*self.IOU_BOX[iou_val])
            if sreq == ("rotate90", "crop") and not orient:
                # express the box in the still-corrupted (rot270) frame
                box = map_box(box, TransformKind.ROT270, 20, 20)
            progs.append(f"crop(x0={box.x0},y0={box.y0},x1={box.x1},y1={box.y1})")
        if "rotate90" not in sreq and orient and len(progs) < n_turns:
            progs.append("rotate270()")
        while len(progs) < n_turns:
            progs.append("grayscale()")
        progs = progs[:n_turns]
        ep = Episode(task)
        ep.reset()
        for prog in progs:
            ep.step(code_action(prog))
        if not ep.done:
            ep.step(answer_action(task.gold_answer if acc else "wrong answer"))
        traj = ep.trajectory()
        crop_ran = any(
            isinstance(t.outcome, ExecSuccess) and "crop" in t.outcome.applied
            for t in traj.turns
        )
        orient_ran = any(
            isinstance(t.outcome, ExecSuccess)
            and any(a in ORIENTATION_TOOLS for a in t.outcome.applied)
            for t in traj.turns
        )
        return task, traj, crop_ran, orient_ran

    def test_exhaustive_grid(self):
        cases = 0
        for n_turns, sreq, iou_val, orient, acc in itertools.product(
            range(6), ((), ("crop",), ("rotate90", "crop")),
            (0.05, 0.1, 0.5), (False, True), (False, True),
        ):
            task, traj, crop_ran, orient_ran = self._build(
                n_turns, sreq, iou_val, orient, acc)
            got = penalties(traj)
            r_acc = int(traj.final_answer is not None and acc)
            realized_best = iou_val if crop_ran else 0.0
            expect_turn = int(n_turns > len(sreq) + 1)
            expect_poor = int(r_acc == 1 and "crop" in sreq and realized_best < 0.1)
            expect_inap = int(not sreq and orient_ran)
            assert got.turn_limit == expect_turn, (n_turns, sreq)
            assert got.poor_reasoning == expect_poor, (n_turns, sreq, iou_val, acc, crop_ran)
            assert got.inappropriate_tool == expect_inap, (n_turns, sreq, orient)
            cases += 1
        assert cases == 6 * 3 * 3 * 2 * 2
        report("penalty-guardrails")

    def test_iou_floor_is_strict(self):
        # 0.1 exactly must NOT be penalized; 0.05 must be
        for iou_val, expect in ((0.05, 1), (0.1, 0), (0.5, 0)):
            _, traj, _, _ = self._build(1, ("crop",), iou_val, False, True)
            assert penalties(traj).poor_reasoning == expect, iou_val
        report("penalty-iou-floor-strict")


def test_generator_constraints_mvtool_5000():
    """5,000 multi-tool items: every ratio strictly < 1e-4, balanced
    transforms, clean prompts, valid shrinking window chains."""
    cfg = GenConfig()
    hist = Counter()
    n = 0
    for task in gen_mvtool(scene_stream(90210, cfg), cfg, n=5000, seed=90210):
        n += 1
        area = task.canonical_image.width * task.canonical_image.height
        ratio = task.target_box.area / area
        assert ratio < 1e-4, (task.id, ratio)
        assert audit_positional(task.question) == (), task.question
        hist[task.s_req[0]] += 1
        wins = multicrop_windows(task.target_box, task.canonical_image.size, 3)
        assert wins[-1] == task.target_box
        for big, small in zip(wins, wins[1:]):
            assert big.contains(small) and big != small
            assert small.area <= 0.5 * big.area
            assert 0 <= big.x0 and big.x1 <= task.canonical_image.width
            assert 0 <= big.y0 and big.y1 <= task.canonical_image.height
    assert n == 5000
    for tool in ORIENTATION_TOOLS:
        assert abs(hist[tool] / 5000 - 0.2) <= 0.02, (tool, hist[tool])
    report("generator-constraints-mvtool")


def test_difficulty_filter_exhaustive():
    for wins in range(9):
        results = [True] * wins + [False] * (8 - wins)
        assert difficulty_filter(results) is (1 <= wins <= 7)
    report("difficulty-filter")


def test_error_recovery_clumsy_100():
    """Clumsy on 100 error-handling tasks: exactly one failure turn, then
    success; the error feedback names the failing tool."""
    tasks = _tasks_of_type("error-handling", 100, seed=55)
    for task in tasks:
        traj = run_episode(ClumsyPolicy(), task)
        outcomes = [t.outcome for t in traj.turns if t.outcome is not None]
        assert isinstance(outcomes[0], ExecFailure)
        assert all(isinstance(o, ExecSuccess) for o in outcomes[1:])
        assert sum(isinstance(o, ExecFailure) for o in outcomes) == 1
        assert "zoomin" in outcomes[0].message  # the failing tool's name
        assert traj.termination == ANSWERED
        b = score_trajectory(traj)
        assert b.r_acc == 1
    report("error-recovery-episode")


class TestDeterminismAndRoundTrip:
    def _digest_tree(self, root: Path) -> dict:
        return {
            str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()
        }

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        gen = ["gen-bench", "--kind", "mvtool", "--n", "25", "--seed", "123",
               "--config", "scene_size=1024", "--config", "area_threshold=0.001",
               "--config", "words_per_scene=14"]
        assert main(gen + ["--out", str(tmp_path / "m1")]) == 0
        assert main(gen + ["--out", str(tmp_path / "m2")]) == 0
        assert self._digest_tree(tmp_path / "m1") == self._digest_tree(tmp_path / "m2")
        run = ["run-policy", "--policy", "oracle,clumsy", "--k", "2", "--seed", "7",
               "--manifest", str(tmp_path / "m1" / "tasks.jsonl")]
        assert main(run + ["--out", str(tmp_path / "t1")]) == 0
        assert main(run + ["--out", str(tmp_path / "t2")]) == 0
        assert self._digest_tree(tmp_path / "t1") == self._digest_tree(tmp_path / "t2")
        capsys.readouterr()
        report("determinism-checksums")

    def test_store_round_trips_1000_records(self, tmp_path):
        rng = random.Random(314159)
        tasks, trajs, breakdowns, examples = [], [], [], []
        for i in range(300):
            canonical = rand_raster(rng, max_side=12, min_side=4)
            kind = i % 3
            if kind == 0:
                task = build_task(f"rt{i}", canonical, [])
            elif kind == 1:
                task = build_task(f"rt{i}", canonical, ["rotate90", "crop"],
                                  target=BBox(0, 0, 3, 3), task_type="multi-tool")
            else:
                task = build_task(f"rt{i}", canonical, ["flip-vertical"])
            tasks.append(task)
        for i in range(400):
            task = tasks[rng.randrange(len(tasks))]
            ep = Episode(task)
            ep.reset()
            for _ in range(rng.randrange(3)):
                ep.step(code_action(rng.choice(
                    ["rotate90()", "grayscale()", "oops(", "crop(x0=0,y0=0,x1=2,y1=2)"]
                )))
            if not ep.done and rng.random() < 0.8:
                ep.step(answer_action(rng.choice(["busy bees", "nope"])))
            while not ep.done:
                ep.step(code_action("grayscale()"))
            trajs.append(ep.trajectory())
        for t in trajs[:200]:
            breakdowns.append(score_trajectory(t))
        for t in trajs[:100]:
            examples.append(to_training_example(t))
        assert len(tasks) + len(trajs) + len(breakdowns) + len(examples) == 1000
        store.save_tasks(tmp_path, tasks)
        store.save_trajectories(tmp_path, trajs)
        store.save_breakdowns(tmp_path / "rewards.jsonl", breakdowns)
        store.save_examples(tmp_path / "examples.jsonl", examples)
        assert store.load_tasks(tmp_path / "tasks.jsonl") == tasks
        assert store.load_trajectories(tmp_path / "trajectories.jsonl") == trajs
        assert store.load_breakdowns(tmp_path / "rewards.jsonl") == breakdowns
        loaded_examples = store.load_examples(tmp_path / "examples.jsonl")
        assert loaded_examples == examples
        for ex in loaded_examples:
            for seg in ex.segments:
                assert seg.mask == (1 if seg.role == "assistant" else 0)
        report("store-round-trip-1000")


class TestInterpreterRobustness:
    def test_parse_fuzz_one_million(self):
        """1e6 fuzzed inputs: parse yields ToolProgram or ParseError, nothing
        else; no crash."""
        rng = random.Random(0xFA22)
        structured = 'crop(x0=10, y0=2.5, x1=50, y1=80) | grayscale()\nblur(radius=2)'
        n_ok = n_err = 0
        for i in range(1000000):
            if i % 2 == 0:
                n = rng.randrange(0, 24)
                text = "".join(chr(rng.randrange(0, 512)) for _ in range(n))
            else:
                chars = list(structured)
                for _ in range(rng.randint(1, 5)):
                    chars[rng.randrange(len(chars))] = chr(rng.randrange(32, 127))
                text = "".join(chars)
            try:
                out = parse(text)
                assert isinstance(out, ToolProgram)
                n_ok += 1
            except ParseError:
                n_err += 1
        assert n_ok + n_err == 1000000
        assert n_ok > 0 and n_err > 0
        report("interpreter-fuzz-1e6")

    def test_chaining_equivalence_10k(self):
        rng = random.Random(0xC4A1)
        pool = ["rotate90()", "rotate180()", "rotate270()", "flip-horizontal()",
                "flip-vertical()", "grayscale()", "sharpen()", "blur(radius=1)",
                "brightness(factor=1.4)", "contrast(factor=0.8)",
                "crop(x0=0,y0=0,x1=3,y1=3)"]
        for _ in range(10000):
            img = rand_raster(rng, max_side=8, min_side=4)
            a, b = rng.choice(pool), rng.choice(pool)
            chained = execute(f"{a} | {b}", img)
            stepped = execute(b, execute(a, img).result)
            assert isinstance(chained, ExecSuccess)
            assert chained.result == stepped.result
        report("interpreter-chaining-10k")
