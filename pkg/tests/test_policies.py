import random

import pytest

from codevision.datagen import GenConfig, NoCandidate, make_task, sample_meta, scene_stream
from codevision.episode import ANSWERED, TURN_BUDGET_EXHAUSTED
from codevision.policies import (
    ClumsyPolicy,
    OraclePolicy,
    RandomPolicy,
    RewardHackerPolicy,
    TrialAndErrorPolicy,
    make_policy,
    rollout_group,
    run_episode,
)
from codevision.reward import necessity_reward, score_trajectory
from codevision.toolprog import ExecFailure, ExecSuccess, parse
from conftest import build_task, rand_raster

CFG = GenConfig(scene_size=512, area_threshold=0.01, words_per_scene=10)


def generated_tasks(seed, count):
    rng = random.Random(seed)
    scenes = scene_stream(seed, CFG)
    scene = next(scenes)
    out = []
    while len(out) < count:
        meta = sample_meta(rng, CFG)
        try:
            out.append(make_task(scene, meta, CFG, rng, f"p{seed}-{len(out)}"))
        except NoCandidate:
            scene = next(scenes)
    return out


TASKS = generated_tasks(101, 25)


class TestOracle:
    @pytest.mark.parametrize("task", TASKS, ids=lambda t: f"{t.id}-{t.task_type}")
    def test_perfect_run(self, task):
        b = score_trajectory(run_episode(OraclePolicy(), task))
        assert b.r_acc == 1 and b.r_fmt == 1
        assert b.penalties.total == 0
        if task.s_req:
            assert b.traj_match == 0.5
            assert abs(b.must_use_total - 1.0) < 1e-9

    def test_enhance_variant_earns_optional_bonus(self):
        task = next(t for t in TASKS if t.task_type == "single-tool")
        b = score_trajectory(run_episode(OraclePolicy(enhance=True), task))
        assert b.r_acc == 1
        assert b.uses_optional_tool
        assert b.opt_bonus == 0.1
        assert b.penalties.total == 0


class TestRewardHacker:
    @pytest.mark.parametrize("task", TASKS, ids=lambda t: f"{t.id}-{t.task_type}")
    def test_always_below_oracle(self, task):
        hacker = score_trajectory(run_episode(RewardHackerPolicy(), task))
        oracle = score_trajectory(run_episode(OraclePolicy(), task))
        assert hacker.total < oracle.total

    def test_turn_limit_fires(self, rng):
        task = build_task("h", rand_raster(rng), ["rotate90"])
        traj = run_episode(RewardHackerPolicy(), task)
        b = score_trajectory(traj)
        n_code = sum(1 for t in traj.turns if t.action.code is not None)
        assert n_code == 3  # rotate90 plus 2 superfluous calls
        assert b.penalties.turn_limit == 1
        assert b.r_acc == 0


class TestTrialAndError:
    def test_recovers_rotations(self, rng):
        for tool in ("rotate90", "rotate180", "rotate270"):
            task = build_task("t", rand_raster(rng, min_side=4), [tool], max_turns=6)
            traj = run_episode(TrialAndErrorPolicy(), task)
            assert traj.termination == ANSWERED
            assert score_trajectory(traj).r_acc == 1

    def test_rotation_order_is_fixed(self, rng):
        task = build_task("t", rand_raster(rng, min_side=4), ["rotate270"], max_turns=6)
        traj = run_episode(TrialAndErrorPolicy(), task)
        tools = [t.outcome.applied[0] for t in traj.turns if t.outcome is not None]
        assert tools[:2] == ["rotate90", "rotate180"]  # composes to rotate270

    def test_flip_task_exhausts_budget(self, rng):
        task = build_task("t", rand_raster(rng, min_side=4), ["flip-horizontal"])
        traj = run_episode(TrialAndErrorPolicy(), task)
        assert traj.termination == TURN_BUDGET_EXHAUSTED
        assert score_trajectory(traj).r_acc == 0

    def test_no_tool_answers_immediately(self, rng):
        task = build_task("t", rand_raster(rng), [])
        traj = run_episode(TrialAndErrorPolicy(), task)
        assert len(traj.turns) == 1 and traj.termination == ANSWERED


class TestClumsy:
    @pytest.mark.parametrize("task", TASKS, ids=lambda t: f"{t.id}-{t.task_type}")
    def test_recovers_everywhere(self, task):
        b = score_trajectory(run_episode(ClumsyPolicy(), task))
        assert b.r_acc == 1

    def test_error_handling_single_failure_then_success(self):
        tasks = [t for t in TASKS if t.task_type == "error-handling"]
        assert tasks, "fixture set must include error-handling tasks"
        for task in tasks:
            traj = run_episode(ClumsyPolicy(), task)
            fails = [t for t in traj.turns if isinstance(t.outcome, ExecFailure)]
            assert len(fails) == 1
            assert fails[0] is next(t for t in traj.turns if t.outcome is not None)
            assert "zoomin" in fails[0].outcome.message
            later = [t for t in traj.turns if t.outcome is not None][1:]
            assert all(isinstance(t.outcome, ExecSuccess) for t in later)
            assert traj.termination == ANSWERED

    def test_fig5_script_on_rotation_task(self, rng):
        task = build_task("t", rand_raster(rng, min_side=4), ["rotate90"])
        traj = run_episode(ClumsyPolicy(), task)
        applied = [t.outcome.applied[0] for t in traj.turns if t.outcome is not None]
        assert applied == ["flip-horizontal", "rotate90"]
        assert score_trajectory(traj).r_acc == 1


class TestRandom:
    def test_deterministic_per_seed(self):
        task = TASKS[0]
        a = run_episode(RandomPolicy(5), task)
        b = run_episode(RandomPolicy(5), task)
        assert [t.action.raw_text for t in a.turns] == [t.action.raw_text for t in b.turns]
        c = run_episode(RandomPolicy(6), task)
        assert [t.action.raw_text for t in a.turns] != [t.action.raw_text for t in c.turns]

    def test_programs_are_grammar_valid(self):
        for task in TASKS[:5]:
            traj = run_episode(RandomPolicy(9), task)
            for turn in traj.turns:
                if turn.action.code is not None:
                    parse(turn.action.code)  # must not raise


class TestRolloutGroup:
    def test_mixed_group_matches_worked_example(self, rng):
        # 4 tool-using with 3 correct, 4 no-tool with 1 correct -> r_nec 0.5
        from codevision.reward import GroupEntry, GroupStats

        group = GroupStats("g", tuple(
            [GroupEntry(True, 1)] * 3 + [GroupEntry(True, 0)]
            + [GroupEntry(False, 1)] + [GroupEntry(False, 0)] * 3
        ))
        assert abs(necessity_reward(group) - 0.5) < 1e-12

    def test_group_from_real_rollouts(self, rng):
        # oracle-enhance always succeeds with a tool; trial fails on flips
        task = build_task("g", rand_raster(rng, min_side=4), ["flip-vertical"])
        policies = [OraclePolicy(enhance=True)] * 4 + [TrialAndErrorPolicy()] * 4
        group, trajs = rollout_group(policies, task)
        assert group.k == 8
        assert group.n_tool == 4 and group.n_notool == 4
        assert group.succ_tool == 4 and group.succ_notool == 0
        assert necessity_reward(group) == 1.0

    def test_all_oracle_group_is_dropped_by_difficulty(self, rng):
        from codevision.datagen import difficulty_filter
        from codevision.episode import check_answer

        task = TASKS[0]
        _, trajs = rollout_group([OraclePolicy()] * 8, task)
        results = [
            t.final_answer is not None and check_answer(t.final_answer, task.gold_answer)
            for t in trajs
        ]
        assert not difficulty_filter(results)

    def test_requires_two_policies(self, rng):
        with pytest.raises(ValueError):
            rollout_group([OraclePolicy()], TASKS[0])


def test_make_policy_kinds():
    for kind in ("oracle", "oracle-enhance", "trial", "hacker", "clumsy", "random"):
        make_policy(kind, 1)
    with pytest.raises(ValueError):
        make_policy("nonsense")
