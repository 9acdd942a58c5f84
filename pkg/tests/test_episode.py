import pytest

from codevision.episode import (
    ANSWERED,
    TURN_BUDGET_EXHAUSTED,
    Episode,
    EpisodeTerminated,
    InvalidTask,
    check_answer,
    format_ok,
    initial_prompt,
    parse_action,
    replay,
    validate_task,
)
from codevision.raster import BBox, Raster, TransformKind, apply_transform
from codevision.toolprog import ExecFailure, ExecSuccess
from conftest import answer_action, build_task, code_action, rand_raster


class TestTaskValidation:
    def test_no_tool_observation_equals_canonical(self, rng):
        task = build_task("t", rand_raster(rng), [])
        assert task.initial_image == task.canonical_image
        validate_task(task)

    def test_rot180_task_observation(self, rng):
        canonical = rand_raster(rng)
        task = build_task("t", canonical, ["rotate180"])
        assert task.initial_image == apply_transform(canonical, TransformKind.ROT180)
        validate_task(task)

    def test_zero_max_turns_rejected(self, rng):
        task = build_task("t", rand_raster(rng), [], max_turns=0)
        with pytest.raises(InvalidTask):
            validate_task(task)

    def test_target_box_iff_crop(self, rng):
        img = rand_raster(rng, min_side=8)
        with pytest.raises(InvalidTask):
            validate_task(build_task("t", img, ["crop"], task_type="single-tool"))
        with pytest.raises(InvalidTask):
            validate_task(build_task("t", img, ["rotate90"], target=BBox(0, 0, 2, 2)))

    def test_s_req_empty_iff_no_tool(self, rng):
        with pytest.raises(InvalidTask):
            validate_task(build_task("t", rand_raster(rng), [], task_type="single-tool"))

    def test_broken_round_trip_rejected(self, rng):
        img = rand_raster(rng, min_side=4)
        good = build_task("t", img, ["rotate90"])
        bad = build_task("t", img, ["rotate90"])
        object.__setattr__(bad, "initial_image", img)
        with pytest.raises(InvalidTask):
            validate_task(bad)
        validate_task(good)


class TestActionParsing:
    def test_code_action(self):
        act = parse_action("<think>hm</think><code>rotate90()</code>")
        assert act.well_formed and act.code == "rotate90()" and act.answer is None

    def test_answer_action(self):
        act = parse_action(" <think>ok</think>\n<answer>busy bees</answer> ")
        assert act.well_formed and act.answer == "busy bees"

    def test_missing_think_close(self):
        assert not parse_action("<think>hm<code>rotate90()</code>").well_formed

    def test_trailing_garbage(self):
        assert not parse_action(
            "<think>a</think><answer>x</answer> extra"
        ).well_formed

    def test_two_blocks(self):
        assert not parse_action(
            "<think>a</think><code>x()</code><code>y()</code>"
        ).well_formed


class TestCheckAnswer:
    def test_normalization(self):
        assert check_answer("Busy Bees ", "busy bees")
        assert check_answer("busy  bees!", "Busy Bees")
        assert check_answer("7.", "7")

    def test_no_numeral_spelling(self):
        assert not check_answer("7", "seven")

    def test_empty_pred(self):
        assert not check_answer("", "x")


class TestEpisode:
    def test_reset_returns_observation(self, rng):
        task = build_task("t", rand_raster(rng), ["rotate180"])
        ep = Episode(task)
        obs = ep.reset()
        assert obs.image == task.initial_image
        assert obs.question == task.question
        assert "rotate180" in obs.tools_doc

    def test_inverse_restores_canonical(self, rng):
        task = build_task("t", rand_raster(rng), ["rotate180"])
        ep = Episode(task)
        ep.reset()
        fb, done = ep.step(code_action("rotate180()"))
        assert fb.startswith("EXEC OK applied=[rotate180]")
        assert not done
        assert ep.working_image == task.canonical_image

    def test_failure_leaves_image_and_continues(self, rng):
        task = build_task("t", rand_raster(rng), ["rotate90"])
        ep = Episode(task)
        ep.reset()
        before = ep.working_image
        fb, done = ep.step(code_action("rotate90("))
        assert fb.startswith("EXEC ERROR ParseError:")
        assert not done
        assert ep.working_image == before

    def test_answer_terminates(self, rng):
        task = build_task("t", rand_raster(rng), [])
        ep = Episode(task)
        ep.reset()
        fb, done = ep.step(answer_action("busy bees"))
        assert done and fb == "ANSWER RECEIVED"
        traj = ep.trajectory()
        assert traj.termination == ANSWERED
        assert traj.final_answer == "busy bees"
        with pytest.raises(EpisodeTerminated):
            ep.step(answer_action("again"))

    def test_turn_budget(self, rng):
        task = build_task("t", rand_raster(rng), [], max_turns=2)
        ep = Episode(task)
        ep.reset()
        _, done = ep.step(code_action("grayscale()"))
        assert not done
        _, done = ep.step(code_action("grayscale()"))
        assert done
        traj = ep.trajectory()
        assert traj.termination == TURN_BUDGET_EXHAUSTED
        assert traj.final_answer is None

    def test_malformed_action_consumes_turn(self, rng):
        task = build_task("t", rand_raster(rng), [])
        ep = Episode(task)
        ep.reset()
        fb, done = ep.step("just plain text")
        assert fb.startswith("FORMAT ERROR")
        assert ep.turn_count == 1 and not done
        traj = ep.trajectory()
        assert traj.turns[0].outcome is None

    def test_outcome_present_iff_code(self, rng):
        task = build_task("t", rand_raster(rng), [])
        ep = Episode(task)
        ep.reset()
        ep.step(code_action("grayscale()"))
        ep.step(answer_action("done"))
        traj = ep.trajectory()
        assert isinstance(traj.turns[0].outcome, ExecSuccess)
        assert traj.turns[1].outcome is None

    def test_error_log_verbatim_fields(self, rng):
        task = build_task("t", rand_raster(rng), [])
        ep = Episode(task)
        ep.reset()
        fb, _ = ep.step(code_action("zoomin(x0=0)"))
        assert fb.startswith("EXEC ERROR UnknownTool: unknown tool 'zoomin'")
        assert fb.endswith("at 1:1")


class TestFormatOk:
    def test_all_clean(self, rng):
        task = build_task("t", rand_raster(rng), [])
        ep = Episode(task)
        ep.reset()
        ep.step(code_action("grayscale()"))
        ep.step(answer_action("x"))
        assert format_ok(ep.trajectory())

    def test_one_bad_turn(self, rng):
        task = build_task("t", rand_raster(rng), [])
        ep = Episode(task)
        ep.reset()
        ep.step("<think>a<code>grayscale()</code>")
        ep.step(answer_action("x"))
        assert not format_ok(ep.trajectory())


class TestReplay:
    def test_replay_reproduces_feedback_and_images(self, rng):
        canonical = rand_raster(rng, min_side=6)
        task = build_task("t", canonical, ["rotate90"])
        ep = Episode(task)
        ep.reset()
        feedbacks = []
        for action in (
            code_action("flip-horizontal()"),
            code_action("oops("),
            code_action("rotate90() | grayscale()"),
            answer_action("busy bees"),
        ):
            fb, _ = ep.step(action)
            feedbacks.append((fb, ep.working_image))
        traj = ep.trajectory()
        assert replay(traj) == feedbacks
        assert [img for _, img in feedbacks] == [t.image_after for t in traj.turns]


def test_initial_prompt_mentions_tools_and_question(rng):
    task = build_task("t", rand_raster(rng), [], question="Count the cats?")
    text = initial_prompt(task)
    assert "Count the cats?" in text
    assert "crop(" in text and "edge-detect" in text
