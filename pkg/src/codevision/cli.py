"""Command-line entry points.

Subcommands: gen-bench, gen-sft, gen-rl, run-policy, score, verify, repl.
Every command accepts --seed (falling back to the CODEVISION_SEED variable)
and the generating/scoring commands write their artifacts under --out.
Exit codes: 0 success, 1 usage error, 2 data error. Summary statistics are
printed to stdout as key=value lines.
"""
from __future__ import annotations

import argparse
import os
import random
import sys
from collections import Counter
from pathlib import Path

from . import store
from .datagen import (
    GenConfig,
    NoCandidate,
    answer_diagnostic,
    audit_positional,
    diagnostic_images,
    difficulty_filter,
    gen_base_items,
    gen_diagnostic,
    gen_mvtool,
    gen_orientation_suite,
    make_task,
    sample_meta,
    scene_stream,
)
from .episode import Episode, InvalidTask
from .policies import POLICY_KINDS, OraclePolicy, RandomPolicy, make_policy, run_episode
from .raster import write_ppm
from .reward import RewardConfig, finalize_group, score_trajectory
from .store import ChecksumMismatch, CorruptRecord, to_training_example


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _env_seed() -> int:
    raw = os.environ.get("CODEVISION_SEED", "")
    try:
        return int(raw) if raw else 0
    except ValueError:
        return 0


def _parse_config(items, cls):
    """--config values are either key=value pairs or paths to key=value files."""
    pairs: dict[str, str] = {}
    for item in items or ():
        if "=" in item and not os.path.exists(item):
            key, _, value = item.partition("=")
            pairs[key.strip()] = value.strip()
        else:
            try:
                text = Path(item).read_text(encoding="utf-8")
            except OSError as e:
                raise DataError(f"cannot read config file {item!r}: {e}") from e
            for line in text.splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{item}: config lines must be key=value, got {line!r}")
                key, _, value = line.partition("=")
                pairs[key.strip()] = value.strip()
    try:
        return cls.from_pairs(pairs)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _kv(key, value):
    print(f"{key}={value}")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codevision", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=None,
                        help="rng seed (default: CODEVISION_SEED or 0)")
        sp.add_argument("--out", required=out_required, help="output directory")

    sp = sub.add_parser("gen-bench", help="generate a benchmark")
    sp.add_argument("--kind", required=True, choices=("mvtool", "orientation", "diagnostic"))
    sp.add_argument("--n", type=int, required=True,
                    help="items (orientation: base items, 6 variants each)")
    sp.add_argument("--config", action="append", help="generator key=value or file")
    common(sp)

    sp = sub.add_parser("gen-sft", help="generate masked multi-turn training examples")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--config", action="append")
    common(sp)

    sp = sub.add_parser("gen-rl", help="generate difficulty-filtered tasks with must-use fields")
    sp.add_argument("--n", type=int, required=True, help="candidate tasks before filtering")
    sp.add_argument("--k", type=int, default=8, help="rollouts per candidate")
    sp.add_argument("--config", action="append")
    common(sp)

    sp = sub.add_parser("run-policy", help="roll scripted policies over a task manifest")
    sp.add_argument("--policy", required=True,
                    help=f"comma-separated kinds from {', '.join(POLICY_KINDS)}")
    sp.add_argument("--manifest", required=True, help="tasks.jsonl path")
    sp.add_argument("--k", type=int, default=1, help="rollouts per task")
    common(sp)

    sp = sub.add_parser("score", help="score trajectories with the reward engine")
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--config", action="append", help="reward key=value or file")
    common(sp)

    sp = sub.add_parser("verify", help="run the embedded invariant suite")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None, help="also write the report to <out>/verify.txt")

    sp = sub.add_parser("repl", help="step one episode interactively")
    sp.add_argument("--task", required=True, help="tasks.jsonl path")
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None, help="directory for per-step images")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    if args.seed is None:
        args.seed = _env_seed()
    try:
        return _dispatch(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (DataError, CorruptRecord, ChecksumMismatch, InvalidTask, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "gen-bench":
        return _cmd_gen_bench(args)
    if cmd == "gen-sft":
        return _cmd_gen_sft(args)
    if cmd == "gen-rl":
        return _cmd_gen_rl(args)
    if cmd == "run-policy":
        return _cmd_run_policy(args)
    if cmd == "score":
        return _cmd_score(args)
    if cmd == "verify":
        return _cmd_verify(args)
    if cmd == "repl":
        return _cmd_repl(args)
    raise UsageError(f"unknown command {cmd!r}")


def _require_positive(n: int, flag: str) -> None:
    if n < 1:
        raise UsageError(f"{flag} must be >= 1, got {n}")


def _cmd_gen_bench(args) -> int:
    _require_positive(args.n, "--n")
    cfg = _parse_config(args.config, GenConfig)
    out = Path(args.out)
    if args.kind == "diagnostic":
        images = diagnostic_images(args.n, args.seed)
        items = gen_diagnostic(images, args.seed)
        path = store.save_diagnostics(out, items)
        hist = Counter(i.gold for i in items)
        _kv("manifest", path)
        _kv("items", len(items))
        for tool in sorted(hist):
            _kv(f"transform_{tool}", hist[tool])
        _kv("oracle_correct", sum(answer_diagnostic(i) == i.gold for i in items))
        return 0

    if args.kind == "orientation":
        base = gen_base_items(args.n, args.seed, cfg)
        tasks = gen_orientation_suite(base)
    else:
        tasks = list(gen_mvtool(scene_stream(args.seed, cfg), cfg, n=args.n, seed=args.seed))
        if len(tasks) < args.n:
            raise DataError(f"scene stream exhausted at {len(tasks)} of {args.n} items")
    path = store.save_tasks(out, tasks)
    hist = Counter(t.s_req[0] if t.s_req else "none" for t in tasks)
    ratios = sorted(
        t.target_box.area / (t.canonical_image.width * t.canonical_image.height)
        for t in tasks if t.target_box is not None
    )
    banned = sum(1 for t in tasks if audit_positional(t.question))
    _kv("manifest", path)
    _kv("items", len(tasks))
    for tool in sorted(hist):
        _kv(f"tool_{tool}", hist[tool])
    if ratios:
        _kv("area_ratio_min", f"{ratios[0]:.3e}")
        _kv("area_ratio_p50", f"{ratios[len(ratios) // 2]:.3e}")
        _kv("area_ratio_max", f"{ratios[-1]:.3e}")
    _kv("banned_prompts", banned)
    return 0


def _gen_tasks(n: int, seed: int, cfg: GenConfig, prefix: str):
    """Sample metadata per configured proportions and build tasks, drawing a
    fresh scene whenever the current one runs out of candidates."""
    rng = random.Random(f"{seed}:{prefix}")
    scenes = scene_stream(seed, cfg)
    scene = next(scenes)
    since_new = 0
    barren = 0
    out = []
    while len(out) < n:
        meta = sample_meta(rng, cfg)
        try:
            task = make_task(scene, meta, cfg, rng, f"{prefix}-{seed}-{len(out):05d}")
        except NoCandidate:
            barren += 1
            if barren >= 64:
                raise DataError(
                    "64 consecutive scenes offered no candidate annotation; "
                    "area_threshold is likely unreachable for this scene_size"
                )
            scene = next(scenes)
            since_new = 0
            continue
        barren = 0
        out.append(task)
        since_new += 1
        if since_new >= 6:
            scene = next(scenes)
            since_new = 0
    return out


def _cmd_gen_sft(args) -> int:
    _require_positive(args.n, "--n")
    cfg = _parse_config(args.config, GenConfig)
    out = Path(args.out)
    tasks = _gen_tasks(args.n, args.seed, cfg, "sft")
    examples = []
    verified = 0
    for task in tasks:
        policy = make_policy("clumsy" if task.task_type == "error-handling" else "oracle")
        traj = run_episode(policy, task)
        b = score_trajectory(traj)
        if b.r_acc == 1:  # programmatic verification gate
            verified += 1
            examples.append(to_training_example(traj))
    tasks_path = store.save_tasks(out, tasks)
    examples_path = store.save_examples(out / "examples.jsonl", examples)
    hist = Counter(t.task_type for t in tasks)
    _kv("tasks", tasks_path)
    _kv("examples", examples_path)
    _kv("items", len(tasks))
    _kv("verified", verified)
    for ttype in sorted(hist):
        _kv(f"type_{ttype}", hist[ttype])
    return 0


def _cmd_gen_rl(args) -> int:
    _require_positive(args.n, "--n")
    if args.k < 2:
        raise UsageError(f"--k must be >= 2, got {args.k}")
    cfg = _parse_config(args.config, GenConfig)
    out = Path(args.out)
    tasks = _gen_tasks(args.n, args.seed, cfg, "rl")
    rng = random.Random(f"{args.seed}:rl-filter")
    kept = []
    dropped_easy = dropped_hard = 0
    for task in tasks:
        results = []
        for j in range(args.k):
            policy = OraclePolicy() if rng.random() < 0.5 else RandomPolicy(args.seed + j)
            traj = run_episode(policy, task)
            results.append(traj.final_answer is not None
                           and _answers_match(traj, task))
        if difficulty_filter(results):
            kept.append(task)
        elif all(results):
            dropped_easy += 1
        else:
            dropped_hard += 1
    path = store.save_tasks(out, kept)
    _kv("manifest", path)
    _kv("candidates", len(tasks))
    _kv("kept", len(kept))
    _kv("dropped_all_correct", dropped_easy)
    _kv("dropped_all_incorrect", dropped_hard)
    return 0


def _answers_match(traj, task) -> bool:
    from .episode import check_answer

    return check_answer(traj.final_answer, task.gold_answer)


def _cmd_run_policy(args) -> int:
    if args.k < 1:
        raise UsageError(f"--k must be >= 1, got {args.k}")
    kinds = [k.strip() for k in args.policy.split(",") if k.strip()]
    if not kinds:
        raise UsageError("--policy needs at least one kind")
    for k in kinds:
        if k not in POLICY_KINDS:
            raise UsageError(f"unknown policy kind {k!r}; choose from {POLICY_KINDS}")
    tasks = store.load_tasks(args.manifest)
    if not tasks:
        raise DataError(f"{args.manifest} holds no tasks")
    trajs = []
    for task in tasks:
        for j in range(args.k):
            policy = make_policy(kinds[j % len(kinds)], args.seed + j)
            trajs.append(run_episode(policy, task))
    path = store.save_trajectories(Path(args.out), trajs)
    correct = sum(
        1 for t in trajs
        if t.final_answer is not None and _answers_match(t, t.task)
    )
    _kv("trajectories", path)
    _kv("rollouts", len(trajs))
    _kv("tasks", len(tasks))
    _kv("mean_acc", f"{correct / len(trajs):.4f}")
    return 0


def _cmd_score(args) -> int:
    cfg = _parse_config(args.config, RewardConfig)
    trajs = store.load_trajectories(args.trajectories)
    if not trajs:
        raise DataError(f"{args.trajectories} holds no trajectories")
    breakdowns = [score_trajectory(t, cfg) for t in trajs]
    by_task: dict[str, list[int]] = {}
    for i, t in enumerate(trajs):
        by_task.setdefault(t.task.id, []).append(i)
    nec_groups = 0
    for task_id, idxs in by_task.items():
        if len(idxs) < 2:
            continue
        _, updated = finalize_group([trajs[i] for i in idxs],
                                    [breakdowns[i] for i in idxs], cfg)
        for i, b in zip(idxs, updated):
            breakdowns[i] = b
        if any(b.nec_bonus > 0 for b in updated):
            nec_groups += 1
    out = Path(args.out)
    path = store.save_breakdowns(out / "rewards.jsonl", breakdowns)
    n = len(breakdowns)
    _kv("rewards", path)
    _kv("trajectories", n)
    _kv("mean_total", f"{sum(b.total for b in breakdowns) / n:.6f}")
    _kv("mean_acc", f"{sum(b.r_acc for b in breakdowns) / n:.4f}")
    _kv("groups_with_necessity_bonus", nec_groups)
    _kv("penalized", sum(1 for b in breakdowns if b.penalties.total))
    return 0


def _cmd_verify(args) -> int:
    import contextlib
    import io

    from .verify import run_checks

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        ok = run_checks(args.seed)
    report = buf.getvalue()
    print(report, end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "verify.txt").write_text(report, encoding="utf-8")
    return 0 if ok else 2


def _cmd_repl(args) -> int:
    tasks = store.load_tasks(args.task)
    if not (0 <= args.index < len(tasks)):
        raise UsageError(f"--index {args.index} outside 0..{len(tasks) - 1}")
    task = tasks[args.index]
    ep = Episode(task)
    obs = ep.reset()
    print(f"task: {task.id} [{task.task_type}] max_turns={task.max_turns}")
    print(f"question: {obs.question}")
    print(f"image: {obs.image.width}x{obs.image.height}")
    print("tools:")
    for line in obs.tools_doc.splitlines():
        print(f"  {line}")
    print("enter an action (finish with a blank line); /quit to stop")
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_ppm(obs.image, out_dir / "step00.ppm")
    buf: list[str] = []
    step = 0
    for line in sys.stdin:
        line = line.rstrip("\n")
        if line == "/quit":
            break
        if line:
            buf.append(line)
            continue
        if not buf:
            continue
        action = "\n".join(buf)
        buf = []
        feedback, done = ep.step(action)
        step += 1
        print(feedback)
        print(f"image: {ep.working_image.width}x{ep.working_image.height}")
        if out_dir:
            write_ppm(ep.working_image, out_dir / f"step{step:02d}.ppm")
        if done:
            break
    if buf and not ep.done:
        feedback, _ = ep.step("\n".join(buf))
        print(feedback)
    ep.abort()
    traj = ep.trajectory()
    print(f"termination: {traj.termination}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
