"""Embedded self-check suite backing the `verify` CLI command.

Fast, seeded spot checks of the core invariants: dihedral group laws, IoU
against a pixel-membership oracle, orientation detection, parser fuzz
safety, chain equivalence, reward arithmetic, and store round-trips.
"""
from __future__ import annotations

import random

from . import raster
from .raster import BBox, Raster, TransformKind, apply_transform, iou


def _rand_raster(rng: random.Random, max_side: int = 24) -> Raster:
    w = rng.randint(1, max_side)
    h = rng.randint(1, max_side)
    return Raster(w, h, rng.randbytes(w * h * 3))


def _check_group_laws(seed: int) -> None:
    rng = random.Random(f"{seed}:laws")
    for _ in range(100):
        img = _rand_raster(rng)
        r90 = lambda x: apply_transform(x, TransformKind.ROT90)
        assert r90(r90(r90(r90(img)))) == img
        r180 = apply_transform(img, TransformKind.ROT180)
        assert apply_transform(r180, TransformKind.ROT180) == img
        assert r90(r90(img)) == r180
        fh = apply_transform(img, TransformKind.FLIP_H)
        fv = apply_transform(img, TransformKind.FLIP_V)
        assert apply_transform(fh, TransformKind.FLIP_H) == img
        assert apply_transform(fv, TransformKind.FLIP_V) == img
        assert apply_transform(fv, TransformKind.FLIP_H) == r180


def _check_iou_oracle(seed: int) -> None:
    rng = random.Random(f"{seed}:iou")

    def mask(b: BBox) -> int:
        m = 0
        for y in range(b.y0, b.y1):
            for x in range(b.x0, b.x1):
                m |= 1 << (y * 12 + x)
        return m

    def rand_box() -> BBox:
        x0 = rng.randrange(12)
        y0 = rng.randrange(12)
        return BBox(x0, y0, rng.randint(x0 + 1, 12), rng.randint(y0 + 1, 12))

    for _ in range(20000):
        a, b = rand_box(), rand_box()
        inter = (mask(a) & mask(b)).bit_count()
        union = (mask(a) | mask(b)).bit_count()
        got = iou(a, b)
        assert abs(got - inter / union) < 1e-12, (a, b, got, inter, union)


def _check_detect(seed: int) -> None:
    rng = random.Random(f"{seed}:detect")
    for _ in range(50):
        img = _rand_raster(rng)
        for kind in TransformKind:
            assert kind in raster.detect_transform(img, apply_transform(img, kind))


def _check_parser_fuzz(seed: int) -> None:
    from .toolprog import ParseError, ToolProgram, parse

    rng = random.Random(f"{seed}:fuzz")
    alphabet = "abcrop019()=,.|\"-_ \n\t<>!"
    for _ in range(20000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(40)))
        try:
            prog = parse(text)
            assert isinstance(prog, ToolProgram)
        except ParseError:
            pass


def _check_chain_equivalence(seed: int) -> None:
    from .toolprog import ExecSuccess, execute

    rng = random.Random(f"{seed}:chain")
    tools = ("rotate90", "rotate180", "flip-horizontal", "grayscale", "sharpen")
    for _ in range(500):
        img = _rand_raster(rng, 12)
        a, b = rng.choice(tools), rng.choice(tools)
        chained = execute(f"{a}() | {b}()", img)
        first = execute(f"{a}()", img)
        second = execute(f"{b}()", first.result)
        assert isinstance(chained, ExecSuccess)
        assert chained.result == second.result


def _check_reward_example(seed: int) -> None:
    from .episode import Episode, TaskSpec
    from .raster import INVERSE_KIND, KIND_FOR_TOOL
    from .reward import score_trajectory

    rng = random.Random(f"{seed}:reward")
    canonical = _rand_raster(rng, 16)
    initial = apply_transform(canonical, INVERSE_KIND[KIND_FOR_TOOL["rotate180"]])
    task = TaskSpec("verify-1", "q?", initial, canonical, "forty two",
                    "single-tool", ("rotate180",), None, 4)
    ep = Episode(task)
    ep.reset()
    ep.step("<think>flip it back</think><code>rotate180()</code>")
    ep.step("<think>done</think><answer>forty two</answer>")
    b = score_trajectory(ep.trajectory())
    assert abs(b.total - 2.6) < 1e-9, b.total


def _check_store_roundtrip(seed: int) -> None:
    import tempfile

    from . import store
    from .episode import Episode, TaskSpec

    rng = random.Random(f"{seed}:store")
    with tempfile.TemporaryDirectory() as tmp:
        tasks = []
        trajs = []
        for i in range(20):
            img = _rand_raster(rng, 10)
            task = TaskSpec(f"v{i}", "what is it?", img, img, "ok",
                            "no-tool", (), None, 3)
            ep = Episode(task)
            ep.reset()
            ep.step("<think>read</think><answer>ok</answer>")
            tasks.append(task)
            trajs.append(ep.trajectory())
        store.save_tasks(tmp, tasks)
        store.save_trajectories(tmp, trajs)
        assert store.load_tasks(f"{tmp}/tasks.jsonl") == tasks
        assert store.load_trajectories(f"{tmp}/trajectories.jsonl") == trajs


def _check_backend_equivalence(seed: int) -> None:
    from .raster import backend

    impls = backend.available()
    if len(impls) < 2:
        return  # compiled extension not built; nothing to compare
    pure, comp = impls["pure"], impls["compiled"]
    rng = random.Random(f"{seed}:backend")
    for _ in range(40):
        w = rng.randint(1, 16)
        h = rng.randint(1, 16)
        buf = rng.randbytes(w * h * 3)
        for op in ("rot90", "rot180", "rot270", "flip_h", "flip_v",
                   "grayscale", "sharpen", "sobel"):
            assert getattr(pure, op)(buf, w, h) == getattr(comp, op)(buf, w, h), op
        assert pure.box_blur(buf, w, h, 2) == comp.box_blur(buf, w, h, 2)


CHECKS = (
    ("dihedral-group-laws", _check_group_laws),
    ("iou-pixel-oracle", _check_iou_oracle),
    ("detect-transform", _check_detect),
    ("parser-fuzz", _check_parser_fuzz),
    ("chain-equivalence", _check_chain_equivalence),
    ("reward-worked-example", _check_reward_example),
    ("store-roundtrip", _check_store_roundtrip),
    ("backend-equivalence", _check_backend_equivalence),
)


def run_checks(seed: int = 0) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            fn(seed)
        except AssertionError as e:
            ok = False
            print(f"check={name} status=FAIL detail={e}")
        else:
            print(f"check={name} status=ok")
    return ok
