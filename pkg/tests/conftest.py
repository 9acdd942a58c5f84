import random

import pytest

from codevision.episode import TaskSpec
from codevision.raster import INVERSE_KIND, KIND_FOR_TOOL, Raster, apply_transform


def rand_raster(rng: random.Random, max_side: int = 24, min_side: int = 1) -> Raster:
    w = rng.randint(min_side, max_side)
    h = rng.randint(min_side, max_side)
    return Raster(w, h, rng.randbytes(w * h * 3))


def build_task(tid, canonical, s_req, gold="busy bees", target=None,
               task_type=None, question="What does it say?", max_turns=None,
               fault_script=None) -> TaskSpec:
    """Assemble a valid TaskSpec: corrupts the canonical image with the
    inverse of the required orientation tools."""
    img = canonical
    for tool in reversed([t for t in s_req if t in KIND_FOR_TOOL]):
        img = apply_transform(img, INVERSE_KIND[KIND_FOR_TOOL[tool]])
    if task_type is None:
        if not s_req:
            task_type = "no-tool"
        elif set(s_req) == {"crop"} and len(s_req) > 1:
            task_type = "multi-crop"
        elif len(s_req) > 1:
            task_type = "multi-tool"
        else:
            task_type = "single-tool"
    return TaskSpec(
        id=tid,
        question=question,
        initial_image=img,
        canonical_image=canonical,
        gold_answer=gold,
        task_type=task_type,
        s_req=tuple(s_req),
        target_box=target,
        max_turns=max_turns if max_turns is not None else len(s_req) + 3,
        fault_script=fault_script,
    )


def code_action(prog: str, think: str = "hm") -> str:
    return f"<think>{think}</think><code>{prog}</code>"


def answer_action(text: str, think: str = "done") -> str:
    return f"<think>{think}</think><answer>{text}</answer>"


@pytest.fixture
def rng():
    return random.Random(0xC0DE)
