"""Programmatic dataset and benchmark construction.

Builds metadata-conditioned corrupted tasks for the five task types, the
multi-tool benchmark (small-annotation filtering, positional-cue-free
question templates, balanced orientation augmentation), orientation suites,
and the five-way orientation diagnostic, all deterministic per seed.
"""
from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from ..episode import TaskSpec, validate_task
from ..raster import (
    BBox,
    INVERSE_KIND,
    KIND_FOR_TOOL,
    MUST_USE_TOOLS,
    ORIENTATION_TOOLS,
    Raster,
    TOOL_FOR_KIND,
    apply_transform,
)
from .scene import Annotation, SceneDoc, synth_scene

TASK_TYPE_ORDER = ("single-tool", "multi-tool", "multi-crop", "error-handling", "no-tool")

# Question templates must never leak spatial hints; audited against this list.
BANNED_PHRASES = ("left", "right", "top", "bottom", "corner", "coordinates")
_BANNED_RE = re.compile(r"\b(" + "|".join(BANNED_PHRASES) + r")\b", re.IGNORECASE)

DEFAULT_FAULT_SCRIPT = "zoomin(x0=0, y0=0, x1=32, y1=32)"


class NoCandidate(Exception):
    """No annotation satisfies the requested template and size constraints."""


class Infeasible(Exception):
    """The crop-window chain cannot satisfy the shrink constraint."""


@dataclass(frozen=True)
class GenConfig:
    # proportions over TASK_TYPE_ORDER
    type_proportions: tuple[float, ...] = (0.3, 0.2, 0.2, 0.1, 0.2)
    area_threshold: float = 1e-4
    shrink_factor: float = 0.5
    rng_seed: int = 0
    multicrop_steps: int = 3
    scene_size: int = 2048
    words_per_scene: int = 24

    def __post_init__(self):
        if len(self.type_proportions) != len(TASK_TYPE_ORDER):
            raise ValueError("type_proportions needs one entry per task type")
        if any(p < 0 for p in self.type_proportions):
            raise ValueError("type proportions must be >= 0")
        if abs(sum(self.type_proportions) - 1.0) > 1e-9:
            raise ValueError("type proportions must sum to 1")
        if not (0 < self.area_threshold < 1):
            raise ValueError("area_threshold must be in (0,1)")
        if not (0 < self.shrink_factor < 1):
            raise ValueError("shrink_factor must be in (0,1)")
        if self.multicrop_steps < 2:
            raise ValueError("multicrop_steps must be >= 2")
        if self.scene_size < 64:
            raise ValueError("scene_size must be >= 64")
        if self.words_per_scene < 1:
            raise ValueError("words_per_scene must be >= 1")

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "GenConfig":
        kwargs = {}
        for key, raw in pairs.items():
            if key == "type_proportions":
                kwargs[key] = tuple(float(x) for x in raw.split(","))
            elif key in ("rng_seed", "multicrop_steps", "scene_size", "words_per_scene"):
                kwargs[key] = int(raw)
            elif key in ("area_threshold", "shrink_factor"):
                kwargs[key] = float(raw)
            else:
                raise ValueError(f"unknown generator config key {key!r}")
        return cls(**kwargs)


def audit_positional(text: str) -> tuple[str, ...]:
    """Banned positional words found in a prompt (empty means clean)."""
    return tuple(m.group(0).lower() for m in _BANNED_RE.finditer(text))


def sample_task_type(rng: random.Random, cfg: GenConfig) -> str:
    u = rng.random()
    acc = 0.0
    for name, p in zip(TASK_TYPE_ORDER, cfg.type_proportions):
        acc += p
        if u < acc:
            return name
    return TASK_TYPE_ORDER[-1]


@dataclass(frozen=True)
class TaskMeta:
    task_type: str
    tools: tuple[str, ...]


def sample_meta(rng: random.Random, cfg: GenConfig) -> TaskMeta:
    """Type per configured proportions, then tools uniformly for the type."""
    ttype = sample_task_type(rng, cfg)
    if ttype == "single-tool":
        tools = (rng.choice(MUST_USE_TOOLS),)
    elif ttype == "multi-tool":
        tools = (rng.choice(ORIENTATION_TOOLS), "crop")
    elif ttype == "multi-crop":
        tools = ("crop",) * cfg.multicrop_steps
    elif ttype == "error-handling":
        tools = (rng.choice(ORIENTATION_TOOLS),)
    else:
        tools = ()
    return TaskMeta(ttype, tools)


def filter_small(scene: SceneDoc, level: str, threshold: float,
                 mode: str = "sft") -> tuple[Annotation, ...]:
    """Annotations whose box/image area ratio is under the threshold.

    SFT mode keeps ratios <= threshold, benchmark mode keeps strictly <,
    matching the two phrasings the pipeline stages use. Order preserved.
    """
    if not (0 < threshold <= 1):
        raise ValueError("threshold must be in (0,1]")
    image_area = scene.image.width * scene.image.height
    out = []
    for a in scene.by_level(level):
        ratio = a.box.area / image_area
        if ratio <= threshold if mode == "sft" else ratio < threshold:
            out.append(a)
    return tuple(out)


# --- question templates ---------------------------------------------------------

@dataclass(frozen=True)
class QuestionCandidate:
    kind: str  # line-reading | letter-count | word-first
    target: Annotation
    question: str
    gold: str


def question_candidates(scene: SceneDoc, rng: random.Random) -> list[QuestionCandidate]:
    """Every unambiguous templated question the scene supports.

    Templates reference text order only ("beginning with", "ending with"),
    never position, and each anchor word is unique at its level so the gold
    answer is well defined.
    """
    lines = scene.by_level("line")
    paras = scene.by_level("paragraph")
    words = scene.by_level("word")
    first_counts = Counter(l.text.split()[0] for l in lines)
    last_counts = Counter(l.text.split()[-1] for l in lines)
    para_last_counts = Counter(p.text.split()[-1] for p in paras)
    out: list[QuestionCandidate] = []
    for l in lines:
        toks = l.text.split()
        if first_counts[toks[0]] == 1:
            out.append(QuestionCandidate(
                "line-reading", l,
                f"What does the line beginning with '{toks[0]}' say?", l.text))
        if len(toks) >= 2 and last_counts[toks[-1]] == 1:
            first_word = _first_word_annotation(words, l)
            if first_word is not None:
                out.append(QuestionCandidate(
                    "word-first", first_word,
                    f"What is the first word of the line ending with '{toks[-1]}'?",
                    toks[0]))
    for p in paras:
        last = p.text.split()[-1]
        if para_last_counts[last] != 1:
            continue
        letters = sorted(set(c for c in p.text if c.isalpha()))
        if not letters:
            continue
        ch = rng.choice(letters)
        out.append(QuestionCandidate(
            "letter-count", p,
            f"How many times does the letter '{ch}' appear in the paragraph "
            f"ending with '{last}'?",
            str(p.text.count(ch))))
    return out


def _first_word_annotation(words: Sequence[Annotation], line: Annotation) -> Annotation | None:
    for w in words:
        if line.box.contains(w.box) and w.box.x0 == line.box.x0 and w.box.y0 == line.box.y0:
            return w
    return None


# --- task construction ----------------------------------------------------------

def corrupt_image(canonical: Raster, s_req: Sequence[str]) -> Raster:
    """Initial observation image such that executing s_req's orientation members in
    order restores the canonical image byte-exactly."""
    img = canonical
    for tool in reversed([t for t in s_req if t in KIND_FOR_TOOL]):
        img = apply_transform(img, INVERSE_KIND[KIND_FOR_TOOL[tool]])
    return img


def make_task(scene: SceneDoc, meta: TaskMeta, cfg: GenConfig,
              rng: random.Random, task_id: str,
              initial_cache: dict | None = None) -> TaskSpec:
    """Assemble a TaskSpec for the sampled metadata.

    Crop-bearing types target an annotation passing the small-area filter
    (and, for multi-crop, one with a feasible window chain); NoCandidate when
    the scene offers none.
    """
    needs_crop = "crop" in meta.tools
    candidates = question_candidates(scene, rng)
    if needs_crop:
        image_area = scene.image.width * scene.image.height
        candidates = [
            c for c in candidates
            if c.target.box.area / image_area <= cfg.area_threshold
        ]
        if meta.task_type == "multi-crop":
            candidates = [
                c for c in candidates
                if _windows_feasible(c.target.box, scene.image.size,
                                     cfg.multicrop_steps, cfg.shrink_factor)
            ]
    if not candidates:
        raise NoCandidate(
            f"scene offers no question candidate for task type {meta.task_type!r}"
        )
    cand = rng.choice(candidates)
    if initial_cache is None:
        initial = corrupt_image(scene.image, meta.tools)
    else:
        key = tuple(t for t in meta.tools if t in KIND_FOR_TOOL)
        if key not in initial_cache:
            initial_cache[key] = corrupt_image(scene.image, meta.tools)
        initial = initial_cache[key]
    task = TaskSpec(
        id=task_id,
        question=cand.question,
        initial_image=initial,
        canonical_image=scene.image,
        gold_answer=cand.gold,
        task_type=meta.task_type,
        s_req=meta.tools,
        target_box=cand.target.box if needs_crop else None,
        max_turns=len(meta.tools) + 3,
        fault_script=DEFAULT_FAULT_SCRIPT if meta.task_type == "error-handling" else None,
    )
    validate_task(task)
    return task


def _windows_feasible(target: BBox, image_size: tuple[int, int],
                      steps: int, shrink: float) -> bool:
    try:
        multicrop_windows(target, image_size, steps, shrink)
        return True
    except Infeasible:
        return False


def multicrop_windows(target: BBox, image_size: tuple[int, int], steps: int,
                      shrink_factor: float = 0.5) -> tuple[BBox, ...]:
    """Monotonically shrinking nested windows ending at the target box.

    Returns windows w_1 .. w_steps where each properly contains the next,
    w_steps equals the target, all stay within the image, and
    area(w_{i+1}) <= shrink_factor * area(w_i). Built backwards from the
    target by growing each window at least 1/shrink_factor in area, centered
    where bounds allow. Raises Infeasible when the image cannot hold the
    required growth.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not (0 < shrink_factor < 1):
        raise ValueError("shrink_factor must be in (0,1)")
    w_img, h_img = image_size
    if target.x1 > w_img or target.y1 > h_img:
        raise ValueError("target box exceeds image bounds")
    grow = 1.0 / shrink_factor
    side = math.sqrt(grow)
    chain = [target]
    cur = target
    for _ in range(steps - 1):
        need = cur.area * grow
        nw = min(w_img, max(cur.width + 1, math.ceil(cur.width * side)))
        nh = min(h_img, max(cur.height + 1, math.ceil(cur.height * side)))
        while nw * nh < need:
            if nw < w_img:
                nw = min(w_img, nw + max(1, nw // 2))
            elif nh < h_img:
                nh = min(h_img, nh + max(1, nh // 2))
            else:
                raise Infeasible(
                    f"cannot grow a {cur.width}x{cur.height} window by "
                    f"{grow:g}x within a {w_img}x{h_img} image"
                )
        x0 = _fit_origin(cur.x0, cur.x1, nw, w_img)
        y0 = _fit_origin(cur.y0, cur.y1, nh, h_img)
        cur = BBox(x0, y0, x0 + nw, y0 + nh)
        chain.append(cur)
    chain.reverse()
    return tuple(chain)


def _fit_origin(lo_edge: int, hi_edge: int, size: int, bound: int) -> int:
    want = lo_edge - (size - (hi_edge - lo_edge)) // 2
    lo = max(0, hi_edge - size)
    hi = min(lo_edge, bound - size)
    return min(max(want, lo), hi)


def difficulty_filter(results: Sequence[bool]) -> bool:
    """Keep an RL item iff its K rollouts are neither all-correct nor
    all-incorrect."""
    if len(results) < 2:
        raise ValueError("need at least 2 rollout results")
    wins = sum(bool(r) for r in results)
    return 1 <= wins <= len(results) - 1


# --- pipelines -------------------------------------------------------------------

def scene_stream(seed: int, cfg: GenConfig) -> Iterator[SceneDoc]:
    """Infinite deterministic stream of scenes with derived per-scene seeds."""
    i = 0
    while True:
        yield synth_scene(f"{seed}:scene:{i}", cfg.words_per_scene, cfg.scene_size)
        i += 1


def _balanced_tool_deck(rng: random.Random) -> Iterator[str]:
    """Orientation tools in shuffled blocks of five: uniform marginally and
    balanced to within one item for any prefix length."""
    while True:
        block = list(ORIENTATION_TOOLS)
        rng.shuffle(block)
        yield from block


def gen_mvtool(scenes: Iterable[SceneDoc], cfg: GenConfig | None = None,
               n: int | None = None, seed: int = 0,
               max_barren_scenes: int = 64) -> Iterator[TaskSpec]:
    """Multi-tool benchmark items from a scene stream.

    Three stages per item: keep only question targets strictly under the
    area threshold, generate a positional-cue-free templated question, and
    corrupt the image so one orientation tool plus a crop are required.
    Stops after `n` items (or when the scene iterable is exhausted); raises
    NoCandidate after `max_barren_scenes` consecutive scenes without a
    qualifying annotation, so an unreachable threshold cannot spin forever
    on an infinite stream.
    """
    cfg = cfg if cfg is not None else GenConfig()
    rng = random.Random(f"{seed}:mvtool")
    deck = _balanced_tool_deck(rng)
    count = 0
    barren = 0
    image_cache: dict[str, Raster] = {}
    for scene in scenes:
        if n is not None and count >= n:
            return
        image_area = scene.image.width * scene.image.height
        cands = [
            c for c in question_candidates(scene, rng)
            if c.target.box.area / image_area < cfg.area_threshold
        ]
        barren = 0 if cands else barren + 1
        if barren >= max_barren_scenes:
            raise NoCandidate(
                f"{max_barren_scenes} consecutive scenes produced no annotation "
                f"under area threshold {cfg.area_threshold:g}"
            )
        image_cache.clear()
        for cand in cands:
            if n is not None and count >= n:
                return
            tool = next(deck)
            if tool not in image_cache:
                image_cache[tool] = corrupt_image(scene.image, (tool,))
            task = TaskSpec(
                id=f"mvtool-{seed}-{count:05d}",
                question=cand.question,
                initial_image=image_cache[tool],
                canonical_image=scene.image,
                gold_answer=cand.gold,
                task_type="multi-tool",
                s_req=(tool, "crop"),
                target_box=cand.target.box,
                max_turns=5,
            )
            validate_task(task)
            yield task
            count += 1


def gen_orientation_suite(base_items: Sequence[TaskSpec]) -> list[TaskSpec]:
    """Source plus five transformed variants per base item.

    Each variant requires exactly the single tool that restores the source
    orientation; the Source variant requires none.
    """
    out = []
    for base in base_items:
        out.append(TaskSpec(
            id=f"{base.id}-source",
            question=base.question,
            initial_image=base.canonical_image,
            canonical_image=base.canonical_image,
            gold_answer=base.gold_answer,
            task_type="no-tool",
            s_req=(),
            target_box=None,
            max_turns=3,
        ))
        for tool in ORIENTATION_TOOLS:
            out.append(TaskSpec(
                id=f"{base.id}-{tool}",
                question=base.question,
                initial_image=corrupt_image(base.canonical_image, (tool,)),
                canonical_image=base.canonical_image,
                gold_answer=base.gold_answer,
                task_type="single-tool",
                s_req=(tool,),
                target_box=None,
                max_turns=4,
            ))
    for task in out:
        validate_task(task)
    return out


def gen_base_items(n: int, seed: int, cfg: GenConfig | None = None) -> list[TaskSpec]:
    """No-tool question items over fresh scenes; inputs for the orientation suite."""
    cfg = cfg if cfg is not None else GenConfig()
    rng = random.Random(f"{seed}:base")
    out = []
    scenes = scene_stream(seed, cfg)
    while len(out) < n:
        scene = next(scenes)
        cands = question_candidates(scene, rng)
        if not cands:
            continue
        cand = rng.choice(cands)
        task = TaskSpec(
            id=f"orient-{seed}-{len(out):05d}",
            question=cand.question,
            initial_image=scene.image,
            canonical_image=scene.image,
            gold_answer=cand.gold,
            task_type="no-tool",
            s_req=(),
            target_box=None,
            max_turns=3,
        )
        validate_task(task)
        out.append(task)
    return out


# --- five-way diagnostic ---------------------------------------------------------

DIAGNOSTIC_OPTIONS = (
    "rotate90", "rotate180", "rotate270", "flip-horizontal", "flip-vertical"
)

DIAGNOSTIC_QUESTION = (
    "Which transformation was applied to the original image? Answer with "
    "one of: " + ", ".join(DIAGNOSTIC_OPTIONS) + "."
)


@dataclass(frozen=True)
class DiagnosticItem:
    id: str
    canonical: Raster
    observed: Raster
    options: tuple[str, ...]
    gold: str  # the applied transform, named by its tool id


class Ambiguous(Exception):
    """The image has an orientation symmetry; the five-way item is undefined."""


def is_ambiguous(image: Raster) -> bool:
    """True when any two orientation variants of the image coincide."""
    seen = set()
    from ..raster import TransformKind

    for kind in TransformKind:
        var = apply_transform(image, kind)
        key = (var.width, var.height, var.pixels)
        if key in seen:
            return True
        seen.add(key)
    return False


def gen_diagnostic(images: Sequence[Raster], seed: int = 0,
                   start_index: int = 0) -> list[DiagnosticItem]:
    """One five-way MCQ per unambiguous image, uniformly random transform,
    fixed option order. Symmetric images are skipped."""
    rng = random.Random(f"{seed}:diag")
    items = []
    for i, img in enumerate(images):
        kind_tool = rng.choice(DIAGNOSTIC_OPTIONS)
        if is_ambiguous(img):
            continue
        observed = apply_transform(img, KIND_FOR_TOOL[kind_tool])
        items.append(DiagnosticItem(
            id=f"diag-{seed}-{start_index + i:05d}",
            canonical=img,
            observed=observed,
            options=DIAGNOSTIC_OPTIONS,
            gold=kind_tool,
        ))
    return items


def answer_diagnostic(item: DiagnosticItem) -> str:
    """Brute-force oracle: detect the transform and name its option."""
    from ..raster import detect_transform

    kinds = detect_transform(item.canonical, item.observed)
    if len(kinds) != 1:
        return "ambiguous"
    return TOOL_FOR_KIND[next(iter(kinds))]


def diagnostic_images(n: int, seed: int, size: int = 128,
                      words: int = 4) -> list[Raster]:
    """Small synthetic images for the diagnostic; ambiguous ones replaced."""
    out = []
    i = 0
    while len(out) < n:
        scene = synth_scene(f"{seed}:diagimg:{i}", words, size)
        i += 1
        if not is_ambiguous(scene.image):
            out.append(scene.image)
    return out
