"""Synthetic annotated text scenes.

Words from the lexicon are rendered with the embedded bitmap font onto a
flat canvas, grouped into lines and paragraphs, with the exact pixel box of
every word, line, and paragraph recorded. Scenes stand in for externally
annotated corpora at desk scale; `load_scene_docs` imports the external
JSONL annotation schema for users who have real data.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from ..raster import BBox, Raster, read_ppm
from .font import ADVANCE, GLYPH_H, GLYPHS, LEXICON, text_size

LEVELS = ("word", "line", "paragraph")


class Overflow(Exception):
    """Raised when placement cannot fit within the retry budget."""


@dataclass(frozen=True)
class Annotation:
    level: str
    text: str
    box: BBox

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown annotation level {self.level!r}")
        if not self.text:
            raise ValueError("annotation text must be non-empty")


@dataclass(frozen=True)
class SceneDoc:
    image: Raster
    annotations: tuple[Annotation, ...]
    provenance: str = "synthetic"

    def by_level(self, level: str) -> tuple[Annotation, ...]:
        return tuple(a for a in self.annotations if a.level == level)


BACKGROUND = (236, 233, 226)
INK_PALETTE = (
    (24, 24, 28),
    (64, 32, 24),
    (28, 40, 72),
    (26, 58, 30),
    (70, 26, 58),
)

_LINE_GAP = 2  # cells between lines in a paragraph
_WORD_GAP = 3  # cells between words in a line
_MARGIN = 6  # pixels kept clear around paragraphs


def _draw_word(canvas: bytearray, cw: int, word: str, x: int, y: int,
               scale: int, ink: tuple[int, int, int]) -> None:
    ink3 = bytes(ink)
    for li, ch in enumerate(word):
        rows = GLYPHS[ch]
        gx = x + li * ADVANCE * scale
        for r, bits in enumerate(rows):
            if not bits:
                continue
            for c in range(5):
                if bits & (16 >> c):
                    px = gx + c * scale
                    py = y + r * scale
                    for dy in range(scale):
                        off = ((py + dy) * cw + px) * 3
                        canvas[off : off + 3 * scale] = ink3 * scale
    return None


def _plan_paragraphs(rng: random.Random, words: int) -> list[list[int]]:
    """Split `words` into paragraphs of 1-3 lines of 1-3 words."""
    paras: list[list[int]] = []
    remaining = words
    while remaining > 0:
        lines = []
        for _ in range(rng.randint(1, 3)):
            if remaining == 0:
                break
            n = min(rng.randint(1, 3), remaining)
            lines.append(n)
            remaining -= n
        paras.append(lines)
    return paras


def synth_scene(seed: int, words: int, canvas_size: int = 2048,
                scale_choices: tuple[int, ...] = (1, 1, 2, 3),
                retry_budget: int = 200) -> SceneDoc:
    """Deterministic synthetic scene with `words` word annotations.

    Raises Overflow when a paragraph cannot be placed without overlapping
    the ones already on the canvas.
    """
    if words < 1:
        raise ValueError(f"words must be >= 1, got {words}")
    rng = random.Random(seed)
    cw = ch = canvas_size
    canvas = bytearray(bytes(BACKGROUND) * (cw * ch))
    annotations: list[Annotation] = []
    placed: list[BBox] = []

    for lines in _plan_paragraphs(rng, words):
        # one budget covers both re-rolling sizes that cannot fit the canvas
        # and re-sampling positions that collide with placed paragraphs
        for attempt in range(retry_budget + 1):
            if attempt == retry_budget:
                raise Overflow(
                    f"could not place a paragraph of {len(lines)} lines on a "
                    f"{cw}x{ch} canvas after {retry_budget} tries"
                )
            scale = rng.choice(scale_choices)
            line_words = [[rng.choice(LEXICON) for _ in range(n)] for n in lines]
            pw = max(
                sum(text_size(w, scale)[0] for w in ws)
                + _WORD_GAP * scale * (len(ws) - 1)
                for ws in line_words
            )
            ph = GLYPH_H * scale * len(lines) + _LINE_GAP * scale * (len(lines) - 1)
            if pw + 2 * _MARGIN >= cw or ph + 2 * _MARGIN >= ch:
                continue
            x = rng.randrange(_MARGIN, cw - _MARGIN - pw)
            y = rng.randrange(_MARGIN, ch - _MARGIN - ph)
            cand = BBox(x - _MARGIN, y - _MARGIN, x + pw + _MARGIN, y + ph + _MARGIN)
            if all(_disjoint(cand, p) for p in placed):
                placed.append(cand)
                break
        ink = rng.choice(INK_PALETTE)
        para_words: list[str] = []
        line_boxes: list[BBox] = []
        for li, ws in enumerate(line_words):
            ly = y + li * (GLYPH_H + _LINE_GAP) * scale
            lx = x
            word_boxes = []
            for wtext in ws:
                tw, th = text_size(wtext, scale)
                _draw_word(canvas, cw, wtext, lx, ly, scale, ink)
                wbox = BBox(lx, ly, lx + tw, ly + th)
                word_boxes.append(wbox)
                annotations.append(Annotation("word", wtext, wbox))
                lx += tw + _WORD_GAP * scale
            lbox = BBox(
                min(b.x0 for b in word_boxes),
                min(b.y0 for b in word_boxes),
                max(b.x1 for b in word_boxes),
                max(b.y1 for b in word_boxes),
            )
            line_boxes.append(lbox)
            annotations.append(Annotation("line", " ".join(ws), lbox))
            para_words.extend(ws)
        pbox = BBox(
            min(b.x0 for b in line_boxes),
            min(b.y0 for b in line_boxes),
            max(b.x1 for b in line_boxes),
            max(b.y1 for b in line_boxes),
        )
        annotations.append(Annotation("paragraph", " ".join(para_words), pbox))

    return SceneDoc(Raster(cw, ch, bytes(canvas)), tuple(annotations))


def _disjoint(a: BBox, b: BBox) -> bool:
    return a.x1 <= b.x0 or b.x1 <= a.x0 or a.y1 <= b.y0 or b.y1 <= a.y0


def load_scene_docs(path) -> list[SceneDoc]:
    """Import externally annotated scenes.

    One JSON record per line: {"image_path": ..., "annotations":
    [{"level": ..., "text": ..., "vertices": [[x, y], ...]}]}; vertices are
    reduced to their bounding box. Image paths resolve relative to the file.
    """
    path = Path(path)
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                image = read_ppm(path.parent / rec["image_path"])
                anns = []
                for a in rec["annotations"]:
                    xs = [int(v[0]) for v in a["vertices"]]
                    ys = [int(v[1]) for v in a["vertices"]]
                    anns.append(
                        Annotation(a["level"], a["text"],
                                   BBox(min(xs), min(ys), max(xs) + 1, max(ys) + 1))
                    )
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as e:
                raise ValueError(f"{path}:{lineno}: bad scene record: {e}") from e
            docs.append(SceneDoc(image, tuple(anns), provenance="imported"))
    return docs
