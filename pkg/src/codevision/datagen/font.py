"""Embedded 5x7 bitmap font (A-Z, 0-9) and the word lexicon used by the
synthetic scene renderer. Glyphs are 7 rows of 5 cells; rendering scales
each cell to an s x s block with a 1-cell advance gap between letters.
"""
from __future__ import annotations

GLYPH_W = 5
GLYPH_H = 7
ADVANCE = 6  # glyph cells plus one spacing column

_RAW = {
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "C": (".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "F": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "G": (".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "I": (".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "J": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "K": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "M": ("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"),
    "N": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "Q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "V": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "W": ("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": ("#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
}

# glyph -> tuple of 7 row bitmasks, bit 4 = leftmost cell
GLYPHS: dict[str, tuple[int, ...]] = {
    ch: tuple(
        sum(16 >> i for i, c in enumerate(row) if c == "#") for row in rows
    )
    for ch, rows in _RAW.items()
}


def text_size(text: str, scale: int = 1) -> tuple[int, int]:
    """Pixel extent of a rendered word at the given integer scale."""
    if not text:
        return (0, 0)
    return ((ADVANCE * len(text) - 1) * scale, GLYPH_H * scale)


LEXICON = (
    "ACORN", "AMBER", "ANT", "APPLE", "ARCH", "BADGE", "BAT", "BEES", "BELL",
    "BIRCH", "BOX", "BRICK", "BUSY", "CAT", "CEDAR", "CHALK", "CLOUD", "COIN",
    "CRANE", "CUP", "DELTA", "DOG", "DOOR", "DRUM", "EAGLE", "ECHO", "ELM",
    "FERN", "FLINT", "FOX", "FROST", "GATE", "GLOBE", "GRAPE", "HARP", "HAZEL",
    "HILL", "IRIS", "IVY", "JADE", "JAR", "KELP", "KEY", "KITE", "LAKE",
    "LEMON", "LINEN", "MAPLE", "MINT", "MOON", "MOSS", "NEST", "NORTH", "OAK",
    "OLIVE", "ONYX", "OTTER", "OWL", "PEARL", "PINE", "PLUM", "QUAIL",
    "QUARTZ", "RAVEN", "REED", "RIDGE", "RIVER", "ROBIN", "SAGE", "SLATE",
    "SNOW", "SPARK", "STONE", "STORM", "SWAN", "TELEVISION", "THORN", "TIGER",
    "TRAIL", "TULIP", "VINE", "WHEAT", "WOLF", "WREN", "ZINC",
)
