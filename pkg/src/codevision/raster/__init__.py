"""RGB8 raster images, orientation transforms, crop, enhancement tools,
box geometry (IoU), and a brute-force orientation detector.

Everything here is immutable and pure: operations return new `Raster`
objects and never touch their inputs, so values can be shared freely across
concurrent rollouts.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from . import backend


class RasterError(Exception):
    """Base class for pixel-level operation failures."""


class OutOfBounds(RasterError):
    pass


class EmptyRegion(RasterError):
    pass


class BadParam(RasterError):
    pass


@dataclass(frozen=True)
class Raster:
    """Owned RGB8 pixel grid, row-major interleaved (r, g, b) bytes."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"raster dims must be >= 1, got {self.width}x{self.height}")
        if not isinstance(self.pixels, bytes):
            object.__setattr__(self, "pixels", bytes(self.pixels))
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer has {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 3} for {self.width}x{self.height}"
            )

    @classmethod
    def filled(cls, width: int, height: int, color: tuple[int, int, int] = (0, 0, 0)) -> "Raster":
        return cls(width, height, bytes(color) * (width * height))

    @classmethod
    def from_pixels(cls, width: int, height: int, rgb: Iterable[tuple[int, int, int]]) -> "Raster":
        flat = bytearray()
        for p in rgb:
            flat.extend(p)
        return cls(width, height, bytes(flat))

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def get(self, x: int, y: int) -> tuple[int, int, int]:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise IndexError(f"pixel ({x},{y}) outside {self.width}x{self.height}")
        i = (y * self.width + x) * 3
        return (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])


@dataclass(frozen=True)
class BBox:
    """Half-open integer pixel box: x in [x0, x1), y in [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ValueError(f"invalid box ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    def contains(self, other: "BBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )


class TransformKind(Enum):
    """Orientation transforms; ROT90 is clockwise, ROT270 its inverse."""

    IDENTITY = "identity"
    ROT90 = "rotate90"
    ROT180 = "rotate180"
    ROT270 = "rotate270"
    FLIP_H = "flip-horizontal"
    FLIP_V = "flip-vertical"


ORIENTATION_KINDS = (
    TransformKind.ROT90,
    TransformKind.ROT180,
    TransformKind.ROT270,
    TransformKind.FLIP_H,
    TransformKind.FLIP_V,
)

INVERSE_KIND = {
    TransformKind.IDENTITY: TransformKind.IDENTITY,
    TransformKind.ROT90: TransformKind.ROT270,
    TransformKind.ROT180: TransformKind.ROT180,
    TransformKind.ROT270: TransformKind.ROT90,
    TransformKind.FLIP_H: TransformKind.FLIP_H,
    TransformKind.FLIP_V: TransformKind.FLIP_V,
}

# Tool name vocabulary. The first six are the must-use names; enhancement
# tools are the optional/emergent category.
ORIENTATION_TOOLS = ("rotate90", "rotate180", "rotate270", "flip-horizontal", "flip-vertical")
CROP_TOOL = "crop"
ENHANCEMENT_TOOLS = ("brightness", "contrast", "grayscale", "blur", "sharpen", "edge-detect")
MUST_USE_TOOLS = ORIENTATION_TOOLS + (CROP_TOOL,)
ALL_TOOLS = MUST_USE_TOOLS + ENHANCEMENT_TOOLS

KIND_FOR_TOOL = {k.value: k for k in ORIENTATION_KINDS}
TOOL_FOR_KIND = {k: k.value for k in ORIENTATION_KINDS}


def tool_category(name: str) -> str:
    """'orientation' | 'crop' | 'enhancement'; ValueError for unknown names."""
    if name in ORIENTATION_TOOLS:
        return "orientation"
    if name == CROP_TOOL:
        return "crop"
    if name in ENHANCEMENT_TOOLS:
        return "enhancement"
    raise ValueError(f"unknown tool {name!r}")


def apply_transform(img: Raster, kind: TransformKind) -> Raster:
    """Apply an orientation transform; total on valid rasters."""
    w, h = img.width, img.height
    k = backend.impl
    if kind is TransformKind.IDENTITY:
        return img
    if kind is TransformKind.ROT90:
        return Raster(h, w, k.rot90(img.pixels, w, h))
    if kind is TransformKind.ROT270:
        return Raster(h, w, k.rot270(img.pixels, w, h))
    if kind is TransformKind.ROT180:
        return Raster(w, h, k.rot180(img.pixels, w, h))
    if kind is TransformKind.FLIP_H:
        return Raster(w, h, k.flip_h(img.pixels, w, h))
    if kind is TransformKind.FLIP_V:
        return Raster(w, h, k.flip_v(img.pixels, w, h))
    raise ValueError(f"unknown transform {kind!r}")


def crop(img: Raster, box: BBox, *, clip: bool = False) -> Raster:
    """Copy the boxed region.

    Strict mode (default) raises OutOfBounds when the box exceeds the image;
    clip mode intersects first and raises EmptyRegion if nothing remains.
    """
    x0, y0, x1, y1 = box.as_tuple()
    if clip:
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, img.width), min(y1, img.height)
        if x0 >= x1 or y0 >= y1:
            raise EmptyRegion(
                f"crop box {box.as_tuple()} has empty intersection with "
                f"image bounds {img.width}x{img.height}"
            )
    elif x1 > img.width or y1 > img.height:
        raise OutOfBounds(
            f"crop box {box.as_tuple()} exceeds image bounds {img.width}x{img.height}"
        )
    return Raster(x1 - x0, y1 - y0, backend.impl.crop(img.pixels, img.width, img.height, x0, y0, x1, y1))


# Documented parameter ranges for the enhancement tools.
MAX_FACTOR = 100.0
MAX_BLUR_RADIUS = 10000


def brightness(img: Raster, factor: float = 1.3) -> Raster:
    if not (0 < factor <= MAX_FACTOR):
        raise BadParam(f"brightness factor must be in (0, {MAX_FACTOR}], got {factor}")
    return Raster(img.width, img.height, backend.impl.brightness(img.pixels, img.width, img.height, float(factor)))


def contrast(img: Raster, factor: float = 1.3) -> Raster:
    if not (0 < factor <= MAX_FACTOR):
        raise BadParam(f"contrast factor must be in (0, {MAX_FACTOR}], got {factor}")
    return Raster(img.width, img.height, backend.impl.contrast(img.pixels, img.width, img.height, float(factor)))


def grayscale(img: Raster) -> Raster:
    return Raster(img.width, img.height, backend.impl.grayscale(img.pixels, img.width, img.height))


def blur(img: Raster, radius: int = 2) -> Raster:
    if not isinstance(radius, int) or not (1 <= radius <= MAX_BLUR_RADIUS):
        raise BadParam(f"blur radius must be an integer in [1, {MAX_BLUR_RADIUS}], got {radius}")
    return Raster(img.width, img.height, backend.impl.box_blur(img.pixels, img.width, img.height, radius))


def sharpen(img: Raster) -> Raster:
    return Raster(img.width, img.height, backend.impl.sharpen(img.pixels, img.width, img.height))


def edge_detect(img: Raster) -> Raster:
    return Raster(img.width, img.height, backend.impl.sobel(img.pixels, img.width, img.height))


_ENHANCE_FNS = {
    "brightness": brightness,
    "contrast": contrast,
    "grayscale": grayscale,
    "blur": blur,
    "sharpen": sharpen,
    "edge-detect": edge_detect,
}


def enhance(img: Raster, tool: str, **params) -> Raster:
    """Dispatch to an enhancement tool by name; BadParam on range errors."""
    fn = _ENHANCE_FNS.get(tool)
    if fn is None:
        raise ValueError(f"{tool!r} is not an enhancement tool")
    return fn(img, **params)


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0.0 when disjoint."""
    ix0 = max(a.x0, b.x0)
    iy0 = max(a.y0, b.y0)
    ix1 = min(a.x1, b.x1)
    iy1 = min(a.y1, b.y1)
    if ix0 >= ix1 or iy0 >= iy1:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / (a.area + b.area - inter)


def detect_transform(canonical: Raster, observed: Raster) -> set[TransformKind]:
    """Every transform kind mapping `canonical` byte-exactly onto `observed`.

    Empty set means the observed image is not an orientation variant; more
    than one element means the canonical image has a symmetry.
    """
    found = set()
    for kind in TransformKind:
        if kind in (TransformKind.ROT90, TransformKind.ROT270):
            dims = (canonical.height, canonical.width)
        else:
            dims = (canonical.width, canonical.height)
        if dims != (observed.width, observed.height):
            continue
        if apply_transform(canonical, kind).pixels == observed.pixels:
            found.add(kind)
    return found


def map_box(box: BBox, kind: TransformKind, w: int, h: int) -> BBox:
    """Coordinates of `box` after transforming its (w x h) image by `kind`."""
    x0, y0, x1, y1 = box.as_tuple()
    if kind is TransformKind.IDENTITY:
        return box
    if kind is TransformKind.ROT90:
        return BBox(h - y1, x0, h - y0, x1)
    if kind is TransformKind.ROT180:
        return BBox(w - x1, h - y1, w - x0, h - y0)
    if kind is TransformKind.ROT270:
        return BBox(y0, w - x1, y1, w - x0)
    if kind is TransformKind.FLIP_H:
        return BBox(w - x1, y0, w - x0, y1)
    if kind is TransformKind.FLIP_V:
        return BBox(x0, h - y1, x1, h - y0)
    raise ValueError(f"unknown transform {kind!r}")


# --- PPM (binary P6) serialization -----------------------------------------
# Deterministic writer: no comments, minimal single-separator header, so the
# same raster always produces the same bytes.

def ppm_bytes(img: Raster) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + img.pixels


def write_ppm(img: Raster, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(img))


def parse_ppm(data: bytes) -> Raster:
    """Read binary P6 with maxval 255; tolerates comments and any whitespace."""
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated ppm header")
        return data[start:pos]

    if token() != b"P6":
        raise ValueError("not a binary P6 ppm")
    w = int(token())
    h = int(token())
    maxval = int(token())
    if maxval != 255:
        raise ValueError(f"unsupported ppm maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    pixels = data[pos : pos + w * h * 3]
    if len(pixels) != w * h * 3:
        raise ValueError("ppm pixel data truncated")
    return Raster(w, h, pixels)


def read_ppm(path) -> Raster:
    with open(path, "rb") as fh:
        return parse_ppm(fh.read())
