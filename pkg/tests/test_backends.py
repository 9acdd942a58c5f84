"""Byte-equality of the compiled extension against the pure fallback."""
import random

import pytest

from codevision.raster import backend

impls = backend.available()
needs_compiled = pytest.mark.skipif(
    "compiled" not in impls, reason="compiled kernels not built"
)

GEOMETRY_OPS = ("rot90", "rot180", "rot270", "flip_h", "flip_v")
PIXEL_OPS = ("grayscale", "sharpen", "sobel")


def _cases():
    rng = random.Random(99)
    sizes = [(1, 1), (1, 7), (7, 1), (2, 2), (5, 3), (16, 16), (13, 29)]
    sizes += [(rng.randint(1, 40), rng.randint(1, 40)) for _ in range(20)]
    return [(w, h, rng.randbytes(w * h * 3)) for w, h in sizes]


@needs_compiled
@pytest.mark.parametrize("op", GEOMETRY_OPS + PIXEL_OPS)
def test_op_equivalence(op):
    pure, comp = impls["pure"], impls["compiled"]
    for w, h, buf in _cases():
        assert getattr(pure, op)(buf, w, h) == getattr(comp, op)(buf, w, h), (op, w, h)


@needs_compiled
@pytest.mark.parametrize("radius", [1, 2, 3, 5])
def test_blur_equivalence(radius):
    pure, comp = impls["pure"], impls["compiled"]
    for w, h, buf in _cases():
        assert pure.box_blur(buf, w, h, radius) == comp.box_blur(buf, w, h, radius)


@needs_compiled
@pytest.mark.parametrize("factor", [0.3, 1.0, 1.3, 2.0, 7.7])
def test_point_op_equivalence(factor):
    pure, comp = impls["pure"], impls["compiled"]
    for w, h, buf in _cases():
        assert pure.brightness(buf, w, h, factor) == comp.brightness(buf, w, h, factor)
        assert pure.contrast(buf, w, h, factor) == comp.contrast(buf, w, h, factor)


@needs_compiled
def test_crop_equivalence():
    pure, comp = impls["pure"], impls["compiled"]
    rng = random.Random(5)
    for w, h, buf in _cases():
        for _ in range(4):
            x0 = rng.randrange(w)
            y0 = rng.randrange(h)
            x1 = rng.randint(x0 + 1, w)
            y1 = rng.randint(y0 + 1, h)
            assert pure.crop(buf, w, h, x0, y0, x1, y1) == comp.crop(
                buf, w, h, x0, y0, x1, y1
            )


def test_backend_selection_env(monkeypatch):
    # the selector honors CODEVISION_BACKEND=pure regardless of the build
    monkeypatch.setenv("CODEVISION_BACKEND", "pure")
    assert backend._select() is impls["pure"]
    monkeypatch.setenv("CODEVISION_BACKEND", "nonsense")
    with pytest.raises(ImportError):
        backend._select()
