"""Pure-Python pixel kernels.

Fallback implementations of the hot loops; `_fastkernels.pyx` mirrors every
function here and both must produce byte-identical output. All buffers are
row-major interleaved RGB (3 bytes per pixel). Geometry ops lean on strided
slice assignment, which keeps them usable on large canvases; the convolution
ops (blur/sharpen/sobel) stream a small row window and are noticeably slower
than the compiled backend on big images.

Rounding conventions shared with the compiled backend:
  * brightness/contrast: floor(x + 0.5) on the scaled value, then clamp
  * grayscale luma: (299*r + 587*g + 114*b + 500) // 1000
  * blur: 2-D clamped box mean, rounded half-up in exact integer arithmetic
  * sobel magnitude: floor(sqrt(gx^2 + gy^2) + 0.5), clamped to 255
"""
from __future__ import annotations

import math

NAME = "pure"


def _clamp8(v: int) -> int:
    if v < 0:
        return 0
    if v > 255:
        return 255
    return v


def rot90(buf: bytes, w: int, h: int) -> bytes:
    # clockwise: dst(x', y') = src(y', h-1-x'); output is h wide, w tall
    w3 = w * 3
    out = bytearray(len(buf))
    row = bytearray(h * 3)
    ow3 = h * 3
    for yd in range(w):
        start = (h - 1) * w3 + yd * 3
        row[0::3] = buf[start :: -w3]
        row[1::3] = buf[start + 1 :: -w3]
        row[2::3] = buf[start + 2 :: -w3]
        out[yd * ow3 : (yd + 1) * ow3] = row
    return bytes(out)


def rot270(buf: bytes, w: int, h: int) -> bytes:
    # counter-clockwise: dst(x', y') = src(w-1-y', x'); output is h wide, w tall
    w3 = w * 3
    out = bytearray(len(buf))
    row = bytearray(h * 3)
    ow3 = h * 3
    for yd in range(w):
        start = (w - 1 - yd) * 3
        end = start + (h - 1) * w3 + 1
        row[0::3] = buf[start:end:w3]
        row[1::3] = buf[start + 1 : end + 1 : w3]
        row[2::3] = buf[start + 2 : end + 2 : w3]
        out[yd * ow3 : (yd + 1) * ow3] = row
    return bytes(out)


def rot180(buf: bytes, w: int, h: int) -> bytes:
    # full byte reversal flips rows and columns but also reverses each
    # pixel's channels; the strided assignments restore RGB order
    rev = buf[::-1]
    out = bytearray(len(buf))
    out[0::3] = rev[2::3]
    out[1::3] = rev[1::3]
    out[2::3] = rev[0::3]
    return bytes(out)


def flip_v(buf: bytes, w: int, h: int) -> bytes:
    w3 = w * 3
    return b"".join(buf[y * w3 : (y + 1) * w3] for y in range(h - 1, -1, -1))


def flip_h(buf: bytes, w: int, h: int) -> bytes:
    # FlipH = Rot180 . FlipV
    return rot180(flip_v(buf, w, h), w, h)


def crop(buf: bytes, w: int, h: int, x0: int, y0: int, x1: int, y1: int) -> bytes:
    w3 = w * 3
    return b"".join(buf[y * w3 + x0 * 3 : y * w3 + x1 * 3] for y in range(y0, y1))


def brightness(buf: bytes, w: int, h: int, factor: float) -> bytes:
    table = bytes(_clamp8(int(v * factor + 0.5)) for v in range(256))
    return buf.translate(table)


def contrast(buf: bytes, w: int, h: int, factor: float) -> bytes:
    table = bytes(
        _clamp8(math.floor(128.0 + (v - 128.0) * factor + 0.5)) for v in range(256)
    )
    return buf.translate(table)


def grayscale(buf: bytes, w: int, h: int) -> bytes:
    out = bytearray(len(buf))
    for i in range(0, len(buf), 3):
        l = (299 * buf[i] + 587 * buf[i + 1] + 114 * buf[i + 2] + 500) // 1000
        out[i] = l
        out[i + 1] = l
        out[i + 2] = l
    return bytes(out)


def _row_box_sums(row: bytes, w: int, radius: int) -> list[int]:
    """Horizontal clamped window sums for one interleaved row -> w*3 ints."""
    out = [0] * (w * 3)
    last = w - 1
    for c in range(3):
        ch = row[c::3]
        s = 0
        for dx in range(-radius, radius + 1):
            s += ch[min(max(dx, 0), last)]
        for x in range(w):
            out[x * 3 + c] = s
            s += ch[min(x + 1 + radius, last)] - ch[min(max(x - radius, 0), last)]
    return out


def box_blur(buf: bytes, w: int, h: int, radius: int) -> bytes:
    w3 = w * 3
    n = (2 * radius + 1) ** 2
    n2 = 2 * n
    last = h - 1
    cache: dict[int, list[int]] = {}

    def row(j: int) -> list[int]:
        r = cache.get(j)
        if r is None:
            r = _row_box_sums(buf[j * w3 : (j + 1) * w3], w, radius)
            cache[j] = r
        return r

    acc = [0] * w3
    for dy in range(-radius, radius + 1):
        acc = [a + b for a, b in zip(acc, row(min(max(dy, 0), last)))]
    out = bytearray(len(buf))
    for y in range(h):
        base = y * w3
        for i, s in enumerate(acc):
            out[base + i] = (2 * s + n) // n2
        if y < last:
            add = row(min(y + 1 + radius, last))
            rem = row(min(max(y - radius, 0), last))
            acc = [a + p - q for a, p, q in zip(acc, add, rem)]
            # rows below y+1-radius can never be referenced again
            for j in [j for j in cache if j < y + 1 - radius]:
                del cache[j]
    return bytes(out)


def sharpen(buf: bytes, w: int, h: int) -> bytes:
    blurred = box_blur(buf, w, h, 1)
    out = bytearray(len(buf))
    for i in range(len(buf)):
        out[i] = _clamp8(2 * buf[i] - blurred[i])
    return bytes(out)


def sobel(buf: bytes, w: int, h: int) -> bytes:
    w3 = w * 3

    def lrow(j: int) -> list[int]:
        base = j * w3
        return [
            (
                299 * buf[base + 3 * x]
                + 587 * buf[base + 3 * x + 1]
                + 114 * buf[base + 3 * x + 2]
                + 500
            )
            // 1000
            for x in range(w)
        ]

    out = bytearray(len(buf))
    lastx = w - 1
    lasty = h - 1
    sqrt = math.sqrt
    cur = lrow(0)
    prev = cur
    nxt = lrow(min(1, lasty))
    for y in range(h):
        base = y * w3
        for x in range(w):
            xl = max(x - 1, 0)
            xr = min(x + 1, lastx)
            a = prev[xl]
            b = prev[x]
            c = prev[xr]
            d = cur[xl]
            f = cur[xr]
            g = nxt[xl]
            i2 = nxt[x]
            k = nxt[xr]
            gx = (c + 2 * f + k) - (a + 2 * d + g)
            gy = (g + 2 * i2 + k) - (a + 2 * b + c)
            m = int(sqrt(gx * gx + gy * gy) + 0.5)
            if m > 255:
                m = 255
            o = base + x * 3
            out[o] = m
            out[o + 1] = m
            out[o + 2] = m
        if y < lasty:
            prev = cur
            cur = nxt
            nxt = lrow(min(y + 2, lasty))
    return bytes(out)
