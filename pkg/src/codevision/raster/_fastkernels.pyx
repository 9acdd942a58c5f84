# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels.

Mirrors `kernels.py` function for function; outputs must be byte-identical
to the pure backend (same clamped-window integer sums, same rounding).
"""

from libc.math cimport floor, sqrt
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

NAME = "compiled"


cdef inline unsigned char _clamp8(long v) nogil:
    if v < 0:
        return 0
    if v > 255:
        return 255
    return <unsigned char> v


cdef inline Py_ssize_t _cl(Py_ssize_t v, Py_ssize_t last) nogil:
    if v < 0:
        return 0
    if v > last:
        return last
    return v


def rot90(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t xd, yd, si, di
    with nogil:
        for yd in range(w):
            for xd in range(h):
                si = ((h - 1 - xd) * w + yd) * 3
                di = (yd * h + xd) * 3
                dst[di] = src[si]
                dst[di + 1] = src[si + 1]
                dst[di + 2] = src[si + 2]
    return bytes(ob)


def rot270(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t xd, yd, si, di
    with nogil:
        for yd in range(w):
            for xd in range(h):
                si = (xd * w + (w - 1 - yd)) * 3
                di = (yd * h + xd) * 3
                dst[di] = src[si]
                dst[di + 1] = src[si + 1]
                dst[di + 2] = src[si + 2]
    return bytes(ob)


def rot180(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t n = w * h, p, si, di
    with nogil:
        for p in range(n):
            si = p * 3
            di = (n - 1 - p) * 3
            dst[di] = src[si]
            dst[di + 1] = src[si + 1]
            dst[di + 2] = src[si + 2]
    return bytes(ob)


def flip_v(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t y, w3 = w * 3
    with nogil:
        for y in range(h):
            memcpy(&dst[(h - 1 - y) * w3], &src[y * w3], w3)
    return bytes(ob)


def flip_h(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t x, y, si, di
    with nogil:
        for y in range(h):
            for x in range(w):
                si = (y * w + x) * 3
                di = (y * w + (w - 1 - x)) * 3
                dst[di] = src[si]
                dst[di + 1] = src[si + 1]
                dst[di + 2] = src[si + 2]
    return bytes(ob)


def crop(bytes buf, Py_ssize_t w, Py_ssize_t h,
         Py_ssize_t x0, Py_ssize_t y0, Py_ssize_t x1, Py_ssize_t y1):
    cdef const unsigned char[::1] src = buf
    cdef Py_ssize_t cw = x1 - x0, ch = y1 - y0
    cdef bytearray ob = bytearray(cw * ch * 3)
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t y, cw3 = cw * 3, w3 = w * 3
    with nogil:
        for y in range(ch):
            memcpy(&dst[y * cw3], &src[(y0 + y) * w3 + x0 * 3], cw3)
    return bytes(ob)


def brightness(bytes buf, Py_ssize_t w, Py_ssize_t h, double factor):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef unsigned char table[256]
    cdef Py_ssize_t i, n = len(buf)
    cdef long v
    with nogil:
        for v in range(256):
            table[v] = _clamp8(<long> (v * factor + 0.5))
        for i in range(n):
            dst[i] = table[src[i]]
    return bytes(ob)


def contrast(bytes buf, Py_ssize_t w, Py_ssize_t h, double factor):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef unsigned char table[256]
    cdef Py_ssize_t i, n = len(buf)
    cdef long v
    with nogil:
        for v in range(256):
            table[v] = _clamp8(<long> floor(128.0 + (v - 128.0) * factor + 0.5))
        for i in range(n):
            dst[i] = table[src[i]]
    return bytes(ob)


def grayscale(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t i, n = len(buf)
    cdef long l
    with nogil:
        for i in range(0, n, 3):
            l = (299 * src[i] + 587 * src[i + 1] + 114 * src[i + 2] + 500) // 1000
            dst[i] = <unsigned char> l
            dst[i + 1] = <unsigned char> l
            dst[i + 2] = <unsigned char> l
    return bytes(ob)


def box_blur(bytes buf, Py_ssize_t w, Py_ssize_t h, Py_ssize_t radius):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t w3 = w * 3, lastx = w - 1, lasty = h - 1
    cdef long long n = (2 * radius + 1) * (2 * radius + 1)
    cdef long long n2 = 2 * n, s
    cdef Py_ssize_t x, y, c, dx, dy, i
    # hsum[y*w3 ..]: horizontal clamped window sums for every row
    cdef long* hsum = <long*> malloc(w3 * h * sizeof(long))
    cdef long long* acc = <long long*> malloc(w3 * sizeof(long long))
    if hsum == NULL or acc == NULL:
        free(hsum)
        free(acc)
        raise MemoryError()
    try:
        with nogil:
            for y in range(h):
                for c in range(3):
                    s = 0
                    for dx in range(-radius, radius + 1):
                        s += src[(y * w + _cl(dx, lastx)) * 3 + c]
                    for x in range(w):
                        hsum[y * w3 + x * 3 + c] = <long> s
                        s += src[(y * w + _cl(x + 1 + radius, lastx)) * 3 + c]
                        s -= src[(y * w + _cl(x - radius, lastx)) * 3 + c]
            for i in range(w3):
                acc[i] = 0
            for dy in range(-radius, radius + 1):
                for i in range(w3):
                    acc[i] += hsum[_cl(dy, lasty) * w3 + i]
            for y in range(h):
                for i in range(w3):
                    dst[y * w3 + i] = <unsigned char> ((2 * acc[i] + n) // n2)
                if y < lasty:
                    for i in range(w3):
                        acc[i] += hsum[_cl(y + 1 + radius, lasty) * w3 + i]
                        acc[i] -= hsum[_cl(y - radius, lasty) * w3 + i]
    finally:
        free(hsum)
        free(acc)
    return bytes(ob)


def sharpen(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef bytes blurred = box_blur(buf, w, h, 1)
    cdef const unsigned char[::1] src = buf
    cdef const unsigned char[::1] blr = blurred
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t i, n = len(buf)
    with nogil:
        for i in range(n):
            dst[i] = _clamp8(2 * <long> src[i] - <long> blr[i])
    return bytes(ob)


def sobel(bytes buf, Py_ssize_t w, Py_ssize_t h):
    cdef const unsigned char[::1] src = buf
    cdef bytearray ob = bytearray(len(buf))
    cdef unsigned char[::1] dst = ob
    cdef Py_ssize_t x, y, xl, xr, yu, yd, o, i
    cdef Py_ssize_t lastx = w - 1, lasty = h - 1
    cdef long a, b, c, d, f, g, i2, k, gx, gy, m
    cdef long* lum = <long*> malloc(w * h * sizeof(long))
    if lum == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(w * h):
                lum[i] = (299 * src[i * 3] + 587 * src[i * 3 + 1]
                          + 114 * src[i * 3 + 2] + 500) // 1000
            for y in range(h):
                yu = _cl(y - 1, lasty) * w
                yd = _cl(y + 1, lasty) * w
                for x in range(w):
                    xl = _cl(x - 1, lastx)
                    xr = _cl(x + 1, lastx)
                    a = lum[yu + xl]
                    b = lum[yu + x]
                    c = lum[yu + xr]
                    d = lum[y * w + xl]
                    f = lum[y * w + xr]
                    g = lum[yd + xl]
                    i2 = lum[yd + x]
                    k = lum[yd + xr]
                    gx = (c + 2 * f + k) - (a + 2 * d + g)
                    gy = (g + 2 * i2 + k) - (a + 2 * b + c)
                    m = <long> (sqrt(<double> (gx * gx + gy * gy)) + 0.5)
                    if m > 255:
                        m = 255
                    o = (y * w + x) * 3
                    dst[o] = <unsigned char> m
                    dst[o + 1] = <unsigned char> m
                    dst[o + 2] = <unsigned char> m
    finally:
        free(lum)
    return bytes(ob)
