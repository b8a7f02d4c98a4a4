"""Document-scale Levenshtein distance with a bit-parallel core.

The hot path is a blocked Myers bit-parallel kernel (64 pattern rows per
machine word) compiled with numba. A pure-numpy row sweep is kept as a
fallback and can be forced with the ``SCRAPE_AUDIT_NO_NUMBA`` environment
variable so both paths stay comparable.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = "SCRAPE_AUDIT_NO_NUMBA"
_TRUTHY = {"1", "true", "yes", "on"}


def _flag_set() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in _TRUTHY


_HAS_NUMBA = False
if not _flag_set():
    try:
        from numba import njit

        _HAS_NUMBA = True
    except ImportError:
        _HAS_NUMBA = False

if _HAS_NUMBA:

    @njit("int64(uint64[:, ::1], int64[:], int64)", cache=True, nogil=True)
    def _myers_kernel(peq, text, m):  # pragma: no cover - exercised via wrapper
        nblocks = peq.shape[1]
        vp = np.full(nblocks, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
        vn = np.zeros(nblocks, dtype=np.uint64)
        score = nblocks * 64
        high = np.uint64(1) << np.uint64(63)
        one = np.uint64(1)
        for j in range(text.shape[0]):
            c = text[j]
            hin = 1
            for b in range(nblocks):
                pv = vp[b]
                mv = vn[b]
                eq = peq[c, b]
                if hin < 0:
                    eq |= one
                xv = eq | mv
                xh = (((eq & pv) + pv) ^ pv) | eq
                ph = mv | ~(xh | pv)
                mh = pv & xh
                hout = 0
                if ph & high:
                    hout = 1
                if mh & high:
                    hout = -1
                ph = ph << one
                mh = mh << one
                if hin < 0:
                    mh |= one
                elif hin > 0:
                    ph |= one
                vp[b] = mh | ~(xv | ph)
                vn[b] = ph & xv
                hin = hout
            score += hin
        # The pattern is padded to a block multiple with never-matching rows.
        # Rows above the padding are unaffected, so walking the vertical
        # deltas of the padding bits recovers the true bottom cell exactly.
        total = score
        for k in range(m, nblocks * 64):
            b = k // 64
            bit = np.uint64(1) << np.uint64(k % 64)
            if vp[b] & bit:
                total -= 1
            elif vn[b] & bit:
                total += 1
        return total


def _codepoints(s: str) -> np.ndarray:
    try:
        return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)
    except UnicodeEncodeError:
        # lone surrogates cannot round-trip through utf-32
        return np.fromiter(map(ord, s), dtype=np.uint32, count=len(s))


def _myers_distance(short: np.ndarray, long: np.ndarray) -> int:
    alphabet, inverse = np.unique(np.concatenate([short, long]), return_inverse=True)
    pattern = inverse[: short.size]
    text = inverse[short.size :].astype(np.int64)
    m = int(short.size)
    nblocks = (m + 63) // 64
    peq = np.zeros((alphabet.size, nblocks), dtype=np.uint64)
    pos = np.arange(m)
    np.bitwise_or.at(
        peq, (pattern, pos >> 6), np.uint64(1) << (pos & 63).astype(np.uint64)
    )
    return int(_myers_kernel(peq, text, m))


def _numpy_distance(short: np.ndarray, long: np.ndarray) -> int:
    # Row DP where insertions are folded in with a running minimum of
    # cand[j] - j, which is what an insertion chain from column k to j costs.
    n = int(long.size)
    prev = np.arange(n + 1, dtype=np.int64)
    idx = np.arange(n + 1, dtype=np.int64)
    run = np.empty(n + 1, dtype=np.int64)
    for i in range(int(short.size)):
        run[0] = i + 1
        np.add(prev[:-1], (long != short[i]).astype(np.int64), out=run[1:])
        np.minimum(run[1:], prev[1:] + 1, out=run[1:])
        np.subtract(run, idx, out=run)
        np.minimum.accumulate(run, out=run)
        np.add(run, idx, out=run)
        prev, run = run, prev
    return int(prev[n])


def backend_name() -> str:
    """Name of the active distance backend: ``numba`` or ``numpy``."""
    if _HAS_NUMBA and not _flag_set():
        return "numba"
    return "numpy"


def levenshtein(a: str, b: str) -> int:
    """Exact Levenshtein distance between two strings, counted in code points."""
    if a == b:
        return 0
    if len(a) > len(b):
        a, b = b, a
    if not a:
        return len(b)
    short = _codepoints(a)
    long = _codepoints(b)
    if backend_name() == "numba":
        return _myers_distance(short, long)
    return _numpy_distance(short, long)


def normalized_distance(a: str, b: str) -> float:
    """Levenshtein distance divided by the longer length, in [0, 1].

    Two empty strings are identical (0.0); one empty string against a
    non-empty one is a full rewrite (1.0).
    """
    if not a and not b:
        return 0.0
    d = levenshtein(a, b)
    return d / max(len(a), len(b))
