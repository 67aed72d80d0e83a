"""Seeded, splittable random streams built on the Philox4x64-10 counter-based generator.

A stream is identified by ``(seed, stream_id)``, which is used verbatim as the
two 64-bit Philox key words.  The n-th 64-bit output of a stream is word
``n % 4`` of the Philox block evaluated at counter ``n // 4 + 1`` (the same
layout as :class:`numpy.random.Philox`, which the test-suite uses as an
oracle).  Because every output is a pure function of the key and a counter,
many streams can be advanced in lockstep with vectorised arithmetic: pass an
array of stream ids to get one "lane" per stream.

Float conversions are fixed and documented so that golden values never move:

* uniform on [0, 1):  ``(w >> 11) * 2**-53``
* standard normal:    ``ndtri(((w >> 11) + 0.5) * 2**-53)`` (inverse CDF, one word per draw)
* exponential:        ``-mean * log1p(-uniform)``
"""

from __future__ import annotations

import numba
import numpy as np
from scipy.special import ndtri

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)

_PHILOX_M0 = 0xD2E7470EE14C6C93
_PHILOX_M1 = 0xCA5A826395121157
_PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
_PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_ROUNDS = 10

_TWO_M53 = 2.0**-53
_BLOCKS_PER_REFILL = 16


def _mulhilo(a: int, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full 64x64 -> 128 bit product of a constant with a uint64 array."""
    a_lo = np.uint64(a & 0xFFFFFFFF)
    a_hi = np.uint64(a >> 32)
    b_lo = b & _M32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _M32) + lo_hi
    hi = hi_hi + (hi_lo >> _S32) + (cross >> _S32)
    lo = (cross << _S32) | (lo_lo & _M32)
    return hi, lo


def philox4x64(counter: np.ndarray, key: np.ndarray) -> np.ndarray:
    """Evaluate Philox4x64-10.

    ``counter`` has shape ``(..., 4)`` and ``key`` shape ``(..., 2)`` (uint64,
    broadcastable).  Returns the ``(..., 4)`` output block.
    """
    counter = np.asarray(counter, dtype=np.uint64)
    key = np.asarray(key, dtype=np.uint64)
    shape = np.broadcast_shapes(counter.shape[:-1], key.shape[:-1])
    c0, c1, c2, c3 = (np.broadcast_to(counter[..., i], shape) for i in range(4))
    k0 = np.broadcast_to(key[..., 0], shape).copy()
    k1 = np.broadcast_to(key[..., 1], shape).copy()
    with np.errstate(over="ignore"):
        for r in range(_ROUNDS):
            if r:
                k0 += _PHILOX_W0
                k1 += _PHILOX_W1
            hi0, lo0 = _mulhilo(_PHILOX_M0, c0)
            hi1, lo1 = _mulhilo(_PHILOX_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


@numba.njit(cache=True, inline="always")
def _mulhilo_nb(a, b):
    m32 = numba.uint64(0xFFFFFFFF)
    s32 = numba.uint64(32)
    a_lo = a & m32
    a_hi = a >> s32
    b_lo = b & m32
    b_hi = b >> s32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    cross = (lo_lo >> s32) + (hi_lo & m32) + lo_hi
    hi = a_hi * b_hi + (hi_lo >> s32) + (cross >> s32)
    lo = (cross << s32) | (lo_lo & m32)
    return hi, lo


@numba.njit(cache=True)
def _fill_blocks(key, first_counter, blocks, out):
    # out[lane, 4 * j + w] = word w of philox(key[lane], (first_counter + j, 0, 0, 0))
    m0 = numba.uint64(_PHILOX_M0)
    m1 = numba.uint64(_PHILOX_M1)
    w0 = numba.uint64(0x9E3779B97F4A7C15)
    w1 = numba.uint64(0xBB67AE8584CAA73B)
    for lane in range(key.shape[0]):
        for j in range(blocks):
            c0 = numba.uint64(first_counter + j)
            c1 = numba.uint64(0)
            c2 = numba.uint64(0)
            c3 = numba.uint64(0)
            k0 = key[lane, 0]
            k1 = key[lane, 1]
            for r in range(_ROUNDS):
                if r:
                    k0 += w0
                    k1 += w1
                hi0, lo0 = _mulhilo_nb(m0, c0)
                hi1, lo1 = _mulhilo_nb(m1, c2)
                c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            out[lane, 4 * j] = c0
            out[lane, 4 * j + 1] = c1
            out[lane, 4 * j + 2] = c2
            out[lane, 4 * j + 3] = c3


class RandomStream:
    """A deterministic stream (or a bundle of lockstep streams).

    With an integer ``stream_id`` draws are scalars or 1-d vectors.  With an
    array of ids every draw gains a leading "lane" axis, and lane ``i`` is
    bit-identical to ``RandomStream(seed, stream_id[i])``.
    """

    def __init__(self, seed: int, stream_id=0):
        self.seed = int(seed)
        ids = np.asarray(stream_id)
        if ids.ndim > 1:
            raise ValueError("stream_id must be an integer or a 1-d array of integers")
        self.batched = ids.ndim == 1
        self.stream_id = ids.astype(np.uint64) if self.batched else int(ids)
        lane_ids = np.atleast_1d(ids).astype(np.uint64)
        self._key = np.stack(
            [np.full(lane_ids.shape, self.seed % 2**64, dtype=np.uint64), lane_ids], axis=-1
        )
        self._block = 0  # last counter value consumed into the buffer
        self._buffer = np.empty((lane_ids.size, 0), dtype=np.uint64)
        self._pos = 0

    @property
    def lanes(self) -> int:
        return self._key.shape[0]

    @property
    def position(self) -> int:
        """Number of 64-bit words consumed so far (per lane)."""
        return 4 * self._block - (self._buffer.shape[1] - self._pos)

    def _refill(self, words_needed: int) -> None:
        remaining = self._buffer[:, self._pos :]
        blocks = max(_BLOCKS_PER_REFILL, -(-(words_needed - remaining.shape[1]) // 4))
        out = np.empty((self.lanes, 4 * blocks), dtype=np.uint64)
        _fill_blocks(self._key, self._block + 1, blocks, out)
        self._buffer = np.concatenate([remaining, out], axis=1)
        self._pos = 0
        self._block += blocks

    def raw(self, count: int) -> np.ndarray:
        """Next ``count`` uint64 words, shape ``(lanes, count)``."""
        if self._buffer.shape[1] - self._pos < count:
            self._refill(count)
        out = self._buffer[:, self._pos : self._pos + count]
        self._pos += count
        return out

    def _shape(self, words: np.ndarray, size):
        if size is None:
            words = words[:, 0]
        return words if self.batched else words[0]

    def _unit(self, size) -> np.ndarray:
        count = 1 if size is None else int(size)
        return self._shape((self.raw(count) >> _S11).astype(np.float64) * _TWO_M53, size)

    def uniform(self, a: float = 0.0, b: float = 1.0, size=None):
        if not a < b:
            raise ValueError(f"uniform range requires a < b, got ({a}, {b})")
        u = self._unit(size)
        return a + (b - a) * u

    def normal(self, size=None):
        count = 1 if size is None else int(size)
        w = (self.raw(count) >> _S11).astype(np.float64)
        return self._shape(ndtri((w + 0.5) * _TWO_M53), size)

    def exponential(self, mean: float = 1.0, size=None):
        if not mean > 0:
            raise ValueError(f"exponential mean must be positive, got {mean}")
        return -mean * np.log1p(-self._unit(size))


def make_stream(seed: int, stream_id=0) -> RandomStream:
    """Fresh stream at counter zero; ``stream_id`` may be an array of ids."""
    return RandomStream(seed, stream_id)


def trial_streams(seed: int, trials: int, offset: int = 0) -> RandomStream:
    """Lockstep bundle with the convention stream_id = trial index."""
    return RandomStream(seed, np.arange(offset, offset + trials, dtype=np.uint64))


def draw_uniform(s: RandomStream, a: float, b: float):
    return s.uniform(a, b)


def draw_std_normal_vector(s: RandomStream, d: int):
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return s.normal(d)


def draw_exponential(s: RandomStream, mean: float):
    return s.exponential(mean)
