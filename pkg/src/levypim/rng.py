"""Counter-based random number streams.

Every source of randomness in this package is a Philox4x64 stream addressed by
``(master_seed, stream_id)``.  Equal addresses reproduce the same word sequence
bit for bit; distinct ``stream_id`` values give statistically independent
streams with no overlap, because the pair is the Philox key.  This is what
makes ensembles reproducible regardless of how paths are distributed over
workers: every path owns its streams by construction, not by execution order.

Stream addressing convention
----------------------------
``stream_id`` packs a role tag and a path index::

    stream_id = (path_index << 3) | role

Roles: 0 = slow noise, 1 = fast noise (direct solver), 2 = micro-solver noise,
3 = auxiliary estimators, 4 = diagnostics.  A stream is consumed sequentially;
a batch of ``n`` stable increments consumes ``2*n*d`` words (``d`` = dimension)
laid out as ``n*d`` angle words followed by ``n*d`` exponential words.

Uniform conversion keeps values strictly inside (0, 1)::

    u = ((word >> 12) + 0.5) * 2**-52

so downstream ``log(u)`` and ``tan(pi*(u - 1/2))`` are always finite.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Philox

from .errors import ParameterError

ROLE_SLOW = 0
ROLE_FAST = 1
ROLE_MICRO = 2
ROLE_AUX = 3
ROLE_DIAG = 4

_ROLE_MAX = 7
_PATH_MAX = (1 << 61) - 1

_U64 = np.uint64
_UNIFORM_SCALE = 2.0 ** -52
_UNIFORM_SHIFT = _U64(12)


def pack_stream_id(role: int, path_index: int = 0) -> int:
    """Encode (role, path) into a 64-bit stream id."""
    if not 0 <= role <= _ROLE_MAX:
        raise ParameterError(f"role must be in [0, {_ROLE_MAX}], got {role}")
    if not 0 <= path_index <= _PATH_MAX:
        raise ParameterError(f"path_index out of range: {path_index}")
    return (path_index << 3) | role


def words_to_uniforms(words: np.ndarray) -> np.ndarray:
    """Map raw 64-bit words to float64 uniforms strictly inside (0, 1)."""
    u = (words >> _UNIFORM_SHIFT).astype(np.float64)
    u += 0.5
    u *= _UNIFORM_SCALE
    return u


def words_to_uniforms_into(words: np.ndarray, scratch: np.ndarray,
                           out: np.ndarray) -> np.ndarray:
    """Allocation-free variant of :func:`words_to_uniforms`.

    ``scratch`` must be a uint64 buffer and ``out`` a float64 buffer, both of
    ``words``'s shape.  Produces bit-identical values to the allocating
    version (same shift, same cast, same add/multiply sequence).
    """
    np.right_shift(words, _UNIFORM_SHIFT, out=scratch)
    np.copyto(out, scratch, casting="unsafe")
    out += 0.5
    out *= _UNIFORM_SCALE
    return out


class RngStream:
    """One addressable random stream.

    Value semantics: two streams constructed with the same
    ``(master_seed, stream_id)`` yield identical word sequences.  Instances are
    stateful (they remember how many words have been consumed) and are not
    shared between workers; each worker reconstructs the streams it owns.
    """

    __slots__ = ("master_seed", "stream_id", "_bitgen")

    def __init__(self, master_seed: int, stream_id: int = 0):
        if not 0 <= master_seed < 2 ** 64:
            raise ParameterError(f"master_seed must fit in 64 bits, got {master_seed}")
        if not 0 <= stream_id < 2 ** 64:
            raise ParameterError(f"stream_id must fit in 64 bits, got {stream_id}")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self._bitgen = Philox(key=np.array([master_seed, stream_id], dtype=_U64))

    @classmethod
    def for_path(cls, master_seed: int, role: int, path_index: int = 0) -> "RngStream":
        return cls(master_seed, pack_stream_id(role, path_index))

    def substream(self, role: int, path_index: int = 0) -> "RngStream":
        """Fresh stream under the same master seed; does not consume this one."""
        return RngStream.for_path(self.master_seed, role, path_index)

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words."""
        if n < 0:
            raise ParameterError(f"word count must be nonnegative, got {n}")
        if n == 0:
            return np.empty(0, dtype=_U64)
        out = self._bitgen.random_raw(n)
        return np.atleast_1d(np.asarray(out, dtype=_U64))

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms in the open interval (0, 1)."""
        return words_to_uniforms(self.raw(n))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"
