"""Deterministic, label-addressed uniform random streams.

Every consumer of randomness in this package addresses its draws by a
structured label instead of by position in a shared sequence.  Deriving
the same (root seed, label) pair therefore yields the identical stream
of uniforms in any process, in any derivation order, which is what makes
whole simulations replay-invariant: fixing the algorithm-side seed pins
every algorithm-side draw no matter how the environment realizations
branch the control flow.

The generator is counter-mode integer mixing (the splitmix64 finalizer).
A stream key is derived by absorbing the label words one at a time, so
key derivation is a pure function of (seed, label); stream values are a
pure function of (key, counter).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RandomSource",
    "StreamLabel",
    "UniformStream",
    "first_uniforms",
    "sample_categorical",
    "validate_strategy",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_M1 = 0xBF58476D1CE4E5B9
_MIX_M2 = 0x94D049BB133111EB
_DOMAIN = 0xD6E8FEB86659FD93
_NONE_WORD = _MASK64
_TWO53 = float(1 << 53)

_U64 = np.uint64


def _mix_int(z: int) -> int:
    """splitmix64 finalizer on python ints (exact mod-2^64 arithmetic)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_M1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_M2) & _MASK64
    return z ^ (z >> 31)


def _absorb_int(state: int, word: int) -> int:
    return _mix_int(((state + _GOLDEN) & _MASK64) ^ _mix_int(word ^ _DOMAIN))


def _mix_u64(z: np.ndarray) -> np.ndarray:
    """Vectorized twin of _mix_int; operates on uint64 ndarrays."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(_MIX_M1)
        z = (z ^ (z >> _U64(27))) * _U64(_MIX_M2)
        return z ^ (z >> _U64(31))


def _absorb_u64(state: np.ndarray, word: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        shifted = (state + _U64(_GOLDEN)) ^ _mix_u64(word ^ _U64(_DOMAIN))
    return _mix_u64(shifted)


def _purpose_word(purpose: str) -> int:
    word = _PURPOSE_CACHE.get(purpose)
    if word is None:
        if not purpose:
            raise ValueError("stream label purpose must be a nonempty string")
        digest = hashlib.sha256(purpose.encode("utf-8")).digest()
        word = int.from_bytes(digest[:8], "big")
        _PURPOSE_CACHE[purpose] = word
    return word


_PURPOSE_CACHE: dict[str, int] = {}


def _field_word(value: int | None, name: str) -> int:
    if value is None:
        return _NONE_WORD
    value = int(value)
    if value < 0 or value >= (1 << 63):
        raise ValueError(f"stream label field {name!r} out of range: {value}")
    return value


@dataclass(frozen=True)
class StreamLabel:
    """Structured key naming one substream.

    Fields that do not apply are left as None; a fully specified label is
    one whose applicable fields are all set (wildcards are not a concept
    here, None is a concrete part of the key).
    """

    purpose: str
    epoch: int | None = None
    arm: int | None = None
    cons: int | None = None
    rnd: int | None = None

    def words(self) -> tuple[int, int, int, int, int]:
        return (
            _purpose_word(self.purpose),
            _field_word(self.epoch, "epoch"),
            _field_word(self.arm, "arm"),
            _field_word(self.cons, "cons"),
            _field_word(self.rnd, "rnd"),
        )


class UniformStream:
    """Stateful reader over one labeled stream of uniforms in [0, 1).

    Value-like: instances are cheap, independent, and never share state.
    The n-th value depends only on (key, n), so readers at the same key
    always observe the same sequence.
    """

    __slots__ = ("_key", "_count")

    def __init__(self, key: int, count: int = 0):
        self._key = key & _MASK64
        self._count = count

    def _raw(self, index: int) -> int:
        return _mix_int((self._key + (index + 1) * _GOLDEN) & _MASK64)

    def next_raw64(self) -> int:
        """Next raw 64-bit word (used for deriving child seeds)."""
        value = self._raw(self._count)
        self._count += 1
        return value

    def next_uniform(self) -> float:
        return (self.next_raw64() >> 11) / _TWO53

    def next_block(self, n: int) -> np.ndarray:
        """Next n uniforms as a float64 array."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        raw = _mix_u64(np.asarray(self._key, dtype=np.uint64) + idx * _U64(_GOLDEN))
        self._count += n
        return (raw >> _U64(11)).astype(np.float64) / _TWO53

    def copy(self) -> "UniformStream":
        return UniformStream(self._key, self._count)


@dataclass(frozen=True)
class RandomSource:
    """Root of a family of labeled substreams.

    Algorithm randomness and environment randomness use separate root
    seeds so paired-replicability trials can fix one while redrawing the
    other.
    """

    root_seed: int

    def __post_init__(self) -> None:
        seed = self.root_seed
        if not isinstance(seed, int) or seed < 0 or seed > _MASK64:
            raise ValueError("root_seed must be an unsigned 64-bit integer")

    def _root_state(self) -> int:
        return _mix_int(self.root_seed ^ _DOMAIN)

    def derive_stream(self, label: StreamLabel) -> UniformStream:
        """Return the stream addressed by ``label``.

        Pure in (root_seed, label): repeated derivations are independent
        readers of the same underlying sequence.
        """
        state = self._root_state()
        for word in label.words():
            state = _absorb_int(state, word)
        return UniformStream(state)

    def uniform(self, label: StreamLabel) -> float:
        """First uniform of the labeled stream (one-shot draws)."""
        return self.derive_stream(label).next_uniform()


def first_uniforms(
    source: RandomSource,
    purpose: str,
    *,
    epoch: int | np.ndarray | None = None,
    arm: int | np.ndarray | None = None,
    cons: int | np.ndarray | None = None,
    rnd: int | np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized first-uniform over a grid of labels.

    Array-valued fields broadcast against each other; the result holds,
    for every label in the broadcast, exactly the value that
    ``source.derive_stream(label).next_uniform()`` would return.
    """
    state = np.asarray(source._root_state(), dtype=np.uint64)
    fields = [
        (purpose if isinstance(purpose, str) else None, "purpose"),
        (epoch, "epoch"),
        (arm, "arm"),
        (cons, "cons"),
        (rnd, "rnd"),
    ]
    state = _absorb_u64(state, np.asarray(_purpose_word(purpose), dtype=np.uint64))
    for value, name in fields[1:]:
        if value is None:
            word = np.asarray(_NONE_WORD, dtype=np.uint64)
        elif isinstance(value, (int, np.integer)):
            word = np.asarray(_field_word(int(value), name), dtype=np.uint64)
        else:
            arr = np.asarray(value)
            if arr.size and (arr.min() < 0 or arr.max() >= (1 << 63)):
                raise ValueError(f"stream label field {name!r} out of range")
            word = arr.astype(np.uint64)
        state = _absorb_u64(state, word)
    raw = _mix_u64(state + _U64(_GOLDEN))
    return (raw >> _U64(11)).astype(np.float64) / _TWO53


def validate_strategy(x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Check that x is a point of the probability simplex (within tol)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("strategy must be a nonempty 1-d vector")
    if np.any(x < 0.0):
        raise ValueError("strategy has negative entries")
    total = float(np.cumsum(x)[-1])
    if abs(total - 1.0) > tol:
        raise ValueError(f"strategy entries sum to {total!r}, not 1")
    return x


def index_from_cdf(cdf, u: float) -> int:
    """Inverse-CDF lookup; boundary ties resolve to the lower arm index.

    cdf holds cumulative sums in ascending arm order.  If rounding left
    the final cumulative sum short of 1 and u lands in the gap, the draw
    goes to the last arm carrying positive mass.
    """
    k = len(cdf)
    a = int(np.searchsorted(np.asarray(cdf), u, side="left"))
    if a >= k:
        a = k - 1
        while a > 0 and cdf[a] == cdf[a - 1]:
            a -= 1
    return a


def sample_categorical(stream: UniformStream, x: np.ndarray) -> int:
    """Sample an arm index from strategy x with one uniform draw.

    The cumulative sums are accumulated in fixed ascending arm order and
    the draw is mapped through the inverse CDF, so equal (stream, x)
    inputs always select the same arm.
    """
    x = validate_strategy(x)
    cdf = np.cumsum(x)
    return index_from_cdf(cdf, stream.next_uniform())
