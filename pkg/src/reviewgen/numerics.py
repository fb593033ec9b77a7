"""Dense float64 vector/matrix kernel shared by every model component.

Vectors are 1-d and matrices are 2-d row-major numpy arrays, always
float64.  Random initialization goes through a splitmix64 generator so
that a given seed yields the same parameter stream on every platform;
the generator is fully specified here rather than delegated to numpy's
default bit generator.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "RngState",
    "vector",
    "matrix",
    "matvec",
    "sigmoid",
    "tanh",
    "hadamard",
    "add",
    "concat",
    "softmax",
    "init_matrix",
    "init_vector",
]


class ShapeError(ValueError):
    """Operands with incompatible shapes."""


def vector(values) -> np.ndarray:
    """Build a float64 vector from a sequence of reals."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"vector: expected rank 1, got rank {v.ndim}")
    return v


def matrix(values) -> np.ndarray:
    """Build a row-major float64 matrix from a nested sequence."""
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"matrix: expected rank 2, got rank {m.ndim}")
    return m


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product, result[i] = sum_j m[i, j] * v[j]."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(
            f"matvec: matrix is {m.shape[0]}x{m.shape[1]}, "
            f"vector has length {v.shape[0]}"
        )
    return m @ v


def sigmoid(v: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, overflow-safe for large |x|."""
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ez = np.exp(v[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def tanh(v: np.ndarray) -> np.ndarray:
    """Elementwise hyperbolic tangent."""
    return np.tanh(np.asarray(v, dtype=np.float64))


def _check_same_length(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: lengths {a.shape[0]} and {b.shape[0]} differ")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of equal-length vectors."""
    _check_same_length("hadamard", a, b)
    return a * b


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise sum of equal-length vectors."""
    _check_same_length("add", a, b)
    return a + b


def concat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Concatenation with `a` first."""
    return np.concatenate([a, b])


def softmax(v: np.ndarray) -> np.ndarray:
    """Probability vector exp(v_i - max v) / sum, stable for large inputs."""
    if len(v) == 0:
        raise ShapeError("softmax: empty vector")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


# splitmix64: state advances by a fixed odd constant, each output is a
# bijective mix of the state.  Constants are the standard ones.
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


class RngState:
    """Deterministic splitmix64 stream.

    The scalar ``next_u64`` below is the definition; the vectorized fill
    used by ``uniform`` produces the identical stream (state after n
    draws is seed + n * GOLDEN mod 2^64, each output mixes one state).
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def next_float(self) -> float:
        """Uniform draw in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, n: int, low: float, high: float) -> np.ndarray:
        """n uniform draws in [low, high], consuming n stream values."""
        with np.errstate(over="ignore"):
            ks = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
            z = np.uint64(self._state) + ks
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN) & _MASK64
        u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def next_below(self, n: int) -> int:
        """Integer in [0, n); modulo bias is irrelevant for our n."""
        return self.next_u64() % n

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order


def init_matrix(rows: int, cols: int, scale: float, rng: RngState) -> np.ndarray:
    """rows x cols matrix with entries uniform in [-scale, scale]."""
    if rows < 1 or cols < 1:
        raise ShapeError(f"init_matrix: non-positive shape {rows}x{cols}")
    if scale <= 0:
        raise ValueError(f"init_matrix: scale must be positive, got {scale}")
    return rng.uniform(rows * cols, -scale, scale).reshape(rows, cols)


def init_vector(n: int, scale: float, rng: RngState) -> np.ndarray:
    """Length-n vector with entries uniform in [-scale, scale]."""
    if n < 1:
        raise ShapeError(f"init_vector: non-positive length {n}")
    return rng.uniform(n, -scale, scale)
