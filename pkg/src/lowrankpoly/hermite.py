"""Normalized probabilist's Hermite oscillators and their r-variate tensor products.

The oscillator ``phi_l(z) = He_l(z) / sqrt(l!)`` is orthonormal under the
standard Gaussian measure. An r-variate basis function ``phi_I`` is indexed by a
multiset ``I`` of variable indices; variable ``i`` appearing ``a_i`` times
contributes the factor ``phi_{a_i}(z_i)``.

Coefficient vectors are dense over the canonical (graded, then lexicographic)
ordering of multisets. That ordering is part of the serialization format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "MultiIndex",
    "CoefficientVector",
    "HermiteBasis",
    "basis",
    "oscillator_eval",
    "oscillator_table",
    "multi_index_space",
    "phi_eval",
    "poly_eval",
    "poly_gradient",
    "linearization_coeff",
    "hermite_variance",
]


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Sorted multiset of variable indices; the empty multiset is the constant term."""

    entries: tuple[int, ...] = ()

    def __post_init__(self):
        entries = tuple(sorted(int(e) for e in self.entries))
        if any(e < 0 for e in entries):
            raise ValueError(f"negative variable index in {entries}")
        object.__setattr__(self, "entries", entries)

    @property
    def degree(self) -> int:
        return len(self.entries)

    def exponents(self, r: int) -> np.ndarray:
        """Multiplicity of each variable in ``range(r)``."""
        if self.entries and self.entries[-1] >= r:
            raise ValueError(f"multi-index {self.entries} does not fit r={r}")
        return np.bincount(np.asarray(self.entries, dtype=np.intp), minlength=r)

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return "MultiIndex(" + ",".join(map(str, self.entries)) + ")"


def multi_index_space(r: int, d: int) -> list[MultiIndex]:
    """All multisets of size <= d over range(r), graded then lexicographic."""
    if r < 1 or d < 0:
        raise ValueError(f"need r >= 1 and d >= 0, got r={r}, d={d}")
    out = []
    for k in range(d + 1):
        out.extend(MultiIndex(c) for c in combinations_with_replacement(range(r), k))
    return out


class HermiteBasis:
    """Cached enumeration and derivative operators for the degree-<=d basis in r variables.

    ``derivative[j]`` is an ``(M, M)`` matrix mapping a coefficient vector of
    ``p`` to the coefficient vector of ``dp/dz_j``. Each row has at most one
    nonzero entry, so dense storage is cheap at the sizes used here.
    """

    def __init__(self, r: int, d: int):
        self.r = r
        self.d = d
        self.indices = multi_index_space(r, d)
        self.size = len(self.indices)
        self.position = {I: k for k, I in enumerate(self.indices)}
        self.exponents = np.array([I.exponents(r) for I in self.indices], dtype=np.intp).reshape(
            self.size, r
        )
        self.degrees = self.exponents.sum(axis=1)

        # d/dz_j phi_a(z_j) = sqrt(a) phi_{a-1}(z_j)
        deriv = np.zeros((r, self.size, self.size))
        for src, I in enumerate(self.indices):
            for j in set(I.entries):
                lowered = list(I.entries)
                lowered.remove(j)
                dst = self.position[MultiIndex(tuple(lowered))]
                deriv[j, dst, src] = math.sqrt(self.exponents[src, j])
        deriv.setflags(write=False)
        self.derivative = deriv
        self.exponents.setflags(write=False)

    def features(self, Z: np.ndarray) -> np.ndarray:
        """Evaluate every basis function at each row of ``Z`` (shape ``(N, r)``) -> ``(N, M)``."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != self.r:
            raise ValueError(f"expected points of shape (N, {self.r}), got {Z.shape}")
        table = oscillator_table(self.d, Z)  # (N, r, d+1)
        out = np.ones((Z.shape[0], self.size))
        for j in range(self.r):
            out *= table[:, j, self.exponents[:, j]]
        return out

    def gradient_coefficients(self, c: np.ndarray) -> np.ndarray:
        """Coefficients of each partial derivative, shape ``(r, M)``."""
        return self.derivative @ c

    def __repr__(self) -> str:
        return f"HermiteBasis(r={self.r}, d={self.d}, M={self.size})"


@lru_cache(maxsize=None)
def basis(r: int, d: int) -> HermiteBasis:
    return HermiteBasis(r, d)


@dataclass(frozen=True)
class CoefficientVector:
    """Dense Hermite coefficients of an r-variate polynomial of degree <= d."""

    r: int
    d: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        expected = math.comb(self.r + self.d, self.d)
        if values.shape[0] != expected:
            raise ValueError(
                f"coefficient vector for r={self.r}, d={self.d} needs {expected} entries, "
                f"got {values.shape[0]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, r: int, d: int) -> "CoefficientVector":
        return cls(r, d, np.zeros(math.comb(r + d, d)))

    @classmethod
    def from_terms(cls, r: int, d: int, terms: dict) -> "CoefficientVector":
        """Build from ``{multiset: coefficient}``; keys may be tuples or MultiIndex."""
        b = basis(r, d)
        values = np.zeros(b.size)
        for key, val in terms.items():
            key = key if isinstance(key, MultiIndex) else MultiIndex(tuple(key))
            values[b.position[key]] = val
        return cls(r, d, values)

    @property
    def basis(self) -> HermiteBasis:
        return basis(self.r, self.d)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, key) -> float:
        key = key if isinstance(key, MultiIndex) else MultiIndex(tuple(key))
        return float(self.values[self.basis.position[key]])

    def with_values(self, values) -> "CoefficientVector":
        return CoefficientVector(self.r, self.d, values)

    def to_dict(self) -> dict:
        return {"r": self.r, "d": self.d, "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, obj: dict) -> "CoefficientVector":
        return cls(int(obj["r"]), int(obj["d"]), np.asarray(obj["values"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CoefficientVector":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, CoefficientVector):
            return NotImplemented
        return self.r == other.r and self.d == other.d and np.array_equal(self.values, other.values)

    __hash__ = None


def oscillator_table(d: int, z) -> np.ndarray:
    """``phi_0 .. phi_d`` at every entry of ``z``; result has a trailing axis of length d+1.

    Uses ``phi_{k+1} = (z phi_k - sqrt(k) phi_{k-1}) / sqrt(k+1)``.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape + (d + 1,))
    out[..., 0] = 1.0
    if d >= 1:
        out[..., 1] = z
    for k in range(1, d):
        out[..., k + 1] = (z * out[..., k] - math.sqrt(k) * out[..., k - 1]) / math.sqrt(k + 1)
    return out


def oscillator_eval(ell: int, z: float) -> float:
    if ell < 0:
        raise ValueError("oscillator degree must be non-negative")
    return float(oscillator_table(ell, z)[..., ell])


def _as_point(z, r: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != r:
        raise ValueError(f"point has length {z.shape[0]}, expected {r}")
    return z


def phi_eval(I: MultiIndex, z) -> float:
    z = np.asarray(z, dtype=float).reshape(-1)
    a = I.exponents(z.shape[0])
    table = oscillator_table(I.degree, z)
    return float(np.prod(table[np.arange(z.shape[0]), a]))


def poly_eval(c: CoefficientVector, z) -> float:
    z = _as_point(z, c.r)
    return float(c.basis.features(z[None, :])[0] @ c.values)


def poly_gradient(c: CoefficientVector, z) -> np.ndarray:
    z = _as_point(z, c.r)
    b = c.basis
    return b.features(z[None, :])[0] @ b.gradient_coefficients(c.values).T


def linearization_coeff(a: int, b: int, cc: int) -> float:
    """``E[phi_a(g) phi_b(g) phi_cc(g)]`` for a standard Gaussian ``g``."""
    if min(a, b, cc) < 0:
        raise ValueError("degrees must be non-negative")
    s = a + b + cc
    if s % 2 or a + b < cc or a + cc < b or b + cc < a:
        return 0.0
    # lgamma keeps large degrees finite
    log_num = 0.5 * (math.lgamma(a + 1) + math.lgamma(b + 1) + math.lgamma(cc + 1))
    log_den = (
        math.lgamma((a + b - cc) // 2 + 1)
        + math.lgamma((a - b + cc) // 2 + 1)
        + math.lgamma((-a + b + cc) // 2 + 1)
    )
    return math.exp(log_num - log_den)


def hermite_variance(c: CoefficientVector) -> float:
    """Variance of ``p(g)`` for ``g ~ N(0, I_r)``: the squared mass off the constant term."""
    return float(np.sum(c.values[1:] ** 2))
