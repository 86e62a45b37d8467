"""Ground-truth low-rank polynomials, the Gaussian sampling oracle, and hypothesis evaluation.

A hypothesis ``(c, V)`` predicts ``F_x = sum_I c_I phi_I(V^T x)``. Instances are
normalized so that the polynomial has mean zero and the gradient second-moment
matrix ``E[grad p grad p^T]`` has largest eigenvalue exactly one.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import ConfigError
from .hermite import CoefficientVector, basis, hermite_variance
from .subspace import Frame, random_frame

__all__ = [
    "Parameters",
    "Instance",
    "SampleBatch",
    "SampleOracle",
    "BatchOracle",
    "gradient_second_moment",
    "certify_nondegeneracy",
    "project_rows",
    "evaluate_rows",
    "make_instance",
    "random_instance",
    "sample_batch",
    "predict",
    "predict_batch",
    "grad_frame",
    "grad_coef",
    "prediction_error",
    "rotate_coefficients",
    "gauss_hermite_grid",
]


@dataclass(frozen=True)
class Parameters:
    coef: CoefficientVector
    frame: Frame

    def __post_init__(self):
        if self.coef.r != self.frame.r:
            raise ValueError(f"coefficients have r={self.coef.r}, frame has r={self.frame.r}")

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def r(self) -> int:
        return self.frame.r

    @property
    def d(self) -> int:
        return self.coef.d

    def to_dict(self) -> dict:
        return {"coef": self.coef.to_dict(), "frame": self.frame.to_dict()}

    @classmethod
    def from_dict(cls, obj: dict) -> "Parameters":
        return cls(CoefficientVector.from_dict(obj["coef"]), Frame.from_dict(obj["frame"]))


@dataclass(frozen=True)
class Instance:
    truth: Parameters
    alpha: float
    y_variance: float

    def to_dict(self) -> dict:
        out = self.truth.to_dict()
        out.update(alpha=float(self.alpha), y_variance=float(self.y_variance))
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Instance":
        return cls(Parameters.from_dict(obj), float(obj["alpha"]), float(obj["y_variance"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))

    def check(self, tol: float = 1e-8) -> None:
        """Raise ``AssertionError`` if a normalization invariant fails."""
        c = self.truth.coef
        assert c.values[0] == 0.0, "constant term must be zero"
        M = gradient_second_moment(c)
        eig = np.linalg.eigvalsh(M)
        assert eig[-1] <= 1.0 + tol, f"lambda_max(M) = {eig[-1]} > 1"
        assert eig[0] >= self.alpha * eig[-1] - tol, "non-degeneracy level not met"
        assert self.alpha / c.d - tol <= self.y_variance <= c.r + tol, "variance out of range"


@dataclass(frozen=True)
class SampleBatch:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.ndim != 2 or xs.shape[0] != ys.shape[0]:
            raise ValueError(f"inconsistent batch shapes {xs.shape} and {ys.shape}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return self.ys.shape[0]

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    def __getitem__(self, sl) -> "SampleBatch":
        if isinstance(sl, int):
            sl = slice(sl, sl + 1)
        return SampleBatch(self.xs[sl], self.ys[sl])

    def save(self, path) -> None:
        """Little-endian ``int64`` header ``(N, n)`` then ``xs`` row-major then ``ys``."""
        N, n = self.xs.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", N, n))
            fh.write(np.ascontiguousarray(self.xs, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.ys, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "SampleBatch":
        raw = Path(path).read_bytes()
        if len(raw) < 16:
            raise ConfigError(f"{path}: truncated batch header")
        N, n = struct.unpack("<qq", raw[:16])
        expected = 16 + 8 * N * (n + 1)
        if N < 0 or n < 0 or len(raw) != expected:
            raise ConfigError(f"{path}: expected {expected} bytes for N={N}, n={n}, got {len(raw)}")
        body = np.frombuffer(raw, dtype="<f8", offset=16).astype(float)
        return cls(body[: N * n].reshape(N, n), body[N * n :])


def gradient_second_moment(c: CoefficientVector) -> np.ndarray:
    """``E[grad p(g) grad p(g)^T]`` for ``g ~ N(0, I_r)``, exact via orthonormality."""
    D = c.basis.gradient_coefficients(c.values)
    return D @ D.T


def certify_nondegeneracy(c: CoefficientVector) -> float:
    """``lambda_min / lambda_max`` of the gradient second moment; 0 means degenerate."""
    if not np.any(c.values[1:]):
        raise ValueError("polynomial is constant")
    eig = np.linalg.eigvalsh(gradient_second_moment(c))
    return float(max(eig[0], 0.0) / eig[-1])


def make_instance(c_raw: CoefficientVector, V_star: Frame) -> Instance:
    if c_raw.r != V_star.r:
        raise ValueError(f"coefficients have r={c_raw.r}, frame has r={V_star.r}")
    alpha = certify_nondegeneracy(c_raw)
    if alpha <= 1e-10:
        raise ValueError("degenerate polynomial: gradient second moment is rank deficient")
    lam_max = np.linalg.eigvalsh(gradient_second_moment(c_raw))[-1]
    values = c_raw.values / np.sqrt(lam_max)
    values[0] = 0.0
    coef = c_raw.with_values(values)
    # recompute after scaling so the stored level matches the stored coefficients
    alpha = certify_nondegeneracy(coef)
    return Instance(Parameters(coef, V_star), alpha, hermite_variance(coef))


def random_instance(
    n: int, r: int, d: int, seed=None, alpha_min: float = 0.1, max_tries: int = 1000
) -> Instance:
    """Gaussian coefficients, rejection-sampled until ``alpha >= alpha_min``, on a Haar frame."""
    if not 0 < alpha_min <= 1:
        raise ValueError("alpha_min must lie in (0, 1]")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    coef_seed, frame_seed = ss.spawn(2)
    rng = np.random.default_rng(coef_seed)
    M = basis(r, d).size
    for _ in range(max_tries):
        c = CoefficientVector(r, d, rng.standard_normal(M))
        if not np.any(c.values[1:]):
            continue
        if certify_nondegeneracy(c) >= alpha_min:
            return make_instance(c, random_frame(n, r, frame_seed))
    raise ValueError(f"no instance with alpha >= {alpha_min} after {max_tries} draws")


def project_rows(xs: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``xs @ V`` reduced row by row, so each row's value does not depend on the batch size.

    BLAS kernels change summation order with the number of rows, which would
    break bitwise agreement between batched sampling and single-sample updates.
    """
    return np.stack([(xs * V[:, k]).sum(axis=1) for k in range(V.shape[1])], axis=1)


def evaluate_rows(features: np.ndarray, values: np.ndarray) -> np.ndarray:
    return (features * values).sum(axis=1)


def _features(theta: Parameters, xs: np.ndarray) -> np.ndarray:
    return theta.coef.basis.features(project_rows(xs, theta.frame.columns))


def predict_batch(theta: Parameters, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != theta.n:
        raise ValueError(f"covariates must have shape (N, {theta.n}), got {xs.shape}")
    return evaluate_rows(_features(theta, xs), theta.coef.values)


def predict(theta: Parameters, x) -> float:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(predict_batch(theta, x)[0])


def sample_batch(inst: Instance, N: int, seed=None) -> SampleBatch:
    if N < 1:
        raise ValueError("batch size must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xs = rng.standard_normal((N, inst.truth.n))
    return SampleBatch(xs, predict_batch(inst.truth, xs))


def grad_frame(theta: Parameters, x) -> np.ndarray:
    """Gradient of ``F_x`` with respect to the frame: ``x grad p(V^T x)^T``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != theta.n:
        raise ValueError(f"covariate has length {x.shape[0]}, expected {theta.n}")
    b = theta.coef.basis
    phi = b.features((x @ theta.frame.columns)[None, :])[0]
    return np.outer(x, b.gradient_coefficients(theta.coef.values) @ phi)


def grad_coef(theta: Parameters, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != theta.n:
        raise ValueError(f"covariate has length {x.shape[1]}, expected {theta.n}")
    return _features(theta, x)[0]


def prediction_error(theta: Parameters, batch: SampleBatch, y_variance: float | None = None) -> float:
    """Mean squared prediction error normalized by ``Var[y]``.

    Without an explicit ``y_variance`` the empirical variance of the batch is used.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    if y_variance is None:
        y_variance = float(np.var(batch.ys))
    resid = predict_batch(theta, batch.xs) - batch.ys
    return float(np.mean(resid**2) / y_variance)


@lru_cache(maxsize=None)
def gauss_hermite_grid(r: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite rule for ``N(0, I_r)``: points ``(K, r)`` and weights summing to 1."""
    x, w = hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    pts = np.array(list(product(x, repeat=r)))
    wts = np.prod(np.array(list(product(w, repeat=r))), axis=1)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def rotate_coefficients(c: CoefficientVector, Q: np.ndarray) -> CoefficientVector:
    """Coefficients ``c'`` with ``(c', V Q)`` and ``(c, V)`` defining the same polynomial.

    ``c'`` expands ``z -> p(Q z)``; the projection is exact with ``2d+2`` nodes per axis.
    """
    Q = np.asarray(Q, dtype=float)
    b = c.basis
    pts, wts = gauss_hermite_grid(c.r, 2 * c.d + 2)
    vals = b.features(pts @ Q.T) @ c.values
    return c.with_values(b.features(pts).T @ (wts * vals))


class SampleOracle:
    """Fresh iid samples ``(x, P(x))`` from an instance; counts every draw."""

    def __init__(self, inst: Instance, seed=None):
        self._inst = inst
        self._rng = np.random.default_rng(seed)
        self.samples_used = 0

    @property
    def n(self) -> int:
        return self._inst.truth.n

    def draw(self, N: int) -> SampleBatch:
        batch = sample_batch(self._inst, N, self._rng)
        self.samples_used += N
        return batch


class BatchOracle:
    """Serves consecutive rows of a fixed batch; raises once it runs dry."""

    def __init__(self, batch: SampleBatch):
        self._batch = batch
        self.samples_used = 0

    @property
    def n(self) -> int:
        return self._batch.n

    @property
    def remaining(self) -> int:
        return len(self._batch) - self.samples_used

    def draw(self, N: int) -> SampleBatch:
        if N > self.remaining:
            raise ConfigError(f"sample file exhausted: need {N} more rows, {self.remaining} left")
        out = self._batch[self.samples_used : self.samples_used + N]
        self.samples_used += N
        return out
