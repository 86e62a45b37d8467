"""Orthonormal frames and the distances between the subspaces they span."""
from __future__ import annotations

import json

import numpy as np

__all__ = [
    "Frame",
    "PrincipalAngles",
    "orthonormality_defect",
    "random_frame",
    "principal_angles",
    "procrustes_distance",
    "chordal_distance",
    "align",
    "projection_mass",
]

DEFECT_TOL = 1e-9
REPAIR_LIMIT = 1e-6


def orthonormality_defect(columns: np.ndarray) -> float:
    """Frobenius norm of ``V^T V - I``."""
    r = columns.shape[1]
    return float(np.linalg.norm(columns.T @ columns - np.eye(r)))


def _qr_orthonormalize(A: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


class Frame:
    """An ``n x r`` matrix with orthonormal columns.

    Small defects (up to 1e-6) are repaired by QR on construction; anything
    larger is rejected since it points at a bug upstream rather than rounding.
    """

    __slots__ = ("columns",)

    def __init__(self, columns, *, check: bool = True):
        cols = np.array(columns, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.ndim != 2:
            raise ValueError(f"frame must be a 2-d array, got shape {cols.shape}")
        n, r = cols.shape
        if r < 1 or r > n:
            raise ValueError(f"need 1 <= r <= n, got n={n}, r={r}")
        if check:
            defect = orthonormality_defect(cols)
            if defect > REPAIR_LIMIT or not np.isfinite(defect):
                raise ValueError(f"columns are not orthonormal (defect {defect:.3g})")
            if defect > DEFECT_TOL:
                cols = _qr_orthonormalize(cols)
        cols.setflags(write=False)
        self.columns = cols

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def r(self) -> int:
        return self.columns.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.columns.shape

    def defect(self) -> float:
        return orthonormality_defect(self.columns)

    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.T

    def project_out(self, x: np.ndarray) -> np.ndarray:
        """Component of ``x`` (a vector or the columns of a matrix) orthogonal to the span."""
        V = self.columns
        x = np.asarray(x, dtype=float)
        return x - V @ (V.T @ x)

    def rotate(self, Q: np.ndarray) -> "Frame":
        return Frame(self.columns @ Q)

    def __array__(self, dtype=None, copy=None):
        return self.columns if dtype is None else self.columns.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return np.array_equal(self.columns, other.columns)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Frame(n={self.n}, r={self.r})"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "columns": [[float(v) for v in col] for col in self.columns.T],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Frame":
        cols = np.asarray(obj["columns"], dtype=float).T
        if cols.shape != (int(obj["n"]), int(obj["r"])):
            raise ValueError(f"frame columns have shape {cols.shape}, header says ({obj['n']}, {obj['r']})")
        return cls(cols)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Frame":
        return cls.from_dict(json.loads(text))


class PrincipalAngles(np.ndarray):
    """Non-decreasing angles in ``[0, pi/2]``; a plain ndarray with a validating constructor."""

    def __new__(cls, angles):
        arr = np.asarray(angles, dtype=float).reshape(-1)
        if np.any(np.diff(arr) < 0) or np.any(arr < 0) or np.any(arr > np.pi / 2 + 1e-15):
            raise ValueError(f"invalid principal angles {arr}")
        return arr.view(cls)


def random_frame(n: int, r: int, seed=None) -> Frame:
    """Haar-random frame from QR of a Gaussian matrix."""
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got n={n}, r={r}")
    rng = np.random.default_rng(seed)
    return Frame(_qr_orthonormalize(rng.standard_normal((n, r))))


def _check_pair(V: Frame, W: Frame):
    if V.shape != W.shape:
        raise ValueError(f"frame shapes differ: {V.shape} vs {W.shape}")


def _angles(V: Frame, W: Frame) -> np.ndarray:
    """Principal angles, ascending.

    Cosines come from ``svd(V^T W)`` and sines from ``svd(W - V V^T W)``; each
    angle is read from whichever is better conditioned (sine below pi/4).
    """
    _check_pair(V, W)
    cos = np.clip(np.linalg.svd(V.columns.T @ W.columns, compute_uv=False), 0.0, 1.0)
    sin = np.clip(np.linalg.svd(V.project_out(W.columns), compute_uv=False)[::-1], 0.0, 1.0)
    sin = sin[: V.r] if sin.shape[0] >= V.r else np.concatenate([np.zeros(V.r - sin.shape[0]), sin])
    theta = np.where(sin < np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))
    return np.minimum(np.maximum.accumulate(theta), np.pi / 2)


def principal_angles(V: Frame, W: Frame) -> PrincipalAngles:
    return PrincipalAngles(_angles(V, W))


def procrustes_distance(V: Frame, W: Frame) -> float:
    """``min_O ||V - W O||_F`` over orthogonal ``O``, i.e. ``2 (sum sin^2(theta_i/2))^(1/2)``."""
    half = np.sin(_angles(V, W) / 2.0)
    return float(2.0 * np.sqrt(np.sum(half**2)))


def chordal_distance(V: Frame, W: Frame) -> float:
    """``(r - ||V^T W||_F^2)^(1/2)``, evaluated as ``||(I - V V^T) W||_F`` to keep precision near 0."""
    _check_pair(V, W)
    return float(np.linalg.norm(V.project_out(W.columns)))


def align(V: Frame, W: Frame) -> np.ndarray:
    """Orthogonal ``O`` minimizing ``||V - W O||_F``."""
    _check_pair(V, W)
    U, _, Xt = np.linalg.svd(W.columns.T @ V.columns)
    return U @ Xt


def projection_mass(V: Frame, u) -> float:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != V.n:
        raise ValueError(f"vector has length {u.shape[0]}, frame has n={V.n}")
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("projection_mass expects a unit vector")
    return float(np.linalg.norm(V.columns.T @ u))
