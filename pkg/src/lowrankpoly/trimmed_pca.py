"""Warm start: recover the hidden directions one at a time from a trimmed second-moment matrix.

Round ``l`` keeps samples with ``|y| > tau`` whose projections on the
directions found so far stay in ``[-1, 1]``, averages ``x x^T - I`` over
them, projects the result off the found directions, and takes the top
eigenvector.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ConfigError, NumericalGuardError
from .model import SampleBatch
from .subspace import Frame

log = logging.getLogger(__name__)

__all__ = [
    "TrimConfig",
    "calibrate_threshold",
    "empirical_trimmed_matrix",
    "top_eigenpair",
    "trimmed_pca",
]

QUANTILE_GRID = (0.75, 0.8, 0.85, 0.9, 0.95)


@dataclass
class TrimConfig:
    """Warm-start settings.

    ``tau=None`` calibrates the threshold as the ``quantile`` of ``|y|`` on the
    first round's samples, or by grid search over ``QUANTILE_GRID`` when
    ``tau_search`` is set.
    """

    samples_per_round: int = 20000
    tau: float | None = None
    quantile: float = 0.9
    tau_search: bool = False
    eig_method: str = "eigh"
    eig_tol: float = 1e-10
    eig_max_iter: int = 10000
    eig_floor: float = 1e-6

    def validate(self, n: int) -> None:
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.tau is None and not 0.5 < self.quantile < 1:
            raise ConfigError("quantile must lie in (0.5, 1)")
        if self.samples_per_round < n:
            raise ConfigError(f"samples_per_round={self.samples_per_round} is below n={n}")
        if self.eig_method not in ("eigh", "power"):
            raise ConfigError(f"unknown eig_method {self.eig_method!r}")


def calibrate_threshold(batch: SampleBatch, quantile: float) -> float:
    if len(batch) == 0:
        raise ValueError("empty batch")
    if not 0.5 < quantile < 1:
        raise ValueError("quantile must lie in (0.5, 1)")
    return float(np.quantile(np.abs(batch.ys), quantile))


def _stack(partial, n: int) -> np.ndarray:
    if partial is None:
        return np.zeros((n, 0))
    if isinstance(partial, Frame):
        return partial.columns
    P = np.asarray(partial, dtype=float)
    if P.size == 0:
        return np.zeros((n, 0))
    if P.ndim == 1:
        P = P[:, None]
    elif P.shape[0] != n:
        # a list of vectors arrives as rows
        P = P.T
    return P


def empirical_trimmed_matrix(batch: SampleBatch, partial, tau: float) -> np.ndarray:
    """Trimmed, projected second-moment estimate over ``batch``.

    ``partial`` holds the unit vectors found so far (an ``n x l`` array, a list
    of vectors, or a Frame); they must be orthonormal.
    """
    xs = batch.xs
    N, n = xs.shape
    V = _stack(partial, n)
    ell = V.shape[1]
    if ell >= n:
        raise ValueError("need fewer found directions than the ambient dimension")
    if ell and np.linalg.norm(V.T @ V - np.eye(ell)) > 1e-8:
        raise ValueError("found directions are not orthonormal")
    keep = np.abs(batch.ys) > tau
    if ell:
        keep &= np.all(np.abs(xs @ V) <= 1.0, axis=1)
    X = xs[keep]
    S = X.T @ X
    S[np.diag_indices(n)] -= X.shape[0]
    S /= N
    if ell:
        SV = S @ V
        S = S - SV @ V.T - V @ SV.T + V @ (V.T @ SV) @ V.T
    return 0.5 * (S + S.T)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def top_eigenpair(A, tol: float = 1e-10, max_iter: int = 10000, method: str = "eigh"):
    """Largest (signed) eigenvalue of a symmetric matrix and its unit eigenvector.

    The eigenvector's largest-magnitude entry is made positive. When the top
    eigenvalue repeats, the eigenvector is the normalized projection of the
    coordinate axis with the largest mass in that eigenspace. ``method="power"``
    runs power iteration on ``A + s I`` with ``s = ||A||_F`` so the target
    eigenvalue dominates.
    """
    A = np.asarray(A, dtype=float)
    scale = max(np.linalg.norm(A), 1.0)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.linalg.norm(A - A.T) > 1e-9 * scale:
        raise ValueError("top_eigenpair needs a symmetric matrix")
    if method == "eigh":
        w, U = np.linalg.eigh(A)
        top = w[-1] - w <= max(tol, 1e-12) * scale
        if top.sum() == 1:
            return float(w[-1]), _fix_sign(U[:, -1])
        # repeated top eigenvalue: take the coordinate axis closest to the eigenspace
        E = U[:, top]
        k = int(np.argmax(np.sum(E**2, axis=1)))
        v = E @ E[k]
        return float(w[-1]), _fix_sign(v / np.linalg.norm(v))
    if method != "power":
        raise ValueError(f"unknown method {method!r}")

    n = A.shape[0]
    shift = np.linalg.norm(A)
    B = A + shift * np.eye(n)
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # A = -shift I only when A = 0; any vector is an eigenvector
            return 0.0, _fix_sign(v)
        w /= nw
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol:
            v = w
            break
        v = w
    else:
        raise NumericalGuardError(f"power iteration did not converge in {max_iter} steps")
    return float(v @ A @ v), _fix_sign(v)


def _round0_tau(batch: SampleBatch, config: TrimConfig) -> float:
    if config.tau is not None:
        return config.tau
    if not config.tau_search:
        return calibrate_threshold(batch, config.quantile)
    best = None
    for q in QUANTILE_GRID:
        tau = calibrate_threshold(batch, q)
        lam, _ = top_eigenpair(empirical_trimmed_matrix(batch, None, tau))
        if best is None or lam > best[0]:
            best = (lam, tau)
    return best[1]


def trimmed_pca(oracle, r: int, config: TrimConfig | None = None, return_info: bool = False):
    """Recover an ``r``-frame near the hidden subspace, drawing fresh samples each round.

    ``oracle.draw(N)`` must return a :class:`SampleBatch`. With ``return_info``
    the result is ``(frame, info)`` where ``info`` records ``tau`` and the
    per-round top eigenvalues.
    """
    config = config or TrimConfig()
    n = oracle.n
    if not 1 <= r <= n:
        raise ConfigError(f"need 1 <= r <= n, got r={r}, n={n}")
    config.validate(n)

    found = np.zeros((n, 0))
    tau = None
    eigenvalues = []
    for ell in range(r):
        batch = oracle.draw(config.samples_per_round)
        if tau is None:
            tau = _round0_tau(batch, config)
        M = empirical_trimmed_matrix(batch, found, tau)
        lam, v = top_eigenpair(M, config.eig_tol, config.eig_max_iter, config.eig_method)
        eigenvalues.append(lam)
        log.debug("trimmed PCA round %d: tau=%.4g top eigenvalue=%.4g", ell, tau, lam)
        if lam < config.eig_floor:
            log.warning("round %d top eigenvalue %.3g below floor %.3g", ell, lam, config.eig_floor)
            raise CalibrationError(
                f"round {ell}: top eigenvalue {lam:.3g} below floor {config.eig_floor:.3g}; "
                "threshold is likely mis-calibrated"
            )
        # strip rounding-level overlap with earlier directions before stacking
        v = v - found @ (found.T @ v)
        found = np.column_stack([found, v / np.linalg.norm(v)])

    Q, R = np.linalg.qr(found)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    frame = Frame(Q)
    if return_info:
        return frame, {"tau": tau, "eigenvalues": eigenvalues}
    return frame
