"""Boosting a warm start: alternate coefficient refits with single-sample geodesic steps.

``realign_polynomial`` refits the Hermite coefficients for a fixed frame by
mini-batch gradient descent on the squared loss. ``subspace_descent`` holds
the coefficients fixed and moves the frame along Grassmannian geodesics whose
initial velocity is the (rank-one) projected gradient of a single-sample loss.
``geo_sgd`` alternates the two and finishes with one more refit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError, OrthonormalityError
from .hermite import CoefficientVector, basis
from .model import Parameters, evaluate_rows, project_rows
from .subspace import Frame

log = logging.getLogger(__name__)

__all__ = [
    "BoostConfig",
    "GeodesicStep",
    "compute_geodesic_step",
    "apply_geodesic",
    "realign_polynomial",
    "subspace_descent",
    "geo_sgd",
]

_UNIT_EPS = 1e-14


@dataclass
class BoostConfig:
    """Step sizes and iteration counts for the boosting phase.

    Fields left as ``None`` resolve from the problem size (see :meth:`resolve`):
    ``T_subspace = 4n``, ``eta_vec = alpha_hint / (16 n T_subspace)``,
    ``eta_coef = 0.05 / (d r^2)`` and ``T_realign = ceil(200 log(1/target_eps))``.
    """

    eta_coef: float | None = None
    eta_vec: float | None = None
    T_outer: int = 20
    T_realign: int | None = None
    B_realign: int = 64
    T_subspace: int | None = None
    target_eps: float = 1e-3
    alpha_hint: float | None = None
    coef_norm_limit: float = 1e3
    defect_limit: float = 1e-6
    seed: int | None = None

    def resolve(self, n: int, r: int, d: int) -> "BoostConfig":
        T_sub = self.T_subspace if self.T_subspace is not None else 4 * n
        nu = self.alpha_hint if self.alpha_hint is not None else 0.5
        out = BoostConfig(
            eta_coef=self.eta_coef if self.eta_coef is not None else 0.05 / (d * r**2),
            eta_vec=self.eta_vec if self.eta_vec is not None else nu / (T_sub * n * 16),
            T_outer=self.T_outer,
            T_realign=(
                self.T_realign
                if self.T_realign is not None
                else math.ceil(200 * math.log(1 / self.target_eps))
            ),
            B_realign=self.B_realign,
            T_subspace=T_sub,
            target_eps=self.target_eps,
            alpha_hint=nu,
            coef_norm_limit=self.coef_norm_limit,
            defect_limit=self.defect_limit,
            seed=self.seed,
        )
        out.validate()
        return out

    def validate(self) -> None:
        for name in ("eta_coef", "target_eps"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive, got {val}")
        # a zero frame rate is allowed and freezes the frame
        if self.eta_vec is not None and not self.eta_vec >= 0:
            raise ConfigError(f"eta_vec must be non-negative, got {self.eta_vec}")
        if self.T_outer < 0:
            raise ConfigError("T_outer must be non-negative")
        for name in ("T_realign", "T_subspace"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ConfigError(f"{name} must be non-negative, got {val}")
        if self.B_realign < 1:
            raise ConfigError("B_realign must be at least 1")

    def samples_per_round(self) -> int:
        return self.B_realign * self.T_realign + self.T_subspace


@dataclass(frozen=True)
class GeodesicStep:
    h: np.ndarray
    nabla: np.ndarray
    sigma: float
    h_hat: np.ndarray | None
    nabla_hat: np.ndarray | None


def _project_out(V: np.ndarray, x: np.ndarray) -> np.ndarray:
    # two Gram-Schmidt passes keep V^T h at rounding level even when x is nearly in span(V)
    h = x - V @ (V.T @ x)
    return h - V @ (V.T @ h)


def _make_step(h: np.ndarray, nabla: np.ndarray) -> GeodesicStep:
    nh = float(np.linalg.norm(h))
    ng = float(np.linalg.norm(nabla))
    if nh > _UNIT_EPS and ng > _UNIT_EPS:
        return GeodesicStep(h, nabla, nh * ng, h / nh, nabla / ng)
    return GeodesicStep(h, nabla, nh * ng, None, None)


def compute_geodesic_step(theta: Parameters, x, y: float) -> GeodesicStep:
    """Rank-one velocity ``h nabla^T`` of the single-sample loss at ``theta``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != theta.n:
        raise ValueError(f"covariate has length {x.shape[1]}, expected {theta.n}")
    V = theta.frame.columns
    b = theta.coef.basis
    phi = b.features(project_rows(x, V))
    resid = float(evaluate_rows(phi, theta.coef.values)[0]) - float(y)
    h = 2.0 * resid * _project_out(V, x[0])
    nabla = b.gradient_coefficients(theta.coef.values) @ phi[0]
    return _make_step(h, nabla)


def _geodesic(V: np.ndarray, h_hat, nabla_hat, angle: float) -> np.ndarray:
    Vn = V @ nabla_hat
    return V + np.outer((math.cos(angle) - 1.0) * Vn - math.sin(angle) * h_hat, nabla_hat)


def apply_geodesic(V: Frame, step: GeodesicStep, eta_vec: float) -> Frame:
    """Walk ``eta_vec`` along the descent geodesic; returns ``V`` itself for a null step.

    No re-orthonormalization is applied; callers can inspect ``defect()``.
    """
    if step.h_hat is None or step.sigma == 0.0 or eta_vec == 0.0:
        return V
    return Frame(_geodesic(V.columns, step.h_hat, step.nabla_hat, step.sigma * eta_vec), check=False)


def realign_polynomial(oracle, V: Frame, d: int, config: BoostConfig) -> CoefficientVector:
    """Refit coefficients for the frame ``V`` starting from zero."""
    cfg = config.resolve(V.n, V.r, d)
    b = basis(V.r, d)
    c = np.zeros(b.size)
    Vc = V.columns
    step = 2.0 * cfg.eta_coef / cfg.B_realign
    limit = cfg.coef_norm_limit * math.sqrt(V.r)
    for t in range(cfg.T_realign):
        batch = oracle.draw(cfg.B_realign)
        Phi = b.features(project_rows(batch.xs, Vc))
        c = c - step * (Phi.T @ (evaluate_rows(Phi, c) - batch.ys))
        norm = np.linalg.norm(c)
        if not norm <= limit:
            raise DivergenceError(
                f"coefficient norm {norm:.3g} exceeded {limit:.3g} at realign step {t}; "
                f"eta_coef={cfg.eta_coef:.3g} is too large"
            )
    return CoefficientVector(V.r, d, c)


def subspace_descent(oracle, V0: Frame, c: CoefficientVector, config: BoostConfig) -> Frame:
    """``T_subspace`` single-sample geodesic steps with fixed coefficients."""
    cfg = config.resolve(V0.n, V0.r, c.d)
    b = c.basis
    cv = c.values
    G = b.gradient_coefficients(cv)
    eta = cfg.eta_vec
    eye = np.eye(V0.r)
    V = V0.columns
    moved = False
    for t in range(cfg.T_subspace):
        batch = oracle.draw(1)
        xs = batch.xs
        phi = b.features(project_rows(xs, V))
        resid = float(evaluate_rows(phi, cv)[0]) - float(batch.ys[0])
        if resid == 0.0 or eta == 0.0:
            continue
        h = (2.0 * resid) * _project_out(V, xs[0])
        nabla = G @ phi[0]
        nh = math.sqrt(h @ h)
        ng = math.sqrt(nabla @ nabla)
        if nh <= _UNIT_EPS or ng <= _UNIT_EPS:
            continue
        V = _geodesic(V, h / nh, nabla / ng, nh * ng * eta)
        moved = True
        defect = np.linalg.norm(V.T @ V - eye)
        if not defect <= cfg.defect_limit:
            raise OrthonormalityError(
                f"frame defect {defect:.3g} at subspace step {t}; eta_vec={eta:.3g} is likely too large"
            )
    return Frame(V, check=False) if moved else V0


def geo_sgd(oracle, V0: Frame, d: int, config: BoostConfig, callback=None) -> Parameters:
    """Alternate refits and subspace descent for ``T_outer`` rounds, then refit once more.

    ``callback(round, params)`` fires for rounds ``1..T_outer`` with the frame
    reached after that round paired with coefficients refit on it.
    """
    cfg = config.resolve(V0.n, V0.r, d)
    V = V0
    for t in range(cfg.T_outer):
        c = realign_polynomial(oracle, V, d, cfg)
        if t > 0 and callback is not None:
            callback(t, Parameters(c, V))
        V = subspace_descent(oracle, V, c, cfg)
    c = realign_polynomial(oracle, V, d, cfg)
    if cfg.T_outer > 0 and callback is not None:
        callback(cfg.T_outer, Parameters(c, V))
    return Parameters(c, V)
