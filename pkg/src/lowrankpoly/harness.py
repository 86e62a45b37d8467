"""Experiment orchestration: instance -> warm start -> boosting, with per-round trace records."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geosgd import BoostConfig, geo_sgd
from .hermite import CoefficientVector
from .model import (
    Instance,
    Parameters,
    SampleOracle,
    make_instance,
    prediction_error,
    random_instance,
    rotate_coefficients,
    sample_batch,
)
from .subspace import Frame, align, chordal_distance, procrustes_distance, random_frame
from .trimmed_pca import TrimConfig, trimmed_pca

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "TraceRecord",
    "Trace",
    "PRESETS",
    "preset",
    "phase_retrieval_instance",
    "aligned_coef_error",
    "run_trial",
    "run_experiment",
    "write_trace_csv",
    "trace_to_csv",
]

TRACE_COLUMNS = (
    "trial",
    "phase",
    "round",
    "procrustes",
    "chordal",
    "coef_error",
    "pred_error",
    "samples_used",
    "wall_ms",
)
_PHASE_ORDER = {"warmstart": 0, "boost_round": 1}


@dataclass
class ExperimentConfig:
    n: int
    r: int
    d: int
    alpha_min: float = 0.1
    seed: int = 0
    warm: TrimConfig = field(default_factory=TrimConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)
    trials: int = 1
    output_path: str = "trace.csv"
    # "phase_retrieval" fixes the link to z^2 (rank 1, degree 2); None draws random links
    link: str | None = None
    eval_samples: int = 20000
    timing: bool = True

    def validate(self) -> None:
        if min(self.n, self.r, self.d) < 1 or self.r > self.n:
            raise ConfigError(f"need positive dimensions with r <= n, got n={self.n} r={self.r} d={self.d}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 < self.alpha_min <= 1:
            raise ConfigError("alpha_min must lie in (0, 1]")
        if self.link not in (None, "phase_retrieval"):
            raise ConfigError(f"unknown link {self.link!r}")
        if self.link == "phase_retrieval" and (self.r, self.d) != (1, 2):
            raise ConfigError("the phase_retrieval link needs r=1, d=2")
        if self.eval_samples < 1:
            raise ConfigError("eval_samples must be positive")
        self.warm.validate(self.n)
        self.boost.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            warm = _sub_config(TrimConfig, obj.pop("warm", {}))
            boost = _sub_config(BoostConfig, obj.pop("boost", {}))
            cfg = cls(warm=warm, boost=boost, **obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg


def _sub_config(klass, obj):
    if not isinstance(obj, dict):
        raise ConfigError(f"{klass.__name__} must be a JSON object")
    known = {f.name for f in dataclasses.fields(klass)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown {klass.__name__} fields: {sorted(unknown)}")
    return klass(**obj)


@dataclass(frozen=True)
class TraceRecord:
    trial: int
    phase: str
    round: int
    procrustes: float
    chordal: float
    coef_error: float
    pred_error: float
    samples_used: int
    wall_ms: int

    def sort_key(self):
        return (self.trial, _PHASE_ORDER[self.phase], self.round)


class Trace(list):
    """Trace records plus ``failures``: ``(trial, exception)`` for trials that aborted."""

    def __init__(self, records=(), failures=()):
        super().__init__(records)
        self.failures = list(failures)


def phase_retrieval_instance(n: int, seed=None) -> Instance:
    """The link ``p(z) = z^2`` on a Haar-random direction, normalized."""
    c = CoefficientVector(1, 2, [1.0, 0.0, math.sqrt(2.0)])
    return make_instance(c, random_frame(n, 1, seed))


def aligned_coef_error(params: Parameters, truth: Parameters) -> float:
    """``||c - c*'||`` where ``(c*', V* O)`` is the realization of the truth nearest ``params.frame``."""
    O = align(params.frame, truth.frame)
    rotated = rotate_coefficients(truth.coef, O)
    return float(np.linalg.norm(params.coef.values - rotated.values))


def _trial_seeds(seed: int, trial: int):
    return np.random.SeedSequence([int(seed), int(trial)]).spawn(3)


def run_trial(config: ExperimentConfig, trial: int) -> list[TraceRecord]:
    """One fully seeded trial; raises on any module error."""
    inst_seed, oracle_seed, eval_seed = _trial_seeds(config.seed, trial)
    if config.link == "phase_retrieval":
        inst = phase_retrieval_instance(config.n, inst_seed)
    else:
        inst = random_instance(config.n, config.r, config.d, inst_seed, config.alpha_min)
    oracle = SampleOracle(inst, oracle_seed)
    held_out = sample_batch(inst, config.eval_samples, eval_seed)
    truth = inst.truth
    start = time.perf_counter()
    records = []

    def record(phase: str, rnd: int, params: Parameters, coef_error: float) -> None:
        wall = int((time.perf_counter() - start) * 1000) if config.timing else 0
        records.append(
            TraceRecord(
                trial=trial,
                phase=phase,
                round=rnd,
                procrustes=procrustes_distance(params.frame, truth.frame),
                chordal=chordal_distance(params.frame, truth.frame),
                coef_error=coef_error,
                pred_error=prediction_error(params, held_out, inst.y_variance),
                samples_used=oracle.samples_used,
                wall_ms=wall,
            )
        )

    V0 = trimmed_pca(oracle, config.r, config.warm)
    record("warmstart", 0, Parameters(CoefficientVector.zeros(config.r, config.d), V0), -1.0)

    def on_round(rnd: int, params: Parameters) -> None:
        record("boost_round", rnd, params, aligned_coef_error(params, truth))

    geo_sgd(oracle, V0, config.d, config.boost, callback=on_round)
    return records


def _run_trial_safe(config: ExperimentConfig, trial: int):
    try:
        return trial, run_trial(config, trial), None
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        log.error("trial %d failed: %s", trial, exc)
        return trial, [], exc


def _workers(trials: int) -> int:
    raw = os.environ.get("LOWRANK_THREADS", "").strip()
    try:
        cap = int(raw) if raw else 0
    except ValueError:
        raise ConfigError(f"LOWRANK_THREADS must be an integer, got {raw!r}") from None
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, trials))


def run_experiment(config: ExperimentConfig) -> Trace:
    """Run every trial; a failing trial is logged and recorded in ``failures``."""
    config.validate()
    workers = _workers(config.trials)
    trials = range(config.trials)
    if workers == 1:
        results = [_run_trial_safe(config, t) for t in trials]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_safe, [config] * config.trials, trials))
    records = sorted((rec for _, recs, _ in results for rec in recs), key=TraceRecord.sort_key)
    failures = [(t, exc) for t, _, exc in results if exc is not None]
    return Trace(records, failures)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, col)) for col in TRACE_COLUMNS])
    return buf.getvalue()


def write_trace_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(records))


def read_trace_csv(path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append(
            TraceRecord(
                trial=int(row["trial"]),
                phase=row["phase"],
                round=int(row["round"]),
                procrustes=float(row["procrustes"]),
                chordal=float(row["chordal"]),
                coef_error=float(row["coef_error"]),
                pred_error=float(row["pred_error"]),
                samples_used=int(row["samples_used"]),
                wall_ms=int(row["wall_ms"]),
            )
        )
    return out


def _phase_retrieval_preset() -> ExperimentConfig:
    n = 50
    return ExperimentConfig(
        n=n,
        r=1,
        d=2,
        alpha_min=1.0,
        seed=20240,
        link="phase_retrieval",
        warm=TrimConfig(samples_per_round=20000, quantile=0.9),
        boost=BoostConfig(
            eta_coef=0.2,
            eta_vec=1.0 / (6 * n),
            T_outer=40,
            T_realign=40,
            B_realign=128,
            T_subspace=2 * n,
        ),
        trials=10,
    )


def _rank2_cubic_preset() -> ExperimentConfig:
    n = 30
    return ExperimentConfig(
        n=n,
        r=2,
        d=3,
        alpha_min=0.3,
        seed=31337,
        warm=TrimConfig(samples_per_round=50000, quantile=0.9),
        boost=BoostConfig(
            eta_coef=0.1,
            eta_vec=0.06 / n,
            T_outer=150,
            T_realign=60,
            B_realign=256,
            T_subspace=2 * n,
        ),
        trials=10,
    )


PRESETS = {
    "phase_retrieval": _phase_retrieval_preset,
    "rank2_cubic": _rank2_cubic_preset,
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
