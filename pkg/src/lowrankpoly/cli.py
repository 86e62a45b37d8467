"""Command-line entry point: ``lowrankpoly {generate,warmstart,boost,run,eval}``.

Exit codes: 0 success, 1 configuration or input error, 2 numerical-guard abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, NumericalGuardError
from .geosgd import BoostConfig, geo_sgd
from .model import BatchOracle, Instance, Parameters, SampleBatch, SampleOracle, prediction_error, random_instance, sample_batch
from .subspace import Frame, procrustes_distance
from .trimmed_pca import TrimConfig, trimmed_pca

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _load(loader, path):
    try:
        return loader(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: malformed file ({exc})") from None


def _load_batch(path) -> SampleBatch:
    try:
        return SampleBatch.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def cmd_generate(args) -> int:
    from .harness import phase_retrieval_instance

    if args.link == "phase_retrieval":
        if (args.r, args.d) != (1, 2):
            raise ConfigError("the phase_retrieval link needs --r 1 --d 2")
        inst = phase_retrieval_instance(args.n, args.seed)
    else:
        try:
            inst = random_instance(args.n, args.r, args.d, args.seed, args.alpha_min)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    # offset keeps the covariate stream distinct from the instance stream
    batch = sample_batch(inst, args.N, [args.seed, 1])
    _write_json(args.instance_out, inst.to_dict())
    batch.save(args.batch_out)
    print(f"wrote {args.instance_out} (alpha={inst.alpha:.4g}) and {args.batch_out} (N={args.N})")
    return EXIT_OK


def cmd_warmstart(args) -> int:
    batch = _load_batch(args.batch)
    per_round = args.samples_per_round or len(batch) // args.r
    cfg = TrimConfig(samples_per_round=per_round, tau=args.tau, quantile=args.quantile, tau_search=args.tau_search)
    frame, info = trimmed_pca(BatchOracle(batch), args.r, cfg, return_info=True)
    if args.out:
        _write_json(args.out, frame.to_dict())
    print(f"tau={info['tau']:.6g} eigenvalues={' '.join(f'{v:.6g}' for v in info['eigenvalues'])}")
    if args.truth:
        inst = _load(Instance.from_dict, args.truth)
        print(f"procrustes={procrustes_distance(frame, inst.truth.frame):.6g}")
    return EXIT_OK


def _boost_config(args) -> BoostConfig:
    fields = {}
    if args.config:
        fields.update(_read_json(args.config))
    for name in ("eta_coef", "eta_vec", "T_outer", "T_realign", "B_realign", "T_subspace", "target_eps"):
        val = getattr(args, name)
        if val is not None:
            fields[name] = val
    try:
        cfg = BoostConfig(**fields)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def cmd_boost(args) -> int:
    frame = _load(Frame.from_dict, args.frame)
    cfg = _boost_config(args)
    inst = None
    if args.batch:
        oracle = BatchOracle(_load_batch(args.batch))
    elif args.instance:
        inst = _load(Instance.from_dict, args.instance)
        oracle = SampleOracle(inst, args.seed if args.seed is not None else cfg.seed)
    else:
        raise ConfigError("boost needs a sample source: --batch or --instance")
    if oracle.n != frame.n:
        raise ConfigError(f"frame has n={frame.n}, samples have n={oracle.n}")
    params = geo_sgd(oracle, frame, args.d, cfg)
    if args.out:
        _write_json(args.out, params.to_dict())
    print(f"samples_used={oracle.samples_used}")
    if inst is not None:
        print(f"procrustes={procrustes_distance(params.frame, inst.truth.frame):.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .harness import ExperimentConfig, preset, run_experiment, write_trace_csv

    if bool(args.config) == bool(args.preset):
        raise ConfigError("run needs exactly one of --config or --preset")
    cfg = preset(args.preset) if args.preset else _load(ExperimentConfig.from_dict, args.config)
    if args.trials is not None:
        cfg.trials = args.trials
    cfg.validate()
    out = args.out or cfg.output_path
    trace = run_experiment(cfg)
    write_trace_csv(trace, out)
    print(f"wrote {len(trace)} records to {out}")
    for trial, exc in trace.failures:
        print(f"trial {trial} failed: {exc}", file=sys.stderr)
    if any(isinstance(exc, NumericalGuardError) for _, exc in trace.failures):
        return EXIT_NUMERICAL
    return EXIT_CONFIG if trace.failures else EXIT_OK


def cmd_eval(args) -> int:
    params = _load(Parameters.from_dict, args.params)
    batch = _load_batch(args.batch)
    y_var = None
    if args.instance:
        y_var = _load(Instance.from_dict, args.instance).y_variance
    if params.n != batch.n:
        raise ConfigError(f"parameters have n={params.n}, batch has n={batch.n}")
    print(repr(prediction_error(params, batch, y_var)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lowrankpoly", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write an instance file and a sample batch")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--N", type=int, required=True, help="number of samples")
    g.add_argument("--alpha-min", type=float, default=0.1)
    g.add_argument("--link", choices=["phase_retrieval"])
    g.add_argument("--instance-out", default="instance.json")
    g.add_argument("--batch-out", default="batch.bin")
    g.set_defaults(func=cmd_generate)

    w = sub.add_parser("warmstart", help="trimmed-PCA warm start from a sample file")
    w.add_argument("--batch", required=True)
    w.add_argument("--r", type=int, required=True)
    w.add_argument("--samples-per-round", type=int)
    w.add_argument("--tau", type=float)
    w.add_argument("--quantile", type=float, default=0.9)
    w.add_argument("--tau-search", action="store_true")
    w.add_argument("--truth", help="instance file; prints the Procrustes distance to it")
    w.add_argument("--out", help="frame output file")
    w.set_defaults(func=cmd_warmstart)

    b = sub.add_parser("boost", help="geodesic SGD from a frame file")
    b.add_argument("--frame", required=True)
    b.add_argument("--d", type=int, required=True)
    src = b.add_mutually_exclusive_group()
    src.add_argument("--batch", help="sample file consumed in order")
    src.add_argument("--instance", help="instance file used as a fresh-sample simulator")
    b.add_argument("--seed", type=int)
    b.add_argument("--config", help="JSON object with BoostConfig fields")
    b.add_argument("--eta-coef", dest="eta_coef", type=float)
    b.add_argument("--eta-vec", dest="eta_vec", type=float)
    b.add_argument("--T-outer", dest="T_outer", type=int)
    b.add_argument("--T-realign", dest="T_realign", type=int)
    b.add_argument("--B-realign", dest="B_realign", type=int)
    b.add_argument("--T-subspace", dest="T_subspace", type=int)
    b.add_argument("--target-eps", dest="target_eps", type=float)
    b.add_argument("--out", help="parameters output file")
    b.set_defaults(func=cmd_boost)

    r = sub.add_parser("run", help="full pipeline over seeded trials, trace to CSV")
    r.add_argument("--config")
    r.add_argument("--preset")
    r.add_argument("--trials", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="normalized prediction error of a parameters file on a batch")
    e.add_argument("--params", required=True)
    e.add_argument("--batch", required=True)
    e.add_argument("--instance", help="instance file supplying Var[y]; default is the batch variance")
    e.set_defaults(func=cmd_eval)
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
