"""Run a pinned preset end to end and summarize the final round of every trial.

    python scripts/run_preset.py phase_retrieval --out trace.csv
"""
import argparse
import statistics

from lowrankpoly.harness import PRESETS, preset, run_experiment, write_trace_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("name", choices=sorted(PRESETS))
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="trace.csv")
    args = ap.parse_args()

    cfg = preset(args.name)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    trace = run_experiment(cfg)
    write_trace_csv(trace, args.out)

    last = cfg.boost.T_outer
    print(f"{'trial':>5} {'warm d_P':>10} {'final d_P':>10} {'coef err':>10} {'pred err':>10} {'samples':>9}")
    finals = []
    for t in range(cfg.trials):
        recs = {(r.phase, r.round): r for r in trace if r.trial == t}
        if not recs:
            continue
        warm = recs[("warmstart", 0)]
        fin = recs.get(("boost_round", last), warm)
        finals.append(fin.procrustes)
        print(
            f"{t:>5} {warm.procrustes:>10.3e} {fin.procrustes:>10.3e} {fin.coef_error:>10.3e} "
            f"{fin.pred_error:>10.3e} {fin.samples_used:>9}"
        )
    for t, exc in trace.failures:
        print(f"{t:>5} failed: {exc}")
    if finals:
        print(f"median final d_P {statistics.median(finals):.3e}; trace written to {args.out}")


if __name__ == "__main__":
    main()
