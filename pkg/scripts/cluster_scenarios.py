"""Cluster-tracing scenarios on an estimated panel, with the delay they buy.

The delay is the number of days the untraced baseline needs to reach the
traced run's final daily level.
"""

import argparse
import datetime as dt

import numpy as np

from nbrepro.cluster_sim import Scenario, baseline_of, initial_cohort, run_scenario, write_fans
from nbrepro.estimators import run_pipeline
from nbrepro.ingest import PipelineConfig, load_panel

SETTINGS = [(20, 0.2), (20, 0.5), (5, 0.2), (5, 0.5)]


def delay_days(fan, base) -> float:
    if fan.mean[-1] >= base.mean[-1]:
        return 0.0
    idx = np.nonzero(base.mean >= fan.mean[-1])[0]
    return float(len(base.mean) - 1 - idx[0]) if idx.size else 0.0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", required=True)
    ap.add_argument("--start", type=dt.date.fromisoformat, default=dt.date(2020, 8, 1))
    ap.add_argument("--end", type=dt.date.fromisoformat, default=dt.date(2020, 10, 31))
    ap.add_argument("--ceff", type=float, default=0.35)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--outdir", default=None)
    args = ap.parse_args()
    cfg = PipelineConfig(p0_grid=tuple(sorted({p0 for _, p0 in SETTINGS})))
    panel = load_panel(args.input, cfg)
    series = run_pipeline(panel, cfg)
    for cs, p0 in SETTINGS:
        scn = Scenario(args.start, args.end, series.params_by_effective_date(p0), p0=p0, cs=cs, c_eff=args.ceff,
                       trials=args.trials, seed=cs, seed_cases=initial_cohort(panel, args.start, p0, cfg))
        fan, base = run_scenario(scn), run_scenario(baseline_of(scn))
        print(f"CS={cs:<3} p0={p0}: final mean {fan.mean[-1]:.0f} vs baseline {base.mean[-1]:.0f}, "
              f"delay {delay_days(fan, base):.0f} days")
        if args.outdir:
            write_fans(fan, base, f"{args.outdir}/fan_cs{cs}_p0{p0}.csv")


if __name__ == "__main__":
    main()
