"""Runtime table for the three graph templates over a range of path lengths.

    python scripts/bench_table.py --templates path neigh --kmax 6 --reps 3 > table.tsv
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from tqeval.bench import BenchConfig, fit_slope, generate_ba, run_comparison


@dataclass
class TableConfig:
    templates: list = field(default_factory=lambda: ["path", "neigh", "conn"])
    n: int = 1000
    m0: int = 10
    kmin: int = 1
    kmax: int = 6
    threshold: int = 10
    seed: int = 1
    reps: int = 3
    timeout: float = 60.0


def main(argv=None) -> None:
    d = TableConfig()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--templates", nargs="+", default=d.templates)
    for name in ("n", "m0", "kmin", "kmax", "threshold", "seed", "reps"):
        ap.add_argument(f"--{name}", type=int, default=getattr(d, name))
    ap.add_argument("--timeout", type=float, default=d.timeout)
    cfg = TableConfig(**vars(ap.parse_args(argv)))

    D = generate_ba(cfg.n, cfg.m0, cfg.seed)
    header = True
    for template in cfg.templates:
        times = {"pruned": [], "baseline": []}
        for k in range(cfg.kmin, cfg.kmax + 1):
            rep = run_comparison(BenchConfig(template, cfg.n, cfg.m0, k, cfg.threshold, cfg.seed,
                                             cfg.reps, cfg.timeout), D)
            sys.stdout.write(rep.to_tsv(header=header))
            sys.stdout.flush()
            header = False
            for r in rep.results:
                if r.status == "ok":
                    times[r.engine].append((k, r.median_s))
        for engine, pts in times.items():
            if len(pts) >= 2:
                ks, ts = zip(*pts)
                print(f"# {template} {engine}: slope ln(t)/k = {fit_slope(ks, ts, loglog=False):.2f}, "
                      f"log-log = {fit_slope(ks, ts):.2f}", file=sys.stderr)


if __name__ == "__main__":
    main()
