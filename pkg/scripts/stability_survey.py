"""Stability verdicts on random points of projective spaces and Grassmannians.

For each group kind, counts Stable / Unstable / Inconclusive, checks that the
verdict matches the bare flow outcome, and records timings.
"""
from __future__ import annotations

import argparse
import csv
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from momentkit import kempfness as kn
from momentkit import targets as tg
from momentkit.liecore import AnchorRep


@dataclass
class Config:
    samples: int = 20
    seed: int = 0
    out: str = "results/stability_survey"


def targets():
    for m in (2, 3, 4):
        for kind in ("U", "SU", "torus"):
            yield f"P{m - 1}/{kind}", tg.Projective(AnchorRep(m, kind))
    for m, k in ((4, 2), (5, 2)):
        yield f"Gr({k},{m})/torus", tg.Grassmann(k, AnchorRep(m, "torus"))


def main(cfg: Config):
    rng = np.random.default_rng(cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, t in targets():
        counts, agree, t0 = Counter(), 0, time.perf_counter()
        for i in range(cfg.samples):
            x = tg.random_point(t, rng)
            if i % 2 and isinstance(t, tg.Projective):
                x = x.copy()
                x[rng.integers(t.dim)] = 0
                x = tg.make_point(t, x)
            v = kn.stability_test(t, x)
            flow = kn.minimize_psi(t, x)
            counts[v.kind] += 1
            agree += (v.kind == "Stable") == (flow.status == "Converged")
        row = {"target": name, "stable": counts["Stable"], "unstable": counts["Unstable"],
               "inconclusive": counts["Inconclusive"], "agree": agree,
               "seconds": round(time.perf_counter() - t0, 2)}
        rows.append(row)
        print("  ".join(f"{k}={v}" for k, v in row.items()))
    with open(out / "survey.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=Config.samples)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args()
    main(Config(a.samples, a.seed, a.out))
