"""Regenerate the golden files for one config: ``python scripts/make_golden.py configs/wave_golden.json``.

Writes golden/<config hash>/ with the attractor cloud, the kernel union, the
entry diagnostics and the frozen absorbing thresholds.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from uniattr.attractor_lab import (
    absorbing_target, attraction_curve, ball_cloud, dissipativity_profile, entering_time, entry_sweep,
    kernel_union, sample, start_cloud, uniform_attractor,
)
from uniattr.cli import Run, curve_csv, dump_json
from uniattr.config import ExperimentConfig
from uniattr.metric_sets import hausdorff, write_cloud_csv

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("config", type=Path)
    ap.add_argument("--r0", type=float, default=None, help="inner absorbing level to record")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    P, S = cfg.build()
    st = cfg.settings()
    out = ROOT / "golden" / cfg.content_hash()
    run = Run("golden", cfg, out)

    sw = entry_sweep(P, S, st, args.threads)
    C0 = start_cloud(P, st)
    levels = {"R1": st.absorbing_level}
    if args.r0 is not None:
        levels["R0"] = args.r0
    t_e = {k: entering_time(P, S, None, None, C0, absorbing_target(P, v), st.t_max, st.lag_step, sweep=sw)
           for k, v in levels.items()}
    A = uniform_attractor(P, S, st, args.threads, sweep=sw)
    curve = attraction_curve(P, S, None, None, C0, A.cloud, None, sweep=sw)
    prof = dissipativity_profile(P, S, None, C0, None, cfg.sampling.m_balls, tol=cfg.tolerance.covering, sweep=sw)
    sm, pl, tol = cfg.sampling, cfg.pipeline, cfg.tolerance
    B = ball_cloud(P, sm.absorbing_level, sm.kernel_directions, cfg.seed + 1)
    K = kernel_union(P, S, sample(S, sm.kernel_sigma_samples), B, pl.T, pl.t0, tol.gap, tol.net_eps,
                     cfg.budget.T_max, threads=args.threads)

    run.write("attractor.csv", write_cloud_csv(A.cloud))
    run.write("kernel.csv", write_cloud_csv(K.cloud))
    run.write("attraction.csv", curve_csv(["lag", "semidist"], zip(curve.lags, curve.values)))
    run.write("dissipativity.csv", curve_csv(["lag", "covering_diameter"], prof))
    thresholds = {"levels": levels, "entering_time": t_e,
                  "attractor_energy_max": float(np.max(_energies(P, A.cloud.points)))}
    run.write("thresholds.json", dump_json(thresholds))
    run.manifest("ok", attractor_meta=A.meta, kernel_meta=K.meta,
                 kernel_omega_hausdorff=hausdorff(K.cloud, A.cloud, P.metric()))
    print(json.dumps({"dir": str(out), **thresholds}, indent=1))


def _energies(P, pts):
    from uniattr.models import WaveModel, energy_values
    return energy_values(P.model, pts) if isinstance(P.model, WaveModel) else P.metric().norm(pts)


if __name__ == "__main__":
    main()
