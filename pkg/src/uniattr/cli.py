"""Command-line runner: ``uniattr <command> --config PATH [--out DIR] [--seed N] [--threads N]``.

Exit codes: 0 ok, 1 config error, 2 tolerance or convergence failure,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attractor_lab import (
    NotEnteredError,
    attraction_curve,
    ball_cloud,
    dissipativity_profile,
    entering_time,
    absorbing_target,
    entry_sweep,
    kernel_union,
    omega_limit,
    pullback_kernel_section,
    sample,
    start_cloud,
    tau_grid,
    uniform_attractor,
)
from .config import ConfigError, ExperimentConfig
from .finite_oracle import verify_many
from .metric_sets import PointCloud, hausdorff, read_cloud_csv, semidist, write_cloud_csv
from .models import WaveModel, energy_values, tail_energy
from .process_core import DivergenceError, GridError, axiom_sweep
from .symbol_space import TorusHull

log = logging.getLogger("uniattr")

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_DIVERGENCE = 0, 1, 2, 3


# --------------------------------------------------------------- artifacts

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return _jsonable(dataclasses.asdict(x))
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def curve_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if not isinstance(v, (bool, np.bool_)) else str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def trajectory_csv(W: WaveModel, times, states) -> str:
    """Rows ``t, coord_1..coord_2m, E, tail``."""
    m = W.modes
    header = ["t", *(f"coord_{i}" for i in range(1, 2 * m + 1)), "E", "tail"]
    E = energy_values(W, states)
    tail = np.atleast_1d(tail_energy(W, states, m // 2))
    return curve_csv(header, ([t, *x, e, q] for t, x, e, q in zip(times, states, E, tail)))


class Run:
    """Output directory plus the manifest shared by every command."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        self.files: dict[str, str] = {}
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.files[name] = text

    def manifest(self, status: str, **fields) -> dict:
        doc = {
            "command": self.command, "status": status, "version": __version__,
            "config_hash": self.cfg.content_hash(), "config": self.cfg.to_dict(),
            "tolerance": dataclasses.asdict(self.cfg.tolerance), "artifacts": sorted(self.files), **fields,
        }
        (self.out / "manifest.json").write_text(dump_json(doc))
        return doc


# ---------------------------------------------------------------- commands

def cmd_axioms(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    P, S = cfg.build()
    run = Run("axioms", cfg, out)
    X = ball_cloud(P, cfg.sampling.absorbing_level, max(1, cfg.sampling.absorbing_directions), cfg.seed).points
    wave = isinstance(P.model, WaveModel)
    rep = axiom_sweep(P, S, X, cfg.pipeline.axiom_samples, cfg.pipeline.axiom_horizon, cfg.seed,
                      order_dt=cfg.pipeline.axiom_order_dt if wave else None)
    order_min = 2.0 ** P.order - 2.0 ** (P.order - 2)
    ok = rep.max_residual <= cfg.tolerance.axioms
    if rep.order_ratio is not None:
        ok = ok and rep.order_ratio >= order_min
    run.write("axioms.csv", curve_csv(["sample", "cocycle", "translation"],
                                      ([i, c, t] for i, (c, t) in enumerate(zip(rep.cocycle, rep.translation)))))
    run.manifest("ok" if ok else "tolerance", max_residual=rep.max_residual, threshold=cfg.tolerance.axioms,
                 order_ratio=rep.order_ratio, order_ratio_min=order_min if wave else None)
    log.info("max residual %.3e (threshold %.1e), order ratio %s", rep.max_residual, cfg.tolerance.axioms,
             rep.order_ratio)
    return EXIT_OK if ok else EXIT_TOLERANCE


def _golden_cloud(golden: Path, cfg: ExperimentConfig, name: str) -> PointCloud:
    d = golden / cfg.content_hash()
    man = d / "manifest.json"
    if not man.exists():
        raise ConfigError(f"no golden run for config hash {cfg.content_hash()} under {golden}")
    if json.loads(man.read_text()).get("config_hash") != cfg.content_hash():
        raise ConfigError("golden manifest hash does not match its directory; refusing to compare")
    return read_cloud_csv(d / name)


def cmd_attractor(cfg: ExperimentConfig, out: Path, threads: int = 1, golden: Path | None = None) -> int:
    P, S = cfg.build()
    st = cfg.settings()
    run = Run("attractor", cfg, out)
    sw = entry_sweep(P, S, st, threads)
    try:
        A = uniform_attractor(P, S, st, threads, sweep=sw)
    except NotEnteredError as exc:
        run.manifest("not_entered", message=str(exc))
        log.error("%s", exc)
        return EXIT_TOLERANCE
    curve = attraction_curve(P, S, None, None, start_cloud(P, st), A.cloud, None, P.metric(), sweep=sw)
    run.write("attractor.csv", write_cloud_csv(A.cloud))
    run.write("attraction.csv", curve_csv(["lag", "semidist"], zip(curve.lags, curve.values)))
    gaps = A.meta.get("h_gaps", {})
    converged = all(g <= cfg.tolerance.attraction for g in gaps.values())
    extra = {}
    if golden is not None:
        G = _golden_cloud(golden, cfg, "attractor.csv")
        dist = hausdorff(A.cloud, G, P.metric())
        extra["golden_hausdorff"] = dist
        converged = converged and dist <= cfg.tolerance.golden
    run.manifest("ok" if converged else "unconverged", meta=A.meta, **extra)
    log.info("attractor: %d points, entering time %s", len(A.cloud), A.meta["entering_time"])
    return EXIT_OK if converged else EXIT_TOLERANCE


def _parse_sigma(S, text: str):
    vals = [float(v) for v in text.split(",")]
    return S.point(*vals) if isinstance(S, TorusHull) else S.point(vals[0])


def cmd_kernel(cfg: ExperimentConfig, out: Path, threads: int = 1, sigma: str = "all") -> int:
    P, S = cfg.build()
    run = Run("kernel", cfg, out)
    sm, pl, tol = cfg.sampling, cfg.pipeline, cfg.tolerance
    B = ball_cloud(P, sm.absorbing_level, sm.kernel_directions, cfg.seed + 1)
    if sigma == "all":
        K = kernel_union(P, S, sample(S, sm.kernel_sigma_samples), B, pl.T, pl.t0, tol.gap, tol.net_eps,
                         cfg.budget.T_max, threads=threads)
        cloud, meta, ok = K.cloud, K.meta, K.meta["converged"]
    else:
        sec = pullback_kernel_section(P, S, _parse_sigma(S, sigma), B, pl.t0, pl.T, tol.gap, tol.net_eps,
                                      cfg.budget.T_max)
        cloud, ok = sec.cloud, sec.converged
        meta = {"sigma": dataclasses.asdict(sec.sigma), "t0": sec.t0, "T": sec.T, "gap": sec.gap, "converged": ok}
    run.write("kernel.csv", write_cloud_csv(cloud))
    run.manifest("ok" if ok else "unconverged", meta=meta)
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_compare(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    P, S = cfg.build()
    st = cfg.settings()
    run = Run("compare", cfg, out)
    from .attractor_lab import compare_single_vs_hull

    try:
        res = compare_single_vs_hull(P, S, cfg.sigma0(S), st, single_tau_samples=cfg.sampling.single_tau_samples,
                                     single_window=cfg.pipeline.single_window, threads=threads)
    except NotEnteredError as exc:
        run.manifest("not_entered", message=str(exc))
        return EXIT_TOLERANCE
    run.write("single.csv", write_cloud_csv(res["single"].cloud))
    run.write("hull.csv", write_cloud_csv(res["hull"].cloud))
    ok = res["single_to_hull"] <= cfg.tolerance.compare
    run.manifest("ok" if ok else "tolerance", single_to_hull=res["single_to_hull"],
                 hull_to_single=res["hull_to_single"], single_meta=res["single"].meta, hull_meta=res["hull"].meta)
    log.info("d(single, hull)=%.4g  d(hull, single)=%.4g", res["single_to_hull"], res["hull_to_single"])
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_dissipativity(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    P, S = cfg.build()
    st = cfg.settings()
    run = Run("dissipativity", cfg, out)
    sw = entry_sweep(P, S, st, threads)
    C0 = start_cloud(P, st)
    target = absorbing_target(P, st.absorbing_level)
    t_e = entering_time(P, S, None, None, C0, target, st.t_max, st.lag_step, sweep=sw)
    prof = dissipativity_profile(P, S, None, C0, None, cfg.sampling.m_balls, P.metric(), cfg.tolerance.covering,
                                 sweep=sw)
    wave = isinstance(P.model, WaveModel)
    size = [float(energy_values(P.model, sw.pooled(r)).max()) if wave else float(P.metric().norm(sw.pooled(r)).max())
            for r in range(len(sw.lags))]
    inside = [bool(np.all(target.contains(sw.pooled(r)))) for r in range(len(sw.lags))]
    run.write("dissipativity.csv", curve_csv(["lag", "covering_diameter", "max_size", "inside"],
                                             ([l, c, s, i] for (l, c), s, i in zip(prof, size, inside))))
    if wave:
        run.write("trajectory.csv", trajectory_csv(P.model, sw.lags, sw.snapshots[:, 0, 0, -1]))
    ok = t_e is not None
    run.manifest("ok" if ok else "not_entered", entering_time=t_e, absorbing=target.description,
                 initial_covering=prof[0][1], final_covering=prof[-1][1])
    return EXIT_OK if ok else EXIT_TOLERANCE


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            seeds.extend(range(int(a), int(b) + 1))
        else:
            seeds.append(int(part))
    return seeds


def cmd_finite_verify(seeds: list[int], out: Path, workers: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    certs = verify_many(seeds, workers)
    failed = [c["seed"] for c in certs if not c["pass"]]
    (out / "certificates.json").write_text(dump_json({"systems": len(certs), "failed": failed, "certificates": certs}))
    log.info("%d systems, %d failed", len(certs), len(failed))
    return EXIT_OK if not failed else EXIT_TOLERANCE


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uniattr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("axioms", help="cocycle and translation residuals"))
    p = common(sub.add_parser("attractor", help="uniform attractor pipeline"))
    p.add_argument("--golden", type=Path, default=None, help="golden tree to compare against")
    p = common(sub.add_parser("kernel", help="pullback kernel sections"))
    p.add_argument("--sigma", default="all", help="'all' or comma-separated symbol coordinates")
    common(sub.add_parser("compare", help="single-symbol vs hull attractor"))
    common(sub.add_parser("dissipativity", help="entering time and covering profile"))
    p = common(sub.add_parser("finite-verify", help="exact checks on random finite systems"), config=False)
    p.add_argument("--seeds", default="0-499")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "finite-verify":
            seeds = _parse_seeds(args.seeds)
            if args.seed is not None:
                seeds = [args.seed]
            return cmd_finite_verify(seeds, args.out or Path("out/finite"), args.threads)
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
        out = args.out or Path(cfg.output)
        if args.command == "axioms":
            return cmd_axioms(cfg, out, args.threads)
        if args.command == "attractor":
            return cmd_attractor(cfg, out, args.threads, args.golden)
        if args.command == "kernel":
            return cmd_kernel(cfg, out, args.threads, args.sigma)
        if args.command == "compare":
            return cmd_compare(cfg, out, args.threads)
        if args.command == "dissipativity":
            return cmd_dissipativity(cfg, out, args.threads)
    except (ConfigError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
