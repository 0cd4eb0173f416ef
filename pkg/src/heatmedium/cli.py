"""Command-line driver: one study per invocation, CSV outputs plus a manifest."""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import platform
import sys
from contextlib import nullcontext
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .config import STUDIES, ConfigError, RunConfig, parse_config
from .errors import (
    GeometryError,
    NumericalError,
    PackingInfeasibleError,
    RegimeError,
    SingularityError,
)
from .homogenized import build_q, solve_homogenized, steady_average
from .kernel import KernelParams, build_table, source_field
from .manybody import assemble_coarse, assemble_manybody, solve, write_diagnostics, write_solution_csv
from .medium import CubePartition, ParticleCloud, partition, sample_particles
from .verify.convergence import MediumSetup, theorem1_convergence_study
from .verify.lemmas import SphericalLayer, lemma1_check, lemma2_check
from .verify.tauberian import StudyReport, tauberian_study

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class Outputs:
    """Files written by one run, so that a failed run can be rolled back."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[Path] = []
        self.created_dirs: list[Path] = []

    def open(self) -> None:
        missing = []
        p = self.root
        while not p.exists():
            missing.append(p)
            p = p.parent
        self.root.mkdir(parents=True, exist_ok=True)
        self.created_dirs = missing  # innermost first

    def path(self, name: str) -> Path:
        p = self.root / name
        self.files.append(p)
        return p

    def rollback(self) -> None:
        for p in self.files:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        for d in self.created_dirs:
            try:
                d.rmdir()
            except OSError:
                break


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "heatmedium": own,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _setup(cfg: RunConfig) -> MediumSetup:
    return MediumSetup(cfg.box, cfg.field("N"), cfg.field("h"), cfg.field("c"), cfg.field("f"), cfg.kappa)


def _clouds(cfg: RunConfig):
    """Yield ``(tag, cloud)``: the explicit particle list, or one sampled cloud per seed."""
    s = _setup(cfg)
    if cfg.particles is not None:
        centers = np.asarray(cfg.particles, dtype=float).reshape(-1, 3)
        if len(centers) > 1:
            diff = centers[:, None, :] - centers[None, :, :]
            r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            np.fill_diagonal(r, np.inf)
            d = float(r.min())
        else:
            d = math.inf
        if d <= 2.0 * cfg.a:
            raise RegimeError(f"particles overlap: minimum distance {d:.4g} <= 2a = {2 * cfg.a:.4g}")
        yield "explicit", ParticleCloud(cfg.a, cfg.kappa, centers, s.h(centers), s.c(centers), d, cfg.box)
        return
    for seed in cfg.seeds:
        yield f"seed{seed}", sample_particles(cfg.box, s.N, s.h, s.c, cfg.a, cfg.kappa, seed)


def run_sample(cfg: RunConfig, out: Outputs) -> None:
    for tag, cloud in _clouds(cfg):
        cloud.to_csv(out.path(f"cloud_{tag}.csv"))


def run_solve_manybody(cfg: RunConfig, out: Outputs) -> None:
    s = _setup(cfg)
    grid = CubePartition.uniform(cfg.box, cfg.grid)
    for tag, cloud in _clouds(cfg):
        cloud.to_csv(out.path(f"cloud_{tag}.csv"))
        coarse = partition(cfg.box, cfg.b, cloud)
        for i, lam in enumerate(cfg.lambdas):
            params = KernelParams(lam)
            F = source_field(cloud.centers, s.f, grid, params) if cloud.M else np.zeros(0)
            system = assemble_manybody(cloud, params, F)
            U = solve(system) if cloud.M else np.zeros(0)
            write_solution_csv(out.path(f"manybody_{tag}_lambda{i}.csv"), cloud.centers, U)
            write_diagnostics(
                out.path(f"manybody_{tag}_lambda{i}.txt"),
                {"lambda": lam, "M": cloud.M, "a": cloud.a, "d": cloud.d, **system.diagnostics},
            )
            Fc = source_field(coarse.centers, s.f, grid, params)
            csys = assemble_coarse(coarse, s.N, s.h, s.c, params, Fc, cfg.coarse_mode, cloud)
            Uc = solve(csys)
            report = StudyReport(("x", "y", "z", "value"))
            report.rows = [(*map(float, x), float(u)) for x, u in zip(coarse.centers, Uc)]
            report.to_csv(out.path(f"coarse_{tag}_lambda{i}.csv"))


def run_solve_homogenized(cfg: RunConfig, out: Outputs) -> None:
    s = _setup(cfg)
    part = CubePartition.uniform(cfg.box, cfg.grid)
    q = build_q(part, s.h, s.c, s.N)
    for i, lam in enumerate(cfg.lambdas):
        params = KernelParams(lam)
        sol = solve_homogenized(part, q, s.f, params, build_table(part, params), mode="laplace-field")
        sol.to_csv(out.path(f"homogenized_lambda{i}.csv"))
        write_diagnostics(out.path(f"homogenized_lambda{i}.txt"), {"lambda": lam, **sol.diagnostics})


def run_steady_average(cfg: RunConfig, out: Outputs) -> None:
    s = _setup(cfg)
    part = CubePartition.uniform(cfg.box, cfg.grid)
    q = build_q(part, s.h, s.c, s.N)
    sol = steady_average(part, q, s.f)
    sol.to_csv(out.path("steady_average.csv"))
    write_diagnostics(out.path("steady_average.txt"), sol.diagnostics)


def run_compare(cfg: RunConfig, out: Outputs) -> None:
    if cfg.particles is not None:
        raise ConfigError(["particles: compare samples its own clouds; remove the explicit particle list"])
    schedule = cfg.a_schedule or [cfg.a]
    report = theorem1_convergence_study(_setup(cfg), schedule, cfg.seeds, cfg.lambdas[0], cfg.grid, cfg.b)
    report.to_csv(out.path("convergence.csv"))
    summary = StudyReport(("a", "mean", "stderr"))
    summary.rows = list(zip(report.summary["a"], report.summary["mean"], report.summary["stderr"]))
    summary.to_csv(out.path("convergence_summary.csv"))


def run_tauberian(cfg: RunConfig, out: Outputs) -> None:
    s = _setup(cfg)
    part = CubePartition.uniform(cfg.box, cfg.grid)
    q = build_q(part, s.h, s.c, s.N)
    report = tauberian_study(part, q, s.f, cfg.lambdas)
    report.to_csv(out.path("tauberian.csv"))
    write_diagnostics(
        out.path("tauberian.txt"),
        {k: report.summary[k] for k in ("extrapolated_error", "model", "fit_residual", "psi_norm")},
    )


def run_verify_lemmas(cfg: RunConfig, out: Outputs) -> None:
    lem = cfg.lemmas
    center = cfg.box.center
    x = center + np.array([lem["distance"], 0.0, 0.0])
    l1 = StudyReport(("a", "lambda", "ratio", "analytic", "bound"))
    for a in lem["radii"]:
        layer = SphericalLayer(tuple(center), a)
        for lam in lem["lambdas"]:
            r = lemma1_check(layer, x, KernelParams(lam))
            l1.rows.append((float(a), float(lam), r.ratio, r.analytic_ratio, r.bound))
    l1.to_csv(out.path("lemma1.csv"))

    l2 = StudyReport(("n_theta", "charge", "direct", "outer", "outer_error"))
    for n in lem["n_theta"]:
        r = lemma2_check(SphericalLayer(tuple(center), lem["radius"], n_theta=n), 0.0)
        l2.rows.append((n, r.charge, r.direct, r.outer, abs(r.outer + r.charge) / r.charge))
    l2.to_csv(out.path("lemma2.csv"))

    corr = StudyReport(("a", "lambda", "correction", "analytic"))
    lam2 = lem["lemma2_lambda"]
    n = max(lem["n_theta"])
    for a in lem["radii"]:
        r = lemma2_check(SphericalLayer(tuple(center), a, n_theta=n), lam2)
        corr.rows.append((float(a), float(lam2), r.correction, r.correction_exact))
    corr.to_csv(out.path("lemma2_correction.csv"))


RUNNERS = {
    "sample": run_sample,
    "solve-manybody": run_solve_manybody,
    "solve-homogenized": run_solve_homogenized,
    "steady-average": run_steady_average,
    "compare": run_compare,
    "tauberian": run_tauberian,
    "verify-lemmas": run_verify_lemmas,
}
assert set(RUNNERS) == set(STUDIES)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Outputs, study: str, cfg: RunConfig) -> None:
    produced = [p for p in out.files]
    cfg_path = out.path("config.json")
    cfg_path.write_text(cfg.to_json(), encoding="utf-8")
    lines = [
        f"study={study}",
        f"config_sha256={cfg.digest()}",
        f"seeds={','.join(str(s) for s in cfg.seeds)}",
    ]
    lines += [f"version.{k}={v}" for k, v in _versions().items()]
    lines += [f"output.{p.name}={_sha256(p)}" for p in sorted(produced)]
    out.path("manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(cfg: RunConfig, study: str, out_dir: str | os.PathLike | None = None) -> Outputs:
    """Execute one study into ``<out_dir>/<study>/``; on any exception the files
    written so far are removed."""
    out = Outputs(Path(out_dir if out_dir is not None else cfg.output_dir) / study)
    out.open()
    try:
        RUNNERS[study](cfg, out)
        write_manifest(out, study, cfg)
    except BaseException:
        out.rollback()
        raise
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatmedium",
        description="Many-particle and homogenized heat-medium solvers with verification studies.",
    )
    sub = parser.add_subparsers(dest="study", required=True, metavar="STUDY")
    for name in STUDIES:
        p = sub.add_parser(name, help=RUNNERS[name].__name__.replace("run_", "").replace("_", " "))
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="single seed (overrides seeds)")
        p.add_argument("--threads", type=int, help="cap on BLAS/OpenMP threads")
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (NumericalError, PackingInfeasibleError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ConfigError, RegimeError, GeometryError, SingularityError, ValueError)):
        return EXIT_CONFIG
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["--seed must be an unsigned 64-bit integer"])
            cfg.seeds = [args.seed]
        if args.threads is not None and args.threads < 1:
            raise ConfigError(["--threads must be at least 1"])
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    if args.threads is not None:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    else:
        limiter = nullcontext()
    try:
        with limiter:
            out = run(cfg, args.study, args.out)
    except Exception as exc:
        code = _exit_code(exc)
        kind = {EXIT_NUMERICAL: "numerical failure", EXIT_IO: "I/O error", EXIT_CONFIG: "invalid input"}.get(code, "error")
        msgs = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for msg in msgs:
            print(f"{kind}: {msg}", file=sys.stderr)
        return code
    print(f"{args.study}: wrote {len(out.files)} files to {out.root}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
