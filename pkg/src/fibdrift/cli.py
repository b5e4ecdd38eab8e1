"""Command-line interface ``fibdrift``.

JSON artifacts carry a ``provenance`` block (command, configuration, seed,
library version and git-style hashes of the input files).  CSV artifacts
get the same block in a ``<name>.meta.json`` sidecar so the CSV itself
stays plain.  Failures print ``{stage, error_kind, detail}`` to stderr and
exit with status 1.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import __version__
from .errors import ConfigError, FibDriftError, NotConverging

log = logging.getLogger("fibdrift")


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------

def git_hash(data: bytes) -> str:
    """Git blob hash of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def file_hash(path: str | os.PathLike) -> str:
    return git_hash(Path(path).read_bytes())


def _clean(obj: Any) -> Any:
    """Convert numpy scalars, tuples and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class Context:
    """Global options shared by all commands."""

    def __init__(self, seed: int, threads: int, out_dir: Path):
        self.seed = seed
        self.threads = threads
        self.out_dir = out_dir
        self.command = ""

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out_dir / p

    def provenance(self, config: dict, inputs: dict[str, str | os.PathLike]) -> dict:
        return {
            "tool": "fibdrift",
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "threads": self.threads,
            "config": _clean(config),
            "input_hashes": {k: file_hash(v) for k, v in sorted(inputs.items())},
        }

    def write_json(self, name: str, payload: dict, config: dict,
                   inputs: dict[str, str | os.PathLike] | None = None) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"provenance": self.provenance(config, inputs or {}), **_clean(payload)}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        click.echo(str(path))
        return path

    def write_csv(self, name: str, header: list[str], rows, config: dict,
                  inputs: dict[str, str | os.PathLike] | None = None,
                  summary: dict | None = None) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        meta = {"csv": path.name, "csv_hash": file_hash(path), "columns": header}
        if summary:
            meta["summary"] = summary
        self.write_json(str(name) + ".meta.json", meta, config, inputs)
        click.echo(str(path))
        return path


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _load_fp(path):
    from .renorm import RenormFixedPoint

    rec = json.loads(Path(path).read_text())
    return RenormFixedPoint.from_record(rec.get("fixed_point", rec))


def _load_density(path):
    from .transfer import Density

    rec = json.loads(Path(path).read_text())
    return Density.from_record(rec.get("density", rec))


def _parse_ells(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse ell list {text!r}") from exc


def _positive(**tols) -> None:
    for k, v in tols.items():
        if v is not None and not v > 0:
            raise ConfigError(f"{k} must be positive, got {v}")


# ---------------------------------------------------------------------------
# Pipeline pieces
# ---------------------------------------------------------------------------

def _solve(family: str, ell: int, degree: int, tol: float, tail_tol: float):
    from .renorm import FamilyKind, solve_fixed_point

    kind = FamilyKind(family, ell)
    return solve_fixed_point(kind, degree=degree, tol=tol, tail_tol=tail_tol)


def _density(fp, branch_tol: float, tol: float, degree: int):
    from .induced import build_branches
    from .transfer import branch_system, density_identity_checks, invariant_density

    sys_ = build_branches(fp, branch_tol)
    d = invariant_density(branch_system(sys_), tol=tol, degree=degree)
    x = np.linspace(d.J[0], d.J[1], 2001)
    checks = {"residual": d.residual, "mass": d.mass(), "min_on_J": float(np.min(d(x))),
              "iterations": d.iterations, "contraction": d.contraction,
              "branches": len(sys_.branches), "omitted_length": sys_.omitted}
    if fp.kind.covering:
        checks.update(density_identity_checks(fp, d))
    return sys_, d, checks


def _fp_payload(fp) -> dict:
    return {"fixed_point": fp.to_record(),
            "checks": {"residual": fp.residual, "ordering_chain": True,
                       "tau": fp.tau, "X": fp.X, "x0": fp.x0}}


def _density_payload(d, checks) -> dict:
    return {"density": d.to_record(), "checks": checks}


# ---------------------------------------------------------------------------
# Click plumbing
# ---------------------------------------------------------------------------

def _error_record(exc: BaseException) -> dict:
    if isinstance(exc, FibDriftError):
        stage, kind = exc.stage, exc.kind
    elif isinstance(exc, click.ClickException):
        stage, kind = "cli", "UsageError"
    else:
        stage, kind = "library", type(exc).__name__
    detail = exc.format_message() if isinstance(exc, click.ClickException) else str(exc)
    return {"stage": stage, "error_kind": kind, "detail": detail}


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.exceptions.Abort, click.UsageError):
            raise
        except Exception as exc:  # every failure becomes a machine-readable record
            log.debug("failure", exc_info=True)
            click.echo(json.dumps(_error_record(exc)), err=True)
            ctx.exit(1)


def _default_threads() -> int:
    env = os.environ.get("FIBDRIFT_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        return 1
    return max(1, n)


@click.group(cls=_Group)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for every random stream.")
@click.option("--threads", type=int, default=None, help="Worker threads [default: $FIBDRIFT_THREADS or 1].")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Directory for relative output paths.")
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.version_option(__version__, prog_name="fibdrift")
@click.pass_context
def main(ctx, seed: int, threads: int | None, out_dir: str, log_level: str):
    """Fibonacci renormalization fixed points, invariant densities and drift."""
    logging.basicConfig(level=getattr(logging, log_level.upper()), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = _default_threads() if threads is None else threads
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    ctx.obj = Context(seed, threads, Path(out_dir))
    ctx.obj.command = ctx.invoked_subcommand or ""


family_opt = click.option("--family", type=click.Choice(["covering", "unimodal"]), required=True)


@main.command()
@family_opt
@click.option("--ell", type=int, required=True)
@click.option("--degree", type=int, default=128, show_default=True)
@click.option("--tol", type=float, default=1e-11, show_default=True, help="Collocation residual target.")
@click.option("--tail-tol", type=float, default=1e-12, show_default=True)
@click.option("--out", default="fp.json", show_default=True)
@click.pass_obj
def solve(obj: Context, family, ell, degree, tol, tail_tol, out):
    """Solve the fixed-point equation."""
    _positive(tol=tol, tail_tol=tail_tol)
    config = dict(family=family, ell=ell, degree=degree, tol=tol, tail_tol=tail_tol)
    t = time.perf_counter()
    fp = _solve(family, ell, degree, tol, tail_tol)
    payload = _fp_payload(fp)
    payload["checks"]["seconds"] = round(time.perf_counter() - t, 1)
    obj.write_json(out, payload, config)


@main.command()
@click.option("--fp", "fp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--tail-tol", type=float, default=1e-12, show_default=True)
@click.option("--out", default="branches.csv", show_default=True)
@click.pass_obj
def branches(obj: Context, fp_path, tail_tol, out):
    """Tabulate the inverse branches of the induced map."""
    from .induced import build_branches

    _positive(tail_tol=tail_tol)
    fp = _load_fp(fp_path)
    _write_branches(obj, build_branches(fp, tail_tol), out, dict(tail_tol=tail_tol), {"fp": fp_path})


def _write_branches(obj: Context, sys_, out, config, inputs) -> None:
    rows = []
    for b in sys_.branches:
        r = b.to_row()
        rows.append((r["m"], r["sign"], r["domain_lo"], r["domain_hi"], r["length"]))
    summary = {"J": sys_.J, "count": len(rows), "omitted_length": sys_.omitted,
               "coverage": sys_.coverage(), "disjoint": sys_.disjoint()}
    obj.write_csv(out, ["m", "sign", "domain_lo", "domain_hi", "length"], rows, config, inputs, summary)


@main.command()
@click.option("--fp", "fp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--branch-tol", type=float, default=1e-12, show_default=True,
              help="Omitted branch length relative to |J|.")
@click.option("--tol", type=float, default=1e-12, show_default=True, help="Power-iteration tolerance.")
@click.option("--degree", type=int, default=96, show_default=True)
@click.option("--out", default="density.json", show_default=True)
@click.pass_obj
def density(obj: Context, fp_path, branch_tol, tol, degree, out):
    """Invariant density of the induced map."""
    _positive(branch_tol=branch_tol, tol=tol)
    fp = _load_fp(fp_path)
    _, d, checks = _density(fp, branch_tol, tol, degree)
    obj.write_json(out, _density_payload(d, checks),
                   dict(branch_tol=branch_tol, tol=tol, degree=degree), {"fp": fp_path})


def _drift(obj: Context, fp, d, branch_tol, steps, seeds, contour_n, qtol):
    from .drift import drift_report
    from .induced import build_branches

    sys_ = build_branches(fp, branch_tol)
    return drift_report(sys_, d, n_steps=steps, n_seeds=seeds, seed=obj.seed, threads=obj.threads,
                        contour_n=contour_n or None, qtol=qtol)


@main.command()
@click.option("--fp", "fp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--density", "density_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--branch-tol", type=float, default=1e-12, show_default=True)
@click.option("--steps", type=int, default=10 ** 6, show_default=True, help="Birkhoff steps per seed.")
@click.option("--seeds", type=int, default=8, show_default=True, help="Independent Birkhoff orbits.")
@click.option("--contour-n", type=int, default=0, show_default=True, help="Contour arcs (0 skips).")
@click.option("--qtol", type=float, default=1e-8, show_default=True, help="Quadrature tolerance.")
@click.option("--out", default="report.json", show_default=True)
@click.pass_obj
def drift(obj: Context, fp_path, density_path, branch_tol, steps, seeds, contour_n, qtol, out):
    """Drift by the branch table, the log identity and Birkhoff sums."""
    _positive(branch_tol=branch_tol, qtol=qtol, steps=steps, seeds=seeds)
    rep = _drift(obj, _load_fp(fp_path), _load_density(density_path), branch_tol, steps, seeds,
                 contour_n, qtol)
    obj.write_json(out, {"report": rep.to_record()},
                   dict(branch_tol=branch_tol, steps=steps, seeds=seeds, contour_n=contour_n, qtol=qtol),
                   {"fp": fp_path, "density": density_path})


@main.command()
@click.option("--fp", "fp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--density", "density_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--z0-arg", type=float, default=85.0, show_default=True, help="Argument of z0 in degrees.")
@click.option("--z0-mod", type=float, default=0.05, show_default=True, help="Modulus of z0.")
@click.option("--n", "n_arcs", type=int, default=2000, show_default=True)
@click.option("--out", default="contour.csv", show_default=True)
@click.pass_obj
def contour(obj: Context, fp_path, density_path, z0_arg, z0_mod, n_arcs, out):
    """Arc integrals s_n of the contour sum."""
    from .drift import contour_adaptive

    _positive(z0_mod=z0_mod, n=n_arcs)
    fp, d = _load_fp(fp_path), _load_density(density_path)
    c = contour_adaptive(fp, d, z0_mod=z0_mod, z0_arg_deg=z0_arg, N=n_arcs)
    summary = {"theta": c.theta, "q_hat": c.q_hat, "tail_bound_theta": c.tail_bound / c.log_tau,
               "n_resolved": c.n_resolved, **c.diagnostics}
    obj.write_csv(out, ["n", "re_z", "im_z", "s_n", "partial_sum"], c.rows(),
                  dict(z0_arg=z0_arg, z0_mod=z0_mod, n=n_arcs),
                  {"fp": fp_path, "density": density_path}, summary)


@main.command()
@family_opt
@click.option("--ells", default=None, help="Comma-separated list [default: 3,5,7,9 or 4,6,8,10].")
@click.option("--degree", type=int, default=128, show_default=True)
@click.option("--tol", type=float, default=1e-11, show_default=True)
@click.option("--branch-tol", type=float, default=1e-12, show_default=True)
@click.option("--density-tol", type=float, default=1e-12, show_default=True)
@click.option("--density-degree", type=int, default=96, show_default=True)
@click.option("--steps", type=int, default=10 ** 6, show_default=True)
@click.option("--seeds", type=int, default=4, show_default=True)
@click.option("--save-dir", default=None, help="Also write per-ell fp and density files here.")
@click.option("--out", default="sweep.json", show_default=True)
@click.pass_obj
def sweep(obj: Context, family, ells, degree, tol, branch_tol, density_tol, density_degree, steps,
          seeds, save_dir, out):
    """Drift along a sweep of ell with continuation between fixed points."""
    from .drift import difference_signature, limit_drift_estimate, slope_exponent
    from .renorm import continuation_sweep
    from .transfer import density_convergence

    ells = _parse_ells(ells) if ells else ([3, 5, 7, 9] if family == "covering" else [4, 6, 8, 10])
    config = dict(family=family, ells=ells, degree=degree, tol=tol, branch_tol=branch_tol,
                  density_tol=density_tol, density_degree=density_degree, steps=steps, seeds=seeds)
    fps = continuation_sweep(family, ells, degree=degree, tol=tol)
    reports, dens = [], []
    for fp in fps:
        sys_, d, checks = _density(fp, branch_tol, density_tol, density_degree)
        from .drift import drift_report

        rep = drift_report(sys_, d, n_steps=steps, n_seeds=seeds, seed=obj.seed, threads=obj.threads)
        rep.diagnostics["density_checks"] = checks
        reports.append(rep)
        dens.append(d)
        if save_dir:
            obj.write_json(str(Path(save_dir) / f"fp_{family}_{fp.ell}.json"), _fp_payload(fp), config)
            obj.write_json(str(Path(save_dir) / f"density_{family}_{fp.ell}.json"),
                           _density_payload(d, checks), config)
    thetas = [r.theta for r in reports]
    diffs = [abs(b - a) for a, b in zip(thetas, thetas[1:])]
    out_doc = {
        "ells": ells,
        "theta": thetas,
        "abs_differences": diffs,
        "differences_strictly_decreasing": all(q < p for p, q in zip(diffs, diffs[1:])),
        "theta_non_decreasing": all(q >= p for p, q in zip(thetas, thetas[1:])),
        "signature": difference_signature(thetas, ells),
        "slope_exponent": slope_exponent(ells, thetas) if len(ells) >= 3 else None,
        "density_convergence": density_convergence(dens),
        "reports": [r.to_record() for r in reports],
    }
    if len(ells) >= 4:
        try:
            out_doc["limit"] = limit_drift_estimate(reports).to_record()
        except NotConverging as exc:
            out_doc["limit"] = {"error_kind": exc.kind, "detail": str(exc)}
    obj.write_json(out, out_doc, config)


def _family_from_options(fp_path, density_path, eta, b, c, d):
    from .parabolic import ParabolicFamily, from_fixed_point

    if fp_path:
        fp = _load_fp(fp_path)
        dens = _load_density(density_path) if density_path else _density(fp, 1e-12, 1e-12, 96)[1]
        fam = from_fixed_point(fp, dens)
        return fam if eta is None else fam.with_eta(eta)
    return ParabolicFamily(eta=1e-3 if eta is None else eta, b=complex(0, b), c=complex(c), d=complex(0, d))


parabolic_family_opts = [
    click.option("--from-fp", "fp_path", type=click.Path(exists=True, dir_okay=False), default=None,
                 help="Take b, c, d and the remainder from a covering fixed point."),
    click.option("--density", "density_path", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--b", type=float, default=0.0, show_default=True, help="Imaginary part of b (synthetic)."),
    click.option("--c", type=float, default=1.0, show_default=True, help="Cubic coefficient (synthetic)."),
    click.option("--d", type=float, default=0.0, show_default=True, help="Imaginary part of d (synthetic)."),
]


def _apply(opts):
    def deco(f):
        for o in reversed(opts):
            f = o(f)
        return f
    return deco


@main.command()
@click.option("--eta", type=float, default=None, help="Parameter eta [default: 1e-3, or eta(ell) with --from-fp].")
@_apply(parabolic_family_opts)
@click.option("--z0-mod", type=float, default=0.045, show_default=True)
@click.option("--z0-arg", type=float, default=0.0, show_default=True, help="Radians.")
@click.option("--steps", type=int, default=100000, show_default=True)
@click.option("--out", default="orbit.csv", show_default=True)
@click.pass_obj
def parabolic(obj: Context, eta, fp_path, density_path, b, c, d, z0_mod, z0_arg, steps, out):
    """One orbit of the normal-form family with its bound ratios."""
    from .parabolic import iterate

    fam = _family_from_options(fp_path, density_path, eta, b, c, d)
    rec = iterate(fam, z0_mod * complex(math.cos(z0_arg), math.sin(z0_arg)), steps)
    summary = {"sup": list(rec.sups()), "prefatou_deviation": rec.prefatou_deviation,
               "gap_constant": rec.gap_constant(), "W0": rec.W0, "steps": int(rec.z.size - 1),
               "family": fam.to_record()}
    inputs = {k: v for k, v in (("fp", fp_path), ("density", density_path)) if v}
    obj.write_csv(out, ["n", "re_z", "im_z", "r1", "r2", "r3"], rec.rows(),
                  dict(eta=fam.eta, b=b, c=c, d=d, z0_mod=z0_mod, z0_arg=z0_arg, steps=steps),
                  inputs, summary)


@main.command("parabolic-sweep")
@_apply(parabolic_family_opts)
@click.option("--etas", default=None, help="Comma-separated eta values [default: 8 log-spaced in 1e-4..1e-1].")
@click.option("--n-max", type=int, default=100000, show_default=True)
@click.option("--out", default="bounds.json", show_default=True)
@click.pass_obj
def parabolic_sweep(obj: Context, fp_path, density_path, b, c, d, etas, n_max, out):
    """Empirical bound constants over an (eta, n) grid."""
    from .parabolic import default_eta_grid, remove_quadratic, verify_theorem_bounds

    grid = [float(v) for v in etas.split(",")] if etas else default_eta_grid().tolist()
    _positive(n_max=n_max, **{f"eta[{i}]": v for i, v in enumerate(grid)})
    fam = _family_from_options(fp_path, density_path, None, b, c, d)
    rep = verify_theorem_bounds(fam, grid, n_max, threads=obj.threads)
    third = {f"{e:.1e}": remove_quadratic(fam.with_eta(e)).c.real - fam.c.real for e in (1e-1, 1e-2, 1e-3)}
    inputs = {k: v for k, v in (("fp", fp_path), ("density", density_path)) if v}
    obj.write_json(out, {"bounds": rep.to_record(), "quadratic_removal_c_shift": third},
                   dict(etas=grid, n_max=n_max, b=b, c=c, d=d), inputs)


@main.command()
@family_opt
@click.option("--ell", type=int, required=True)
@click.option("--degree", type=int, default=128, show_default=True)
@click.option("--tol", type=float, default=1e-11, show_default=True)
@click.option("--tail-tol", type=float, default=1e-12, show_default=True)
@click.option("--branch-tol", type=float, default=1e-12, show_default=True)
@click.option("--density-tol", type=float, default=1e-12, show_default=True)
@click.option("--density-degree", type=int, default=96, show_default=True)
@click.option("--steps", type=int, default=10 ** 6, show_default=True)
@click.option("--seeds", type=int, default=8, show_default=True)
@click.option("--contour-n", type=int, default=2000, show_default=True)
@click.option("--z0-arg", type=float, default=85.0, show_default=True)
@click.option("--z0-mod", type=float, default=0.05, show_default=True)
@click.option("--n-max", type=int, default=100000, show_default=True, help="Parabolic orbit length.")
@click.pass_obj
def pipeline(obj: Context, family, ell, degree, tol, tail_tol, branch_tol, density_tol, density_degree,
             steps, seeds, contour_n, z0_arg, z0_mod, n_max):
    """solve, density, branch table, drift and (coverings) contour and parabolic bounds."""
    from .drift import contour_adaptive, drift_report
    from .induced import build_branches
    from .parabolic import from_fixed_point, verify_theorem_bounds

    _positive(tol=tol, tail_tol=tail_tol, branch_tol=branch_tol, density_tol=density_tol)
    config = dict(family=family, ell=ell, degree=degree, tol=tol, tail_tol=tail_tol, branch_tol=branch_tol,
                  density_tol=density_tol, density_degree=density_degree, steps=steps, seeds=seeds,
                  contour_n=contour_n, z0_arg=z0_arg, z0_mod=z0_mod, n_max=n_max)
    fp = _solve(family, ell, degree, tol, tail_tol)
    fp_path = obj.write_json("fp.json", _fp_payload(fp), config)
    _, d, checks = _density(fp, branch_tol, density_tol, density_degree)
    d_path = obj.write_json("density.json", _density_payload(d, checks), config, {"fp": fp_path})
    inputs = {"fp": fp_path, "density": d_path}
    sys_ = build_branches(fp, branch_tol)
    _write_branches(obj, sys_, "branches.csv", config, {"fp": fp_path})
    rep = drift_report(sys_, d, n_steps=steps, n_seeds=seeds, seed=obj.seed, threads=obj.threads)
    obj.write_json("report.json", {"report": rep.to_record()}, config, inputs)
    if fp.kind.covering:
        if contour_n:
            c = contour_adaptive(fp, d, z0_mod=z0_mod, z0_arg_deg=z0_arg, N=contour_n)
            summary = {"theta": c.theta, "q_hat": c.q_hat, "tail_bound_theta": c.tail_bound / c.log_tau,
                       "n_resolved": c.n_resolved, "theta_log": rep.theta_log, **c.diagnostics}
            obj.write_csv("contour.csv", ["n", "re_z", "im_z", "s_n", "partial_sum"], c.rows(), config,
                          inputs, summary)
        if n_max:
            fam = from_fixed_point(fp, d)
            bounds = verify_theorem_bounds(fam, n_max=n_max, threads=obj.threads)
            obj.write_json("bounds.json", {"bounds": bounds.to_record()}, config, inputs)


@main.command()
@click.option("--steps", type=int, default=10 ** 6, show_default=True, help="Gauss Birkhoff steps per seed.")
@click.option("--seeds", type=int, default=8, show_default=True)
@click.option("--out", default="selftest.json", show_default=True)
@click.pass_obj
def selftest(obj: Context, steps, seeds, out):
    """Gauss-map oracle plus synthetic invariant suites; exit 1 on any failure."""
    from .drift import GAUSS_LOG2_MEAN, gauss_birkhoff
    from .parabolic import (ParabolicFamily, gamma0_closed_form, gamma0_iterate, iterate,
                            remove_quadratic)
    from .transfer import gauss_branch_system, gauss_density, invariant_density

    results = {}
    d = invariant_density(gauss_branch_system(), tol=1e-13, degree=32)
    x = np.linspace(0.0, 1.0, 1001)
    err = float(np.max(np.abs(d(x) - gauss_density(x))))
    results["gauss_density_sup_error"] = {"value": err, "pass": err <= 1e-9}
    mean, se = gauss_birkhoff(steps, seeds, seed=obj.seed, threads=obj.threads)
    sig = abs(mean - GAUSS_LOG2_MEAN) / se
    results["gauss_birkhoff_sigmas"] = {"value": sig, "mean": mean, "stderr": se, "pass": sig <= 3.0}
    rec = iterate(ParabolicFamily(eta=0.0, c=1.0), 0.045, 20000)
    results["cubic_prefatou_deviation"] = {"value": rec.prefatou_deviation,
                                           "pass": rec.prefatou_deviation <= 1e-9}
    r1 = rec.sups()[0]
    results["cubic_r1_sup"] = {"value": r1, "pass": abs(r1 - 1 / math.sqrt(2)) < 0.02}
    fam = ParabolicFamily(eta=0.01, b=0.3j, c=1.0)
    q = abs(remove_quadratic(fam).coefficients()[2])
    results["quadratic_removed"] = {"value": q, "pass": q < 1e-12}
    w = gamma0_iterate(100 + 10j, 1e-3, 2.0, 1000)
    cf = gamma0_closed_form(100 + 10j, 1e-3, 2.0, np.arange(1001))
    e = float(np.max(np.abs(w - cf) / np.abs(w)))
    results["gamma0_closed_form"] = {"value": e, "pass": e < 1e-12}
    ok = all(v["pass"] for v in results.values())
    obj.write_json(out, {"results": results, "pass": ok}, dict(steps=steps, seeds=seeds))
    for k, v in results.items():
        click.echo(f"{'PASS' if v['pass'] else 'FAIL'} {k} {v['value']:.3e}")
    if not ok:
        raise click.exceptions.Exit(1)


if __name__ == "__main__":  # pragma: no cover
    main()
