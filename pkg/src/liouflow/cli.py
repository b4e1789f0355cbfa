"""Command-line front end.

    liouflow <subcommand> --config <path> [--out-dir <path>] [--seed <u64>]

Subcommands: flow, traj, ensemble, compress, fluxcheck, nz, classical.
Every run writes CSV/JSON data plus ``manifest.json`` (config echo, versions,
sha256 of each output). Exit codes: 0 success, 1 config error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .classical import damped_harmonic_flow, harmonic_flow, phase_gaussian
from .config import (
    ConfigError,
    ScenarioConfig,
    SUBCOMMAND_RUNS,
    as_float,
    as_int,
    as_matrix,
    as_times,
    as_vector,
    load_config,
)
from .core import ValidationError, hermitian_basis
from .ensemble import (
    PropagationError,
    SamplingError,
    TruncatedGaussian,
    boundary_flux_check,
    ensemble_covariance,
    ensemble_mean,
    propagate_gaussian,
    pullback_density,
    pushforward,
    sample,
    spin_boson_propagator,
    support_disagreement,
    truncated_gaussian,
)
from .flow import (
    AffineFlow,
    LindbladTerm,
    compressibility_numeric,
    gksl_flow,
    spin_boson_flow,
)
from .nonmarkovian import CompositeModel, ConventionError, nz_compressibility, random_model
from .trajectory import IntegrationError, integrate_batch, min_eigenvalues, spin_boson_analytic

log = logging.getLogger("liouflow")

FIG_TIMES = (0.0, 2.0 / 3.0, 4.0 / 3.0)  # multiples of pi / omega


class NumericalFailure(RuntimeError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> Path:
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_json(path: Path, payload) -> Path:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


# -- model construction -------------------------------------------------------

class SpinModel:
    """Quantum model plus the closed-form pieces available for it."""

    def __init__(self, fld: AffineFlow, dim: int, omega: float | None = None,
                 gamma_phi: float = 0.0, Gamma: float = 0.0):
        self.field = fld
        self.dim = dim
        self.omega = omega
        self.gamma_phi = gamma_phi
        self.Gamma = Gamma

    @property
    def analytic(self) -> bool:
        return self.omega is not None

    def exact(self, c0, t):
        return spin_boson_analytic(c0, self.omega, self.gamma_phi, self.Gamma, t)


def build_quantum(model: dict) -> SpinModel:
    kind = model["kind"]
    if kind in ("closed-spin", "spin-boson"):
        omega = as_float(model.get("omega", 1.0), "model.omega", positive=True)
        gp = as_float(model.get("gamma_phi", 0.0), "model.gamma_phi", minimum=0.0) if kind == "spin-boson" else 0.0
        G = as_float(model.get("Gamma", 0.0), "model.Gamma", minimum=0.0) if kind == "spin-boson" else 0.0
        return SpinModel(spin_boson_flow(omega, gp, G), 2, omega, gp, G)
    H = as_matrix(model.get("hamiltonian"), "model.hamiltonian")
    terms = []
    for k, entry in enumerate(model.get("lindblad") or []):
        if not isinstance(entry, dict) or set(entry) != {"operator", "rate"}:
            raise ConfigError(f"model.lindblad[{k}] needs exactly 'operator' and 'rate'")
        terms.append(LindbladTerm(as_matrix(entry["operator"], f"model.lindblad[{k}].operator"),
                                  as_float(entry["rate"], f"model.lindblad[{k}].rate", minimum=0.0)))
    return SpinModel(gksl_flow(H, terms), H.shape[0])


def build_classical(model: dict) -> tuple[AffineFlow, float]:
    m = as_float(model.get("m", 1.0), "model.m", positive=True)
    omega = as_float(model.get("omega", 1.0), "model.omega", positive=True)
    if model["kind"] == "classical-harmonic":
        return harmonic_flow(m, omega), omega
    gamma = as_float(model.get("gamma", omega / 2), "model.gamma", minimum=0.0)
    diss = model.get("dissipator")
    diss = None if diss is None else as_matrix(diss, "model.dissipator").real
    return damped_harmonic_flow(m, omega, gamma, dissipator=diss), omega


def build_composite(model: dict, seed: int) -> CompositeModel:
    center = model.get("center", True)
    if not isinstance(center, bool):
        raise ConfigError("model.center must be a boolean")
    if "random" in model:
        spec = model["random"]
        if not isinstance(spec, dict) or set(spec) - {"seed", "beta", "coupling"}:
            raise ConfigError("model.random accepts seed, beta, coupling")
        ns = as_int(model.get("n_sys", 2), "model.n_sys", 2)
        nb = as_int(model.get("n_bath", 2), "model.n_bath", 2)
        rng = np.random.default_rng(as_int(spec.get("seed", seed), "model.random.seed"))
        return random_model(ns, nb, rng, as_float(spec.get("beta", 1.0), "beta"),
                            as_float(spec.get("coupling", 1.0), "coupling"), center)
    mats = {k: as_matrix(model.get(k), f"model.{k}") for k in ("H_S", "H_B", "V", "rho_B")}
    cm = CompositeModel(mats["H_S"].shape[0], mats["H_B"].shape[0], **mats)
    return cm.centered() if center else cm


def coord_names(n: int) -> list[str]:
    return ["x", "y", "z"] if n == 3 else [f"c{k + 1}" for k in range(n)]


def _distribution(spec, where: str, seed: int) -> TruncatedGaussian:
    if not isinstance(spec, dict) or set(spec) - {"mean", "covariance", "truncated"}:
        raise ConfigError(f"{where} accepts mean, covariance, truncated")
    mean = as_vector(spec.get("mean"), f"{where}.mean")
    cov = np.asarray(spec.get("covariance"), dtype=float) if "covariance" in spec else None
    if cov is None:
        raise ConfigError(f"{where}.covariance is required")
    if cov.ndim == 0:
        cov = float(cov) * np.eye(mean.size)
    truncated = spec.get("truncated", True)
    if not isinstance(truncated, bool):
        raise ConfigError(f"{where}.truncated must be a boolean")
    return truncated_gaussian(mean, cov, truncated, seed=seed)


def _interior_states(value, dim: int, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where} must be a non-empty list of coordinate vectors")
    states = np.array([as_vector(v, where, dim * dim - 1) for v in value])
    if min_eigenvalues(states, dim).min() < -1e-10:
        raise ConfigError(f"{where} contains a point outside the state body")
    return states


def _default_times(omega: float | None, given, where: str) -> list[float]:
    if given is not None:
        return as_times(given, where)
    if omega is None:
        raise ConfigError(f"{where} is required for this model")
    return [f * math.pi / omega for f in FIG_TIMES]


# -- runs ---------------------------------------------------------------------

def run_flow_grid(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    n = as_int(run.get("grid_points", 9), "run.grid_points", 2)
    extent = as_float(run.get("extent", 1.0), "run.extent", positive=True)
    axis = np.linspace(-extent, extent, n)
    if cfg.model_kind in ("classical-harmonic", "classical-damped"):
        fld, _ = build_classical(cfg.model)
        Q, P = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([Q.ravel(), P.ravel()], axis=-1)
        v = fld(pts)
        path = write_csv(out / "flow_grid.csv", ["q", "p", "vq", "vp"], np.hstack([pts, v]))
        return [path], {"kappa": fld.kappa, "points": len(pts)}
    model = build_quantum(cfg.model)
    if model.field.n_coords != 3:
        raise ConfigError("flow-grid output is defined for two-level models only")
    ball_only = run.get("ball_only", True)
    if not isinstance(ball_only, bool):
        raise ConfigError("run.ball_only must be a boolean")
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    if ball_only:
        pts = pts[np.linalg.norm(pts, axis=-1) <= 1.0 + 1e-12]
    v = model.field(pts)
    path = write_csv(out / "flow_grid.csv", ["x", "y", "z", "vx", "vy", "vz"], np.hstack([pts, v]))
    return [path], {"kappa": model.field.kappa, "points": len(pts)}


def _segment_integrate(fld, C0, stops, dt, stride):
    """Integrate through each stop time exactly; returns (times, states, states_at_stops)."""
    times, chunks, at_stops = [0.0], [C0[None]], {0.0: C0}
    current, t0 = C0, 0.0
    for stop in stops:
        if stop <= t0:
            continue
        seg_t, seg = integrate_batch(fld, current, stop - t0, dt)
        idx = np.arange(stride, len(seg_t), stride)
        if len(seg_t) > 1 and (len(seg_t) - 1) % stride:
            idx = np.append(idx, len(seg_t) - 1)
        times.extend((t0 + seg_t[idx]).tolist())
        chunks.append(seg[idx])
        current, t0 = seg[-1], stop
        at_stops[stop] = current
    return np.array(times), np.concatenate(chunks), at_stops


def run_trajectory(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    model = build_quantum(cfg.model)
    states = _interior_states(run.get("initial_states"), model.dim, "run.initial_states")
    snaps = _default_times(model.omega, run.get("snapshot_times"), "run.snapshot_times")
    t_end = as_float(run.get("t_end", max(snaps)), "run.t_end", minimum=0.0)
    if "dt" in run:
        dt = as_float(run["dt"], "run.dt", positive=True)
    elif model.omega is not None:
        dt = 1e-3 / model.omega
    else:
        raise ConfigError("run.dt is required for gksl-custom models")
    stride = as_int(run.get("record_stride", 100), "run.record_stride", 1)
    if any(s > t_end for s in snaps):
        raise ConfigError("snapshot_times must not exceed t_end")

    stops = sorted(set(snaps) | {t_end})
    times, recs, at_stops = _segment_integrate(model.field, states, stops, dt, stride)
    names = coord_names(model.field.n_coords)
    m = len(states)
    rows = np.column_stack([np.repeat(np.arange(m), len(times)),
                            np.tile(times, m),
                            recs.transpose(1, 0, 2).reshape(-1, recs.shape[-1])])
    files = [write_csv(out / "trajectory.csv", ["traj", "t"] + names, rows)]

    snap_rows, max_err = [], 0.0
    for t in snaps:
        for k, c in enumerate(at_stops[t]):
            row = [k, t, *c]
            if model.analytic:
                ex = model.exact(states[k], t)
                err = float(np.max(np.abs(ex - c)))
                max_err = max(max_err, err)
                row += [*ex, err]
            snap_rows.append(row)
    header = ["traj", "t"] + names
    if model.analytic:
        header += [f"{n}_exact" for n in names] + ["max_abs_error"]
    files.append(write_csv(out / "snapshots.csv", header, snap_rows))
    summary = {"dt": dt, "t_end": t_end, "snapshot_times": snaps, "kappa": model.field.kappa}
    if model.analytic:
        summary["max_snapshot_error"] = max_err
    return files, summary


def _moment_row(t, pts):
    mu = ensemble_mean(pts)
    C = ensemble_covariance(pts)
    return [t, len(pts), *mu, C[0, 0], C[0, 1], C[0, 2], C[1, 1], C[1, 2], C[2, 2]]


MOMENT_HEADER = ["t", "n", "mean_x", "mean_y", "mean_z",
                 "cov_xx", "cov_xy", "cov_xz", "cov_yy", "cov_yz", "cov_zz"]


def run_ensemble(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    model = build_quantum(cfg.model)
    dist0 = _distribution(run.get("distribution"), "run.distribution", cfg.seed)
    if dist0.dim != 3:
        raise ConfigError("run.distribution must be three-dimensional")
    n = as_int(run.get("n", 10000), "run.n", 1)
    snaps = _default_times(model.omega, run.get("snapshot_times"), "run.snapshot_times")
    dump = run.get("dump_samples", True)
    if not isinstance(dump, bool):
        raise ConfigError("run.dump_samples must be a boolean")
    ens0 = sample(dist0, n, cfg.seed)
    prop = spin_boson_propagator(model.omega, model.gamma_phi, model.Gamma)
    files, moments, gauss, mismatch = [], [], [], []
    for k, t in enumerate(snaps):
        ens = pushforward(ens0, prop, t)
        if dump:
            files.append(write_csv(out / f"samples_t{k}.csv", ["x", "y", "z"], ens.points))
        moments.append(_moment_row(t, ens.points))
        g = propagate_gaussian(dist0, model.omega, model.gamma_phi, model.Gamma, t)
        C = g.covariance
        scale = g.support_scale if g.support_scale is not None else np.ones(3)
        gauss.append([t, *g.mean, C[0, 0], C[0, 1], C[0, 2], C[1, 1], C[1, 2], C[2, 2], *scale])
        if dist0.truncated:
            mismatch.append(float(np.mean(support_disagreement(
                dist0, model.omega, model.gamma_phi, model.Gamma, ens.points, t))))
    files.append(write_csv(out / "moments.csv", MOMENT_HEADER, moments))
    files.append(write_csv(out / "gaussian.csv", MOMENT_HEADER[:1] + MOMENT_HEADER[2:]
                           + ["nu_x", "nu_y", "nu_z"], gauss))
    summary = {"n": n, "acceptance": ens0.acceptance, "log_norm": dist0.log_norm,
               "snapshot_times": snaps}
    if mismatch:
        summary["support_formula_disagreement"] = mismatch
    return files, summary


def run_compressibility(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    h = as_float(run.get("step", 1e-5), "run.step", positive=True)
    rng = np.random.default_rng(cfg.seed)
    if cfg.model_kind in ("classical-harmonic", "classical-damped"):
        fld, _ = build_classical(cfg.model)
        pts = rng.normal(size=(as_int(run.get("n_points", 10), "run.n_points", 1), fld.n_coords))
        if "points" in run:
            pts = np.array([as_vector(p, "run.points", fld.n_coords) for p in run["points"]])
        extra = {}
    else:
        model = build_quantum(cfg.model)
        fld = model.field
        if "points" in run:
            pts = _interior_states(run["points"], model.dim, "run.points")
        else:
            npts = as_int(run.get("n_points", 10), "run.n_points", 1)
            raw = rng.normal(size=(npts, fld.n_coords))
            # uniform-in-ball radius, shrunk away from the boundary
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            pts = raw * 0.9 * rng.uniform(size=(npts, 1)) ** (1 / fld.n_coords)
            if model.dim > 2:
                pts *= 1.0 / (model.dim - 1)
        extra = {"dim": model.dim}
    numeric = np.array([compressibility_numeric(fld, p, h) for p in pts])
    files = [write_csv(out / "compressibility.csv", coord_names(fld.n_coords) + ["kappa_numeric"],
                       np.column_stack([pts, numeric]))]
    report = {"kappa_analytic": fld.kappa, "kappa_numeric": numeric.tolist(),
              "max_abs_deviation": float(np.max(np.abs(numeric - fld.kappa))), "step": h, **extra}
    files.append(write_json(out / "compressibility.json", report))
    return files, report


def run_fluxcheck(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    model = build_quantum(cfg.model)
    if model.field.n_coords != 3:
        raise ConfigError("boundary-flux runs need a two-level model")
    dist0 = _distribution(run.get("distribution"), "run.distribution", cfg.seed)
    center = as_vector(run.get("center", [0.0, 0.0, 0.0]), "run.center", 3)
    radius = as_float(run.get("radius", 0.3), "run.radius", positive=True)
    if np.linalg.norm(center) + radius > 1.0 + 1e-12:
        raise ConfigError("the region must lie inside the unit ball")
    h = as_float(run["h"], "run.h", positive=True) if "h" in run else None
    rep = boundary_flux_check(model.field, dist0, center, radius,
                              as_float(run.get("t", 0.0), "run.t", minimum=0.0),
                              as_int(run.get("n", 10**6), "run.n", 1), cfg.seed,
                              as_int(run.get("n_quad", 2048), "run.n_quad", 1), h)
    report = {"dPdt_mc": rep.dPdt_mc, "mc_stderr": rep.mc_stderr, "surface_flux": rep.surface_flux,
              "discrepancy": rep.discrepancy, "occupancy": rep.occupancy, **rep.extras}
    return [write_json(out / "flux.json", report)], report


def run_nz(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    model = build_composite(cfg.model, cfg.seed)
    times = as_times(run.get("times", np.linspace(0.0, 2.0, 21).tolist()), "run.times")
    prefactor = run.get("prefactor", True)
    if not isinstance(prefactor, bool):
        raise ConfigError("run.prefactor must be a boolean")
    kappa = [nz_compressibility(model, t, prefactor) for t in times]
    files = [write_csv(out / "nz_kappa.csv", ["t", "kappa"], np.column_stack([times, kappa]))]
    summary = {"n_sys": model.n_sys, "n_bath": model.n_bath, "prefactor": prefactor,
               "mean_field_norm": float(np.linalg.norm(model.mean_field()))}
    files.append(write_json(out / "nz_summary.json", {**summary, "kappa": kappa, "times": times}))
    return files, summary


def run_classical(cfg: ScenarioConfig, out: Path) -> tuple[list[Path], dict]:
    run = cfg.run
    fld, omega = build_classical(cfg.model)
    snaps = _default_times(omega, run.get("snapshot_times"), "run.snapshot_times")
    t_end = as_float(run.get("t_end", max(snaps)), "run.t_end", minimum=0.0)
    if any(s > t_end for s in snaps):
        raise ConfigError("snapshot_times must not exceed t_end")
    states = run.get("initial_states", [[1.0, 0.0], [0.0, 1.0]])
    if not isinstance(states, list) or not states:
        raise ConfigError("run.initial_states must be a non-empty list")
    states = np.array([as_vector(s, "run.initial_states", 2) for s in states])
    stride = as_int(run.get("record_stride", 20), "run.record_stride", 1)
    dist_spec = run.get("distribution", {"mean": [1.0, 0.0], "covariance": 0.02})
    if not isinstance(dist_spec, dict) or set(dist_spec) - {"mean", "covariance"}:
        raise ConfigError("run.distribution accepts mean, covariance")
    mean = as_vector(dist_spec.get("mean"), "run.distribution.mean", 2)
    cov = np.asarray(dist_spec.get("covariance"), dtype=float)
    dist0 = phase_gaussian(mean, cov * np.eye(2) if cov.ndim == 0 else cov)

    files, _ = run_flow_grid(ScenarioConfig(cfg.subcommand, cfg.model,
                                            {k: run[k] for k in ("grid_points", "extent") if k in run}),
                             out)
    dt = 1e-3 / omega
    times, recs, at_stops = _segment_integrate(fld, states, sorted(set(snaps) | {t_end}), dt, stride)
    m = len(states)
    rows = np.column_stack([np.repeat(np.arange(m), len(times)), np.tile(times, m),
                            recs.transpose(1, 0, 2).reshape(-1, 2)])
    files.append(write_csv(out / "trajectories.csv", ["traj", "t", "q", "p"], rows))

    snap_rows, gauss_rows = [], []
    for t in snaps:
        M, d = fld.flow_map(t)
        for k, x in enumerate(at_stops[t]):
            exact = M @ states[k] + d
            dens = float(pullback_density(dist0, fld, x, t))
            snap_rows.append([k, t, *x, *exact, dens, math.exp(fld.kappa * t) * float(dist0.pdf(states[k]))])
        C = M @ dist0.covariance @ M.T
        gauss_rows.append([t, *(M @ dist0.mean + d), C[0, 0], C[0, 1], C[1, 1]])
    files.append(write_csv(out / "snapshots.csv",
                           ["traj", "t", "q", "p", "q_exact", "p_exact", "density", "density_law"],
                           snap_rows))
    files.append(write_csv(out / "gaussian.csv", ["t", "mean_q", "mean_p", "cov_qq", "cov_qp", "cov_pp"],
                           gauss_rows))
    return files, {"kappa": fld.kappa, "snapshot_times": snaps, "t_end": t_end}


RUNNERS = {
    "flow": run_flow_grid,
    "traj": run_trajectory,
    "ensemble": run_ensemble,
    "compress": run_compressibility,
    "fluxcheck": run_fluxcheck,
    "nz": run_nz,
    "classical": run_classical,
}


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: ScenarioConfig, out: Path, files: list[Path], summary: dict) -> Path:
    payload = {
        "schema": 1,
        "subcommand": cfg.subcommand,
        "run_kind": cfg.run_kind,
        "seed": cfg.seed,
        "config": cfg.raw,
        "versions": {"liouflow": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "kernel_backend": kernels.BACKEND},
        "summary": _jsonable(summary),
        "files": [{"name": p.name, "sha256": sha256(p), "bytes": p.stat().st_size} for p in files],
    }
    return write_json(out / "manifest.json", payload)


def execute(cfg: ScenarioConfig) -> list[Path]:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        files, summary = RUNNERS[cfg.subcommand](cfg, out)
    manifest = write_manifest(cfg, out, files, summary)
    return files + [manifest]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liouflow", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=sorted(SUBCOMMAND_RUNS))
    ap.add_argument("--config", required=True, help="YAML or JSON scenario file")
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.subcommand, args.out_dir, args.seed)
        written = execute(cfg)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, PropagationError, SamplingError, ConventionError,
            FloatingPointError, np.linalg.LinAlgError, NumericalFailure) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
