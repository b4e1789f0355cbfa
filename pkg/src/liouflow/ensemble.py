"""Probability distributions over Bloch-ball state space and their transport.

Distributions are carried two ways: as finite sample ensembles pushed along
trajectories, and as (truncated) Gaussians whose parameters are propagated in
closed form under the spin-boson flow. Pointwise densities at time ``t`` come
from the pull-back ``P(c; t) = exp(kappa t) P0(Phi_t^{-1}(c))``.

Random numbers come from a Philox counter-based stream turned into normals by
Box-Muller (see :func:`standard_normals`), so a given ``(n, seed)`` gives the
same samples on any platform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import ValidationError, from_coords, hermitian_basis
from .flow import AffineFlow
from .trajectory import min_eigenvalues, spin_boson_analytic

MIN_ACCEPTANCE = 1e-3
_BATCH = 1 << 16


class SamplingError(RuntimeError):
    pass


class PropagationError(RuntimeError):
    pass


def rotation_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def scaling(nu) -> np.ndarray:
    return np.diag(np.asarray(nu, dtype=float))


def spin_boson_nu(gamma_phi: float, Gamma: float, t: float) -> np.ndarray:
    g = math.exp(-(gamma_phi + 0.5 * Gamma) * t)
    return np.array([g, g, math.exp(-Gamma * t)])


def spin_boson_kappa(gamma_phi: float, Gamma: float) -> float:
    return 2.0 * (gamma_phi + Gamma)


# -- portable RNG -------------------------------------------------------------

def standard_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    """Box-Muller normals from consecutive uniform doubles of ``rng``.

    Uniform pairs ``(u1, u2)`` give ``sqrt(-2 ln(1-u1)) * (cos 2 pi u2, sin 2 pi u2)``.
    """
    m = (size + 1) // 2
    u = rng.random(2 * m)
    r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    ang = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[:size]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


# -- distributions ------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian on the Bloch ball, optionally restricted to ``|S(support_scale) c| <= 1``.

    ``log_norm`` is the log of the Gaussian mass inside the support (0 when
    untruncated); :meth:`pdf` divides by it, :meth:`kernel` does not.
    """

    mean: np.ndarray
    covariance: np.ndarray
    truncated: bool = True
    log_norm: float = 0.0
    support_scale: np.ndarray | None = None

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.covariance, dtype=float)
        d = mean.size
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ValidationError(f"mean/covariance shapes {mean.shape}, {cov.shape} disagree")
        if np.max(np.abs(cov - cov.T)) > 1e-12 * max(1.0, np.abs(cov).max()):
            raise ValidationError("covariance is not symmetric")
        cov = (cov + cov.T) / 2
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValidationError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if self.support_scale is not None:
            object.__setattr__(self, "support_scale", np.array(self.support_scale, dtype=float))

    @property
    def dim(self) -> int:
        return self.mean.size

    def in_support(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if not self.truncated:
            return np.ones(c.shape[:-1], dtype=bool)
        if self.support_scale is not None:
            c = c * self.support_scale
        return np.linalg.norm(c, axis=-1) <= 1.0

    def gaussian_logpdf(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        L = np.linalg.cholesky(self.covariance)
        diff = c - self.mean
        sol = np.linalg.solve(L, diff.reshape(-1, self.dim).T).T.reshape(diff.shape)
        maha = np.sum(sol * sol, axis=-1)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return -0.5 * (maha + logdet + self.dim * math.log(2 * math.pi))

    def kernel(self, c) -> np.ndarray:
        """Gaussian density times the support indicator, without renormalization."""
        return np.where(self.in_support(c), np.exp(self.gaussian_logpdf(c)), 0.0)

    def pdf(self, c) -> np.ndarray:
        return self.kernel(c) * math.exp(-self.log_norm)

    def with_mass_estimate(self, n: int = 10**6, seed: int = 0) -> "TruncatedGaussian":
        """Monte Carlo estimate of the Gaussian mass inside the support."""
        if not self.truncated:
            return replace(self, log_norm=0.0)
        pts = _gaussian_draws(self, n, make_rng(seed))
        frac = float(np.mean(self.in_support(pts)))
        if frac <= 0:
            raise SamplingError("no Gaussian mass inside the support")
        return replace(self, log_norm=math.log(frac))


def truncated_gaussian(mean, covariance, truncated: bool = True, mass_samples: int = 10**6,
                       seed: int = 0) -> TruncatedGaussian:
    """Build a distribution and, if truncated, estimate its normalization."""
    dist = TruncatedGaussian(mean, covariance, truncated)
    return dist.with_mass_estimate(mass_samples, seed) if truncated else dist


def _gaussian_draws(dist: TruncatedGaussian, n: int, rng: np.random.Generator) -> np.ndarray:
    L = np.linalg.cholesky(dist.covariance)
    z = standard_normals(rng, n * dist.dim).reshape(n, dist.dim)
    return dist.mean + z @ L.T


@dataclass(frozen=True)
class SampleEnsemble:
    points: np.ndarray
    seed: int | None = None
    acceptance: float = 1.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.points), 1.0 / len(self.points))


def sample(dist: TruncatedGaussian, n: int, seed: int) -> SampleEnsemble:
    """i.i.d. draws by Gaussian sampling plus rejection outside the support.

    Raises :class:`SamplingError` when the acceptance rate drops below 1e-3.
    """
    if n < 1:
        raise ValidationError("need at least one sample")
    rng = make_rng(seed)
    kept: list[np.ndarray] = []
    have = drawn = 0
    while have < n:
        batch = max(_BATCH, 2 * (n - have))
        pts = _gaussian_draws(dist, batch, rng)
        drawn += batch
        pts = pts[dist.in_support(pts)]
        kept.append(pts)
        have += len(pts)
        if have / drawn < MIN_ACCEPTANCE and drawn >= _BATCH:
            raise SamplingError(f"acceptance rate {have / drawn:.2e} below {MIN_ACCEPTANCE}")
    pts = np.concatenate(kept)[:n]
    return SampleEnsemble(pts, int(seed), have / drawn)


# -- transport ----------------------------------------------------------------

Propagator = Callable[[np.ndarray, float], np.ndarray]


def spin_boson_propagator(omega: float, gamma_phi: float, Gamma: float) -> Propagator:
    return lambda pts, t: spin_boson_analytic(pts, omega, gamma_phi, Gamma, t)


def affine_propagator(fld: AffineFlow) -> Propagator:
    return lambda pts, t: fld.evolve(pts, t)


def pushforward(ens: SampleEnsemble, propagator: Propagator, t: float,
                check_dim: int | None = 2, tol: float = 1e-8) -> SampleEnsemble:
    """Move every sample along its trajectory; weights are unchanged.

    ``check_dim`` is the Hilbert dimension used to validate outputs (None skips).
    """
    if t == 0:
        return SampleEnsemble(ens.points.copy(), ens.seed, ens.acceptance)
    pts = np.asarray(propagator(ens.points, t), dtype=float)
    if pts.shape != ens.points.shape:
        raise PropagationError(f"propagator changed shape {ens.points.shape} -> {pts.shape}")
    if check_dim is not None:
        if not np.all(np.isfinite(pts)) or min_eigenvalues(pts, check_dim).min() < -tol:
            raise PropagationError("propagated sample left the state body")
    return SampleEnsemble(pts, ens.seed, ens.acceptance)


def spin_boson_inverse(c, omega: float, gamma_phi: float, Gamma: float, t: float) -> np.ndarray:
    """Initial state that reaches ``c`` after time ``t``."""
    c = np.asarray(c, dtype=float)
    g = math.exp((gamma_phi + 0.5 * Gamma) * t)
    back = c @ rotation_z(-omega * t).T
    return np.stack([g * back[..., 0], g * back[..., 1],
                     math.exp(Gamma * t) * (1.0 + c[..., 2]) - 1.0], axis=-1)


def propagate_gaussian(dist0: TruncatedGaussian, omega: float, gamma_phi: float, Gamma: float,
                       t: float) -> TruncatedGaussian:
    """Closed-form Gaussian transport under the spin-boson flow.

    Mean follows the analytic trajectory, covariance becomes
    ``S(nu) R_z(omega t) Cov0 R_z(omega t)^T S(nu)`` and the support becomes
    ``|S(nu) c| <= 1`` (composed with any existing support scale).
    """
    if t < 0:
        raise ValidationError("t must be >= 0")
    nu = spin_boson_nu(gamma_phi, Gamma, t)
    M = scaling(nu) @ rotation_z(omega * t)
    cov = M @ dist0.covariance @ M.T
    mean = spin_boson_analytic(dist0.mean, omega, gamma_phi, Gamma, t)
    scale = nu if dist0.support_scale is None else nu * dist0.support_scale
    return TruncatedGaussian(mean, (cov + cov.T) / 2, dist0.truncated, dist0.log_norm, scale)


def density_at(dist0: TruncatedGaussian, omega: float, gamma_phi: float, Gamma: float, c,
               t: float) -> np.ndarray:
    """Pull-back density ``exp(2(gamma_phi + Gamma) t) P0(Phi_t^{-1} c)``."""
    c0 = spin_boson_inverse(c, omega, gamma_phi, Gamma, t)
    return math.exp(spin_boson_kappa(gamma_phi, Gamma) * t) * dist0.pdf(c0)


def log_density_at(dist0: TruncatedGaussian, omega, gamma_phi, Gamma, c, t) -> np.ndarray:
    """Log of :func:`density_at` inside the support (avoids underflow)."""
    c0 = spin_boson_inverse(c, omega, gamma_phi, Gamma, t)
    out = spin_boson_kappa(gamma_phi, Gamma) * t + dist0.gaussian_logpdf(c0) - dist0.log_norm
    return np.where(dist0.in_support(c0), out, -np.inf)


def pullback_density(dist0: TruncatedGaussian, fld: AffineFlow, x, t: float) -> np.ndarray:
    """Density at time ``t`` transported by an arbitrary affine flow."""
    M, d = fld.flow_map(t)
    x0 = np.linalg.solve(M, (np.asarray(x, dtype=float) - d).reshape(-1, fld.n_coords).T).T
    x0 = x0.reshape(np.shape(x))
    return math.exp(fld.kappa * t) * dist0.pdf(x0)


def support_disagreement(dist0: TruncatedGaussian, omega: float, gamma_phi: float, Gamma: float,
                         c, t: float) -> np.ndarray:
    """Points where ``|S(nu) c| <= 1`` differs from the exact image of the initial support."""
    propagated = propagate_gaussian(dist0, omega, gamma_phi, Gamma, t)
    exact = dist0.in_support(spin_boson_inverse(c, omega, gamma_phi, Gamma, t))
    return propagated.in_support(c) != exact


# -- ensemble averages --------------------------------------------------------

def ensemble_mean(ens: SampleEnsemble | np.ndarray) -> np.ndarray:
    pts = ens.points if isinstance(ens, SampleEnsemble) else np.asarray(ens)
    if len(pts) == 0:
        raise ValidationError("empty ensemble")
    return pts.sum(axis=0) / len(pts)


def ensemble_covariance(ens: SampleEnsemble | np.ndarray) -> np.ndarray:
    pts = ens.points if isinstance(ens, SampleEnsemble) else np.asarray(ens)
    diff = pts - ensemble_mean(pts)
    return diff.T @ diff / (len(pts) - 1)


def ensemble_density_matrix(ens: SampleEnsemble | np.ndarray, dim: int = 2) -> np.ndarray:
    """Ensemble density matrix: the state at the mean coordinates."""
    return from_coords(ensemble_mean(ens), hermitian_basis(dim))


# -- integral continuity check ------------------------------------------------

def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` near-uniform unit vectors on the sphere (equal-area weights)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - math.sqrt(5.0)) * np.arange(n)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def sphere_quadrature(dim: int, n: int) -> tuple[np.ndarray, float]:
    """Unit normals and equal weights (total = unit-sphere measure) in 2 or 3 dimensions."""
    if dim == 3:
        return fibonacci_sphere(n), 4.0 * math.pi / n
    if dim == 2:
        phi = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1), 2.0 * math.pi / n
    raise ValidationError(f"surface quadrature needs 2 or 3 coordinates, got {dim}")


@dataclass(frozen=True)
class FluxReport:
    dPdt_mc: float
    mc_stderr: float
    surface_flux: float
    discrepancy: float
    occupancy: float
    extras: dict = field(default_factory=dict)


def boundary_flux_check(fld: AffineFlow, dist0: TruncatedGaussian, center, radius: float,
                        t: float = 0.0, n: int = 10**6, seed: int = 0, n_quad: int = 2048,
                        h: float | None = None) -> FluxReport:
    """Compare both sides of the integral continuity law on a ball (2 or 3 coordinates).

    ``dPdt_mc`` central-differences the fraction of transported samples inside
    the ball at ``t +- h``; ``surface_flux`` is ``-(surface integral of P v.n)``
    by Fibonacci-sphere quadrature using the exact pull-back density.
    ``discrepancy`` is relative to the surface value (absolute when that is 0).
    """
    center = np.asarray(center, dtype=float)
    if h is None:
        h = 0.05 / max(1.0, float(np.abs(fld.linear).max()), float(np.abs(fld.offset).max()))
    ens = sample(dist0, n, seed)

    def inside(pts):
        return np.linalg.norm(pts - center, axis=-1) <= radius

    if t >= h:
        weights = {-h: -0.5, h: 0.5}
    else:
        # second-order one-sided stencil; the distribution is undefined before t = 0
        weights = {0.0: -1.5, h: 2.0, 2 * h: -0.5}
    counts = np.zeros(n)
    for dt_, w in weights.items():
        counts += w * inside(fld.evolve(ens.points, t + dt_))
    dPdt_mc = float(counts.sum()) / (n * h)
    stderr = float(np.sqrt(np.sum(counts**2) - counts.sum() ** 2 / n) / (n * h))
    occupancy = float(np.mean(inside(fld.evolve(ens.points, t))))

    normals, weight = sphere_quadrature(fld.n_coords, n_quad)
    surf = center + radius * normals
    P = pullback_density(dist0, fld, surf, t)
    vn = np.sum(fld(surf) * normals, axis=-1)
    area = weight * radius ** (fld.n_coords - 1)
    surface_flux = -float(np.sum(P * vn) * area)

    diff = abs(dPdt_mc - surface_flux)
    discrepancy = diff / abs(surface_flux) if surface_flux != 0 else diff
    return FluxReport(dPdt_mc, stderr, surface_flux, discrepancy, occupancy,
                      {"h": h, "n": n, "n_quad": n_quad, "radius": radius, "t": t})
