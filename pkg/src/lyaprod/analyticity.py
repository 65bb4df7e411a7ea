"""Analytic dependence of the top exponent on the driving measure.

A perturbation family mu_z = mu + z * nu with nu of total mass zero stays in
the affine space of mass-one measures for every complex z.  Finite operator
powers evaluated at a point are polynomials in z (each letter of a length-n
word draws from mu or from z * nu, and the log-growth observable contributes
one more linear slot when it is perturbed along with the measure), and the
iteration limit is a locally uniform limit of such polynomials, hence
holomorphic on the contraction neighbourhood.  This module makes all of that
executable: exact polynomial coefficients by tagged expansion, a degree check
by circle interpolation, Taylor coefficients of the limit by discrete Cauchy
integrals, and a mean-value residual as the working witness of holomorphy.

Two observable conventions are supported.  ``perturbed`` evaluates the
observable of mu_z itself, so real z reproduces the genuine exponent pipeline
of mu + z nu and polynomial degrees are at most n + 1.  ``frozen`` keeps the
center's observable, with degrees at most n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._cloud import DEFAULT_MERGE_TOL, Cloud, canonical_rows, merge_cloud, push_cloud
from .contraction import ContractionCertificate, letter_factor
from .errors import CapacityError, ConvergenceError
from .markov_operator import growth_values
from .measures import TAG_PROBABILITY, AtomicMeasure, convolve_power
from .lyapunov import lyapunov_iterative

PERTURBED = "perturbed"
FROZEN = "frozen"

_MASS_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class PerturbationDirection:
    """Mass-zero measure used as a complex perturbation direction."""

    measure: AtomicMeasure
    normalized: bool = False

    def __post_init__(self):
        if self.measure.natoms and abs(self.measure.mass()) >= _MASS_ZERO_TOL:
            raise ValueError(
                f"perturbation directions must have mass 0, got {self.measure.mass():.3e}"
            )
        if self.normalized and abs(self.measure.total_variation() - 1.0) > _MASS_ZERO_TOL:
            raise ValueError("normalized direction must have total variation 1")


def perturbation_direction(nu: AtomicMeasure, normalize: bool = False) -> PerturbationDirection:
    """Wrap a mass-zero measure, optionally rescaling to total variation one."""
    if normalize:
        tv = nu.total_variation()
        if tv <= 0.0:
            raise ValueError("cannot normalize the zero direction")
        return PerturbationDirection(nu * (1.0 / tv), normalized=True)
    return PerturbationDirection(nu)


@dataclass(frozen=True)
class PerturbationPolynomial:
    """Value of an n-th operator power along mu + z nu, as a polynomial in z."""

    coefficients: np.ndarray  # ascending degree, complex
    n: int
    dropped_variation: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        keep = len(coeffs)
        while keep > 1 and abs(coeffs[keep - 1]) < 1e-12:
            keep -= 1
        object.__setattr__(self, "coefficients", coeffs[:keep])

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, z: complex) -> complex:
        return complex(np.polyval(self.coefficients[::-1], z))


def _merge_two(a: Cloud | None, b: Cloud | None, merge_tol: float):
    if a is None:
        return b, 0.0
    if b is None:
        return a, 0.0
    P = np.concatenate([a.points, b.points])
    W = np.concatenate([a.weights, b.weights])
    return merge_cloud(P, W, merge_tol)


def operator_power_polynomial(
    mu: AtomicMeasure,
    direction: PerturbationDirection,
    n: int,
    v0,
    observable_mode: str = PERTURBED,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
) -> PerturbationPolynomial:
    """Exact coefficients of z -> (operator power of mu + z nu applied n times).

    The coefficient of z^j collects every length-n word with exactly j letters
    drawn from the direction, times (under the perturbed convention) the extra
    linear slot contributed by the observable of mu_z.
    """
    if n < 0:
        raise ValueError("operator power needs n >= 0")
    if observable_mode not in (PERTURBED, FROZEN):
        raise ValueError(f"unknown observable mode {observable_mode!r}")
    nu = direction.measure
    base = np.asarray(v0, dtype=float) if not hasattr(v0, "vec") else v0.vec
    ladder: dict[int, Cloud] = {0: Cloud.from_vector(base)}
    for _ in range(n):
        new: dict[int, Cloud] = {}
        budget = sum(c.size for c in ladder.values())
        if budget * (mu.natoms + max(nu.natoms, 1)) > cap:
            raise CapacityError(f"tagged expansion exceeds {cap} points")
        for j, cl in ladder.items():
            pushed_mu, _ = push_cloud(cl, mu.matrices, mu.weights, merge_tol, cap)
            new[j], _ = _merge_two(new.get(j), pushed_mu, merge_tol)
            if nu.natoms:
                pushed_nu, _ = push_cloud(cl, nu.matrices, nu.weights, merge_tol, cap)
                new[j + 1], _ = _merge_two(new.get(j + 1), pushed_nu, merge_tol)
        ladder = new
    degree = n + 1 if observable_mode == PERTURBED else n
    coeffs = np.zeros(degree + 1, dtype=complex)
    for j, cl in ladder.items():
        base_vals = complex(np.dot(cl.weights, growth_values(mu, cl.points)))
        coeffs[j] += base_vals
        if observable_mode == PERTURBED and nu.natoms:
            coeffs[j + 1] += complex(np.dot(cl.weights, growth_values(nu, cl.points)))
    return PerturbationPolynomial(coeffs, n)


def _direct_power_value(
    mu_z: AtomicMeasure,
    phi_measure: AtomicMeasure,
    v0: np.ndarray,
    n: int,
    cap: int,
) -> complex:
    if n == 0:
        cloud = Cloud.from_vector(v0)
    else:
        power = convolve_power(mu_z, n, cap=cap).measure
        pts = np.einsum("kde,e->kd", power.matrices, v0 / np.linalg.norm(v0))
        cloud = Cloud(canonical_rows(pts), power.weights.copy())
    return complex(np.dot(cloud.weights, growth_values(phi_measure, cloud.points)))


@dataclass(frozen=True)
class DegreeReport:
    coefficients: np.ndarray
    spurious_ratio: float
    poly_match_error: float
    node_count: int
    observable_mode: str

    @property
    def interpolated_degree(self) -> int:
        mags = np.abs(self.coefficients)
        top = float(mags.max())
        idx = np.nonzero(mags > 1e-8 * max(top, 1e-300))[0]
        return int(idx.max()) if len(idx) else 0


def degree_check(
    mu: AtomicMeasure,
    direction: PerturbationDirection,
    n: int,
    v0,
    nodes: int | None = None,
    observable_mode: str = PERTURBED,
    cap: int = 1_000_000,
) -> DegreeReport:
    """Interpolate the operator power at roots of unity by direct arithmetic.

    Evaluates the power at ``nodes`` unit-circle values of z by forming the
    measure mu + z nu outright (convolution powers, no tagged expansion),
    recovers polynomial coefficients by the discrete Fourier sum, and checks
    that coefficients above the structural degree carry no mass and that the
    tagged expansion reproduces the interpolated coefficients.
    """
    limit_degree = n + 1 if observable_mode == PERTURBED else n
    m = nodes if nodes is not None else max(limit_degree + 4, 8)
    if m < limit_degree + 2:
        raise ValueError(f"need at least {limit_degree + 2} nodes for degree {limit_degree}")
    base = np.asarray(v0, dtype=float) if not hasattr(v0, "vec") else v0.vec
    zs = np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.empty(m, dtype=complex)
    nu = direction.measure
    for i, z in enumerate(zs):
        mu_z = mu + nu * z
        phi_measure = mu_z if observable_mode == PERTURBED else mu
        vals[i] = _direct_power_value(mu_z, phi_measure, base, n, cap)
    coeffs = np.fft.fft(vals) / m
    mags = np.abs(coeffs)
    top = float(mags.max())
    if not np.isfinite(top) or top == 0.0:
        spurious = 0.0
    else:
        tail = mags[limit_degree + 1 :]
        spurious = float(tail.max() / top) if len(tail) else 0.0
    poly = operator_power_polynomial(mu, direction, n, base, observable_mode, cap=cap)
    padded = np.zeros(m, dtype=complex)
    padded[: len(poly.coefficients)] = poly.coefficients
    match = float(np.abs(padded - coeffs).max())
    return DegreeReport(coeffs, spurious, match, m, observable_mode)


@dataclass(frozen=True)
class TaylorReport:
    """Taylor data of the exponent's holomorphic extension along a direction."""

    coefficients: np.ndarray
    circle_radius: float
    n_used: int
    reconstruction_residual: float
    certified_radius: float


def _limit_value(mu_z: AtomicMeasure, tol: float, rate_floor, merge_tol, cap, max_steps):
    if abs(mu_z.mass() - 1.0) > 1e-10:
        raise ValueError("perturbed measure left the mass-one affine space")
    res = lyapunov_iterative(
        mu_z,
        tol,
        cert=None,
        extra_base_points=0,
        merge_tol=merge_tol,
        cap=cap,
        max_steps=max_steps,
        rate_floor=rate_floor,
    )
    return complex(res.diagnostics["limit_re"], res.diagnostics["limit_im"]), res.n_used


def _radius_setup(mu, direction, radius, cert):
    """Default circle radius and worst-case rate hypothesis from a certificate."""
    nu = direction.measure
    tv_nu = nu.total_variation()
    if mu.dim == 1 or nu.natoms == 0:
        r = radius if radius is not None else 1.0 / max(tv_nu, 1.0)
        return r, float("inf"), None
    if cert is None:
        raise ValueError("Taylor extraction above dimension 1 needs a contraction certificate")
    gamma = max(letter_factor(nu, cert.alpha), letter_factor(mu, cert.alpha))
    r_max = cert.tv_radius_for(gamma) / tv_nu
    r = radius if radius is not None else 0.5 * r_max
    if r * tv_nu > cert.tv_radius_for(gamma) * (1.0 + 1e-12):
        raise ValueError(
            f"radius {r:.3e} leaves the certified neighbourhood (max {r_max:.3e})"
        )
    theta_v, _ = cert.perturbed_rate(gamma, r * tv_nu)
    return r, r_max, 1.0 / theta_v


def taylor_coefficients(
    mu: AtomicMeasure,
    direction: PerturbationDirection,
    order: int,
    radius: float | None = None,
    tol: float = 1e-6,
    cert: ContractionCertificate | None = None,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
    max_steps: int = 20_000,
) -> TaylorReport:
    """Taylor coefficients of z -> limit exponent of mu + z nu at z = 0.

    Circle values of the limit are produced by operator iteration on the
    complex measures mu + z_i nu at tolerance ``tol / 10``; coefficients come
    from the uniform circle quadrature c_j = mean_i f(z_i) z_i^{-j}.  The node
    count is at least four times the order so aliasing shows up in the
    reconstruction residual, which is measured on held-out circle points.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if mu.mass_class().tag != TAG_PROBABILITY:
        raise ValueError("Taylor extraction expects a probability center")
    r, r_max, rate_floor = _radius_setup(mu, direction, radius, cert)
    m = max(16, 4 * order)
    inner_tol = tol / 10.0
    nu = direction.measure
    angles = 2.0 * np.pi * np.arange(m) / m
    zs = r * np.exp(1j * angles)
    vals = np.empty(m, dtype=complex)
    n_used = 0
    for i, z in enumerate(zs):
        try:
            vals[i], steps = _limit_value(
                mu + nu * z, inner_tol, rate_floor, merge_tol, cap, max_steps
            )
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"circle point z = {z:.6g} failed to converge "
                f"(likely outside the contraction region): {exc}"
            ) from exc
        n_used = max(n_used, steps)
    fft = np.fft.fft(vals) / m
    js = np.arange(order + 1)
    coeffs = fft[: order + 1] / r**js

    holdout = min(8, m)
    resid = 0.0
    for t in range(holdout):
        z = r * np.exp(1j * (angles[t] + np.pi / m))
        direct, _ = _limit_value(mu + nu * z, inner_tol, rate_floor, merge_tol, cap, max_steps)
        recon = complex(np.polyval(coeffs[::-1], z))
        resid = max(resid, abs(recon - direct))
    return TaylorReport(
        coefficients=coeffs,
        circle_radius=r,
        n_used=n_used,
        reconstruction_residual=float(resid),
        certified_radius=float(r_max),
    )


def holomorphy_residual(
    mu: AtomicMeasure,
    direction: PerturbationDirection,
    radius: float | None = None,
    samples: int = 8,
    tol: float = 1e-6,
    cert: ContractionCertificate | None = None,
    nodes: int = 64,
    seed: int = 0,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
    max_steps: int = 20_000,
) -> float:
    """Cauchy mean-value consistency of the limit on interior points.

    Reconstructs interior values from circle values by the discrete Cauchy
    integral and returns the worst relative mismatch against direct
    evaluation.  A small residual is the executable witness that the limit
    is holomorphic on the disk.
    """
    r, _, rate_floor = _radius_setup(mu, direction, radius, cert)
    nu = direction.measure
    inner_tol = tol / 10.0
    zs = r * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    circle = np.array(
        [
            _limit_value(mu + nu * z, inner_tol, rate_floor, merge_tol, cap, max_steps)[0]
            for z in zs
        ]
    )
    rng = np.random.default_rng(seed)
    worst = 0.0
    scale = max(1.0, float(np.abs(circle).max()))
    for _ in range(samples):
        w = 0.6 * r * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        direct, _ = _limit_value(mu + nu * w, inner_tol, rate_floor, merge_tol, cap, max_steps)
        recon = complex(np.mean(circle * zs / (zs - w)))
        worst = max(worst, abs(recon - direct) / scale)
    return float(worst)
