"""Top Lyapunov exponent estimators and invariant-subspace analysis.

Three routes to the top exponent of a random product of matrices:

* operator iteration: push a point mass on projective space through the
  averaging operator of the measure and evaluate the log-growth observable;
  the iterates converge to the exponent, with a certified geometric tail when
  a contraction certificate is supplied and an empirically fitted tail
  otherwise.  Works for complex measures of mass one, whose limit value is
  the analytic continuation of the exponent off the probability simplex.
* Monte Carlo: average (1/n) log ||g_{n-1} ... g_0|| over sampled words.
* stationary average: evolve a particle cloud to the stationary distribution
  on projective space and average the log-growth observable over it.

The second exponent comes from the top exponent of the second-exterior-power
pushforward, cross-checked at d = 2 against the determinant average.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._cloud import (
    DEFAULT_MERGE_TOL,
    Cloud,
    canonical_rows,
    fit_geometric_ratio,
    prune_cloud,
    push_cloud,
)
from .contraction import ContractionCertificate
from .errors import ConvergenceError, ReductionError
from .markov_operator import growth_values
from .measures import (
    TAG_MASS_ONE_COMPLEX,
    TAG_PROBABILITY,
    AtomicMeasure,
    support_within,
)
from .projlin import singular_values, wedge2_matrix

OPERATOR_ITERATION = "operator_iteration"
MONTE_CARLO = "monte_carlo"
FURSTENBERG = "furstenberg_formula"

IRREDUCIBLE = "irreducible"
REDUCIBLE = "reducible"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LyapunovResult:
    L1: float
    n_used: int
    error_bound: float
    method: str
    diagnostics: dict
    trace: tuple = ()


def observable_variation_bound(mu: AtomicMeasure) -> float:
    """Upper bound on the Lipschitz seminorm of the log-growth observable.

    The derivative of v -> log ||g v|| along the unit sphere is at most
    s1(g)/s_d(g), and projective distance compares to arc length within a
    factor pi/2.
    """
    tot = 0.0
    for g, w in mu:
        s = singular_values(g)
        tot += abs(w) * s[0] / s[-1]
    return float(np.pi / 2.0 * tot)


def _default_base_point(d: int) -> np.ndarray:
    return np.ones(d) / np.sqrt(d)


def _extra_base_points(d: int, count: int) -> list[np.ndarray]:
    pts = []
    for i in range(count):
        rng = np.random.default_rng(987654321 + 1009 * i)
        pts.append(canonical_rows(rng.standard_normal((1, d)))[0])
    return pts


def _run_growth(
    mu: AtomicMeasure,
    v0: np.ndarray,
    tol: float,
    cert: Optional[ContractionCertificate],
    merge_tol: float,
    cap: int,
    max_steps: int,
    weight_floor: float | None,
    rate_floor: float | None,
):
    """Iterate the averaging operator on the log-growth observable at v0."""
    probability = mu.mass_class().tag == TAG_PROBABILITY
    certified = cert is not None and probability
    if certified and weight_floor is not None:
        raise ValueError("pruning is incompatible with certified stopping")
    vphi = observable_variation_bound(mu)
    tv = mu.total_variation()
    d = mu.dim

    cloud = Cloud.from_vector(v0)
    values = [complex(np.dot(cloud.weights, growth_values(mu, cloud.points)))]
    increments: list[float] = []
    moved_total = 0.0
    dropped_total = 0.0
    max_cloud = 1

    if certified:
        c_eff = cert.C * vphi * tv
        theta = cert.theta
        tail0 = c_eff * theta / (theta - 1.0)
        if tail0 <= tol / 2.0:
            n_target = 0
        else:
            n_target = int(np.ceil(np.log(2.0 * tail0 / tol) / np.log(theta)))
        n_target = min(max(n_target, 1), max_steps)
    else:
        n_target = None

    n = 0
    while True:
        cloud, moved = push_cloud(cloud, mu.matrices, mu.weights, merge_tol, cap)
        moved_total += moved
        if weight_floor is not None:
            cloud, dropped = prune_cloud(cloud, weight_floor)
            dropped_total += dropped
        max_cloud = max(max_cloud, cloud.size)
        n += 1
        values.append(complex(np.dot(cloud.weights, growth_values(mu, cloud.points))))
        increments.append(abs(values[-1] - values[-2]))

        if certified:
            if n >= n_target:
                tail = c_eff * theta ** (-n) * theta / (theta - 1.0)
                slack = (
                    moved_total
                    * vphi
                    * cert.C
                    * (np.sqrt(d) * merge_tol) ** cert.alpha
                    * theta
                    / (theta - 1.0)
                )
                err = tail + slack
                break
        else:
            if n >= 2 and increments[-1] == 0.0 and increments[-2] == 0.0:
                err = 0.0
                break
            ratio = fit_geometric_ratio(increments)
            if rate_floor is not None:
                ratio = max(ratio, rate_floor)
            if n >= 5 and increments[-1] < tol * (1.0 - ratio):
                err = increments[-1] / (1.0 - ratio)
                break
            if n >= 48 and len(increments) >= 24:
                recent = float(np.median(increments[-12:]))
                before = float(np.median(increments[-24:-12]))
                if recent > tol and recent >= 0.995 * before and ratio >= 0.999:
                    tail_str = ", ".join(f"{x:.3e}" for x in increments[-5:])
                    raise ConvergenceError(
                        f"no empirical contraction after {n} steps; last increments: {tail_str}"
                    )
        if n >= max_steps:
            raise ConvergenceError(
                f"no convergence within {max_steps} steps; last increment {increments[-1]:.3e}"
            )

    diagnostics = {
        "last_increment": increments[-1] if increments else 0.0,
        "fitted_ratio": fit_geometric_ratio(increments) if increments else 0.0,
        "cloud_max": float(max_cloud),
        "merged_mass": moved_total,
        "dropped_variation": dropped_total,
        "certified": 1.0 if certified else 0.0,
    }
    return values, float(err), diagnostics


def lyapunov_iterative(
    mu: AtomicMeasure,
    tol: float = 1e-8,
    cert: Optional[ContractionCertificate] = None,
    v0=None,
    extra_base_points: int = 3,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
    max_steps: int = 20_000,
    weight_floor: float | None = None,
    rate_floor: float | None = None,
) -> LyapunovResult:
    """Top exponent by operator iteration from one or more base directions.

    Requires a measure of mass one.  For probability measures with a
    certificate the stopping point is chosen so the certified geometric tail
    (including merge-transport slack) is below ``tol``; otherwise stopping is
    empirical with a fitted decay ratio, optionally floored by ``rate_floor``
    when a certificate supplies a worst-case rate hypothesis.

    The run is repeated from ``extra_base_points`` quasi-random directions and
    the spread of the limits is reported in the diagnostics; under
    quasi-irreducibility the limit is base-point independent, so a large
    spread flags a violated hypothesis.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    tag = mu.mass_class().tag
    if tag not in (TAG_PROBABILITY, TAG_MASS_ONE_COMPLEX):
        raise ValueError(f"operator iteration needs a mass-one measure, got {tag}")
    d = mu.dim
    base = np.asarray(v0, dtype=float) if v0 is not None else _default_base_point(d)
    if cert is not None and rate_floor is None and tag == TAG_MASS_ONE_COMPLEX:
        rate_floor = 1.0 / cert.theta

    values, err, diagnostics = _run_growth(
        mu, base, tol, cert, merge_tol, cap, max_steps, weight_floor, rate_floor
    )
    limit = values[-1]

    spread = 0.0
    if extra_base_points > 0 and d > 1:
        for extra in _extra_base_points(d, extra_base_points):
            vals_e, _, _ = _run_growth(
                mu, extra, tol, cert, merge_tol, cap, max_steps, weight_floor, rate_floor
            )
            spread = max(spread, abs(vals_e[-1] - limit))
    diagnostics["base_point_spread"] = spread
    diagnostics["limit_re"] = limit.real
    diagnostics["limit_im"] = limit.imag

    return LyapunovResult(
        L1=limit.real,
        n_used=len(values) - 1,
        error_bound=err,
        method=OPERATOR_ITERATION,
        diagnostics=diagnostics,
        trace=tuple(values),
    )


def lyapunov_monte_carlo(
    mu: AtomicMeasure,
    n: int,
    trials: int,
    seed: int = 0,
    rescale_every: int = 32,
) -> LyapunovResult:
    """Furstenberg-Kesten sampling: mean of (1/n) log ||word|| over words.

    The running product is rescaled every ``rescale_every`` steps so condition
    numbers up to ~1e8 cannot overflow doubles.  The error bound adds the
    usual subadditivity bias allowance 2 log(max condition) / n to the
    standard error.
    """
    if mu.mass_class().tag != TAG_PROBABILITY:
        raise ValueError("Monte Carlo exponent needs a probability measure")
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    d = mu.dim
    rng = np.random.default_rng(seed)
    probs = np.abs(mu.weights.real)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    M = np.broadcast_to(np.eye(d), (trials, d, d)).copy()
    acc = np.zeros(trials)
    for step in range(n):
        idx = np.searchsorted(cum, rng.random(trials), side="right")
        M = np.matmul(mu.matrices[idx], M)
        if (step + 1) % rescale_every == 0:
            scale = np.sqrt(np.einsum("tij,tij->t", M, M))
            acc += np.log(scale)
            M /= scale[:, None, None]
    top = np.linalg.svd(M, compute_uv=False)[:, 0]
    vals = (acc + np.log(top)) / n
    mean = float(vals.mean())
    stat = float(vals.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    cond = max(float(singular_values(g)[0] / singular_values(g)[-1]) for g, _ in mu)
    bias_allowance = 2.0 * np.log(cond) / n if cond > 1.0 else 0.0
    return LyapunovResult(
        L1=mean,
        n_used=n,
        error_bound=stat + bias_allowance,
        method=MONTE_CARLO,
        diagnostics={"stat_error": stat, "bias_allowance": bias_allowance, "trials": float(trials)},
    )


def lyapunov_stationary(
    mu: AtomicMeasure,
    particles: int = 1024,
    burn_in: int = 128,
    iters: int = 512,
    seed: int = 0,
) -> LyapunovResult:
    """Stationary-measure average of the log-growth observable.

    A particle cloud on projective space is evolved by random projective
    actions; after burn-in the observable is averaged over particles and
    iterations.  The standard error uses batch means, which absorbs most of
    the autocorrelation of the chain.
    """
    if mu.mass_class().tag != TAG_PROBABILITY:
        raise ValueError("stationary average needs a probability measure")
    d = mu.dim
    rng = np.random.default_rng(seed)
    P = canonical_rows(rng.standard_normal((particles, d)))
    probs = np.abs(mu.weights.real)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    records = np.empty(iters)
    for it in range(burn_in + iters):
        idx = np.searchsorted(cum, rng.random(particles), side="right")
        P = canonical_rows(np.einsum("pde,pe->pd", mu.matrices[idx], P))
        if it >= burn_in:
            records[it - burn_in] = float(growth_values(mu, P).real.mean())
    estimate = float(records.mean())
    nbatch = min(16, iters)
    batches = np.array_split(records, nbatch)
    bmeans = np.array([b.mean() for b in batches])
    stat = float(bmeans.std(ddof=1) / np.sqrt(nbatch)) if nbatch > 1 else 0.0
    return LyapunovResult(
        L1=estimate,
        n_used=iters,
        error_bound=stat,
        method=FURSTENBERG,
        diagnostics={"stat_error": stat, "particles": float(particles), "burn_in": float(burn_in)},
    )


@dataclass(frozen=True)
class SecondExponentResult:
    L1_plus_L2: float
    L2: float
    gap: float
    det_average: float
    top: LyapunovResult
    wedge: LyapunovResult


def second_exponent(mu: AtomicMeasure, tol: float = 1e-8) -> SecondExponentResult:
    """Second exponent via the second-exterior-power pushforward.

    The top exponent of g -> wedge2(g) equals L1 + L2.  At d = 2 the wedge
    matrices are the 1x1 determinants and the route must agree with the
    determinant average; disagreement beyond the combined tolerance raises.
    """
    if mu.mass_class().tag != TAG_PROBABILITY:
        raise ValueError("second exponent needs a probability measure")
    top = lyapunov_iterative(mu, tol)
    wedge_mu = mu.map_atoms(wedge2_matrix)
    wedge = lyapunov_iterative(wedge_mu, tol)
    det_avg = float(
        sum(w.real * np.log(abs(np.linalg.det(g))) for g, w in mu)
    )
    if mu.dim == 2:
        combined = wedge.error_bound + 1e-9
        if abs(wedge.L1 - det_avg) > combined:
            raise ConvergenceError(
                f"exterior-power route {wedge.L1!r} disagrees with determinant average "
                f"{det_avg!r} beyond {combined:.3e}"
            )
    l1_plus_l2 = wedge.L1
    l2 = l1_plus_l2 - top.L1
    return SecondExponentResult(l1_plus_l2, l2, top.L1 - l2, det_avg, top, wedge)


# ---------------------------------------------------------------------------
# invariant subspaces


@dataclass(frozen=True)
class ReducibilityReport:
    status: str
    invariant_subspaces: list
    restricted_L1: Optional[list]
    quasi_irreducible: Optional[bool]
    all_lines: bool = False
    notes: str = ""


def _is_scalar(g: np.ndarray, tol: float) -> bool:
    d = g.shape[0]
    c = np.trace(g) / d
    return bool(np.max(np.abs(g - c * np.eye(d))) <= tol * max(np.max(np.abs(g)), 1.0))


def _real_eigenlines(g: np.ndarray, tol: float) -> list[np.ndarray]:
    vals, vecs = np.linalg.eig(g)
    scale = float(np.max(np.abs(vals)))
    lines = []
    for i, lam in enumerate(vals):
        if abs(lam.imag) <= 1e-9 * max(scale, 1.0):
            v = vecs[:, i].real
            nrm = np.linalg.norm(v)
            if nrm > tol:
                lines.append(canonical_rows(v[None, :] / nrm)[0])
    return lines


def _line_invariant(g: np.ndarray, u: np.ndarray, tol: float) -> bool:
    gu = g @ u
    nrm = np.linalg.norm(gu)
    return _wedge(u, gu / nrm) <= tol


def _wedge(u: np.ndarray, v: np.ndarray) -> float:
    s = float(np.dot(u, u) * np.dot(v, v) - np.dot(u, v) ** 2)
    return float(np.sqrt(max(s, 0.0)))


def _subspace_invariant(atoms: np.ndarray, B: np.ndarray, tol: float) -> bool:
    P = B @ B.T
    for g in atoms:
        gb = g @ B
        res = gb - P @ gb
        if np.linalg.norm(res) > tol * max(np.linalg.norm(gb), 1.0):
            return False
    return True


def restrict_measure(mu: AtomicMeasure, basis: np.ndarray, tol: float = 1e-9) -> AtomicMeasure:
    """Restrict every atom to an invariant subspace given by orthonormal columns."""
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    if B.shape[0] == mu.dim and B.ndim == 2 and B.shape[1] <= B.shape[0]:
        pass
    else:
        B = B.T
    if not _subspace_invariant(mu.matrices, B, tol):
        raise ValueError("basis does not span an invariant subspace of every atom")
    return AtomicMeasure([(B.T @ g @ B, w) for g, w in mu], mu.dedup_tolerance)


def quotient_measure(mu: AtomicMeasure, basis: np.ndarray) -> AtomicMeasure:
    """Quotient action on the orthogonal complement of an invariant subspace."""
    B = np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    d = mu.dim
    full, _ = np.linalg.qr(np.concatenate([B, np.eye(d)], axis=1))
    Q = full[:, B.shape[1] : d]
    return AtomicMeasure([(Q.T @ g @ Q, w) for g, w in mu], mu.dedup_tolerance)


def _line_exponent(mu: AtomicMeasure, u: np.ndarray) -> float:
    return float(sum(w.real * np.log(np.linalg.norm(g @ u)) for g, w in mu))


def reducibility_check(
    mu: AtomicMeasure,
    tol: float = 1e-9,
    quasi_tol: float = 1e-6,
    word_cap: int | None = None,
) -> ReducibilityReport:
    """Search for common invariant subspaces of the atoms.

    d = 2 is decided exactly by intersecting the atoms' real eigendirections.
    For d >= 3 the linear span of words in the atoms is generated up to a
    length cap; a full d^2-dimensional span certifies irreducibility, and a
    proper stabilized span triggers an eigenspace-based search for a common
    invariant subspace, with ``inconclusive`` as the honest fallback.

    Restricted exponents are reported for probability measures; a measure is
    quasi-irreducible when no invariant subspace has a restricted exponent
    below the measure's own top exponent (within ``quasi_tol``).
    """
    if mu.natoms == 0:
        raise ValueError("empty measure")
    d = mu.dim
    probability = mu.mass_class().tag == TAG_PROBABILITY
    if d == 1:
        exps = [_line_exponent(mu, np.ones(1))] if probability else None
        return ReducibilityReport(
            REDUCIBLE, [np.ones((1, 1))], exps, True if probability else None, all_lines=True
        )

    atoms = mu.matrices
    nonscalar = [g for g in atoms if not _is_scalar(g, tol)]
    if d == 2:
        if not nonscalar:
            subs = [np.eye(2)[:, :1], np.eye(2)[:, 1:]]
            exps = [_line_exponent(mu, s[:, 0]) for s in subs] if probability else None
            return ReducibilityReport(
                REDUCIBLE,
                subs,
                exps,
                True if probability else None,
                all_lines=True,
                notes="all atoms scalar; every line is invariant",
            )
        candidates = _real_eigenlines(nonscalar[0], tol)
        verified = [
            u for u in candidates if all(_line_invariant(g, u, tol) for g in atoms)
        ]
        # dedupe projectively
        lines: list[np.ndarray] = []
        for u in verified:
            if all(_wedge(u, v) > tol for v in lines):
                lines.append(u)
        if not lines:
            return ReducibilityReport(IRREDUCIBLE, [], None, True)
        subs = [u[:, None] for u in lines]
        return _finish_report(mu, subs, probability, quasi_tol)

    # d >= 3: word-span generation (Burnside-style certificate)
    cap = word_cap or 2 * d * d
    basis: list[np.ndarray] = []

    def _try_add(m: np.ndarray) -> bool:
        v = m.reshape(-1)
        v = v / np.linalg.norm(v)
        for b in basis:
            v = v - np.dot(b, v) * b
        nrm = np.linalg.norm(v)
        if nrm > 1e-10:
            basis.append(v / nrm)
            return True
        return False

    _try_add(np.eye(d))
    frontier = [g for g in atoms]
    for g in atoms:
        _try_add(g)
    length = 1
    while frontier and len(basis) < d * d and length < cap:
        new_frontier = []
        for m in frontier:
            for g in atoms:
                prod = g @ m
                if _try_add(prod):
                    new_frontier.append(prod)
        frontier = new_frontier
        length += 1
    if len(basis) == d * d:
        return ReducibilityReport(IRREDUCIBLE, [], None, True, notes="word span is full")

    # proper algebra: hunt invariant subspaces through eigenspaces of
    # a few deterministic algebra elements
    rng = np.random.default_rng(31337)
    candidates: list[np.ndarray] = []
    elements = [np.sum([rng.standard_normal() * b.reshape(d, d) for b in basis], axis=0) for _ in range(4)]
    elements.extend(atoms)
    for m in elements:
        vals, vecs = np.linalg.eig(m)
        for i, lam in enumerate(vals):
            if abs(lam.imag) <= 1e-9 * max(1.0, abs(lam)):
                v = vecs[:, i].real
                if np.linalg.norm(v) > tol:
                    candidates.append((v / np.linalg.norm(v))[:, None])
            elif lam.imag > 0:
                re, im = vecs[:, i].real, vecs[:, i].imag
                plane = np.stack([re, im], axis=1)
                q, r = np.linalg.qr(plane)
                if abs(r[1, 1]) > tol:
                    candidates.append(q)
    verified_subs: list[np.ndarray] = []
    for B in candidates:
        if B.shape[1] >= d:
            continue
        if _subspace_invariant(atoms, B, tol):
            if all(
                not (V.shape[1] == B.shape[1] and np.linalg.norm(V @ V.T - B @ B.T) <= 1e-8)
                for V in verified_subs
            ):
                verified_subs.append(B)
    if verified_subs:
        return _finish_report(mu, verified_subs, probability, quasi_tol)
    return ReducibilityReport(
        INCONCLUSIVE,
        [],
        None,
        None,
        notes="word span is proper but no invariant subspace was certified",
    )


def _finish_report(mu, subs, probability, quasi_tol):
    if not probability:
        return ReducibilityReport(REDUCIBLE, subs, None, None)
    exps = []
    for B in subs:
        if B.shape[1] == 1:
            exps.append(_line_exponent(mu, B[:, 0]))
        else:
            sub_mu = restrict_measure(mu, B)
            exps.append(lyapunov_iterative(sub_mu, 1e-6, extra_base_points=0).L1)
    try:
        full = lyapunov_iterative(mu, 1e-6, extra_base_points=0).L1
        quasi = bool(all(e >= full - quasi_tol for e in exps))
    except ConvergenceError:
        quasi = None
    return ReducibilityReport(REDUCIBLE, subs, exps, quasi)


# ---------------------------------------------------------------------------
# reduction plans for full-support perturbation families


@dataclass(frozen=True)
class ReductionStep:
    kind: str  # "restrict" | "quotient"
    basis: np.ndarray  # orthonormal columns in the coordinates of that stage
    L_restricted: float
    L_quotient: float


@dataclass(frozen=True)
class ReductionPlan:
    steps: tuple
    measure: AtomicMeasure  # the dominant irreducible (or 1-dim) block
    notes: str = ""

    def apply(self, mu: AtomicMeasure) -> AtomicMeasure:
        """Replay the reduction chain on a support-compatible measure."""
        out = mu
        for step in self.steps:
            if step.kind == "restrict":
                out = restrict_measure(out, step.basis)
            else:
                out = quotient_measure(out, step.basis)
        return out

    @property
    def identity(self) -> bool:
        return not self.steps


def full_support_reduction(
    mu: AtomicMeasure,
    direction: AtomicMeasure | None = None,
    tol: float = 1e-9,
) -> ReductionPlan:
    """Reduce to the dominant invariant block for support-preserving families.

    When perturbations cannot enlarge the support, every invariant subspace of
    the base measure stays invariant for the perturbed ones, and locally the
    top exponent equals the restricted exponent on the dominant block.  The
    chain restricts (or quotients) one invariant subspace at a time, always
    following the block with the larger exponent, and stops at an irreducible
    block; subspace dimensions strictly decrease so it terminates.
    """
    if direction is not None and not support_within(direction, mu):
        raise ValueError("perturbation direction has atoms outside the base support")
    if mu.mass_class().tag != TAG_PROBABILITY:
        raise ValueError("reduction plans need a probability base measure")

    steps: list[ReductionStep] = []
    current = mu
    while True:
        report = reducibility_check(current, tol=tol)
        if report.status == IRREDUCIBLE:
            break
        if report.status == INCONCLUSIVE:
            raise ReductionError(
                "reducibility is inconclusive; refusing to pick a reduction chain. " + report.notes
            )
        if current.dim == 1:
            break
        if report.all_lines:
            # scalar block: every line carries the same exponent
            B = np.eye(current.dim)[:, :1]
            exp = _line_exponent(current, B[:, 0])
            steps.append(ReductionStep("restrict", B, exp, exp))
            current = restrict_measure(current, B)
            break
        B = report.invariant_subspaces[0]
        sub = restrict_measure(current, B)
        quot = quotient_measure(current, B)
        l_sub = _block_exponent(sub)
        l_quot = _block_exponent(quot)
        if l_sub >= l_quot - 1e-9:
            steps.append(ReductionStep("restrict", B, l_sub, l_quot))
            current = sub
        else:
            steps.append(ReductionStep("quotient", B, l_sub, l_quot))
            current = quot
        if current.dim == 1:
            break
    return ReductionPlan(tuple(steps), current)


def _block_exponent(mu: AtomicMeasure) -> float:
    if mu.dim == 1:
        return _line_exponent(mu, np.ones(1))
    return lyapunov_iterative(mu, 1e-6, extra_base_points=0).L1
