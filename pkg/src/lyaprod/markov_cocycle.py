"""Finite-state Markov kernels driving matrix cocycles.

A kernel is a complex S x S weight matrix whose row ``s`` plays the role of a
complex measure on successor states; a cocycle map attaches an invertible
matrix to every transition (indexed ``A[to, from]``).  The averaging operator
acts on observables of (state, projective point):

    (Q phi)(s, v) = sum_{s'} W[s, s'] phi(s', A[s', s] . v)

Everything mirrors the single-measure machinery: exact powers expand over
state paths (organized as per-state point clouds), the averaged contraction
coefficient of n-step path words is bounded per start state through the same
singular-value integrand, and kernel perturbations K + z L with mass-zero
rows make the finite powers polynomials in z, so the limit exponent can be
Taylor-expanded by circle quadrature exactly as in the single-measure case.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ._cloud import (
    DEFAULT_MERGE_TOL,
    Cloud,
    canonical_rows,
    fit_geometric_ratio,
    merge_cloud,
    push_cloud,
)
from .contraction import (
    ContractionCertificate,
    CertificateSearchFailure,
    ProjectiveGrid,
    averaged_contraction_bound,
    letter_factor,
)
from .errors import CapacityError, ConvergenceError, NonErgodicError
from .markov_operator import MONTE_CARLO, EXACT_EXPANSION, OperatorEvaluation
from .measures import AtomicMeasure
from .projlin import ProjectivePoint, as_matrix, singular_values

_STOCHASTIC_TOL = 1e-12


class FiniteKernel:
    """Finite-state kernel with complex-weighted transition rows."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        W = np.array(weights, dtype=complex)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
            raise ValueError(f"kernel weights must be square, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("kernel weights must be finite")
        W.setflags(write=False)
        self.weights = W

    @property
    def states(self) -> int:
        return self.weights.shape[0]

    def norm(self) -> float:
        """sup over states of the row's total variation."""
        return float(np.abs(self.weights).sum(axis=1).max())

    def row_masses(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def is_stochastic(self, tol: float = _STOCHASTIC_TOL) -> bool:
        W = self.weights
        return bool(
            np.all(np.abs(W.imag) <= tol)
            and np.all(W.real >= -tol)
            and np.all(np.abs(W.real.sum(axis=1) - 1.0) <= tol)
        )

    def power(self, n: int) -> "FiniteKernel":
        if n < 1:
            raise ValueError("kernel power needs n >= 1")
        return FiniteKernel(np.linalg.matrix_power(self.weights, n))

    def __add__(self, other: "FiniteKernel") -> "FiniteKernel":
        return FiniteKernel(self.weights + other.weights)

    def __mul__(self, scalar) -> "FiniteKernel":
        return FiniteKernel(self.weights * complex(scalar))

    __rmul__ = __mul__

    def support(self, tol: float = 0.0) -> np.ndarray:
        return np.abs(self.weights) > tol

    def to_records(self):
        rows = []
        for s in range(self.states):
            rows.append(
                [
                    {"to": int(t), "w_re": float(w.real), "w_im": float(w.imag)}
                    for t, w in enumerate(self.weights[s])
                    if w != 0.0
                ]
            )
        return rows

    @staticmethod
    def from_records(states: int, rows) -> "FiniteKernel":
        W = np.zeros((states, states), dtype=complex)
        for s, row in enumerate(rows):
            for entry in row:
                t = int(entry["to"])
                if not (0 <= t < states):
                    raise ValueError(f"rows[{s}]: state index {t} out of range")
                W[s, t] += complex(entry.get("w_re", 0.0), entry.get("w_im", 0.0))
        return FiniteKernel(W)

    def __repr__(self):
        return f"FiniteKernel({self.states} states, norm {self.norm():.6g})"


def kernel_norm(K: FiniteKernel) -> float:
    return K.norm()


def iterate_kernel(K: FiniteKernel, n: int) -> FiniteKernel:
    """n-step kernel: the n-th power of the weight matrix acting on rows."""
    return K.power(n)


class CocycleMap:
    """Invertible matrix attached to every (to, from) transition."""

    __slots__ = ("matrices",)

    def __init__(self, matrices):
        arr = np.asarray(matrices, dtype=float)
        if arr.ndim != 4 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"cocycle map must be (S, S, d, d), got {arr.shape}")
        S = arr.shape[0]
        out = np.empty_like(arr)
        for to in range(S):
            for frm in range(S):
                out[to, frm] = as_matrix(arr[to, frm])
        out.setflags(write=False)
        self.matrices = out

    @property
    def states(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[2]

    def __getitem__(self, to_from):
        to, frm = to_from
        return self.matrices[to, frm]


def constant_cocycle(S: int, g) -> CocycleMap:
    g = np.asarray(g, dtype=float)
    return CocycleMap(np.broadcast_to(g, (S, S) + g.shape).copy())


def arrival_cocycle(gs) -> CocycleMap:
    """Cocycle depending only on the arrival state: A[to, frm] = gs[to]."""
    gs = [np.asarray(g, dtype=float) for g in gs]
    S = len(gs)
    d = gs[0].shape[0]
    arr = np.empty((S, S, d, d))
    for to in range(S):
        arr[to, :] = gs[to]
    return CocycleMap(arr)


@dataclass(frozen=True)
class MarkovObservable:
    """Complex observable on (state, projective point)."""

    eval: Callable[[int, ProjectivePoint], complex]
    label: str = ""

    def __call__(self, s: int, p: ProjectivePoint) -> complex:
        return self.eval(s, p)


def _phi_state_values(K: FiniteKernel, A: CocycleMap, s: int, P: np.ndarray) -> np.ndarray:
    out = np.zeros(len(P), dtype=complex)
    for t in range(K.states):
        w = K.weights[s, t]
        if w == 0.0:
            continue
        out += w * np.log(np.linalg.norm(P @ A[t, s].T, axis=1))
    return out


def growth_observable_markov(K: FiniteKernel, A: CocycleMap) -> MarkovObservable:
    """phi(s, v) = sum_t W[s, t] log ||A[t, s] v|| for unit representatives."""

    def _eval(s: int, p: ProjectivePoint) -> complex:
        return complex(_phi_state_values(K, A, s, p.vec[None, :])[0])

    return MarkovObservable(_eval, label="log-growth")


@dataclass(frozen=True)
class ErgodicityReport:
    uniformly_ergodic: bool
    stationary: Optional[np.ndarray]
    rate_rho: float
    n_star: int


def ergodicity_check(K: FiniteKernel, n_max: int = 512, tol: float = 1e-10) -> ErgodicityReport:
    """Measure the uniform total-variation decay of iterated rows.

    The kernel is uniformly ergodic when the sup over starting states of the
    row TV distance to the stationary vector drops below tolerance within
    ``n_max`` steps; the rate is fitted geometrically on the decaying part.
    """
    if not K.is_stochastic():
        raise ValueError("ergodicity check expects a stochastic kernel")
    W = K.weights.real
    vals, vecs = np.linalg.eig(W.T)
    idx = int(np.argmin(np.abs(vals - 1.0)))
    pi = vecs[:, idx].real
    pi = np.abs(pi) / np.abs(pi).sum()
    dists = []
    M = W.copy()
    n_star = n_max
    ergodic_at = None
    for n in range(1, n_max + 1):
        d = float(np.abs(M - pi[None, :]).sum(axis=1).max())
        dists.append(d)
        if d < 0.5 and n_star == n_max:
            n_star = n
        if d <= tol:
            ergodic_at = n
            break
        M = M @ W
    ergodic = ergodic_at is not None
    decaying = [x for x in dists if x > 0.0]
    rate = fit_geometric_ratio(decaying, window=min(12, len(decaying))) if len(decaying) > 1 else 0.0
    return ErgodicityReport(ergodic, pi if ergodic else pi, rate, n_star)


# ---------------------------------------------------------------------------
# path expansion


def path_measure(K: FiniteKernel, A: CocycleMap, n: int, from_state: int, cap: int = 200_000) -> AtomicMeasure:
    """Length-n path words from a start state as an atomic matrix measure.

    Weights are the products of the row weights along the path; words from
    different paths that coincide as matrices are merged.  For stochastic
    kernels merging preserves total variation (positive weights), which is
    what the contraction bounds integrate against.
    """
    if n < 1:
        raise ValueError("path measure needs n >= 1")
    S = K.states
    d = A.dim
    items = [(np.eye(d), 1.0 + 0.0j, from_state)]
    for _ in range(n):
        if len(items) * S > cap:
            raise CapacityError(f"path expansion exceeds {cap} words")
        nxt = []
        for M, w, s in items:
            for t in range(S):
                wt = K.weights[s, t]
                if wt == 0.0:
                    continue
                nxt.append((A[t, s] @ M, w * wt, t))
        items = nxt
    return AtomicMeasure([(M, w) for M, w, _ in items])


def averaged_contraction_bound_markov(
    K: FiniteKernel,
    A: CocycleMap,
    alpha: float,
    n: int = 1,
    grid: ProjectiveGrid | None = None,
    cap: int = 200_000,
) -> float:
    """Certified bound on the n-step averaged contraction coefficient.

    Takes the worst start state of the path-word measure and reuses the
    single-measure singular-value bound.
    """
    return max(
        averaged_contraction_bound(path_measure(K, A, n, s, cap), alpha, grid)
        for s in range(K.states)
    )


def edge_letter_factor(K: FiniteKernel, A: CocycleMap, alpha: float, support_of=None) -> float:
    """Max per-letter integrand factor (s1 s2 / s_d^2)^alpha over support edges."""
    mask = (support_of if support_of is not None else K).support()
    worst = 1.0
    for to in range(K.states):
        for frm in range(K.states):
            if not mask[frm, to]:
                continue
            s = singular_values(A[to, frm])
            worst = max(worst, float((s[0] * s[1] / s[-1] ** 2) ** alpha))
    return worst


def find_certificate_markov(
    K: FiniteKernel,
    A: CocycleMap,
    alpha_grid=(0.05, 0.1, 0.25, 0.5, 1.0),
    n_max: int = 6,
    grid: ProjectiveGrid | None = None,
    cap: int = 200_000,
):
    """Certificate search over n-step path words, worst start state.

    The total-variation radius of the returned certificate is in the kernel
    norm (sup-row TV): perturbing the rows by at most that much keeps the
    relaxed coefficient below one, by the same binomial block expansion as in
    the single-measure case with per-letter factors taken over support edges.
    """
    best_val, best_alpha, best_n = np.inf, None, None
    for n in range(1, n_max + 1):
        try:
            measures = [path_measure(K, A, n, s, cap) for s in range(K.states)]
        except CapacityError:
            return CertificateSearchFailure(
                best_alpha, best_n, best_val, reason=f"path capacity reached at length {n}"
            )
        for alpha in alpha_grid:
            val = max(averaged_contraction_bound(m, alpha, grid) for m in measures)
            if val < best_val:
                best_val, best_alpha, best_n = val, float(alpha), n
            if val < 1.0:
                blocks = [1.0]
                for j in range(1, n):
                    blocks.append(
                        max(
                            averaged_contraction_bound(path_measure(K, A, j, s, cap), alpha, grid)
                            for s in range(K.states)
                        )
                    )
                blocks.append(val)
                gamma = edge_letter_factor(K, A, alpha)
                kappa = val
                theta = kappa ** (-1.0 / n)
                cert = ContractionCertificate(
                    alpha=float(alpha),
                    n0=n,
                    kappa=kappa,
                    theta=theta,
                    C=max(blocks[:-1]) * theta**n,
                    tv_radius=0.0,
                    kappa_margin=(1.0 + kappa) / 2.0,
                    block_bounds=tuple(blocks),
                    letter_factor=gamma,
                )
                return replace(cert, tv_radius=cert.tv_radius_for(gamma))
    return CertificateSearchFailure(best_alpha, best_n, best_val)


# ---------------------------------------------------------------------------
# operator iteration


def _markov_growth_run(
    K: FiniteKernel,
    A: CocycleMap,
    s0: int,
    v0: np.ndarray,
    tol: float,
    rate_floor: float | None,
    merge_tol: float,
    cap: int,
    max_steps: int,
):
    S = K.states
    clouds: list[Cloud | None] = [None] * S
    clouds[s0] = Cloud.from_vector(v0)

    def value() -> complex:
        total = 0.0 + 0.0j
        for s, cl in enumerate(clouds):
            if cl is None or cl.size == 0:
                continue
            total += complex(np.dot(cl.weights, _phi_state_values(K, A, s, cl.points)))
        return total

    values = [value()]
    increments: list[float] = []
    n = 0
    max_cloud = 1
    while True:
        new: list[Cloud | None] = [None] * S
        budget = sum(cl.size for cl in clouds if cl is not None)
        if budget * S > cap:
            raise CapacityError(f"per-state clouds exceed {cap} points")
        for s, cl in enumerate(clouds):
            if cl is None or cl.size == 0:
                continue
            for t in range(S):
                wt = K.weights[s, t]
                if wt == 0.0:
                    continue
                pushed, _ = push_cloud(
                    cl, A.matrices[t, s][None, :, :], np.array([wt]), merge_tol, cap
                )
                if new[t] is None:
                    new[t] = pushed
                else:
                    P = np.concatenate([new[t].points, pushed.points])
                    Wc = np.concatenate([new[t].weights, pushed.weights])
                    new[t], _ = merge_cloud(P, Wc, merge_tol)
        clouds = new
        max_cloud = max(max_cloud, sum(cl.size for cl in clouds if cl is not None))
        n += 1
        values.append(value())
        increments.append(abs(values[-1] - values[-2]))
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
                tail = ", ".join(f"{x:.3e}" for x in increments[-5:])
                raise ConvergenceError(
                    f"no empirical contraction after {n} steps; last increments: {tail}"
                )
        if n >= max_steps:
            raise ConvergenceError(
                f"no convergence within {max_steps} steps; last increment {increments[-1]:.3e}"
            )
    return values, float(err), max_cloud


def apply_operator_power_markov(
    K: FiniteKernel,
    A: CocycleMap,
    phi: MarkovObservable,
    state: int,
    point: ProjectivePoint,
    n: int,
    mode: str = "exact",
    samples: int = 1024,
    seed: int = 0,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 200_000,
) -> OperatorEvaluation:
    """n-th operator power at (state, point), exact or by path sampling."""
    if n < 0:
        raise ValueError("operator power needs n >= 0")
    S = K.states
    if not (0 <= state < S):
        raise ValueError(f"state {state} out of range")
    if mode == "exact":
        if n == 0:
            return OperatorEvaluation(complex(phi(state, point)), 0, EXACT_EXPANSION, None, 0.0)
        items = [(point.vec.copy(), 1.0 + 0.0j, state)]
        for _ in range(n):
            if len(items) * S > cap:
                raise CapacityError(f"path expansion exceeds {cap} points")
            nxt = []
            for v, w, s in items:
                for t in range(S):
                    wt = K.weights[s, t]
                    if wt == 0.0:
                        continue
                    u = A[t, s] @ v
                    nxt.append((u / np.linalg.norm(u), w * wt, t))
            items = nxt
        total = sum(w * complex(phi(s, ProjectivePoint(v))) for v, w, s in items)
        return OperatorEvaluation(complex(total), n, EXACT_EXPANSION, None, 0.0)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if n == 0:
        return OperatorEvaluation(complex(phi(state, point)), 0, MONTE_CARLO, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    absW = np.abs(K.weights)
    row_tv = absW.sum(axis=1)
    vals = np.empty(samples, dtype=complex)
    for r in range(samples):
        s = state
        v = point.vec.copy()
        w = 1.0 + 0.0j
        for _ in range(n):
            p = absW[s] / row_tv[s]
            t = int(rng.choice(S, p=p))
            w *= K.weights[s, t] / p[t]
            v = A[t, s] @ v
            v = v / np.linalg.norm(v)
            s = t
        vals[r] = w * complex(phi(s, ProjectivePoint(v)))
    mean = complex(vals.mean())
    spread = float(np.sqrt(np.mean(np.abs(vals - mean) ** 2)))
    return OperatorEvaluation(mean, n, MONTE_CARLO, spread / np.sqrt(samples), 0.0)


def _edge_variation_bound(K: FiniteKernel, A: CocycleMap) -> float:
    """Lipschitz bound of the Markov log-growth observable, worst state."""
    worst = 0.0
    for s in range(K.states):
        tot = 0.0
        for t in range(K.states):
            w = abs(K.weights[s, t])
            if w == 0.0:
                continue
            sv = singular_values(A[t, s])
            tot += w * sv[0] / sv[-1]
        worst = max(worst, tot)
    return float(np.pi / 2.0 * worst)


def lyapunov_markov(
    K: FiniteKernel,
    A: CocycleMap,
    tol: float = 1e-8,
    cert: ContractionCertificate | None = None,
    v0=None,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
    max_steps: int = 20_000,
    n_max_ergodic: int = 512,
) -> "LyapunovResult":
    """Top exponent of a Markov-driven cocycle by operator iteration.

    Requires a uniformly ergodic stochastic kernel; the iteration is run from
    every starting state and the spread of the limits is reported.  When a
    certificate is supplied it is used as a worst-case rate hypothesis for
    the empirical tail estimate.
    """
    from .lyapunov import OPERATOR_ITERATION, LyapunovResult

    if not K.is_stochastic():
        raise ValueError("exponent of a Markov cocycle needs a stochastic kernel")
    report = ergodicity_check(K, n_max=n_max_ergodic)
    if not report.uniformly_ergodic:
        raise NonErgodicError(
            f"kernel is not uniformly ergodic within {n_max_ergodic} steps "
            f"(n_star={report.n_star}, rate~{report.rate_rho:.3g})"
        )
    d = A.dim
    base = np.asarray(v0, dtype=float) if v0 is not None else np.ones(d) / np.sqrt(d)
    rate_floor = 1.0 / cert.theta if cert is not None else None
    limits = []
    errs = []
    steps = []
    traces = None
    cloud_max = 0.0
    for s in range(K.states):
        values, err, mc = _markov_growth_run(
            K, A, s, base, tol, rate_floor, merge_tol, cap, max_steps
        )
        limits.append(values[-1])
        errs.append(err)
        steps.append(len(values) - 1)
        cloud_max = max(cloud_max, mc)
        if s == 0:
            traces = tuple(values)
    spread = max(abs(l - limits[0]) for l in limits)
    diagnostics = {
        "state_spread": spread,
        "cloud_max": float(cloud_max),
        "stationary_rate": report.rate_rho,
        "limit_re": limits[0].real,
        "limit_im": limits[0].imag,
        "certified": 0.0,
    }
    return LyapunovResult(
        L1=limits[0].real,
        n_used=steps[0],
        error_bound=errs[0],
        method=OPERATOR_ITERATION,
        diagnostics=diagnostics,
        trace=traces,
    )


def lyapunov_markov_mc(
    K: FiniteKernel,
    A: CocycleMap,
    n: int,
    trials: int,
    seed: int = 0,
    rescale_every: int = 32,
) -> "LyapunovResult":
    """Monte Carlo exponent over sampled Markov paths started stationary."""
    from .lyapunov import MONTE_CARLO as MC_METHOD
    from .lyapunov import LyapunovResult

    if not K.is_stochastic():
        raise ValueError("Monte Carlo exponent needs a stochastic kernel")
    report = ergodicity_check(K)
    pi = report.stationary
    rng = np.random.default_rng(seed)
    W = K.weights.real
    d = A.dim
    cum_rows = np.cumsum(W, axis=1)
    cum_rows[:, -1] = 1.0
    cum_pi = np.cumsum(pi)
    cum_pi[-1] = 1.0
    states = np.searchsorted(cum_pi, rng.random(trials), side="right")
    M = np.broadcast_to(np.eye(d), (trials, d, d)).copy()
    acc = np.zeros(trials)
    for step in range(n):
        nxt = np.empty(trials, dtype=int)
        u = rng.random(trials)
        for r in range(trials):
            nxt[r] = np.searchsorted(cum_rows[states[r]], u[r], side="right")
        M = np.matmul(A.matrices[nxt, states], M)
        states = nxt
        if (step + 1) % rescale_every == 0:
            scale = np.sqrt(np.einsum("tij,tij->t", M, M))
            acc += np.log(scale)
            M /= scale[:, None, None]
    top = np.linalg.svd(M, compute_uv=False)[:, 0]
    vals = (acc + np.log(top)) / n
    mean = float(vals.mean())
    stat = float(vals.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    cond = 1.0
    mask = K.support()
    for to in range(K.states):
        for frm in range(K.states):
            if mask[frm, to]:
                s = singular_values(A[to, frm])
                cond = max(cond, float(s[0] / s[-1]))
    bias = 2.0 * np.log(cond) / n if cond > 1.0 else 0.0
    return LyapunovResult(
        L1=mean,
        n_used=n,
        error_bound=stat + bias,
        method=MC_METHOD,
        diagnostics={"stat_error": stat, "bias_allowance": bias, "trials": float(trials)},
    )


# ---------------------------------------------------------------------------
# kernel perturbations


def _markov_limit(K_z: FiniteKernel, A: CocycleMap, tol, rate_floor, merge_tol, cap, max_steps):
    masses = K_z.row_masses()
    if np.abs(masses - 1.0).max() > 1e-10:
        raise ValueError("perturbed kernel rows left the mass-one affine space")
    values, _, _ = _markov_growth_run(
        K_z, A, 0, np.ones(A.dim) / np.sqrt(A.dim), tol, rate_floor, merge_tol, cap, max_steps
    )
    return complex(values[-1]), len(values) - 1


def _probe_kernel_radius(K: FiniteKernel, L: FiniteKernel, base_gap: float) -> float:
    """Largest circle radius keeping the subdominant eigenvalue margin.

    Used for 1-dimensional cocycles, where convergence is driven purely by
    the spectral gap of the perturbed weight matrix; deterministic doubling
    and bisection probe on circle samples.
    """
    target = 1.0 - base_gap / 2.0

    def ok(r: float) -> bool:
        for t in range(8):
            z = r * np.exp(2j * np.pi * t / 8)
            vals = np.linalg.eigvals(K.weights + z * L.weights)
            vals = vals[np.argsort(-np.abs(vals))]
            if len(vals) > 1 and np.abs(vals[1]) > target:
                return False
        return True

    r = 0.25 / max(L.norm(), 1e-12)
    while not ok(r) and r > 1e-9:
        r /= 2.0
    grow = 0
    while ok(2.0 * r) and grow < 20:
        r *= 2.0
        grow += 1
    return r


@dataclass(frozen=True)
class KernelTaylorSetup:
    radius: float
    certified_radius: float
    rate_floor: Optional[float]


def _kernel_radius_setup(K, A, L, radius, cert) -> KernelTaylorSetup:
    tv_l = L.norm()
    if tv_l <= 0.0:
        r = radius if radius is not None else 1.0
        return KernelTaylorSetup(r, float("inf"), None)
    if A.dim == 1:
        rep = ergodicity_check(K)
        vals = np.sort(np.abs(np.linalg.eigvals(K.weights.real)))[::-1]
        gap = 1.0 - (vals[1] if len(vals) > 1 else 0.0)
        r_max = _probe_kernel_radius(K, L, gap)
        r = radius if radius is not None else 0.5 * r_max
        floor = 1.0 - gap / 2.0
        return KernelTaylorSetup(r, r_max, floor)
    if cert is None:
        found = find_certificate_markov(K, A)
        if isinstance(found, CertificateSearchFailure):
            raise ValueError(
                "no contraction certificate for the kernel; reduce to a dominant "
                f"invariant section first (best value {found.best_value:.4g})"
            )
        cert = found
    gamma = edge_letter_factor(K, A, cert.alpha)
    r_max = cert.tv_radius_for(gamma) / tv_l
    r = radius if radius is not None else 0.5 * r_max
    if r * tv_l > cert.tv_radius_for(gamma) * (1.0 + 1e-12):
        raise ValueError(f"radius {r:.3e} leaves the certified neighbourhood (max {r_max:.3e})")
    theta_v, _ = cert.perturbed_rate(gamma, r * tv_l)
    return KernelTaylorSetup(r, r_max, 1.0 / theta_v)


def kernel_taylor(
    K: FiniteKernel,
    A: CocycleMap,
    L: FiniteKernel,
    order: int,
    radius: float | None = None,
    tol: float = 1e-6,
    cert: ContractionCertificate | None = None,
    support_mode: bool = False,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
    max_steps: int = 20_000,
):
    """Taylor coefficients of z -> exponent of the kernel K + z L.

    Every row of ``L`` must have mass zero so the perturbed rows keep mass
    one.  In ``support_mode`` the perturbation must also stay inside the
    support of the base kernel row by row, matching the restricted families
    for which reducible kernels still vary analytically.  The pipeline is the
    circle quadrature of the single-measure case.
    """
    from .analyticity import TaylorReport

    if order < 1:
        raise ValueError("order must be >= 1")
    if not K.is_stochastic():
        raise ValueError("Taylor extraction expects a stochastic base kernel")
    if np.abs(L.row_masses()).max() > 1e-12:
        raise ValueError("perturbation kernel rows must have mass zero")
    if support_mode:
        bad = np.abs(L.weights) > 0.0
        missing = bad & ~K.support(1e-15)
        if missing.any():
            s, t = np.argwhere(missing)[0]
            raise ValueError(f"support mode: L has an edge ({s} -> {t}) outside supp K")
    setup = _kernel_radius_setup(K, A, L, radius, cert)
    m = max(16, 4 * order)
    inner_tol = tol / 10.0
    angles = 2.0 * np.pi * np.arange(m) / m
    zs = setup.radius * np.exp(1j * angles)
    vals = np.empty(m, dtype=complex)
    n_used = 0
    for i, z in enumerate(zs):
        try:
            vals[i], steps = _markov_limit(
                K + L * z, A, inner_tol, setup.rate_floor, merge_tol, cap, max_steps
            )
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"circle point z = {z:.6g} failed to converge: {exc}"
            ) from exc
        n_used = max(n_used, steps)
    fft = np.fft.fft(vals) / m
    js = np.arange(order + 1)
    coeffs = fft[: order + 1] / setup.radius**js
    holdout = min(8, m)
    resid = 0.0
    for t in range(holdout):
        z = setup.radius * np.exp(1j * (angles[t] + np.pi / m))
        direct, _ = _markov_limit(K + L * z, A, inner_tol, setup.rate_floor, merge_tol, cap, max_steps)
        recon = complex(np.polyval(coeffs[::-1], z))
        resid = max(resid, abs(recon - direct))
    return TaylorReport(
        coefficients=coeffs,
        circle_radius=setup.radius,
        n_used=n_used,
        reconstruction_residual=float(resid),
        certified_radius=float(setup.certified_radius),
    )


# ---------------------------------------------------------------------------
# invariant sections


@dataclass(frozen=True)
class SectionReport:
    status: str  # "none" | "found" | "inconclusive"
    sections: list  # each an (S, d) array of unit line representatives
    exponents: Optional[list]
    quasi_irreducible: Optional[bool]
    free_choice: bool = False
    notes: str = ""


def _shortest_cycle(edges_out, start: int, S: int):
    """BFS for a support cycle through ``start``; returns the state path."""
    from collections import deque

    parents = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in edges_out[s]:
            if t == start:
                path = [start, s]
                while parents[path[-1]] is not None:
                    path.append(parents[path[-1]])
                return list(reversed(path))
            if t not in parents:
                parents[t] = s
                queue.append(t)
    return None


def _cycle_word(A: CocycleMap, path) -> np.ndarray:
    M = np.eye(A.dim)
    for i in range(len(path) - 1):
        M = A[path[i + 1], path[i]] @ M
    M = A[path[0], path[-1]] @ M
    return M


def invariant_section_check(K: FiniteKernel, A: CocycleMap, tol: float = 1e-9) -> SectionReport:
    """Exact line-section search for d = 2 (and 1-dim sections for d >= 3).

    Candidate lines per state come from eigendirections of support-cycle
    words; transfer constraints along support edges propagate and verify each
    assignment.  If all cycle words are projectively scalar, any consistent
    propagated assignment works and the report flags the free choice.  For
    d >= 3 only one-dimensional sections are decided; when none is found the
    result is inconclusive because higher-dimensional sections are not
    enumerated.
    """
    S, d = K.states, A.dim
    mask = K.support(1e-15)
    edges_out = [list(np.nonzero(mask[s])[0]) for s in range(S)]
    from .lyapunov import _real_eigenlines, _is_scalar

    candidates: list[Optional[list]] = []
    any_concrete = False
    for s in range(S):
        cyc = _shortest_cycle(edges_out, s, S)
        if cyc is None:
            candidates.append(None)
            continue
        M = _cycle_word(A, cyc)
        if _is_scalar(M, tol):
            candidates.append(None)
            continue
        lines = _real_eigenlines(M, tol)
        candidates.append(lines)
        any_concrete = True
        if not lines:
            return SectionReport("none", [], None, True, notes=f"state {s}: cycle word has no real eigendirection")

    def _propagate(assign):
        assign = dict(assign)
        changed = True
        while changed:
            changed = False
            for s in list(assign):
                for t in edges_out[s]:
                    v = A[t, s] @ assign[s]
                    v = v / np.linalg.norm(v)
                    if t not in assign:
                        assign[t] = v
                        changed = True
        return assign

    def _verify(assign) -> bool:
        if len(assign) < S:
            for s in range(S):
                assign.setdefault(s, np.eye(d)[:, 0])
        for s in range(S):
            for t in edges_out[s]:
                v = A[t, s] @ assign[s]
                v = v / np.linalg.norm(v)
                if _wedge_pair(v, assign[t]) > tol:
                    return False
        return True

    found: list[np.ndarray] = []
    free_choice = False
    if not any_concrete:
        seed_state = 0
        probe = [np.eye(d)[:, 0], np.eye(d)[:, min(1, d - 1)]]
        for u in probe:
            assign = _propagate({seed_state: u})
            if _verify(assign):
                found.append(np.stack([assign[s] for s in range(S)]))
        free_choice = len(found) > 0
    else:
        concrete_states = [s for s in range(S) if candidates[s] is not None]
        root = concrete_states[0]
        for u in candidates[root]:
            assign = _propagate({root: u})
            ok = True
            for s in concrete_states:
                if s in assign and candidates[s]:
                    if all(_wedge_pair(assign[s], c) > tol for c in candidates[s]):
                        ok = False
                        break
            if ok and _verify(assign):
                sec = np.stack([assign[s] / np.linalg.norm(assign[s]) for s in range(S)])
                if all(max(_wedge_pair(sec[s], f[s]) for s in range(S)) > tol for f in found):
                    found.append(sec)

    if not found:
        status = "none" if d == 2 else "inconclusive"
        notes = "" if d == 2 else "1-dim sections ruled out; higher dimensions not enumerated"
        return SectionReport(status, [], None, True if d == 2 else None, notes=notes)

    exponents = None
    quasi = None
    if K.is_stochastic():
        rep = ergodicity_check(K)
        if rep.uniformly_ergodic:
            pi = rep.stationary
            exponents = []
            for sec in found:
                val = 0.0
                for s in range(S):
                    for t in edges_out[s]:
                        val += pi[s] * K.weights[s, t].real * float(
                            np.log(np.linalg.norm(A[t, s] @ sec[s]))
                        )
                exponents.append(val)
            try:
                full = lyapunov_markov(K, A, tol=1e-6).L1
                quasi = bool(all(e >= full - 1e-6 for e in exponents))
            except (ConvergenceError, NonErgodicError):
                quasi = None
    return SectionReport("found", found, exponents, quasi, free_choice=free_choice)


def _wedge_pair(u: np.ndarray, v: np.ndarray) -> float:
    s = float(np.dot(u, u) * np.dot(v, v) - np.dot(u, v) ** 2)
    return float(np.sqrt(max(s, 0.0)))


def reduce_to_dominant_section(K: FiniteKernel, A: CocycleMap, tol: float = 1e-9):
    """Restrict the cocycle to the invariant section with the top exponent.

    Returns (A_restricted, section, exponent), where the restricted cocycle is
    1-dimensional: its (to, from) entry is the scalar by which A maps the
    section line at ``from`` onto the line at ``to``.  Transitions outside the
    kernel support carry a placeholder scalar 1, they are never weighted.
    """
    report = invariant_section_check(K, A, tol)
    if report.status != "found" or not report.sections:
        raise ValueError(f"no invariant section available ({report.status}): {report.notes}")
    if report.exponents is None:
        raise ValueError("section exponents unavailable (kernel not ergodic stochastic)")
    best = int(np.argmax(report.exponents))
    sec = report.sections[best]
    S = K.states
    mask = K.support(1e-15)
    arr = np.ones((S, S, 1, 1))
    for to in range(S):
        for frm in range(S):
            if mask[frm, to]:
                image = A[to, frm] @ sec[frm]
                sign = float(np.sign(np.dot(image, sec[to])) or 1.0)
                arr[to, frm, 0, 0] = sign * float(np.linalg.norm(image))
    return CocycleMap(arr), sec, float(report.exponents[best])
