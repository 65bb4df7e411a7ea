"""The averaging operator of a measure on projective observables.

For a measure mu on invertible matrices, the operator sends an observable
phi on projective space to v -> integral of phi(g.v) d mu(g).  Powers of the
operator equal the operator of the convolution powers, so the exact n-step
evaluation is organized as convolution-power-then-integrate; deduplication of
coinciding products keeps structured expansions small.  A Monte Carlo variant
samples letters from the normalized variation |mu|/||mu|| and corrects by the
complex weight ratio, which keeps the estimator unbiased for any measure of
nonzero total variation, probability or not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._cloud import canonical_rows
from .measures import AtomicMeasure, convolve_power
from .projlin import ProjectivePoint, project, projective_distance

EXACT_EXPANSION = "exact_expansion"
MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class Observable:
    """Complex observable on projective space carried as a closure."""

    eval: Callable[[ProjectivePoint], complex]
    label: str = ""
    holder_alpha_hint: Optional[float] = None

    def __call__(self, p: ProjectivePoint) -> complex:
        return self.eval(p)


@dataclass(frozen=True)
class OperatorEvaluation:
    """Value of an n-th operator power at a point."""

    value: complex
    n: int
    method: str
    stat_error: Optional[float]
    pruned_variation: float


def growth_values(mu: AtomicMeasure, points: np.ndarray) -> np.ndarray:
    """Vectorized log-growth observable: sum_i w_i log ||g_i v|| for unit rows."""
    out = np.zeros(len(points), dtype=complex)
    for g, w in mu:
        norms = np.linalg.norm(points @ g.T, axis=1)
        out += w * np.log(norms)
    return out


def growth_observable(mu: AtomicMeasure) -> Observable:
    """Average logarithmic growth of the measure's atoms at a direction.

    phi(v) = sum_i w_i log(||g_i v|| / ||v||); linear in the measure.
    """

    def _eval(p: ProjectivePoint) -> complex:
        return complex(growth_values(mu, p.vec[None, :])[0])

    return Observable(_eval, label="log-growth", holder_alpha_hint=1.0)


def apply_operator_power(
    mu: AtomicMeasure,
    phi: Observable,
    p: ProjectivePoint,
    n: int,
    weight_floor: float | None = None,
    cap: int = 1_000_000,
) -> OperatorEvaluation:
    """Exact n-th operator power at ``p`` via the convolution power of ``mu``."""
    if n < 0:
        raise ValueError("operator power needs n >= 0")
    if n == 0:
        return OperatorEvaluation(complex(phi(p)), 0, EXACT_EXPANSION, None, 0.0)
    power = convolve_power(mu, n, weight_floor=weight_floor, cap=cap)
    total = 0.0 + 0.0j
    for g, w in power.measure:
        total += w * complex(phi(project(g @ p.vec)))
    return OperatorEvaluation(total, n, EXACT_EXPANSION, None, power.dropped_variation)


def apply_operator_power_mc(
    mu: AtomicMeasure,
    phi: Observable,
    p: ProjectivePoint,
    n: int,
    samples: int,
    seed: int = 0,
) -> OperatorEvaluation:
    """Unbiased Monte Carlo estimate of the exact n-step evaluation.

    Letters are drawn from |mu| / ||mu|| and each draw carries the complex
    correction w / p(w), i.e. total variation times the weight's phase.
    Deterministic for a fixed seed.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    tv = mu.total_variation()
    if tv <= 0.0:
        raise ValueError("Monte Carlo sampler needs a measure of positive total variation")
    if n == 0:
        return OperatorEvaluation(complex(phi(p)), 0, MONTE_CARLO, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    probs = np.abs(mu.weights) / tv
    corrections = tv * mu.weights / np.abs(mu.weights)
    letters = rng.choice(mu.natoms, size=(samples, n), p=probs)
    vals = np.empty(samples, dtype=complex)
    P = np.repeat(p.vec[None, :], samples, axis=0)
    weight = np.ones(samples, dtype=complex)
    for step in range(n):
        idx = letters[:, step]
        weight *= corrections[idx]
        P = np.einsum("sde,se->sd", mu.matrices[idx], P)
        P = canonical_rows(P)
    for s in range(samples):
        vals[s] = weight[s] * complex(phi(ProjectivePoint(P[s])))
    mean = complex(vals.mean())
    spread = float(np.sqrt(np.mean(np.abs(vals - mean) ** 2)))
    return OperatorEvaluation(mean, n, MONTE_CARLO, spread / np.sqrt(samples), 0.0)


@dataclass(frozen=True)
class PairPlan:
    """Deterministic sampling plan for pairs of projective points."""

    dimension: int
    count: int = 512
    seed: int = 0
    refine_rounds: int = 2

    def base_points(self) -> np.ndarray:
        if self.dimension == 2:
            angles = np.linspace(0.0, np.pi, self.count, endpoint=False)
            return canonical_rows(np.stack([np.cos(angles), np.sin(angles)], axis=1))
        rng = np.random.default_rng(self.seed)
        return canonical_rows(rng.standard_normal((self.count, self.dimension)))

    def pairs(self):
        """(count) neighbour pairs plus (count) shuffled pairs, as index arrays."""
        P = self.base_points()
        n = len(P)
        rng = np.random.default_rng(self.seed + 1)
        i2 = rng.permutation(n)
        left = np.concatenate([np.arange(n), np.arange(n)])
        right = np.concatenate([(np.arange(n) + 1) % n, i2])
        keep = left != right
        return P, left[keep], right[keep]


def _pair_arrays(pairs):
    if isinstance(pairs, PairPlan):
        P, li, ri = pairs.pairs()
        return P[li], P[ri], pairs.refine_rounds
    V1 = np.stack([p.vec for p, _ in pairs])
    V2 = np.stack([q.vec for _, q in pairs])
    return V1, V2, 0


def holder_seminorm_lower(phi: Observable, alpha: float, pairs) -> float:
    """Certified lower bound for the alpha-Holder seminorm of ``phi``.

    Maximizes |phi(v1) - phi(v2)| / delta(v1, v2)^alpha over the pair plan and
    then refines around the maximizer by pulling the pair together.  Only a
    lower bound: the supremum over all pairs is not reachable from samples.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    V1, V2, refine_rounds = _pair_arrays(pairs)

    def quotient(v1, v2) -> float:
        p1, p2 = ProjectivePoint(v1), ProjectivePoint(v2)
        d = projective_distance(p1, p2)
        if d <= 1e-12:
            return 0.0
        return abs(complex(phi(p1)) - complex(phi(p2))) / d**alpha

    best = 0.0
    best_pair = None
    for v1, v2 in zip(V1, V2):
        q = quotient(v1, v2)
        if q > best:
            best, best_pair = q, (v1, v2)
    for _ in range(refine_rounds):
        if best_pair is None:
            break
        v1, v2 = best_pair
        for t in (0.75, 0.5, 0.25):
            mid = v1 + t * (v2 - v1)
            if np.linalg.norm(mid) < 1e-9:
                continue
            q = quotient(v1, mid)
            if q > best:
                best, best_pair = q, (v1, mid)
    return best
