"""Weighted point clouds on projective space (internal).

Iterating the averaging operator of a finitely supported measure pushes a
point mass through all length-n words of the atoms.  Naively that is m^n
points; here the cloud is kept as canonical unit rows with complex weights
and nearby points are merged on a tolerance grid, which collapses structured
systems (commuting atoms, invariant lines, strongly contracting dynamics) to
polynomial size.  Merging transports weight by at most sqrt(d) * merge_tol in
projective distance per event; the cumulative transported mass is tracked so
callers can account for it in error bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .projlin import SIGN_TOL

DEFAULT_MERGE_TOL = 1e-12


def canonical_rows(P: np.ndarray) -> np.ndarray:
    """Normalize rows to unit norm and the leading-sign convention."""
    norms = np.linalg.norm(P, axis=1)
    P = P / norms[:, None]
    sign = np.zeros(len(P))
    undecided = np.ones(len(P), dtype=bool)
    for j in range(P.shape[1]):
        col = P[:, j]
        neg = undecided & (col < -SIGN_TOL)
        pos = undecided & (col > SIGN_TOL)
        sign[neg] = -1.0
        sign[pos] = 1.0
        undecided &= ~(neg | pos)
        if not undecided.any():
            break
    sign[undecided] = 1.0  # numerically zero vectors cannot happen (unit rows)
    return P * sign[:, None] + 0.0  # +0.0 normalizes -0.0


@dataclass
class Cloud:
    """Finitely supported distribution on projective space."""

    points: np.ndarray  # (N, d) canonical unit rows
    weights: np.ndarray  # (N,) complex

    @staticmethod
    def from_vector(v, weight=1.0) -> "Cloud":
        P = canonical_rows(np.asarray(v, dtype=float)[None, :])
        return Cloud(P, np.array([weight], dtype=complex))

    @property
    def size(self) -> int:
        return len(self.weights)

    def total_mass(self) -> complex:
        return complex(self.weights.sum())

    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())


def merge_cloud(P: np.ndarray, W: np.ndarray, merge_tol: float):
    """Merge points sharing a tolerance-grid cell; returns (cloud, moved_mass).

    ``moved_mass`` is the total |weight| that changed representative, for the
    caller's transport-error accounting.  Point order is by first occurrence,
    so the result does not depend on key magnitudes.
    """
    if merge_tol <= 0.0 or len(W) <= 1:
        return Cloud(P, W), 0.0
    keys = np.round(P / merge_tol) * merge_tol + 0.0  # +0.0 kills -0.0
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    w = np.zeros(len(first), dtype=complex)
    np.add.at(w, inverse, W)
    moved = float(np.abs(W).sum() - np.abs(W[first]).sum())
    order = np.argsort(first, kind="stable")
    return Cloud(P[first[order]], w[order]), max(moved, 0.0)


def push_cloud(
    cloud: Cloud,
    matrices: np.ndarray,
    atom_weights: np.ndarray,
    merge_tol: float = DEFAULT_MERGE_TOL,
    cap: int = 2_000_000,
):
    """One operator step: apply every atom to every point.

    Returns (new cloud, moved_mass).
    """
    k = len(atom_weights)
    if cloud.size * k > cap:
        raise CapacityError(
            f"point cloud would exceed {cap} points; "
            "raise the cap, coarsen merge_tol, or use a pruning floor"
        )
    # (k, N, d): atom i applied to every row
    moved = np.einsum("kde,ne->knd", matrices, cloud.points)
    P = canonical_rows(moved.reshape(-1, cloud.points.shape[1]))
    W = (atom_weights[:, None] * cloud.weights[None, :]).reshape(-1)
    return merge_cloud(P, W, merge_tol)


def prune_cloud(cloud: Cloud, weight_floor: float):
    """Drop points below the weight floor; returns (cloud, dropped_tv)."""
    keep = np.abs(cloud.weights) >= weight_floor
    if keep.all():
        return cloud, 0.0
    dropped = float(np.abs(cloud.weights[~keep]).sum())
    return Cloud(cloud.points[keep], cloud.weights[keep]), dropped


def fit_geometric_ratio(increments, window: int = 6) -> float:
    """Least-squares geometric decay ratio of the trailing increments.

    Returns a value in (0, 1); defaults to 0.5 when the data is degenerate
    (zeros or too short) and is clipped at 0.999 so tail sums stay finite.
    """
    xs = [x for x in increments[-window:] if x > 0.0]
    if len(xs) < 2:
        return 0.5
    logs = np.log(xs)
    t = np.arange(len(logs))
    slope = np.polyfit(t, logs, 1)[0]
    return float(min(max(np.exp(slope), 1e-6), 0.999))
