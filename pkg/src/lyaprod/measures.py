"""Finitely supported complex measures on invertible matrices.

An :class:`AtomicMeasure` is a list of (matrix, complex weight) atoms.  Atoms
whose matrices coincide up to ``dedup_tolerance`` (max entrywise distance) are
merged at construction by summing their weights, so that convolution of
structured measures (commuting atoms, repeated products) stays polynomial in
size rather than exploding combinatorially.

Merging is grid-based: matrices are snapped to a tolerance grid and equal keys
are merged, with an additional strict pairwise pass when the measure is small.
Two atoms closer than the tolerance but straddling a grid boundary can survive
as separate atoms in very large measures; this never changes any integral by
more than the tolerance itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .projlin import as_matrix

DEFAULT_DEDUP_TOL = 1e-12
_STRICT_MERGE_LIMIT = 512

MASS_TOL = 1e-12

TAG_PROBABILITY = "probability"
TAG_MASS_ONE_COMPLEX = "mass_one_complex"
TAG_MASS_ZERO = "mass_zero"
TAG_OTHER = "other"


@dataclass(frozen=True)
class MassClass:
    """Classification of a measure by its total mass and weight signs."""

    tag: str
    mass: complex


def _grid_merge(mats: np.ndarray, weights: np.ndarray, tol: float):
    keys = np.round(mats.reshape(len(mats), -1) / tol) * tol + 0.0  # +0.0 kills -0.0
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    w = np.zeros(len(first), dtype=complex)
    np.add.at(w, inverse, weights)
    return mats[np.sort(first)], _reorder(w, first), first


def _reorder(w: np.ndarray, first: np.ndarray) -> np.ndarray:
    # np.unique sorts by key; re-sort groups by first occurrence so the atom
    # order is input order, independent of key magnitudes.
    order = np.argsort(first, kind="stable")
    return w[order]


def _strict_merge(mats: np.ndarray, weights: np.ndarray, tol: float):
    kept_m: list[np.ndarray] = []
    kept_w: list[complex] = []
    for m, w in zip(mats, weights):
        merged = False
        for i, r in enumerate(kept_m):
            if np.max(np.abs(m - r)) <= tol:
                kept_w[i] += w
                merged = True
                break
        if not merged:
            kept_m.append(m)
            kept_w.append(w)
    return np.array(kept_m), np.array(kept_w, dtype=complex)


class AtomicMeasure:
    """Complex measure supported on finitely many invertible matrices."""

    __slots__ = ("matrices", "weights", "dedup_tolerance")

    def __init__(self, atoms, dedup_tolerance: float = DEFAULT_DEDUP_TOL, _skip_checks=False):
        self.dedup_tolerance = float(dedup_tolerance)
        if _skip_checks:
            mats, weights = atoms
        else:
            pairs = [(as_matrix(m), complex(w)) for m, w in atoms]
            if pairs:
                dims = {m.shape[0] for m, _ in pairs}
                if len(dims) != 1:
                    raise ValueError(f"mixed matrix dimensions in one measure: {sorted(dims)}")
                mats = np.stack([m for m, _ in pairs])
                weights = np.array([w for _, w in pairs], dtype=complex)
            else:
                mats = np.zeros((0, 0, 0))
                weights = np.zeros(0, dtype=complex)
        if len(mats):
            mats, weights, _ = _grid_merge(mats, weights, self.dedup_tolerance)
            if len(mats) <= _STRICT_MERGE_LIMIT:
                mats, weights = _strict_merge(mats, weights, self.dedup_tolerance)
            keep = np.abs(weights) > 0.0
            mats, weights = mats[keep], weights[keep]
        mats = np.ascontiguousarray(mats)
        mats.setflags(write=False)
        weights.setflags(write=False)
        self.matrices = mats
        self.weights = weights

    # -- basic views ---------------------------------------------------

    @property
    def natoms(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        if self.natoms == 0:
            raise ValueError("empty measure has no dimension")
        return self.matrices.shape[1]

    def __iter__(self):
        return iter(zip(self.matrices, self.weights))

    def __repr__(self):
        if self.natoms == 0:
            return "AtomicMeasure(zero)"
        return f"AtomicMeasure({self.natoms} atoms, dim {self.dim}, mass {self.mass():.6g})"

    # -- scalars ---------------------------------------------------------

    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def mass(self) -> complex:
        return complex(np.sum(self.weights))

    def mass_class(self) -> MassClass:
        m = self.mass()
        if abs(m - 1.0) <= MASS_TOL:
            real_nonneg = bool(
                np.all(np.abs(self.weights.imag) <= MASS_TOL)
                and np.all(self.weights.real >= -MASS_TOL)
            )
            return MassClass(TAG_PROBABILITY if real_nonneg else TAG_MASS_ONE_COMPLEX, m)
        if abs(m) <= MASS_TOL:
            return MassClass(TAG_MASS_ZERO, m)
        return MassClass(TAG_OTHER, m)

    # -- linear structure -------------------------------------------------

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        if self.natoms == 0:
            return other
        if other.natoms == 0:
            return self
        mats = np.concatenate([self.matrices, other.matrices])
        w = np.concatenate([self.weights, other.weights])
        return AtomicMeasure((mats, w), self.dedup_tolerance, _skip_checks=True)

    def __mul__(self, scalar) -> "AtomicMeasure":
        w = self.weights * complex(scalar)
        return AtomicMeasure((self.matrices, w), self.dedup_tolerance, _skip_checks=True)

    __rmul__ = __mul__

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return self + (other * (-1.0))

    def map_atoms(self, f) -> "AtomicMeasure":
        """Push the measure forward under a matrix map ``g -> f(g)``."""
        if self.natoms == 0:
            return self
        return AtomicMeasure(
            [(f(m), w) for m, w in self], self.dedup_tolerance
        )

    # -- serialization ------------------------------------------------------

    def to_records(self):
        return [
            {
                "matrix": [[float(x) for x in row] for row in m],
                "weight_re": float(w.real),
                "weight_im": float(w.imag),
            }
            for m, w in self
        ]

    @staticmethod
    def from_records(records, dedup_tolerance: float = DEFAULT_DEDUP_TOL) -> "AtomicMeasure":
        atoms = [
            (r["matrix"], complex(r.get("weight_re", 0.0), r.get("weight_im", 0.0)))
            for r in records
        ]
        return AtomicMeasure(atoms, dedup_tolerance)


def dirac(matrix, weight=1.0) -> AtomicMeasure:
    return AtomicMeasure([(matrix, weight)])


def convolve(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """Convolution: atoms are all products g h, weights multiply.

    Bilinear in both arguments; the total variation of the result is at most
    the product of the factors' total variations.
    """
    if mu.natoms == 0 or nu.natoms == 0:
        return AtomicMeasure([])
    prods = np.einsum("aij,bjk->abik", mu.matrices, nu.matrices)
    prods = prods.reshape(-1, mu.dim, mu.dim)
    w = np.multiply.outer(mu.weights, nu.weights).reshape(-1)
    return AtomicMeasure((prods, w), mu.dedup_tolerance, _skip_checks=True)


@dataclass(frozen=True)
class PowerResult:
    """Convolution power plus an upper bound on the variation lost to pruning."""

    measure: AtomicMeasure
    dropped_variation: float


def convolve_power(
    mu: AtomicMeasure,
    n: int,
    weight_floor: float | None = None,
    cap: int = 1_000_000,
) -> PowerResult:
    """n-fold convolution of ``mu`` with itself.

    With ``weight_floor`` set, atoms with |weight| below the floor are dropped
    after every convolution step and the reported ``dropped_variation`` bounds
    the total-variation distance to the exact power (each drop at stage j is
    propagated through the remaining n - j convolutions at worst-case growth).
    """
    if n < 1:
        raise ValueError("convolution power needs n >= 1")
    if mu.natoms == 0:
        return PowerResult(mu, 0.0)
    tv = mu.total_variation()
    acc = mu
    dropped = 0.0
    for step in range(1, n):
        if weight_floor is None and acc.natoms * mu.natoms > cap:
            raise CapacityError(
                f"convolution power would exceed {cap} atoms at step {step + 1}; "
                "set a weight_floor pruning policy or raise the cap"
            )
        acc = convolve(acc, mu)
        if weight_floor is not None:
            keep = np.abs(acc.weights) >= weight_floor
            lost = float(np.sum(np.abs(acc.weights[~keep])))
            if lost > 0.0:
                dropped += lost * tv ** (n - 1 - step)
                acc = AtomicMeasure(
                    (acc.matrices[keep], acc.weights[keep]),
                    acc.dedup_tolerance,
                    _skip_checks=True,
                )
            if acc.natoms > cap:
                raise CapacityError(
                    f"convolution power exceeds {cap} atoms even after pruning at floor {weight_floor}"
                )
    return PowerResult(acc, dropped)


def support_within(mu: AtomicMeasure, nu: AtomicMeasure, tol: float | None = None) -> bool:
    """True iff every atom of ``mu`` sits within tolerance of an atom of ``nu``.

    Atoms with |weight| at or below the tolerance are ignored on both sides,
    so the zero measure is inside everything.
    """
    tol = mu.dedup_tolerance if tol is None else tol
    mu_keep = np.abs(mu.weights) > tol
    if not np.any(mu_keep):
        return True
    nu_keep = np.abs(nu.weights) > tol
    if not np.any(nu_keep):
        return False
    a = mu.matrices[mu_keep]
    b = nu.matrices[nu_keep]
    if a.shape[1:] != b.shape[1:]:
        return False
    # max entrywise distance of every a-atom to its closest b-atom
    diff = np.abs(a[:, None] - b[None, :]).reshape(len(a), len(b), -1).max(axis=2)
    return bool(np.all(diff.min(axis=1) <= tol))
