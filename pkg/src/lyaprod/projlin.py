"""Matrix and projective-space primitives.

Lines through the origin of R^d are stored as canonical unit vectors: the
representative has Euclidean norm one and its first coordinate of magnitude
above ``SIGN_TOL`` is positive.  Distances between lines use

    delta(p, q) = ||p ^ q|| / (||p|| ||q||),

the sine of the angle between them.  The wedge norm is evaluated through the
Gram identity sqrt(|p|^2 |q|^2 - <p,q>^2) instead of forming the exterior
power, which is O(d) in any dimension; roundoff can push the radicand
slightly negative near delta = 0, so it is clamped at zero.

Dimension 1 is allowed (projective space degenerates to a single point);
it shows up when a cocycle is restricted to an invariant line or pushed
through the second exterior power at d = 2.  Anything that needs two
singular values (wedge norms, contraction ratios) requires d >= 2.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

SIGN_TOL = 1e-12
_INVERTIBILITY_RTOL = 1e-12


def as_matrix(entries) -> np.ndarray:
    """Validate a square invertible matrix and return it as float64.

    Invertibility is checked relative to the matrix scale: the smallest
    singular value must exceed ``1e-12`` times the largest.
    """
    g = np.array(entries, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    if g.shape[0] < 1:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(g)):
        raise ValueError("matrix entries must be finite")
    s = singular_values(g)
    if s[-1] <= _INVERTIBILITY_RTOL * s[0]:
        raise ValueError(
            f"matrix is singular to working precision (s_min/s_max = {s[-1] / s[0]:.3e}):\n{g!r}"
        )
    g.setflags(write=False)
    return g


class ProjectivePoint:
    """Canonical unit representative of a line through the origin."""

    __slots__ = ("vec",)

    def __init__(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError(f"expected a vector, got shape {v.shape}")
        n = np.linalg.norm(v)
        if n <= 0.0 or not np.isfinite(n):
            raise ValueError("cannot project the zero (or non-finite) vector")
        u = v / n
        for x in u:
            if abs(x) > SIGN_TOL:
                if x < 0.0:
                    u = -u
                break
        u = u + 0.0  # normalize -0.0
        u.setflags(write=False)
        self.vec = u

    @property
    def dim(self) -> int:
        return self.vec.size

    def __repr__(self):
        coords = ", ".join(f"{x:.6g}" for x in self.vec)
        return f"ProjectivePoint([{coords}])"


def project(v) -> ProjectivePoint:
    """Canonical representative of the line spanned by ``v`` (``v`` nonzero)."""
    return ProjectivePoint(v)


def wedge_norm(p: np.ndarray, q: np.ndarray) -> float:
    """||p ^ q|| via the Gram identity, clamped at zero against roundoff."""
    pp = float(np.dot(p, p))
    qq = float(np.dot(q, q))
    pq = float(np.dot(p, q))
    return float(np.sqrt(max(pp * qq - pq * pq, 0.0)))


def projective_distance(p: ProjectivePoint, q: ProjectivePoint) -> float:
    """Sine of the angle between two lines; 0 iff equal, 1 iff orthogonal."""
    return min(wedge_norm(p.vec, q.vec), 1.0)


def act(g, p: ProjectivePoint) -> ProjectivePoint:
    """Projective action of an invertible matrix on a line."""
    return ProjectivePoint(np.asarray(g, dtype=float) @ p.vec)


def singular_values(g) -> np.ndarray:
    """Singular values in descending order.

    For d <= 4 they come from the eigendecomposition of g^T g, which is cheap
    and accurate at this scale; larger matrices go through LAPACK's SVD.
    """
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    try:
        if d <= 4:
            w = np.linalg.eigvalsh(g.T @ g)
            s = np.sqrt(np.clip(w, 0.0, None))[::-1].copy()
        else:
            s = np.linalg.svd(g, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular value computation failed for\n{g!r}") from exc
    if not np.all(np.isfinite(s)):
        raise NumericalError(f"singular values not finite for\n{g!r}")
    return s


def wedge2_norm(g) -> float:
    """Norm of the induced action on 2-vectors: s1(g) * s2(g)."""
    s = singular_values(g)
    if s.size < 2:
        raise ValueError("second exterior power needs d >= 2")
    return float(s[0] * s[1])


def wedge2_matrix(g) -> np.ndarray:
    """Matrix of the induced action on the second exterior power.

    Basis 2-vectors e_i ^ e_j are ordered lexicographically with i < j, so the
    result is C(d,2) x C(d,2); its entries are the 2x2 minors of ``g``.
    """
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    if d < 2:
        raise ValueError("second exterior power needs d >= 2")
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    m = np.empty((len(pairs), len(pairs)))
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            m[a, b] = g[i, k] * g[j, l] - g[i, l] * g[j, k]
    return m


def contraction_ratio(g, p: ProjectivePoint, q: ProjectivePoint) -> float:
    """How much the projective action of ``g`` moves the pair (p, q).

    Returns delta(g.p, g.q) / delta(p, q).  For unit representatives it is
    bounded above by s1(g) s2(g) / (||g p|| ||g q||).
    """
    base = projective_distance(p, q)
    if base <= 1e-12:
        raise ValueError("contraction ratio undefined for projectively equal points")
    return projective_distance(act(g, p), act(g, q)) / base
