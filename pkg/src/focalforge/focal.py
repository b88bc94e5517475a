"""Points, frames and shape operators on the focal submanifolds M+ and M-.

M+ = {x in S^{2l-1} : <P_a x, x> = 0 for all a}
M- = {x in S^{2l-1} : sum_a <P_a x, x>^2 = 1}
   = {x : Q x = x for some unit Q in span(P_0, ..., P_m)}

Frames are stored column-wise: ``normals`` is (2l, codim) and ``tangents``
is (2l, dim).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .clifford import CliffordSystem, eigenbasis

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-12
FRAME_INPUT_TOL = 1e-10
GN_MAX_ITER = 50
GN_RESTARTS = 3
FD_STEP = 1e-4
FD_AGREEMENT_TOL = 1e-4
BUCKET_THRESHOLD = 0.5


class ProjectionError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class MembershipError(ValueError):
    pass


class RetractionError(ValueError):
    pass


class ShapeOperatorMismatch(RuntimeError):
    def __init__(self, message, spectra=None):
        super().__init__(message)
        self.spectra = spectra


@dataclass(frozen=True, eq=False)
class FocalPoint:
    x: np.ndarray
    side: str
    normals: np.ndarray
    tangents: np.ndarray
    # M- only: p_a = <P_a x, x> and the rotated system Q_0 = sum p_a P_a, Q_1, ...
    coeffs: np.ndarray | None = None
    rotated: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.tangents.shape[1]

    @property
    def codim(self) -> int:
        return self.normals.shape[1]


@dataclass(frozen=True, eq=False)
class ShapeOperatorSet:
    """Shape operators S_0, ..., S_{codim-1} in the point's tangent frame.

    ``multiplicities`` is (m1, m2) of the family; ``effective`` swaps them on
    M- so that every formula can be written once in terms of M+.
    """

    side: str
    ops: np.ndarray
    multiplicities: tuple[int, int]
    method: str = "exact"
    frame: np.ndarray | None = None

    @property
    def effective(self) -> tuple[int, int]:
        m1, m2 = self.multiplicities
        return (m1, m2) if self.side == "plus" else (m2, m1)

    def __len__(self):
        return self.ops.shape[0]


def mplus_residual(sys: CliffordSystem, x: np.ndarray) -> float:
    return float(max(np.max(np.abs(sys.quadratic_values(x))), abs(np.linalg.norm(x) - 1.0)))


def mminus_residual(sys: CliffordSystem, x: np.ndarray) -> float:
    p = sys.quadratic_values(x)
    return float(max(abs(np.sum(p * p) - 1.0), abs(np.linalg.norm(x) - 1.0)))


def complement(vectors: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of the column span."""
    n, k = vectors.shape
    q, _ = np.linalg.qr(vectors, mode="complete")
    return q[:, k:]


# --- M+ -------------------------------------------------------------------


def frames_Mplus(sys: CliffordSystem, x: np.ndarray) -> FocalPoint:
    res = mplus_residual(sys, x)
    if res > FRAME_INPUT_TOL:
        raise MembershipError(f"point is not on M+ (residual {res:.3g})")
    normals = np.einsum("aij,j->ia", sys.matrices, x)
    tangents = complement(np.column_stack([x, normals]))
    return FocalPoint(np.array(x), "plus", normals, tangents)


def project_Mplus(sys: CliffordSystem, y: np.ndarray, tol: float = MEMBERSHIP_TOL) -> FocalPoint:
    """Gauss-Newton on g_a(x) = <P_a x, x>, renormalising after every step."""
    x = np.asarray(y, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("cannot project the zero vector")
    x = x / nrm
    g = sys.quadratic_values(x)
    for _ in range(GN_MAX_ITER):
        if np.max(np.abs(g)) < tol:
            return frames_Mplus(sys, x)
        jac = 2.0 * np.einsum("aij,j->ai", sys.matrices, x)
        step, *_ = np.linalg.lstsq(jac, g, rcond=None)
        x = x - step
        x = x / np.linalg.norm(x)
        g = sys.quadratic_values(x)
    res = float(np.max(np.abs(g)))
    if res < tol:
        return frames_Mplus(sys, x)
    raise ProjectionError(f"Gauss-Newton did not converge in {GN_MAX_ITER} steps", res)


def sample_Mplus(sys: CliffordSystem, rng: np.random.Generator) -> FocalPoint:
    last = None
    for _ in range(GN_RESTARTS + 1):
        try:
            return project_Mplus(sys, rng.standard_normal(sys.dim))
        except ProjectionError as exc:
            logger.debug("restarting projection, residual %.3g", exc.residual)
            last = exc
    raise last


def shape_ops_Mplus(sys: CliffordSystem, fp: FocalPoint) -> ShapeOperatorSet:
    """(S_a)_ij = -<P_a e_i, e_j> for the normal P_a x."""
    if fp.side != "plus":
        raise ValueError("shape_ops_Mplus needs a point on M+")
    t = fp.tangents
    ops = -(t.T @ sys.matrices @ t)
    ops = 0.5 * (ops + np.swapaxes(ops, 1, 2))
    return ShapeOperatorSet("plus", ops, sys.multiplicities, "exact", t)


# --- M- -------------------------------------------------------------------


def _extend_to_basis(p: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first column is the unit vector p."""
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(len(p))]))
    if q[:, 0] @ p < 0:
        q = -q
    return q


def frames_Mminus(sys: CliffordSystem, x: np.ndarray, coeffs: np.ndarray | None = None) -> FocalPoint:
    """Frames at x in M-, plus the rotated system Q_0 ... Q_m with Q_0 x = x.

    Normal space: {N in E-(Q_0) : N perp Q_j x, j >= 1}.
    """
    res = mminus_residual(sys, x)
    if res > FRAME_INPUT_TOL:
        raise MembershipError(f"point is not on M- (residual {res:.3g})")
    p = sys.quadratic_values(x) if coeffs is None else np.asarray(coeffs, dtype=float)
    p = p / np.linalg.norm(p)
    rot = np.einsum("aj,aik->jik", _extend_to_basis(p), sys.matrices)
    minus = eigenbasis(rot[0], -1)
    qx = np.einsum("jik,k->ij", rot[1:], x)
    local = complement(minus.T @ qx)
    normals = minus @ local
    tangents = complement(np.column_stack([x, normals]))
    return FocalPoint(np.array(x), "minus", normals, tangents, p, rot)


def sample_Mminus(sys: CliffordSystem, rng: np.random.Generator, coeffs=None) -> FocalPoint:
    """Random unit p, Q_0 = sum p_a P_a, random unit x in E+(Q_0)."""
    if coeffs is None:
        p = rng.standard_normal(sys.m + 1)
    else:
        p = np.asarray(coeffs, dtype=float)
    p = p / np.linalg.norm(p)
    plus = eigenbasis(sys.combination(p), 1)
    g = rng.standard_normal(plus.shape[1])
    x = plus @ (g / np.linalg.norm(g))
    return frames_Mminus(sys, x, p)


def _retract_rows(sys: CliffordSystem, y: np.ndarray) -> np.ndarray:
    # rows of y are points; returns normalize((y + Q(y) y) / 2)
    py = np.einsum("aij,kj->kai", sys.matrices, y)
    p = np.einsum("kai,ki->ka", py, y)
    pn = np.linalg.norm(p, axis=1)
    if np.any(pn < 1e-10):
        raise RetractionError("retraction undefined: <P_a y, y> all vanish")
    qy = np.einsum("ka,kai->ki", p / pn[:, None], py)
    z = 0.5 * (y + qy)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def retract_Mminus(sys: CliffordSystem, y: np.ndarray) -> FocalPoint:
    z = _retract_rows(sys, np.atleast_2d(np.asarray(y, dtype=float)))[0]
    return frames_Mminus(sys, z)


def shape_ops_Mminus_algebraic(sys: CliffordSystem, fp: FocalPoint) -> ShapeOperatorSet:
    """S_N(Q_i x) = Q_i N, S_N(Q_i N) = Q_i x, zero on the remaining tangent directions."""
    if fp.side != "minus":
        raise ValueError("shape_ops_Mminus needs a point on M-")
    t = fp.tangents
    rot = fp.rotated[1:]
    qx = np.einsum("jik,k->ji", rot, fp.x)
    ops = []
    for n in fp.normals.T:
        qn = np.einsum("jik,k->ji", rot, n)
        a = qn @ t
        b = qx @ t
        ops.append(a.T @ b + b.T @ a)
    return ShapeOperatorSet("minus", np.array(ops), sys.multiplicities, "algebraic", t)


def second_derivatives(sys: CliffordSystem, x: np.ndarray, dirs: np.ndarray, h: float = FD_STEP):
    """c''(0) for c(t) = retract(x + t X), one row per row X of ``dirs``.

    Central differences at steps h and h/2 combined by one Richardson level.
    """

    def central(step):
        fwd = _retract_rows(sys, x[None, :] + step * dirs)
        bwd = _retract_rows(sys, x[None, :] - step * dirs)
        return (fwd - 2.0 * x[None, :] + bwd) / step**2

    return (4.0 * central(h / 2) - central(h)) / 3.0


def shape_ops_Mminus_fd(sys: CliffordSystem, fp: FocalPoint, h: float = FD_STEP) -> ShapeOperatorSet:
    """Second fundamental form from finite differences of retraction curves."""
    if fp.side != "minus":
        raise ValueError("shape_ops_Mminus needs a point on M-")
    t = fp.tangents
    d = t.shape[1]
    iu, ju = np.triu_indices(d, k=1)
    dirs = np.concatenate([t.T, (t[:, iu] + t[:, ju]).T])
    acc = second_derivatives(sys, fp.x, dirs, h) @ fp.normals  # (ndirs, codim)
    diag = acc[:d]
    ops = np.zeros((fp.codim, d, d))
    ops[:, np.arange(d), np.arange(d)] = diag.T
    off = 0.5 * (acc[d:] - diag[iu] - diag[ju])
    ops[:, iu, ju] = off.T
    ops[:, ju, iu] = off.T
    return ShapeOperatorSet("minus", ops, sys.multiplicities, "finite-difference", t)


def shape_ops_Mminus(sys: CliffordSystem, fp: FocalPoint, method: str = "algebraic",
                     tol: float = FD_AGREEMENT_TOL) -> ShapeOperatorSet:
    """Shape operators on M-.

    The algebraic candidate is only returned after it agrees with the
    finite-difference operators to ``tol`` (largest entry difference);
    ``method="finite-difference"`` returns the FD operators after the same
    check.
    """
    alg = shape_ops_Mminus_algebraic(sys, fp)
    fd = shape_ops_Mminus_fd(sys, fp)
    diff = float(np.max(np.abs(alg.ops - fd.ops)))
    if diff > tol:
        spectra = {
            "algebraic": [np.linalg.eigvalsh(s).tolist() for s in alg.ops],
            "finite-difference": [np.linalg.eigvalsh(s).tolist() for s in fd.ops],
        }
        raise ShapeOperatorMismatch(
            f"algebraic and finite-difference shape operators differ by {diff:.3g}", spectra
        )
    if method == "algebraic":
        return alg
    if method == "finite-difference":
        return fd
    raise ValueError(f"unknown method {method!r}")


def shape_ops(sys: CliffordSystem, fp: FocalPoint, method: str = "algebraic") -> ShapeOperatorSet:
    if fp.side == "plus":
        return shape_ops_Mplus(sys, fp)
    return shape_ops_Mminus(sys, fp, method)


# --- spectra ---------------------------------------------------------------


def bucket_counts(eigs, threshold: float = BUCKET_THRESHOLD) -> tuple[int, int, int]:
    """Counts of eigenvalues near +1, -1 and 0."""
    eigs = np.asarray(eigs)
    return (int(np.sum(eigs > threshold)), int(np.sum(eigs < -threshold)),
            int(np.sum(np.abs(eigs) <= threshold)))


def spectrum_residual(S: ShapeOperatorSet) -> tuple[float, bool]:
    """Largest distance of any eigenvalue from its {+1, -1, 0} bucket, and
    whether the bucket counts match (b, b, a) for effective multiplicities (a, b)."""
    a, b = S.effective
    worst = 0.0
    counts_ok = True
    for op in S.ops:
        w = np.linalg.eigvalsh(op)
        target = np.where(w > BUCKET_THRESHOLD, 1.0, np.where(w < -BUCKET_THRESHOLD, -1.0, 0.0))
        worst = max(worst, float(np.max(np.abs(w - target))))
        counts_ok &= bucket_counts(w) == (b, b, a)
    return worst, bool(counts_ok)


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between column spans of a and b (orthonormalised first)."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral norm of the difference of orthogonal projectors."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    return float(np.linalg.norm(qa @ qa.T - qb @ qb.T, 2))
