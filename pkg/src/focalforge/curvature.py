"""Normal scalar curvature, its bounds, the block form of the shape operators,
Ricci curvature and the pointwise predicates for the loci C_A, C_P, C_E."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordSystem
from .focal import FocalPoint, ShapeOperatorSet, principal_angles, shape_ops

DEFAULT_TOL = 1e-6
FD_TOL = 1e-4
STRUCTURE_TOL = 1e-6
AMBIGUOUS_BAND = (0.4, 0.6)


class BlockDecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    lower15: float
    upper15: float
    lower17: float
    ddvv: float


def bounds(m1: int, m2: int) -> Bounds:
    """Closed-form bounds on the normal scalar curvature for multiplicities (m1, m2).

    For M- pass the interchanged pair.
    """
    if m1 < 1 or m2 < 1:
        raise ValueError(f"multiplicities must be positive, got ({m1}, {m2})")
    lower = 2.0 * m1 * m2 * (m1 + 1)
    upper = 8.0 * m1 * m2 * (m1 + 1)
    extra = 6.0 * m1 * m2 * (m1 + 1) * (2 * m2 - m1 - 2) / (2 * m2 + m1)
    ddvv = 4.0 * m2 * m2 * (m1 + 1) ** 2
    return Bounds(lower, upper, lower + extra, ddvv)


def commutators(S: ShapeOperatorSet) -> np.ndarray:
    prod = np.einsum("aij,bjk->abik", S.ops, S.ops)
    return prod - np.swapaxes(prod, 0, 1)


def commutator_norms(S: ShapeOperatorSet) -> np.ndarray:
    """Matrix of ||[S_a, S_b]||_F^2."""
    c = commutators(S)
    return np.einsum("abij,abij->ab", c, c)


def rho_perp(S: ShapeOperatorSet) -> float:
    """Sum over all ordered pairs (a, b) of ||[S_a, S_b]||_F^2."""
    return float(np.sum(commutator_norms(S)))


def sum_of_squares(S: ShapeOperatorSet) -> np.ndarray:
    return np.einsum("aij,ajk->ik", S.ops, S.ops)


def rho_perp_identity(S: ShapeOperatorSet) -> float:
    """6 ||sum S_a^2||^2 - 4 m2 (m1 + 1)(m1 + 3), multiplicities as seen from S.side."""
    m1, m2 = S.effective
    q = sum_of_squares(S)
    return float(6.0 * np.sum(q * q) - 4.0 * m2 * (m1 + 1) * (m1 + 3))


def pairwise_sums(S: ShapeOperatorSet) -> np.ndarray:
    """For each b, sum over a != b of ||[S_a, S_b]||^2 (lies in [2 m1 m2, 8 m1 m2])."""
    return commutator_norms(S).sum(axis=0)


def rotate_normals(S: ShapeOperatorSet, R: np.ndarray) -> ShapeOperatorSet:
    """Shape operators for the normal frame n'_b = sum_a R[a, b] n_a."""
    ops = np.einsum("ab,aij->bij", R, S.ops)
    return ShapeOperatorSet(S.side, ops, S.multiplicities, S.method, S.frame)


def rotate_tangents(S: ShapeOperatorSet, R: np.ndarray) -> ShapeOperatorSet:
    ops = R.T @ S.ops @ R
    frame = None if S.frame is None else S.frame @ R
    return ShapeOperatorSet(S.side, ops, S.multiplicities, S.method, frame)


# --- block form ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockData:
    """Blocks of S_1, ..., S_last in the eigenbasis (V+, V-, V0) of S_0."""

    A: list
    B: list
    C: list
    diagonal_residual: float

    @property
    def norms(self) -> dict:
        sq = lambda blocks: [float(np.sum(b * b)) for b in blocks]  # noqa: E731
        return {"A": sq(self.A), "B": sq(self.B), "C": sq(self.C)}

    @property
    def off_kernel(self) -> float:
        """Largest Frobenius norm of any B or C block."""
        vals = [np.linalg.norm(b) for b in self.B + self.C]
        return float(max(vals, default=0.0))


def _split(op: np.ndarray):
    w, v = np.linalg.eigh(op)
    aw = np.abs(w)
    lo, hi = AMBIGUOUS_BAND
    if np.any((aw > lo) & (aw < hi)):
        raise BlockDecompositionError(f"eigenvalue in the ambiguous band {AMBIGUOUS_BAND}: {w}")
    return v[:, w > hi], v[:, w < -hi], v[:, aw <= lo]


def block_decompose(S: ShapeOperatorSet) -> BlockData:
    vp, vm, v0 = _split(S.ops[0])
    A, B, C = [], [], []
    diag = 0.0
    for op in S.ops[1:]:
        A.append(vp.T @ op @ vm)
        B.append(vp.T @ op @ v0)
        C.append(vm.T @ op @ v0)
        for v in (vp, vm, v0):
            if v.shape[1]:
                diag = max(diag, float(np.max(np.abs(v.T @ op @ v))))
    return BlockData(A, B, C, diag)


def kernel_angle(S: ShapeOperatorSet) -> float:
    """Largest principal angle between ker S_a and ker S_0."""
    k0 = _split(S.ops[0])[2]
    worst = 0.0
    for op in S.ops[1:]:
        k = _split(op)[2]
        if k.shape[1] != k0.shape[1]:
            return float(np.pi / 2)
        worst = max(worst, float(np.max(principal_angles(k0, k), initial=0.0)))
    return worst


# --- Ricci -----------------------------------------------------------------


def ricci_operator(S: ShapeOperatorSet) -> np.ndarray:
    """(dim - 1) I - sum S_a^2 in the tangent frame."""
    d = S.ops.shape[1]
    return (d - 1) * np.eye(d) - sum_of_squares(S)


def ricci(S: ShapeOperatorSet, X: np.ndarray) -> float:
    """Ric(X) from the Gauss equation; X given in tangent-frame coordinates."""
    X = np.asarray(X, dtype=float)
    return float(X @ ricci_operator(S) @ X)


def pair_products(sys: CliffordSystem, x: np.ndarray) -> np.ndarray:
    """Rows P_a P_b x for a < b, in lexicographic order."""
    px = np.einsum("bij,j->bi", sys.matrices, x)
    ppx = np.einsum("aij,bj->abi", sys.matrices, px)
    iu, ju = np.triu_indices(sys.m + 1, k=1)
    return ppx[iu, ju]


def ricci_closed(sys: CliffordSystem, fp: FocalPoint, X: np.ndarray) -> float:
    """2(l - m - 2)|X|^2 + 2 sum_{a<b} <X, P_a P_b x>^2 on M+; X in frame coordinates."""
    if fp.side != "plus":
        raise ValueError("closed Ricci formula is stated on M+")
    v = fp.tangents @ np.asarray(X, dtype=float)
    b = pair_products(sys, fp.x) @ v
    return float(2 * (sys.l - sys.m - 2) * (v @ v) + 2 * (b @ b))


# --- classification --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurvatureRecord:
    side: str
    multiplicities: tuple[int, int]
    rho_perp: float
    rho_perp_identity: float
    bounds: Bounds
    block_norms: dict
    diagonal_residual: float
    off_kernel: float
    kernel_angle: float
    einstein_residual: float
    einstein_spread: float
    norm_sq: float
    condA: bool
    condP: bool
    condE: bool
    tol: float
    method: str
    residuals: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "side": self.side,
            "rho_perp": self.rho_perp,
            "rho_perp_identity": self.rho_perp_identity,
            "lower15": self.bounds.lower15,
            "upper15": self.bounds.upper15,
            "lower17": self.bounds.lower17,
            "ddvv": self.bounds.ddvv,
            "kernel_angle": self.kernel_angle,
            "off_kernel": self.off_kernel,
            "einstein_spread": self.einstein_spread,
            "condA": self.condA,
            "condP": self.condP,
            "condE": self.condE,
        }


def record_from_shape_ops(S: ShapeOperatorSet, tol: float = DEFAULT_TOL) -> CurvatureRecord:
    m1, m2 = S.effective
    bnd = bounds(m1, m2)
    rho = rho_perp(S)
    ident = rho_perp_identity(S)
    blocks = block_decompose(S)
    angle = kernel_angle(S)
    q = sum_of_squares(S)
    d = q.shape[0]
    c = np.trace(q) / d
    eig = np.linalg.eigvalsh(q)
    einstein_residual = float(np.linalg.norm(q - c * np.eye(d)))
    spread = float(eig[-1] - eig[0])
    # structural parts of Condition A cannot be sharper than the operators themselves
    struct = max(STRUCTURE_TOL, tol)
    resA = abs(rho - bnd.upper15) / bnd.upper15
    resP = abs(rho - bnd.lower15) / bnd.lower15
    condA = resA < tol and angle < struct and blocks.off_kernel < struct
    return CurvatureRecord(
        side=S.side,
        multiplicities=S.effective,
        rho_perp=rho,
        rho_perp_identity=ident,
        bounds=bnd,
        block_norms=blocks.norms,
        diagonal_residual=blocks.diagonal_residual,
        off_kernel=blocks.off_kernel,
        kernel_angle=angle,
        einstein_residual=einstein_residual,
        einstein_spread=spread,
        norm_sq=float(np.sum(S.ops * S.ops)),
        condA=bool(condA),
        condP=bool(resP < tol),
        condE=bool(spread < tol),
        tol=tol,
        method=S.method,
        residuals={"A": resA, "P": resP, "E": spread},
    )


def classify(sys: CliffordSystem, fp: FocalPoint, tol: float | None = None,
             method: str = "algebraic") -> CurvatureRecord:
    """Curvature record and C_A / C_P / C_E verdicts at one point.

    Default tolerance is 1e-6 relative, loosened to 1e-4 when M- operators
    come from the finite-difference path.
    """
    S = shape_ops(sys, fp, method)
    if tol is None:
        tol = FD_TOL if S.method == "finite-difference" else DEFAULT_TOL
    return record_from_shape_ops(S, tol)
