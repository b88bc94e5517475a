"""Symmetric Clifford systems P_0, ..., P_m on R^{2l}.

A Clifford system is a tuple of symmetric matrices with
P_a P_b + P_b P_a = 2 delta_ab I.  With l = k * delta(m) and
l - m - 1 > 0 it defines an isoparametric family with multiplicities
(m, l - m - 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import octonion as oc

SYMMETRY_TOL = 1e-13
RELATION_TOL = 1e-12
INVOLUTION_TOL = 1e-10

# dimension of an irreducible module of the Clifford algebra C_{m-1}
DELTA = {1: 1, 2: 2, 3: 4, 4: 4, 5: 8, 6: 8, 7: 8, 8: 8, 9: 16, 10: 32}


class CliffordError(ValueError):
    pass


class DegenerateFamilyError(CliffordError):
    """l - m - 1 <= 0: no isoparametric family."""


class NotExtendableError(CliffordError):
    pass


def delta(m: int) -> int:
    if m not in DELTA:
        raise CliffordError(f"delta(m) is tabulated for 1 <= m <= 10, got m={m}")
    return DELTA[m]


def _quaternion_left(i: int) -> np.ndarray:
    unit = np.zeros(4)
    unit[i] = 1.0
    return np.stack([oc.qmul(unit, col) for col in np.eye(4)], axis=1)


def build_generators(m: int) -> list[np.ndarray]:
    """m-1 skew matrices E_i on R^{delta(m)} with E_i E_j + E_j E_i = -2 delta_ij I."""
    if not 2 <= m <= 10:
        raise CliffordError(f"generators are built for 2 <= m <= 10, got m={m}")
    if m == 2:
        return [np.array([[0.0, -1.0], [1.0, 0.0]])]
    if m in (3, 4):
        return [_quaternion_left(i) for i in range(1, m)]
    if m <= 8:
        return [oc.left_mult_matrix(oc.basis(i)) for i in range(1, m)]
    # doubling: off-diagonal lifts of the previous level plus the symplectic block
    prev = build_generators(m - 1) if m == 10 else build_generators(8)
    n = prev[0].shape[0]
    zero = np.zeros((n, n))
    lifts = [np.block([[zero, f], [f, zero]]) for f in prev]
    symplectic = np.block([[zero, -np.eye(n)], [np.eye(n), zero]])
    return lifts + [symplectic]


@dataclass(frozen=True, eq=False)
class CliffordSystem:
    """Validated, read-only Clifford system.

    ``matrices`` has shape (m+1, 2l, 2l).  Construction fails if symmetry or
    the anticommutation relations are violated.  A system with l - m - 1 <= 0
    (an irreducible module, say) is a valid object; asking for its
    ``multiplicities`` raises :class:`DegenerateFamilyError`.
    """

    matrices: np.ndarray
    label: str = ""
    k: int | None = None
    _product: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[1] % 2:
            raise CliffordError(f"expected (m+1, 2l, 2l) array, got shape {mats.shape}")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        sym = symmetry_residual(mats)
        if sym >= SYMMETRY_TOL:
            raise CliffordError(f"matrices not symmetric (residual {sym:.3g})")
        rel = relation_residual(mats)
        if rel >= RELATION_TOL:
            raise CliffordError(f"Clifford relations violated (residual {rel:.3g})")
        prod = reduce(np.matmul, mats)
        prod.setflags(write=False)
        object.__setattr__(self, "_product", prod)

    def __len__(self):
        return self.matrices.shape[0]

    def __getitem__(self, i):
        return self.matrices[i]

    def __iter__(self):
        return iter(self.matrices)

    @property
    def m(self) -> int:
        return self.matrices.shape[0] - 1

    @property
    def l(self) -> int:  # noqa: E743
        return self.matrices.shape[1] // 2

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def multiplicities(self) -> tuple[int, int]:
        m2 = self.l - self.m - 1
        if self.m <= 0 or m2 <= 0:
            raise DegenerateFamilyError(
                f"(m, l) = ({self.m}, {self.l}) gives multiplicities ({self.m}, {m2}); "
                "need m > 0 and l - m - 1 > 0"
            )
        return self.m, m2

    @property
    def product(self) -> np.ndarray:
        """P_0 P_1 ... P_m."""
        return self._product

    @property
    def definiteness(self) -> str:
        if self.m % 4:
            return "n/a"
        p = self._product
        eye = np.eye(self.dim)
        if np.max(np.abs(p - eye)) < INVOLUTION_TOL or np.max(np.abs(p + eye)) < INVOLUTION_TOL:
            return "definite"
        return "indefinite"

    def quadratic_values(self, x: np.ndarray) -> np.ndarray:
        """<P_a x, x> for every a; broadcasts over leading axes of x."""
        return np.einsum("...i,aij,...j->...a", x, self.matrices, x)

    def combination(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self.matrices, axes=1)


def symmetry_residual(mats) -> float:
    mats = np.asarray(mats)
    return float(np.max(np.abs(mats - np.swapaxes(mats, -1, -2))))


def relation_residual(mats) -> float:
    mats = np.asarray(mats)
    n = mats.shape[-1]
    prods = np.einsum("aij,bjk->abik", mats, mats)
    anti = prods + np.swapaxes(prods, 0, 1)
    target = 2.0 * np.einsum("ab,ik->abik", np.eye(len(mats)), np.eye(n))
    return float(np.max(np.abs(anti - target)))


def _system_from_generators(gens, k: int, m: int) -> np.ndarray:
    d = gens[0].shape[0] if gens else 1
    n = k * d
    eye = np.eye(n)
    zero = np.zeros((n, n))
    mats = [np.block([[eye, zero], [zero, -eye]]), np.block([[zero, eye], [eye, zero]])]
    for e in gens:
        big = np.kron(np.eye(k), e)
        mats.append(np.block([[zero, big], [-big, zero]]))
    return np.array(mats[: m + 1])


def module_system(m: int, k: int = 1) -> CliffordSystem:
    """k copies of the standard module, without the multiplicity check."""
    if k < 1:
        raise CliffordError(f"k must be >= 1, got {k}")
    gens = build_generators(m) if m >= 2 else []
    return CliffordSystem(_system_from_generators(gens, k, m), label=f"module(m={m},k={k})", k=k)


def build_system(m: int, k: int) -> CliffordSystem:
    """P_0(u,v) = (u,-v), P_1(u,v) = (v,u), P_{1+i}(u,v) = (E_i v, -E_i u) on R^{2k delta(m)}."""
    l = k * delta(m)
    if m < 1 or k < 1 or l - m - 1 <= 0:
        raise DegenerateFamilyError(
            f"(m, k) = ({m}, {k}) gives l = {l} and m2 = {l - m - 1}; need m2 > 0"
        )
    sys = module_system(m, k)
    return CliffordSystem(sys.matrices, label=f"({m},{l - m - 1})", k=k)


def _octonion_block(k: int, alpha: int) -> np.ndarray:
    return np.kron(np.eye(k + 1), oc.left_mult_matrix(oc.basis(alpha)))


def build_octonionic_m7(k: int = 1) -> CliffordSystem:
    """The m = 7 system on R^{16k+16} = O^{k+1} x O^{k+1}.

    P_0(u, v) = (u, -v) and P_a(u, v) = (E_a v, -E_a u) for a = 1..7, where
    E_a multiplies every octonion component on the left by e_a.
    """
    if k < 1:
        raise CliffordError(f"k must be >= 1, got {k}")
    n = 8 * (k + 1)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    mats = [np.block([[eye, zero], [zero, -eye]])]
    for a in range(1, 8):
        e = _octonion_block(k, a)
        mats.append(np.block([[zero, e], [-e, zero]]))
    return CliffordSystem(np.array(mats), label=f"(7,{8 * k})", k=k + 1)


def build_indefinite_m8() -> CliffordSystem:
    """The indefinite m = 8 system on R^32 = O^4, x = (u1, u2, v1, v2).

    P_0 x = (u1, u2, -v1, -v2), P_1 x = (v1, v2, u1, u2),
    P_{1+a} x = (e_a v1, -e_a v2, -e_a u1, e_a u2).
    """
    z = np.zeros((8, 8))
    i8 = np.eye(8)

    def blocks(rows):
        return np.block(rows)

    mats = [
        blocks([[i8, z, z, z], [z, i8, z, z], [z, z, -i8, z], [z, z, z, -i8]]),
        blocks([[z, z, i8, z], [z, z, z, i8], [i8, z, z, z], [z, i8, z, z]]),
    ]
    for a in range(1, 8):
        L = oc.left_mult_matrix(oc.basis(a))
        mats.append(blocks([[z, z, L, z], [z, z, z, -L], [-L, z, z, z], [z, L, z, z]]))
    return CliffordSystem(np.array(mats), label="(8,7) indefinite", k=2)


def direct_sum(a: CliffordSystem, b: CliffordSystem) -> CliffordSystem:
    if a.m != b.m:
        raise CliffordError(f"direct_sum needs equal m, got {a.m} and {b.m}")
    na, nb = a.dim, b.dim
    mats = np.zeros((a.m + 1, na + nb, na + nb))
    mats[:, :na, :na] = a.matrices
    mats[:, na:, na:] = b.matrices
    k = a.k + b.k if a.k is not None and b.k is not None else None
    return CliffordSystem(mats, label=f"{a.label} + {b.label}", k=k)


def negate_last(a: CliffordSystem) -> CliffordSystem:
    mats = np.array(a.matrices)
    mats[-1] = -mats[-1]
    return CliffordSystem(mats, label=a.label, k=a.k)


def dualize(a: CliffordSystem) -> CliffordSystem:
    """{P_a P} with P = P_0 ... P_m; only for m = 0 mod 4."""
    if a.m % 4:
        raise CliffordError(f"dualize needs m = 0 mod 4, got m={a.m}")
    p = a.product
    mats = np.einsum("aij,jk->aik", a.matrices, p)
    # products of signed permutation-like matrices; clean the rounding
    mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
    return CliffordSystem(mats, label=f"dual {a.label}", k=a.k)


def product_matrix(a: CliffordSystem) -> tuple[np.ndarray, str]:
    """Return (P_0 ... P_m, definiteness)."""
    return np.array(a.product), a.definiteness


def anticommuting_symmetric_solutions(a: CliffordSystem) -> np.ndarray:
    """Basis of symmetric X with X P_a + P_a X = 0 for every a.

    Returns an array of shape (r, 2l, 2l); r is the nullspace dimension.
    """
    n = a.dim
    iu, ju = np.triu_indices(n)
    cols = []
    for i, j in zip(iu, ju):
        e = np.zeros((n, n))
        e[i, j] = e[j, i] = 1.0
        if i != j:
            e /= np.sqrt(2.0)
        cols.append(np.concatenate([(e @ p + p @ e).ravel() for p in a.matrices]))
    lhs = np.array(cols).T
    # Gram route: gesdd fails to converge on this sparse system
    w, v = np.linalg.eigh(lhs.T @ lhs)
    kernel = v[:, w < 1e-10 * w[-1]]
    out = []
    for v in kernel.T:
        x = np.zeros((n, n))
        scale = np.where(iu == ju, 1.0, 1.0 / np.sqrt(2.0))
        x[iu, ju] = v * scale
        x[ju, iu] = v * scale
        out.append(x)
    return np.array(out).reshape(-1, n, n)


def extend_by_one(a: CliffordSystem) -> np.ndarray:
    """Symmetric P_{m+1} anticommuting with every P_a and squaring to I.

    Raises :class:`NotExtendableError` when P_0 ... P_m = +-I, since then
    P_{m+1} would anticommute with a scalar.
    """
    if a.m % 2 == 0 and a.definiteness == "definite":
        raise NotExtendableError("definite system: P_0...P_m = +-I forces P_{m+1} = 0")
    sols = anticommuting_symmetric_solutions(a)
    if len(sols) == 0:
        raise CliffordError("construction failure: no symmetric anticommuting solution")
    x = sols[0]
    sq = x @ x
    c = np.trace(sq) / a.dim
    x = x / np.sqrt(c)
    if np.max(np.abs(x @ x - np.eye(a.dim))) > INVOLUTION_TOL:
        raise CliffordError("construction failure: solution does not square to a multiple of I")
    # fix the sign: first nonzero entry positive
    flat = x.ravel()
    idx = np.flatnonzero(np.abs(flat) > 1e-8)[0]
    if flat[idx] < 0:
        x = -x
    return 0.5 * (x + x.T)


def check_involution(q: np.ndarray, tol: float = INVOLUTION_TOL) -> None:
    q = np.asarray(q, dtype=float)
    if np.max(np.abs(q - q.T)) > tol:
        raise CliffordError("matrix is not symmetric")
    if np.max(np.abs(q @ q - np.eye(len(q)))) > tol:
        raise CliffordError("matrix does not square to the identity")


def eigenbasis(q: np.ndarray, sign: int) -> np.ndarray:
    """Orthonormal columns spanning the (+1 or -1)-eigenspace of a symmetric involution."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    check_involution(q)
    w, v = np.linalg.eigh(0.5 * (q + q.T))
    mask = w > 0 if sign > 0 else w < 0
    return v[:, mask]
