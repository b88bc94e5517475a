"""The function h(x) = <Px, x>, P = P_0 ... P_8, on the M- focal submanifolds
of the indefinite (8,7) system and of its dual definite system."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .clifford import CliffordSystem, build_indefinite_m8, dualize, eigenbasis, extend_by_one
from .curvature import classify
from .focal import (
    FRAME_INPUT_TOL,
    FocalPoint,
    MembershipError,
    _retract_rows,
    frames_Mminus,
    mminus_residual,
    retract_Mminus,
    sample_Mminus,
    sample_Mplus,
    second_derivatives,
)

DIM = 23
CODIM = 8
FOCAL_TOL = 1e-8
LEVEL_TOL = 1e-10
LEVEL_STEP = 0.05


class FocalPointError(ValueError):
    """h is critical at the point (|h| = 1), so the level-set data are undefined."""


@dataclass(frozen=True, eq=False)
class IsoFunContext:
    """``side`` is "I" (M- of the indefinite system) or "D" (M- of its dual)."""

    indefinite: CliffordSystem
    dual: CliffordSystem
    P: np.ndarray
    p9: np.ndarray
    side: str = "I"

    def __post_init__(self):
        if self.side not in ("I", "D"):
            raise ValueError(f"side must be 'I' or 'D', got {self.side!r}")
        if self.indefinite.m != 8 or self.indefinite.dim != 32:
            raise ValueError("only the (8,7) family on R^32 is supported")
        P = self.P
        if (np.max(np.abs(P - P.T)) > 1e-12 or np.max(np.abs(P @ P - np.eye(32))) > 1e-10
                or abs(np.trace(P)) > 1e-10):
            raise ValueError("P must be a symmetric involution with trace zero")

    @property
    def system(self) -> CliffordSystem:
        return self.indefinite if self.side == "I" else self.dual

    def mirror(self) -> IsoFunContext:
        return IsoFunContext(self.indefinite, self.dual, self.P, self.p9,
                             "D" if self.side == "I" else "I")


@lru_cache(maxsize=2)
def build_context(side: str = "I") -> IsoFunContext:
    ind = build_indefinite_m8()
    return IsoFunContext(ind, dualize(ind), ind.product, extend_by_one(ind), side)


@dataclass(frozen=True, eq=False)
class HessianRecord:
    h: float
    gradient: np.ndarray
    grad_norm_sq: float
    laplacian: float
    eigenvalues: np.ndarray
    pattern_residual: float
    u_residual: float
    p_perp_residual: float
    level_curvatures: np.ndarray


def _check(ctx: IsoFunContext, fp: FocalPoint):
    if fp.side != "minus":
        raise MembershipError("h is defined on M-")
    res = mminus_residual(ctx.system, fp.x)
    if res > FRAME_INPUT_TOL:
        raise MembershipError(f"point is not on M-{ctx.side} (residual {res:.3g})")


def h_value(ctx: IsoFunContext, x: np.ndarray) -> float:
    return float(x @ ctx.P @ x)


def h_gradient(ctx: IsoFunContext, fp: FocalPoint) -> np.ndarray:
    """Gradient of h on M-: 2(Px - h x), an ambient vector tangent to M-."""
    _check(ctx, fp)
    x = fp.x
    return 2.0 * (ctx.P @ x - h_value(ctx, x) * x)


def restricted_form(ctx: IsoFunContext, fp: FocalPoint) -> np.ndarray:
    """The tangent-tangent block T^t P T."""
    t = fp.tangents
    return t.T @ ctx.P @ t


def h_laplacian(ctx: IsoFunContext, fp: FocalPoint) -> float:
    """Trace of Hess h = 2(<PX, Y> - h <X, Y>) over the tangent frame."""
    _check(ctx, fp)
    if fp.dim != DIM:
        raise ValueError(f"expected a {DIM}-dimensional tangent frame, got {fp.dim}")
    return float(2.0 * (np.trace(restricted_form(ctx, fp)) - DIM * h_value(ctx, fp.x)))


def normal_trace(ctx: IsoFunContext, fp: FocalPoint) -> float:
    """sum over the normal frame of <P N, N>."""
    n = fp.normals
    return float(np.trace(n.T @ ctx.P @ n))


def expected_pattern(h: float) -> np.ndarray:
    return np.sort(np.array([h] * 8 + [-h] + [1.0] * 7 + [-1.0] * 7))


def hess_spectrum(ctx: IsoFunContext, fp: FocalPoint) -> HessianRecord:
    _check(ctx, fp)
    x = fp.x
    h = h_value(ctx, x)
    if abs(h) >= 1 - FOCAL_TOL:
        raise FocalPointError(f"h = {h!r}: focal point, Hessian pattern undefined")
    grad = h_gradient(ctx, fp)
    form = restricted_form(ctx, fp)
    eig = np.linalg.eigvalsh(form)
    n = fp.normals
    qx = np.einsum("jik,k->ji", fp.rotated[1:], x)
    U = (qx @ ctx.P) @ n
    u_res = float(np.max(np.abs(U @ U.T - (1 - h * h) * np.eye(CODIM))))
    pp_res = float(np.max(np.abs(n.T @ ctx.P @ n + h * np.eye(CODIM))))
    return HessianRecord(
        h=h,
        gradient=grad,
        grad_norm_sq=float(grad @ grad),
        laplacian=float(2.0 * (np.trace(form) - DIM * h)),
        eigenvalues=eig,
        pattern_residual=float(np.max(np.abs(eig - expected_pattern(h)))),
        u_residual=u_res,
        p_perp_residual=pp_res,
        level_curvatures=level_set_shape(ctx, fp, form, grad),
    )


def level_set_shape(ctx: IsoFunContext, fp: FocalPoint, form=None, grad=None) -> np.ndarray:
    """Principal curvatures of the level set of h through x, with respect to
    grad h / |grad h|: the eigenvalues of -Hess h / |grad h| on the
    complement of grad h in the tangent space."""
    if form is None:
        form = restricted_form(ctx, fp)
    if grad is None:
        grad = h_gradient(ctx, fp)
    gnorm = np.linalg.norm(grad)
    if gnorm < FOCAL_TOL:
        raise FocalPointError("gradient vanishes: focal point of h")
    h = h_value(ctx, fp.x)
    g = fp.tangents.T @ grad / gnorm
    comp = np.linalg.qr(np.column_stack([g, np.eye(len(g))]))[0][:, 1:]
    hess = 2.0 * (form - h * np.eye(len(g)))
    return np.linalg.eigvalsh(-comp.T @ hess @ comp / gnorm)


def austerity_residual(curvatures) -> float:
    """Pair the sorted curvatures from both ends and return the largest |k_i + k_j|."""
    k = np.sort(np.asarray(curvatures))
    return float(np.max(np.abs(k + k[::-1])))


def fd_hessian_diagonal(ctx: IsoFunContext, fp: FocalPoint, step: float = 1e-4) -> np.ndarray:
    """Hess h(e_i, e_i) from finite differences along retraction curves.

    The curves c(t) = retract(x + t e_i) are not geodesics, so the tangential
    acceleration is removed: Hess(X, X) = (h o c)'' - <grad h, c''>.
    """
    _check(ctx, fp)
    sys = ctx.system
    x = fp.x
    dirs = fp.tangents.T

    def hvals(step_):
        pts = _retract_rows(sys, np.concatenate([x + step_ * dirs, x - step_ * dirs]))
        vals = np.einsum("ki,ij,kj->k", pts, ctx.P, pts)
        n = len(dirs)
        return (vals[:n] - 2.0 * h_value(ctx, x) + vals[n:]) / step_**2

    d2h = (4.0 * hvals(step / 2) - hvals(step)) / 3.0
    acc = second_derivatives(sys, x, dirs, step)
    return d2h - acc @ h_gradient(ctx, fp)


def sample(ctx: IsoFunContext, rng: np.random.Generator) -> FocalPoint:
    return sample_Mminus(ctx.system, rng)


def sample_level(ctx: IsoFunContext, c: float, rng: np.random.Generator,
                 max_steps: int = 200) -> FocalPoint:
    """Point of h^{-1}(c): walk along grad h / |grad h| in retracted steps of
    0.05 until the level is crossed, then bisect on the last step."""
    if abs(c) >= 1 - FOCAL_TOL:
        raise FocalPointError(f"level {c} is not regular")
    sys = ctx.system
    fp = sample_Mminus(sys, rng)
    for _ in range(max_steps):
        x = fp.x
        gap = c - h_value(ctx, x)
        if abs(gap) < LEVEL_TOL:
            return fp
        grad = h_gradient(ctx, fp)
        gn = np.linalg.norm(grad)
        if gn < FOCAL_TOL:
            fp = sample_Mminus(sys, rng)
            continue
        direction = np.sign(gap) * grad / gn
        nxt = retract_Mminus(sys, x + LEVEL_STEP * direction)
        if np.sign(c - h_value(ctx, nxt.x)) != np.sign(gap):
            lo, hi = 0.0, LEVEL_STEP
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                y = retract_Mminus(sys, x + mid * direction)
                r = c - h_value(ctx, y.x)
                if abs(r) < LEVEL_TOL:
                    return y
                if np.sign(r) == np.sign(gap):
                    lo = mid
                else:
                    hi = mid
            return y
        fp = nxt
    raise RuntimeError(f"could not reach level {c}")


@dataclass(frozen=True)
class InclusionReport:
    n_samples: int
    inclusion_residual: float
    level_residual: float
    mirror_inclusion_residual: float
    mirror_level_residual: float
    focal_condA: bool
    focal_h_residual: float

    @property
    def passed(self) -> bool:
        return (max(self.inclusion_residual, self.level_residual, self.mirror_inclusion_residual,
                    self.mirror_level_residual, self.focal_h_residual) < 1e-10 and self.focal_condA)


def cross_inclusion(ctx: IsoFunContext, rng: np.random.Generator, n_samples: int = 50) -> InclusionReport:
    """M+ of each system lies in M- of the other, on the zero level of h;
    and E_+-(P) points are the focal points (h = +-1) and lie in C_A of M-I."""
    inc = lev = minc = mlev = 0.0
    for _ in range(n_samples):
        x = sample_Mplus(ctx.indefinite, rng).x
        inc = max(inc, mminus_residual(ctx.dual, x))
        lev = max(lev, abs(h_value(ctx, x)))
        y = sample_Mplus(ctx.dual, rng).x
        minc = max(minc, mminus_residual(ctx.indefinite, y))
        mlev = max(mlev, abs(h_value(ctx, y)))
    condA = True
    focal = 0.0
    for sign in (1, -1):
        basis = eigenbasis(ctx.P, sign)
        g = rng.standard_normal(basis.shape[1])
        z = basis @ (g / np.linalg.norm(g))
        focal = max(focal, abs(h_value(ctx, z) - sign), mminus_residual(ctx.dual, z))
        condA &= classify(ctx.indefinite, frames_Mminus(ctx.indefinite, z)).condA
    return InclusionReport(n_samples, inc, lev, minc, mlev, bool(condA), focal)
