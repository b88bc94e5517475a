"""Quaternions and octonions over the reals.

Octonions are pairs of quaternions multiplied by the Cayley-Dickson rule

    (a, b) . (c, d) = (ac - conj(d) b, d a + b conj(c))

with the basis 1, e1=(i,0), e2=(j,0), e3=(k,0), e4=(0,1), e5=(0,i),
e6=(0,j), e7=(0,k).  Coefficient vectors are float arrays whose last axis
has length 4 (quaternion) or 8 (octonion); every product broadcasts over
leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

UNIT_TOL = 1e-10

# ordered pairs (alpha, beta), alpha != beta, over the imaginary units 1..7
IMAGINARY_PAIRS = tuple(permutations(range(1, 8), 2))


class NonUnitError(ValueError):
    """An octonion argument is not of unit norm."""


def qmul(p, q):
    """Hamilton product of quaternion coefficient arrays."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p0, p1, p2, p3 = np.moveaxis(p, -1, 0)
    q0, q1, q2, q3 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
            p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
            p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
            p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
        ],
        axis=-1,
    )


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def oconj(x):
    x = np.asarray(x, dtype=float)
    return x * np.array([1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0])


def cd_mul(x, y):
    """Cayley-Dickson product of octonion coefficient arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = x[..., :4], x[..., 4:]
    c, d = y[..., :4], y[..., 4:]
    first = qmul(a, c) - qmul(qconj(d), b)
    second = qmul(d, a) + qmul(b, qconj(c))
    return np.concatenate(np.broadcast_arrays(first, second), axis=-1)


def basis(i: int) -> np.ndarray:
    """Coefficient vector of the basis element e_i (e_0 = 1)."""
    e = np.zeros(8)
    e[i] = 1.0
    return e


BASIS = np.eye(8)


@dataclass(frozen=True, eq=False)
class Quaternion:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(4)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion(qmul(self.coeffs, other.coeffs))
        return Quaternion(self.coeffs * float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        return Quaternion(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Quaternion(self.coeffs - other.coeffs)

    def __neg__(self):
        return Quaternion(-self.coeffs)

    def __eq__(self, other):
        return isinstance(other, Quaternion) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def conj(self):
        return Quaternion(qconj(self.coeffs))

    def norm(self):
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True, eq=False)
class Octonion:
    """Immutable octonion; ``coeffs`` are in the basis 1, e1, ..., e7."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(8)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_pair(cls, a: Quaternion, b: Quaternion) -> Octonion:
        return cls(np.concatenate([a.coeffs, b.coeffs]))

    @classmethod
    def e(cls, i: int) -> Octonion:
        return cls(basis(i))

    @property
    def pair(self) -> tuple[Quaternion, Quaternion]:
        return Quaternion(self.coeffs[:4]), Quaternion(self.coeffs[4:])

    @property
    def real(self) -> float:
        return float(self.coeffs[0])

    @property
    def imag(self) -> np.ndarray:
        return self.coeffs[1:].copy()

    def __mul__(self, other):
        if isinstance(other, Octonion):
            return Octonion(cd_mul(self.coeffs, other.coeffs))
        return Octonion(self.coeffs * float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        return Octonion(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Octonion(self.coeffs - other.coeffs)

    def __neg__(self):
        return Octonion(-self.coeffs)

    def __eq__(self, other):
        return isinstance(other, Octonion) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        terms = ", ".join(f"{c:.6g}" for c in self.coeffs)
        return f"Octonion([{terms}])"

    def conj(self) -> Octonion:
        return Octonion(oconj(self.coeffs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def _coeffs(x) -> np.ndarray:
    if isinstance(x, Octonion):
        return np.array(x.coeffs)
    return np.asarray(x, dtype=float)


def _unit(x, name: str) -> np.ndarray:
    c = _coeffs(x)
    n = np.linalg.norm(c)
    if abs(n - 1.0) > UNIT_TOL:
        raise NonUnitError(f"{name} has norm {n!r}, expected 1 within {UNIT_TOL:g}")
    return c / n


def seven_fold_product(x, mul=cd_mul) -> np.ndarray:
    """Return e1(e2(...(e7 x))); for the Cayley-Dickson product this is -x."""
    out = _coeffs(x)
    for i in range(7, 0, -1):
        out = mul(basis(i), out)
    return out


def left_mult_matrix(a, mul=cd_mul) -> np.ndarray:
    """8x8 matrix L with L @ x == a * x."""
    a = _coeffs(a)
    return np.stack([mul(a, BASIS[j]) for j in range(8)], axis=1)


def right_mult_matrix(a, mul=cd_mul) -> np.ndarray:
    a = _coeffs(a)
    return np.stack([mul(BASIS[j], a) for j in range(8)], axis=1)


def _x_tensor(s, mul):
    # (e_alpha (e_beta s)) conj(s) for every ordered imaginary pair
    a = np.array([p[0] for p in IMAGINARY_PAIRS])
    b = np.array([p[1] for p in IMAGINARY_PAIRS])
    inner = mul(BASIS[b], s)
    return mul(mul(BASIS[a], inner), oconj(s))


def condition_x(sigma, tau, tol: float = 1e-8, mul=cd_mul) -> tuple[bool, float]:
    """Check (e_a(e_b s)) conj(s) == (e_a(e_b t)) conj(t) over all 42 pairs a != b.

    Returns ``(holds, residual)`` where residual is the largest norm of the
    difference over the pairs.
    """
    s = _unit(sigma, "sigma")
    t = _unit(tau, "tau")
    diff = _x_tensor(s, mul) - _x_tensor(t, mul)
    residual = float(np.max(np.linalg.norm(diff, axis=-1)))
    return residual < tol, residual


def condition_x_batch(sigmas, taus, mul=cd_mul) -> np.ndarray:
    """Condition X residuals for rows of unit octonions, shape (N,)."""
    s = np.asarray(sigmas, dtype=float)[:, None, :]
    t = np.asarray(taus, dtype=float)[:, None, :]
    a = BASIS[[p[0] for p in IMAGINARY_PAIRS]]
    b = BASIS[[p[1] for p in IMAGINARY_PAIRS]]
    lhs = mul(mul(a, mul(b, s)), oconj(s))
    rhs = mul(mul(a, mul(b, t)), oconj(t))
    return np.max(np.linalg.norm(lhs - rhs, axis=-1), axis=-1)


def condition_y(sigma, tau, tol: float = 1e-8, mul=cd_mul) -> tuple[bool, float]:
    """Check (x s) t == x (s t) for x ranging over the eight basis elements."""
    s = _unit(sigma, "sigma")
    t = _unit(tau, "tau")
    lhs = mul(mul(BASIS, s), t)
    rhs = mul(BASIS, mul(s, t))
    residual = float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))
    return residual < tol, residual


def random_unit(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    shape = (8,) if size is None else (size, 8)
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
