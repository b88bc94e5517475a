"""Samplers and membership criteria for the loci C_A, C_P, C_E and the
per-family audit that compares them with the classification tables."""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import octonion as oc
from .clifford import (
    CliffordError,
    CliffordSystem,
    build_indefinite_m8,
    build_octonionic_m7,
    build_system,
    delta,
    direct_sum,
    dualize,
    eigenbasis,
    extend_by_one,
    module_system,
    negate_last,
)
from .curvature import DEFAULT_TOL, CurvatureRecord, classify, pair_products
from .focal import (
    FocalPoint,
    frames_Mminus,
    frames_Mplus,
    mminus_residual,
    retract_Mminus,
    sample_Mminus,
    sample_Mplus,
)

DEFAULT_SEED = 0xF0CA1
EMPTINESS_MARGIN = 0.1
EIGEN_TOL = 1e-8
CRITERION_TOL = 1e-6
VARIANTS = ("definite", "indefinite", "n/a")
LOCI = ("C_A", "C_P", "C_E")


class UnknownFamilyError(ValueError):
    pass


# --- families ---------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    """An OT-FKM family: m, l = k * delta(m), and for m = 0 mod 4 a variant."""

    m: int
    k: int
    variant: str = "n/a"
    side: str = "plus"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UnknownFamilyError(f"unknown variant {self.variant!r}")
        if self.side not in ("plus", "minus"):
            raise UnknownFamilyError(f"unknown side {self.side!r}")
        if not 1 <= self.m <= 10 or self.k < 1:
            raise UnknownFamilyError(f"no family with m={self.m}, k={self.k}")
        needs_variant = self.m % 4 == 0
        if needs_variant and self.variant == "n/a":
            raise UnknownFamilyError(f"m={self.m} needs a variant (definite or indefinite)")
        if not needs_variant and self.variant != "n/a":
            raise UnknownFamilyError(f"m={self.m} has no definite/indefinite variants")
        if self.l - self.m - 1 <= 0:
            raise UnknownFamilyError(
                f"degenerate family: m={self.m}, l={self.l} gives m2={self.l - self.m - 1}"
            )

    @property
    def l(self) -> int:  # noqa: E743
        return self.k * delta(self.m)

    @property
    def multiplicities(self) -> tuple[int, int]:
        return self.m, self.l - self.m - 1

    @property
    def ambient_dim(self) -> int:
        return 2 * self.l

    @property
    def family_id(self) -> str:
        m1, m2 = self.multiplicities
        suffix = {"definite": "D", "indefinite": "I"}.get(self.variant, "")
        return f"({m1},{m2}){suffix}"

    def with_side(self, side: str) -> FamilySpec:
        return FamilySpec(self.m, self.k, self.variant, side)

    @classmethod
    def parse(cls, text: str, side: str = "plus") -> FamilySpec:
        """Parse ``m,k[,variant]``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (2, 3):
            raise UnknownFamilyError(f"expected m,k[,variant], got {text!r}")
        try:
            m, k = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise UnknownFamilyError(f"expected integers in {text!r}") from exc
        variant = parts[2] if len(parts) == 3 else "n/a"
        return cls(m, k, variant, side)

    def build(self) -> CliffordSystem:
        return family_system(self.m, self.k, self.variant)


@lru_cache(maxsize=None)
def family_system(m: int, k: int, variant: str = "n/a") -> CliffordSystem:
    """Clifford system for a family; m = 7 and (m, k) = (8, 2) use the explicit
    octonionic forms, definite systems are normalised to product +I."""
    if m == 7:
        if k < 2:
            raise UnknownFamilyError("m=7 needs k >= 2")
        return build_octonionic_m7(k - 1)
    if m == 8 and k == 2:
        ind = build_indefinite_m8()
        return ind if variant == "indefinite" else dualize(ind)
    if m % 4 == 0:
        block = module_system(m, 1)
        if variant == "definite":
            if block.product[0, 0] < 0:
                block = negate_last(block)
            sys = block
            for _ in range(k - 1):
                sys = direct_sum(sys, block)
            return sys
        # one block of opposite sign
        sys = negate_last(block)
        for _ in range(k - 1):
            sys = direct_sum(sys, block)
        return sys
    return build_system(m, k)


@lru_cache(maxsize=None)
def indefinite_m8_extension() -> tuple[CliffordSystem, np.ndarray]:
    sys = build_indefinite_m8()
    return sys, extend_by_one(sys)


# --- claims ------------------------------------------------------------------


@dataclass(frozen=True)
class Claim:
    kind: str  # "whole", "empty" or "sublocus"
    text: str


def table_column(spec: FamilySpec) -> str:
    m1, m2 = spec.multiplicities
    if m1 == 1:
        return "(1,k)"
    if (m1, m2) in ((2, 1), (6, 1)):
        return f"({m1},{m2})"
    if spec.side == "plus":
        if m1 == 3:
            return "(3,4k)"
        if m1 == 7:
            return "(7,8k)"
        if (m1, m2) == (4, 3) and spec.variant == "definite":
            return "(4,3)D"
    elif (m1, m2) in ((4, 3), (8, 7)):
        return spec.family_id
    return "others"


def claims(spec: FamilySpec) -> dict[str, Claim]:
    M = "M+" if spec.side == "plus" else "M-"
    whole, empty = Claim("whole", M), Claim("empty", "empty")
    col = table_column(spec)
    j = spec.l // 4 - 1 if spec.m == 3 else spec.l // 8 - 1
    table = {
        "plus": {
            "(1,k)": (whole, empty, empty),
            "(2,1)": (empty, whole, empty),
            "(6,1)": (empty, whole, empty),
            "(3,4k)": (Claim("sublocus", f"2 x S^{3 + 4 * j}"), empty, empty),
            "(4,3)D": (empty, whole, whole),
            "(7,8k)": (Claim("sublocus", f"2 x (S^{j} x S^7)/Z2"), empty, empty),
        },
        "minus": {
            "(1,k)": (empty, whole, empty),
            "(2,1)": (whole, empty, empty),
            "(6,1)": (whole, empty, empty),
            "(4,3)D": (whole, empty, empty),
            "(4,3)I": (Claim("sublocus", "2 x S^7"), empty, empty),
            "(8,7)D": (Claim("sublocus", "(S^1 x S^15)/Z2"), empty, empty),
            "(8,7)I": (Claim("sublocus", "2 x S^15"), empty, empty),
        },
    }[spec.side]
    return dict(zip(LOCI, table.get(col, (empty, empty, empty))))


NOT_AUDITED = {
    "plus": [("(2,2)", "C_A", "CP^3"), ("(2,2)", "C_P", "empty"), ("(2,2)", "C_E", "empty")],
    "minus": [("(2,2)", "C_A", "empty"), ("(2,2)", "C_P", "G~2(R^5)"), ("(2,2)", "C_E", "G~2(R^5)")],
}


# --- exact samplers and analytic criteria --------------------------------------


def _unit_in(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(basis.shape[1])
    return basis @ (g / np.linalg.norm(g))


def _eigen_distance(P: np.ndarray, x: np.ndarray) -> float:
    px = P @ x
    return float(min(np.linalg.norm(px - x), np.linalg.norm(px + x)))


def sample_CA_m3(sys: CliffordSystem, sign: int, rng: np.random.Generator) -> FocalPoint:
    """Random unit vector of E_sign(P_0 P_1 P_2 P_3); such points lie in C_A of M+."""
    if sys.m != 3:
        raise ValueError("sample_CA_m3 needs an m = 3 system")
    return frames_Mplus(sys, _unit_in(eigenbasis(sys.product, sign), rng))


def ca_criterion_m3(sys: CliffordSystem, x: np.ndarray, tol: float = EIGEN_TOL) -> bool:
    return _eigen_distance(sys.product, x) < tol


def psi(lam, sigma, branch: int = 1) -> np.ndarray:
    """x = (u, branch * u) with u = (lam_1 sigma, ..., lam_{k+1} sigma) / sqrt(2)."""
    lam = np.asarray(lam, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if abs(np.linalg.norm(lam) - 1) > oc.UNIT_TOL or abs(np.linalg.norm(sigma) - 1) > oc.UNIT_TOL:
        raise ValueError("psi needs unit lambda and unit sigma")
    u = np.kron(lam, sigma) / np.sqrt(2.0)
    return np.concatenate([u, branch * u])


def psi_differential(lam, sigma, dlam, dsigma, branch: int = 1) -> np.ndarray:
    du = (np.kron(dlam, sigma) + np.kron(lam, dsigma)) / np.sqrt(2.0)
    return np.concatenate([du, branch * du])


def psi_point(sys: CliffordSystem, lam, sigma, branch: int = 1) -> FocalPoint:
    if sys.m != 7 or sys.dim != 16 * len(lam):
        raise ValueError("psi needs the octonionic m = 7 system with matching k")
    return frames_Mplus(sys, psi(lam, sigma, branch))


def sample_psi(sys: CliffordSystem, branch: int, rng: np.random.Generator) -> FocalPoint:
    n = sys.dim // 16
    lam = rng.standard_normal(n)
    return psi_point(sys, lam / np.linalg.norm(lam), oc.random_unit(rng), branch)


def ca_criterion_m7(sys: CliffordSystem, x: np.ndarray, tol: float = CRITERION_TOL) -> bool:
    """Normal form of C_A for the m = 7 system: u = +-v and the octonion
    components of u all proportional to one unit octonion."""
    half = sys.dim // 2
    u, v = x[:half], x[half:]
    if min(np.linalg.norm(u - v), np.linalg.norm(u + v)) >= tol:
        return False
    comps = u.reshape(-1, 8)
    norms = np.linalg.norm(comps, axis=1)
    units = [c / n for c, n in zip(comps, norms) if n > tol]
    return all(oc.condition_x(units[0], s, tol)[0] for s in units[1:])


def sample_CA_I(sys: CliffordSystem, sign: int, rng: np.random.Generator) -> FocalPoint:
    """Unit vector of E_sign(P) for an indefinite m = 4 or m = 8 system, as a point of M-."""
    if sys.definiteness != "indefinite":
        raise ValueError("sample_CA_I needs an indefinite system")
    return frames_Mminus(sys, _unit_in(eigenbasis(sys.product, sign), rng))


def ca_indefinite_m8(sys: CliffordSystem, x: np.ndarray, tol: float = EIGEN_TOL) -> bool:
    return _eigen_distance(sys.product, x) < tol


def ca_definite_value(sys: CliffordSystem, p9: np.ndarray, x: np.ndarray) -> float:
    """<x, P x>^2 + <x, P_9 x>^2 with P the product of the indefinite system."""
    return float((x @ sys.product @ x) ** 2 + (x @ p9 @ x) ** 2)


def ca_definite_m8(sys: CliffordSystem, p9: np.ndarray, x: np.ndarray, tol: float = 1e-10) -> bool:
    return abs(ca_definite_value(sys, p9, x) - 1.0) < tol


def sample_CA_D(sys: CliffordSystem, p9: np.ndarray, rng: np.random.Generator,
                theta: float | None = None) -> FocalPoint:
    """Unit x in E+(cos t P + sin t P_9), returned as a point of M- of the dual system."""
    from .clifford import check_involution

    check_involution(p9)
    if theta is None:
        theta = rng.uniform(0.0, 2.0 * np.pi)
    q = np.cos(theta) * sys.product + np.sin(theta) * p9
    x = _unit_in(eigenbasis(q, 1), rng)
    return frames_Mminus(dualize(sys), x)


def intersect_Mminus(a: CliffordSystem, b: CliffordSystem, y: np.ndarray,
                     max_iter: int = 2000, tol: float = 1e-12) -> np.ndarray:
    """Alternate the M- retractions of two systems until y lies on both."""
    x = retract_Mminus(a, y).x
    for _ in range(max_iter):
        if max(mminus_residual(a, x), mminus_residual(b, x)) < tol:
            return x
        x = retract_Mminus(a, retract_Mminus(b, x).x).x
    raise RuntimeError("alternating retraction did not converge")


# --- Einstein scan ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EinsteinScan:
    g: float
    G: float
    argmin: np.ndarray
    argmax: np.ndarray
    form: np.ndarray


def einstein_scan(sys: CliffordSystem, fp: FocalPoint) -> EinsteinScan:
    """Extremes of f(x, X) = sum_{a<b} <X, P_a P_b x>^2 over unit tangent X."""
    if fp.side != "plus":
        raise ValueError("einstein_scan is defined on M+")
    b = pair_products(sys, fp.x) @ fp.tangents
    form = b.T @ b
    w, v = np.linalg.eigh(form)
    return EinsteinScan(float(w[0]), float(w[-1]), fp.tangents @ v[:, 0], fp.tangents @ v[:, -1], form)


def f_value(sys: CliffordSystem, fp: FocalPoint, X: np.ndarray) -> float:
    b = pair_products(sys, fp.x) @ X
    return float(b @ b)


def partial_product(sys: CliffordSystem, start: int = 0) -> np.ndarray:
    out = np.eye(sys.dim)
    for p in sys.matrices[start:]:
        out = out @ p
    return out


def witness_direction(Q: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(Qx - <Qx, x> x) normalised."""
    qx = Q @ x
    t = qx - (qx @ x) * x
    n = np.linalg.norm(t)
    if n < EIGEN_TOL:
        raise ValueError("x is an eigenvector of Q, witness direction undefined")
    return t / n


# --- audit -----------------------------------------------------------------------


@dataclass(frozen=True)
class LocusRow:
    family: str
    side: str
    locus: str
    claim: str
    verdict: str
    max_residual: float
    n_samples: int
    tolerance: float
    values: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "side": self.side,
            "locus": self.locus,
            "claim": self.claim,
            "samples": self.n_samples,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            **self.values,
        }


@dataclass(frozen=True, eq=False)
class LocusReport:
    spec: FamilySpec
    rows: list
    samples: list
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.rows)


def sample_seed(seed: int, family: str, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(family.encode()), index])


def _locus_sampler(spec: FamilySpec, sys: CliffordSystem):
    """(sampler(index, rng) -> (system, FocalPoint), criterion(x) -> bool) for the C_A sub-locus."""
    col = table_column(spec)
    if col == "(3,4k)":
        return (lambda i, rng: (sys, sample_CA_m3(sys, 1 - 2 * (i % 2), rng)),
                lambda x: ca_criterion_m3(sys, x))
    if col == "(7,8k)":
        return (lambda i, rng: (sys, sample_psi(sys, 1 - 2 * (i % 2), rng)),
                lambda x: ca_criterion_m7(sys, x))
    if col in ("(4,3)I", "(8,7)I"):
        return (lambda i, rng: (sys, sample_CA_I(sys, 1 - 2 * (i % 2), rng)),
                lambda x: ca_indefinite_m8(sys, x))
    if col == "(8,7)D":
        ind, p9 = indefinite_m8_extension()
        return (lambda i, rng: (sys, sample_CA_D(ind, p9, rng)),
                lambda x: ca_definite_m8(ind, p9, x, CRITERION_TOL))
    raise UnknownFamilyError(f"no exact C_A sampler for {spec.family_id}")


def _evaluate(spec, sys, kind, index, seed, tol, criterion, sampler):
    rng = np.random.default_rng(sample_seed(seed, f"{spec.family_id}{spec.side}{kind}", index))
    if kind == "locus":
        _, fp = sampler(index, rng)
    elif spec.side == "plus":
        fp = sample_Mplus(sys, rng)
    else:
        fp = sample_Mminus(sys, rng)
    rec = classify(sys, fp, tol)
    out = {"kind": kind, "index": index, "record": rec}
    if spec.side == "plus":
        scan = einstein_scan(sys, fp)
        out["g"], out["G"] = scan.g, scan.G
    if criterion is not None:
        out["criterion"] = bool(criterion(fp.x))
    return out


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("FOCALFORGE_THREADS", "1") or 1)
    return max(1, threads)


def _margins(sample: dict, side: str) -> dict:
    rec: CurvatureRecord = sample["record"]
    b = rec.bounds
    e = sample["G"] - sample["g"] if side == "plus" else rec.einstein_spread
    return {"C_A": b.upper15 - rec.rho_perp, "C_P": rec.rho_perp - b.lower15, "C_E": e}


def _attained(rec: CurvatureRecord, locus: str) -> tuple[bool, float]:
    key = locus[-1]
    return getattr(rec, f"cond{key}"), rec.residuals[key]


def table_audit(spec: FamilySpec, n_samples: int = 10, seed: int = DEFAULT_SEED,
                tol: float = DEFAULT_TOL, threads: int | None = None) -> LocusReport:
    """Audit one family on one side against its table claims.

    "whole" claims need the predicate at every generic sample; "empty" claims
    need a witness margin of at least 0.1 at every generic sample; sub-locus
    claims need the predicate and the analytic criterion at every exact
    sample, and a margin plus a negative criterion at every generic sample.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    try:
        sys = spec.build()
    except CliffordError as exc:
        raise UnknownFamilyError(str(exc)) from exc
    cl = claims(spec)
    sub = cl["C_A"].kind == "sublocus"
    sampler, criterion = _locus_sampler(spec, sys) if sub else (None, None)
    jobs = [("generic", i) for i in range(n_samples)]
    if sub:
        jobs += [("locus", i) for i in range(n_samples)]

    def run(job):
        return _evaluate(spec, sys, job[0], job[1], seed, tol, criterion, sampler)

    workers = _threads(threads)
    if workers == 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))

    generic = [r for r in results if r["kind"] == "generic"]
    locus = [r for r in results if r["kind"] == "locus"]
    rhos = [r["record"].rho_perp for r in generic]
    rows = []
    for name in LOCI:
        claim = cl[name]
        margins = [_margins(r, spec.side)[name] for r in generic]
        values = {"rho_min": min(rhos), "rho_max": max(rhos), "min_margin": min(margins)}
        if claim.kind == "whole":
            flags = [_attained(r["record"], name) for r in generic]
            ok = all(f for f, _ in flags)
            resid = max(v for _, v in flags)
            n, used_tol = len(generic), tol
        else:
            ok = all(mg > EMPTINESS_MARGIN for mg in margins)
            resid = max(max(0.0, EMPTINESS_MARGIN - mg) for mg in margins)
            n, used_tol = len(generic), EMPTINESS_MARGIN
            if claim.kind == "sublocus":
                flags = [_attained(r["record"], name) for r in locus]
                ok &= all(f for f, _ in flags) and all(r["criterion"] for r in locus)
                ok &= not any(r["criterion"] for r in generic)
                resid = max(resid, max(v for _, v in flags))
                n += len(locus)
                used_tol = tol
                values["locus_samples"] = len(locus)
        rows.append(LocusRow(spec.family_id, spec.side, name, claim.text,
                             "pass" if ok else "fail", float(resid), n, used_tol, values))
    return LocusReport(spec, rows, results, seed)


def sample_summary(sample: dict) -> dict:
    rec: CurvatureRecord = sample["record"]
    out = {"kind": sample["kind"], "index": sample["index"], **rec.as_dict()}
    for key in ("g", "G", "criterion"):
        if key in sample:
            out[key] = sample[key]
    return out


TABLE1_FAMILIES = (
    FamilySpec(1, 4), FamilySpec(2, 2), FamilySpec(6, 1), FamilySpec(3, 2),
    FamilySpec(4, 2, "definite"), FamilySpec(7, 2), FamilySpec(8, 2, "indefinite"), FamilySpec(10, 1),
)
TABLE2_FAMILIES = tuple(
    f.with_side("minus")
    for f in (
        FamilySpec(1, 4), FamilySpec(2, 2), FamilySpec(6, 1), FamilySpec(4, 2, "definite"),
        FamilySpec(4, 2, "indefinite"), FamilySpec(8, 2, "definite"),
        FamilySpec(8, 2, "indefinite"), FamilySpec(7, 2),
    )
)
