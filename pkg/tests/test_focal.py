import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from focalforge import focal as fo
from focalforge.clifford import eigenbasis
from focalforge.loci import family_system

FAMILIES = [
    (1, 4, "n/a"), (2, 2, "n/a"), (3, 2, "n/a"), (4, 2, "definite"), (4, 2, "indefinite"),
    (5, 1, "n/a"), (6, 1, "n/a"), (7, 2, "n/a"), (8, 2, "definite"), (8, 2, "indefinite"),
    (10, 1, "n/a"),
]


def fam_id(f):
    return ",".join(str(p) for p in f if p != "n/a")


def rng_for(fam, salt=0):
    return np.random.default_rng([fam[0], fam[1], len(fam[2]), salt])


def assert_orthonormal(a, atol=1e-12):
    np.testing.assert_allclose(a.T @ a, np.eye(a.shape[1]), atol=atol)


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mplus_sample_and_frames(fam):
    sys = family_system(*fam)
    m1, m2 = sys.multiplicities
    fp = fo.sample_Mplus(sys, rng_for(fam))
    assert fo.mplus_residual(sys, fp.x) < 1e-12
    assert fp.codim == m1 + 1 and fp.dim == m1 + 2 * m2
    frame = np.column_stack([fp.x, fp.normals, fp.tangents])
    assert frame.shape == (sys.dim, sys.dim)
    assert_orthonormal(frame)


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_sample_and_frames(fam):
    sys = family_system(*fam)
    m1, m2 = sys.multiplicities
    fp = fo.sample_Mminus(sys, rng_for(fam))
    assert fo.mminus_residual(sys, fp.x) < 1e-12
    assert fp.codim == m2 + 1 and fp.dim == 2 * m1 + m2
    assert_orthonormal(np.column_stack([fp.x, fp.normals, fp.tangents]))
    # the rotated system is again a Clifford system with Q_0 x = x
    np.testing.assert_allclose(fp.rotated[0] @ fp.x, fp.x, atol=1e-12)
    qx = np.einsum("jik,k->ij", fp.rotated[1:], fp.x)
    np.testing.assert_allclose(fp.normals.T @ qx, 0, atol=1e-12)
    np.testing.assert_allclose(fp.x @ qx, 0, atol=1e-12)


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_recovers_coefficients(fam):
    sys = family_system(*fam)
    rng = rng_for(fam, 1)
    p = rng.standard_normal(sys.m + 1)
    p /= np.linalg.norm(p)
    fp = fo.sample_Mminus(sys, rng, coeffs=p)
    np.testing.assert_allclose(sys.quadratic_values(fp.x), p, atol=1e-12)
    fresh = fo.frames_Mminus(sys, fp.x)
    np.testing.assert_allclose(fresh.coeffs, p, atol=1e-12)
    assert fo.subspace_distance(fresh.normals, fp.normals) < 1e-10


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mplus_spectra(fam):
    sys = family_system(*fam)
    m1, m2 = sys.multiplicities
    S = fo.shape_ops(sys, fo.sample_Mplus(sys, rng_for(fam, 2)))
    assert S.effective == (m1, m2) and len(S) == m1 + 1
    worst, counts_ok = fo.spectrum_residual(S)
    assert worst < 1e-10 and counts_ok
    np.testing.assert_allclose(np.einsum("aij,aij->a", S.ops, S.ops), 2 * m2, rtol=1e-10)
    for op in S.ops:
        np.testing.assert_allclose(op @ op @ op, op, atol=1e-10)


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_spectra(fam):
    sys = family_system(*fam)
    m1, m2 = sys.multiplicities
    fp = fo.sample_Mminus(sys, rng_for(fam, 3))
    for method in ("algebraic", "finite-difference"):
        S = fo.shape_ops(sys, fp, method)
        assert S.effective == (m2, m1) and len(S) == m2 + 1
        worst, counts_ok = fo.spectrum_residual(S)
        assert counts_ok
        assert worst < (1e-10 if method == "algebraic" else 1e-5)
        norms = np.einsum("aij,aij->a", S.ops, S.ops)
        assert np.max(np.abs(norms - 2 * m1)) / (2 * m1) < (1e-10 if method == "algebraic" else 1e-6)


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_fd_agrees_with_algebraic(fam):
    sys = family_system(*fam)
    fp = fo.sample_Mminus(sys, rng_for(fam, 4))
    alg = fo.shape_ops_Mminus_algebraic(sys, fp)
    fd = fo.shape_ops_Mminus_fd(sys, fp)
    assert np.max(np.abs(alg.ops - fd.ops)) < 1e-5


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_algebraic_action(fam):
    """S_N maps Q_i x to Q_i N and back, and kills what is left of the tangent space."""
    sys = family_system(*fam)
    fp = fo.sample_Mminus(sys, rng_for(fam, 5))
    S = fo.shape_ops_Mminus_algebraic(sys, fp)
    t = fp.tangents
    rot = fp.rotated[1:]
    qx = np.einsum("jik,k->ji", rot, fp.x)
    span = np.column_stack([qx.T])
    for op, n in zip(S.ops, fp.normals.T):
        qn = np.einsum("jik,k->ji", rot, n)
        np.testing.assert_allclose(t @ op @ (t.T @ qx.T), (t @ t.T) @ qn.T, atol=1e-12)
        span = np.column_stack([span, qn.T])
    rest = t @ fo.complement(t.T @ span)
    for op in S.ops:
        np.testing.assert_allclose(op @ (t.T @ rest), 0, atol=1e-12)


def test_Mplus_projection_fixed_point():
    sys = family_system(3, 2)
    fp = fo.sample_Mplus(sys, np.random.default_rng(0))
    again = fo.project_Mplus(sys, fp.x)
    np.testing.assert_allclose(again.x, fp.x, atol=1e-14)


@pytest.mark.parametrize("sign", [1, -1])
def test_product_eigenvector_on_Mplus(sign):
    sys = family_system(3, 2)
    basis = eigenbasis(sys.product, sign)
    x = basis @ np.random.default_rng(sign + 5).standard_normal(basis.shape[1])
    x /= np.linalg.norm(x)
    assert fo.mplus_residual(sys, x) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_retraction_idempotent(seed):
    sys = family_system(6, 1)
    rng = np.random.default_rng(seed)
    fp = fo.sample_Mminus(sys, rng)
    np.testing.assert_allclose(fo.retract_Mminus(sys, fp.x).x, fp.x, atol=1e-14)
    y = fo.retract_Mminus(sys, fp.x + 0.05 * rng.standard_normal(sys.dim))
    assert fo.mminus_residual(sys, y.x) < 1e-12


def test_retraction_undefined_on_Mplus():
    sys = family_system(6, 1)
    x = fo.sample_Mplus(sys, np.random.default_rng(1)).x
    with pytest.raises(fo.RetractionError):
        fo.retract_Mminus(sys, x)


def test_membership_errors():
    sys = family_system(2, 2)
    y = np.zeros(sys.dim)
    y[0] = 1.0
    with pytest.raises(fo.MembershipError):
        fo.frames_Mplus(sys, y + 1e-3)
    with pytest.raises(fo.MembershipError):
        fo.frames_Mminus(sys, fo.sample_Mplus(sys, np.random.default_rng(2)).x)
    with pytest.raises(ValueError):
        fo.project_Mplus(sys, np.zeros(sys.dim))


def test_side_checks():
    sys = family_system(2, 2)
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError):
        fo.shape_ops_Mplus(sys, fo.sample_Mminus(sys, rng))
    with pytest.raises(ValueError):
        fo.shape_ops_Mminus_algebraic(sys, fo.sample_Mplus(sys, rng))
    with pytest.raises(ValueError):
        fo.shape_ops_Mminus(sys, fo.sample_Mminus(sys, rng), method="bogus")


def test_mismatch_detected():
    sys = family_system(6, 1)
    fp = fo.sample_Mminus(sys, np.random.default_rng(4))
    bad = fo.FocalPoint(fp.x, fp.side, fp.normals, fp.tangents, fp.coeffs, 1.1 * fp.rotated)
    with pytest.raises(fo.ShapeOperatorMismatch) as exc:
        fo.shape_ops_Mminus(sys, bad)
    assert set(exc.value.spectra) == {"algebraic", "finite-difference"}


def test_projection_failure_reports_residual(monkeypatch):
    sys = family_system(6, 1)
    monkeypatch.setattr(fo, "GN_MAX_ITER", 0)
    with pytest.raises(fo.ProjectionError) as exc:
        fo.project_Mplus(sys, np.random.default_rng(5).standard_normal(sys.dim))
    assert exc.value.residual > 0


def test_tangent_frame_covariance():
    sys = family_system(4, 2, "definite")
    fp = fo.sample_Mplus(sys, np.random.default_rng(6))
    S = fo.shape_ops(sys, fp)
    q, _ = np.linalg.qr(np.random.default_rng(7).standard_normal((fp.dim, fp.dim)))
    rotated = fo.FocalPoint(fp.x, fp.side, fp.normals, fp.tangents @ q)
    S2 = fo.shape_ops(sys, rotated)
    np.testing.assert_allclose(S2.ops, np.einsum("ia,bij,jc->bac", q, S.ops, q), atol=1e-12)


def test_bucket_counts():
    assert fo.bucket_counts([1.0, 0.9, -1.0, 0.1, 0.0]) == (2, 1, 2)


def test_subspaces():
    a = np.eye(4)[:, :2]
    b = np.eye(4)[:, 1:3]
    np.testing.assert_allclose(np.sort(fo.principal_angles(a, b)), [0, np.pi / 2], atol=1e-12)
    assert fo.subspace_distance(a, a @ np.array([[0, 1], [1, 0]])) < 1e-12
    assert fo.subspace_distance(a, b) == pytest.approx(1.0)


@pytest.mark.parametrize("side", ["plus", "minus"])
@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_cubic_and_mixed_identities(fam, side):
    """S_a^3 = S_a and S_a = S_b^2 S_a + S_a S_b^2 + S_b S_a S_b for a != b."""
    sys = family_system(*fam)
    sampler = fo.sample_Mplus if side == "plus" else fo.sample_Mminus
    S = fo.shape_ops(sys, sampler(sys, rng_for(fam, 6)))
    gram = np.einsum("aij,bij->ab", S.ops, S.ops)
    np.testing.assert_allclose(gram, 2 * S.effective[1] * np.eye(len(S)), atol=1e-9)
    for a, sa in enumerate(S.ops):
        assert np.max(np.abs(sa @ sa @ sa - sa)) < 1e-10
        for b, sb in enumerate(S.ops):
            if a != b:
                mixed = sb @ sb @ sa + sa @ sb @ sb + sb @ sa @ sb
                assert np.max(np.abs(sa - mixed)) < 1e-9


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_kernels(fam):
    """ker S_N = {v in E+(Q_0) : v perp x, v perp Q_i N}."""
    sys = family_system(*fam)
    fp = fo.sample_Mminus(sys, rng_for(fam, 7))
    S = fo.shape_ops(sys, fp)
    plus = eigenbasis(fp.rotated[0], 1)
    for op, n in zip(S.ops, fp.normals.T):
        qn = np.einsum("jik,k->ij", fp.rotated[1:], n)
        expected = plus @ fo.complement(plus.T @ np.column_stack([fp.x, qn]))
        w, v = np.linalg.eigh(op)
        kernel = fp.tangents @ v[:, np.abs(w) < 0.5]
        assert kernel.shape[1] == expected.shape[1] == sys.multiplicities[1]
        assert np.max(fo.principal_angles(kernel, expected)) < 1e-6


@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_Mminus_tangent_span(fam):
    """T_x M- = span{Q_i x : i >= 1} + (E+(Q_0) minus x)."""
    sys = family_system(*fam)
    fp = fo.sample_Mminus(sys, rng_for(fam, 8))
    plus = eigenbasis(fp.rotated[0], 1)
    qx = np.einsum("jik,k->ij", fp.rotated[1:], fp.x)
    span = np.column_stack([qx, plus @ fo.complement(plus.T @ fp.x[:, None])])
    assert fo.subspace_distance(span, fp.tangents) < 1e-10
