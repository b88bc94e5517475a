import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from focalforge import curvature as cu
from focalforge import focal as fo
from focalforge.loci import einstein_scan, family_system

FAMILIES = [
    (1, 3, "n/a"), (1, 4, "n/a"), (2, 2, "n/a"), (3, 2, "n/a"), (4, 2, "definite"),
    (4, 2, "indefinite"), (5, 1, "n/a"), (6, 1, "n/a"), (7, 2, "n/a"), (8, 2, "definite"),
    (8, 2, "indefinite"),
]
SIDES = ["plus", "minus"]

# pointwise-constant values of the normal scalar curvature; the (1,k) M- values
# are lower15 and the (6,1) M- value is upper15 for the interchanged pair
CONSTANT_RHO = [
    ((1, 3, "n/a"), "plus", 16.0),
    ((1, 3, "n/a"), "minus", 4.0),
    ((1, 4, "n/a"), "minus", 12.0),
    ((1, 5, "n/a"), "minus", 24.0),
    ((2, 2, "n/a"), "plus", 12.0),
    ((2, 2, "n/a"), "minus", 32.0),
    ((6, 1, "n/a"), "plus", 84.0),
    ((6, 1, "n/a"), "minus", 96.0),
    ((4, 2, "definite"), "plus", 120.0),
    ((4, 2, "definite"), "minus", 384.0),
    ((8, 2, "definite"), "plus", 2016.0),
]


def fam_id(f):
    return ",".join(str(p) for p in f if p != "n/a")


def sample(sys, side, rng):
    return (fo.sample_Mplus if side == "plus" else fo.sample_Mminus)(sys, rng)


@pytest.mark.parametrize("m1, m2, expected", [
    (3, 4, (96.0, 384.0, 96.0 + 864.0 / 11.0, 1024.0)),
    (1, 1, (4.0, 16.0, 4.0 + 12.0 * (-1) / 3.0, 16.0)),
    (4, 3, (120.0, 480.0, 120.0, 900.0)),
    (7, 8, (896.0, 3584.0, 896.0 + 2688.0 * 7.0 / 23.0, 16384.0)),
])
def test_bounds_examples(m1, m2, expected):
    b = cu.bounds(m1, m2)
    np.testing.assert_allclose([b.lower15, b.upper15, b.lower17, b.ddvv], expected, rtol=1e-15)


def test_bounds_special_cases():
    assert cu.bounds(1, 1).upper15 == cu.bounds(1, 1).ddvv == 16
    b = cu.bounds(4, 3)
    assert b.lower15 == b.lower17 == 120
    with pytest.raises(ValueError):
        cu.bounds(0, 3)


@pytest.mark.parametrize("side", SIDES)
@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_rho_identity_and_bounds(fam, side):
    sys = family_system(*fam)
    rng = np.random.default_rng(11)
    for _ in range(3):
        S = fo.shape_ops(sys, sample(sys, side, rng))
        rho = cu.rho_perp(S)
        assert rho == pytest.approx(cu.rho_perp_identity(S), rel=1e-10)
        b = cu.bounds(*S.effective)
        assert b.lower15 - 1e-9 <= rho <= b.upper15 + 1e-9
        assert rho >= min(b.lower17, b.upper15) - 1e-9
        assert rho <= b.ddvv + 1e-9
        a, bb = S.effective
        pw = cu.pairwise_sums(S)
        assert np.all(pw >= 2 * a * bb - 1e-9) and np.all(pw <= 8 * a * bb + 1e-9)


def test_identity_negative_control():
    # swapping the multiplicities must break the identity
    sys = family_system(3, 2)
    S = fo.shape_ops(sys, fo.sample_Mplus(sys, np.random.default_rng(0)))
    wrong = fo.ShapeOperatorSet("minus", S.ops, S.multiplicities)
    assert abs(cu.rho_perp(S) - cu.rho_perp_identity(wrong)) > 1.0


@pytest.mark.parametrize("fam, side, value", CONSTANT_RHO,
                         ids=[f"{fam_id(f)}-{s}" for f, s, _ in CONSTANT_RHO])
def test_constant_values(fam, side, value):
    sys = family_system(*fam)
    rng = np.random.default_rng(12)
    for _ in range(4):
        assert cu.rho_perp(fo.shape_ops(sys, sample(sys, side, rng))) == pytest.approx(value, rel=1e-10)


@pytest.mark.parametrize("side", SIDES)
@pytest.mark.parametrize("fam", FAMILIES, ids=fam_id)
def test_block_identity(fam, side):
    sys = family_system(*fam)
    S = fo.shape_ops(sys, sample(sys, side, np.random.default_rng(13)))
    blocks = cu.block_decompose(S)
    assert blocks.diagonal_residual < 1e-12
    a, b = S.effective
    n = blocks.norms
    sums = np.array(n["A"]) + np.array(n["B"]) + np.array(n["C"])
    np.testing.assert_allclose(sums, b, atol=1e-10)
    np.testing.assert_allclose(n["B"], n["C"], atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(SIDES))
def test_normal_rotation_invariance(seed, side):
    sys = family_system(3, 2)
    rng = np.random.default_rng(seed)
    S = fo.shape_ops(sys, sample(sys, side, rng))
    R, _ = np.linalg.qr(rng.standard_normal((len(S), len(S))))
    T, _ = np.linalg.qr(rng.standard_normal((S.ops.shape[1],) * 2))
    rho = cu.rho_perp(S)
    assert cu.rho_perp(cu.rotate_normals(S, R)) == pytest.approx(rho, rel=1e-10)
    assert cu.rho_perp(cu.rotate_tangents(S, T)) == pytest.approx(rho, rel=1e-10)


@pytest.mark.parametrize("fam", [(3, 2, "n/a"), (4, 2, "indefinite"), (7, 2, "n/a"), (6, 1, "n/a")], ids=fam_id)
def test_ricci_closed_form(fam):
    sys = family_system(*fam)
    rng = np.random.default_rng(14)
    fp = fo.sample_Mplus(sys, rng)
    S = fo.shape_ops(sys, fp)
    for _ in range(5):
        X = rng.standard_normal(fp.dim)
        assert cu.ricci(S, X) == pytest.approx(cu.ricci_closed(sys, fp, X), rel=1e-10)
    scan = einstein_scan(sys, fp)
    eig = np.linalg.eigvalsh(cu.sum_of_squares(S))
    assert eig[-1] - eig[0] == pytest.approx(2 * (scan.G - scan.g), abs=1e-10)


def test_ricci_closed_needs_Mplus():
    sys = family_system(6, 1)
    fp = fo.sample_Mminus(sys, np.random.default_rng(0))
    with pytest.raises(ValueError):
        cu.ricci_closed(sys, fp, np.ones(fp.dim))


def test_kernel_angle_zero_on_CA_whole():
    # (6,1) on M-: C_A is everything, so kernels coincide
    sys = family_system(6, 1)
    rec = cu.classify(sys, fo.sample_Mminus(sys, np.random.default_rng(1)))
    assert rec.condA and not rec.condP and not rec.condE
    # arccos near 1 resolves angles only to about sqrt(eps)
    assert rec.kernel_angle < 1e-7 and rec.off_kernel < 1e-10


def test_classify_generic_point():
    sys = family_system(3, 2)
    rec = cu.classify(sys, fo.sample_Mplus(sys, np.random.default_rng(2)))
    assert not rec.condA and not rec.condP
    assert rec.kernel_angle > 1e-3
    assert rec.tol == cu.DEFAULT_TOL and rec.method == "exact"
    d = rec.as_dict()
    assert d["upper15"] == 384.0 and d["condA"] is False


def test_classify_fd_tolerance():
    sys = family_system(6, 1)
    rec = cu.classify(sys, fo.sample_Mminus(sys, np.random.default_rng(3)), method="finite-difference")
    assert rec.tol == cu.FD_TOL and rec.condA


def test_ambiguous_band_rejected():
    ops = np.array([np.diag([1.0, 0.5, 0.0]), np.zeros((3, 3))])
    S = fo.ShapeOperatorSet("plus", ops, (1, 1))
    with pytest.raises(cu.BlockDecompositionError):
        cu.block_decompose(S)
