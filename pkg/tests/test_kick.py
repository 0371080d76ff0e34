
import mpmath
import numpy as np
import pytest
from scipy.special import spherical_jn

from rydkick.basis import BasisState, build_basis, index_of
from rydkick.errors import BasisMismatchError, GridError, TruncationError
from rydkick.kick import (
    build_kick_operator,
    check_same_basis,
    identity_kick,
    kick_block,
    load_kick_operator,
    radial_kick_integral,
    save_kick_operator,
)
from rydkick.radial import solve_basis, solve_radial


@pytest.fixture(scope="module")
def hydrogen():
    basis = tuple(build_basis(1, 12, 4, defects=None))
    return basis, solve_basis(basis)


@pytest.fixture(scope="module")
def small_op(small_basis, small_wavefunctions):
    return build_kick_operator(
        small_basis, 0.0014, wavefunctions=small_wavefunctions, strict=False
    )


@pytest.mark.parametrize("Q", [0.3, 1.0, 2.5])
def test_hydrogen_form_factor(Q):
    # <1s| j0(Q r) |1s> = 16 / (4 + Q^2)^2
    wf = solve_radial(BasisState(1, 0))
    assert radial_kick_integral(wf, wf, 0, Q) == pytest.approx(16 / (4 + Q**2) ** 2, abs=1e-8)


def test_radial_integral_against_mpmath():
    # 1s -> 2p through j_1, integrated with analytic functions at high precision
    Q = 0.7
    wf_1s = solve_radial(BasisState(1, 0))
    wf_2p = solve_radial(BasisState(2, 1), grid=wf_1s.grid)

    def integrand(r):
        u1 = 2 * r * mpmath.exp(-r)
        u2 = r**2 * mpmath.exp(-r / 2) / (2 * mpmath.sqrt(6))
        x = Q * r
        j1 = mpmath.sin(x) / x**2 - mpmath.cos(x) / x
        return u1 * j1 * u2

    ref = float(mpmath.quad(integrand, [0, 10, 40, mpmath.inf]))
    assert radial_kick_integral(wf_1s, wf_2p, 1, Q) == pytest.approx(ref, abs=1e-8)


def test_weak_kick_is_dipole(hydrogen):
    # <2p| exp(-iQz) |1s> ~ -i Q <2p|z|1s>, <2p|z|1s> = 128 sqrt(2) / 243
    basis, wfs = hydrogen
    Q = 1e-4
    op = build_kick_operator(basis, Q, wavefunctions=wfs, strict=False)
    idx = index_of(basis)
    elem = op.matrix[idx[(2, 1, 0)], idx[(1, 0, 0)]]
    assert elem.imag == pytest.approx(-Q * 128 * np.sqrt(2) / 243, rel=1e-5)
    assert abs(elem.real) < 1e-7


def test_zero_impulse_is_identity(small_basis, small_wavefunctions):
    op = build_kick_operator(small_basis, 0.0, wavefunctions=small_wavefunctions)
    assert np.array_equal(op.matrix, np.eye(len(small_basis)))
    assert op.max_deficit == 0.0


def test_complex_symmetric(small_op):
    assert np.max(np.abs(small_op.matrix - small_op.matrix.T)) < 1e-14


def test_reverse_kick_is_adjoint(small_basis, small_wavefunctions, small_op):
    back = build_kick_operator(
        small_basis, -0.0014, wavefunctions=small_wavefunctions, strict=False
    )
    assert np.max(np.abs(back.matrix - small_op.matrix.conj().T)) < 1e-14


def test_columns_nearly_unit_norm_inside_basis(small_op, small_basis):
    # columns far from the truncation edge keep their norm
    idx = index_of(small_basis)
    col = small_op.matrix[:, idx[(25, 1, 0)]]
    assert abs(1 - np.sum(np.abs(col) ** 2)) < 1e-3


def test_block_matches_full_matrix(small_basis, small_wavefunctions, small_op):
    rows = [3, 40, 77, 100]
    cols = [10, 35, 60]
    block = kick_block(small_basis, small_wavefunctions, 0.0014, rows, cols)
    assert np.allclose(block, small_op.matrix[np.ix_(rows, cols)], atol=1e-15)


def test_strict_truncation_error(small_basis, small_wavefunctions):
    with pytest.raises(TruncationError) as info:
        build_kick_operator(
            small_basis, 0.0014, wavefunctions=small_wavefunctions, unitarity_tol=1e-12
        )
    assert info.value.worst_state is not None


def test_mismatched_grids_rejected():
    a = solve_radial(BasisState(1, 0))
    b = solve_radial(BasisState(3, 1))
    with pytest.raises(GridError):
        radial_kick_integral(a, b, 1, 0.1)


def test_save_load_roundtrip(tmp_path, hydrogen):
    basis, wfs = hydrogen
    op = build_kick_operator(basis, 0.05, wavefunctions=wfs, strict=False)
    path = tmp_path / "kick.txt"
    save_kick_operator(op, path, ["provenance line"])
    back = load_kick_operator(path)
    assert np.array_equal(back.matrix, op.matrix)
    assert back.impulse == op.impulse
    assert [s.key for s in back.basis] == [s.key for s in op.basis]
    assert [s.energy for s in back.basis] == [s.energy for s in op.basis]


def test_basis_mismatch():
    a = build_basis(10, 12, 1)
    b = build_basis(10, 13, 1)
    with pytest.raises(BasisMismatchError):
        check_same_basis(a, b)
    check_same_basis(a, list(a))


def test_identity_kick():
    basis = build_basis(10, 12, 1)
    assert np.array_equal(identity_kick(basis).matrix, np.eye(len(basis)))


@pytest.mark.parametrize("L", [0, 1, 4, 9, 16])
def test_spherical_bessel_small_and_large_argument(L):
    for x in (1e-8, 1e-4, 0.3, 4.0, 60.0):
        ref = float(mpmath.sqrt(mpmath.pi / (2 * x)) * mpmath.besselj(L + 0.5, x))
        assert spherical_jn(L, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_different_m_never_couple():
    basis = tuple(build_basis(20, 26, 2, m=0) + build_basis(20, 26, 2, m=1))
    wfs = solve_basis(basis)
    op = build_kick_operator(basis, 0.002, wavefunctions=wfs, strict=False)
    m = np.array([s.m for s in basis])
    assert np.all(op.matrix[m[:, None] != m[None, :]] == 0)
    # m = 1 states still couple among themselves
    assert np.abs(op.matrix[np.ix_(m == 1, m == 1)] - np.eye(np.sum(m == 1))).max() > 1e-4
