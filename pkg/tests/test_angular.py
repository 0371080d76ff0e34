import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_legendre, lpmv
from sympy.physics.wigner import wigner_3j as sympy_3j

from rydkick.angular import angular_coupling, wigner_3j
from rydkick.errors import DomainError


def test_matches_sympy_for_small_j():
    for j1, j2, j3 in itertools.product(range(4), repeat=3):
        for m1 in range(-j1, j1 + 1):
            for m2 in range(-j2, j2 + 1):
                m3 = -m1 - m2
                if abs(m3) > j3:
                    continue
                ref = float(sympy_3j(j1, j2, j3, m1, m2, m3))
                assert wigner_3j(j1, j2, j3, m1, m2, m3) == pytest.approx(ref, abs=1e-14)


@given(st.integers(0, 12), st.integers(0, 12), st.integers(0, 24), st.data())
def test_random_against_sympy(j1, j2, j3, data):
    m1 = data.draw(st.integers(-j1, j1))
    m2 = data.draw(st.integers(-j2, j2))
    ref = float(sympy_3j(j1, j2, j3, m1, m2, -m1 - m2))
    assert wigner_3j(j1, j2, j3, m1, m2, -m1 - m2) == pytest.approx(ref, abs=1e-13)


def test_selection_rules_give_zero():
    assert wigner_3j(1, 1, 3, 0, 0, 0) == 0.0  # triangle
    assert wigner_3j(1, 1, 1, 0, 0, 0) == 0.0  # odd sum with m = 0
    assert wigner_3j(1, 1, 2, 1, 1, -1) == 0.0  # m sum


def test_known_value():
    assert wigner_3j(1, 1, 0, 0, 0, 0) == pytest.approx(-1 / np.sqrt(3))


def test_rejects_bad_arguments():
    with pytest.raises(DomainError):
        wigner_3j(0.5, 1, 1, 0, 0, 0)
    with pytest.raises(DomainError):
        wigner_3j(-1, 1, 1, 0, 0, 0)


def _ylm_theta(l, m, x):
    """theta-part of Y_lm (the phi factor integrates to 2 pi for equal m)."""
    norm = np.sqrt((2 * l + 1) / (4 * np.pi) * factorial(l - m) / factorial(l + m))
    return norm * lpmv(m, l, x)


@pytest.mark.parametrize(
    "la,lb,L,m", [(0, 1, 1, 0), (1, 1, 2, 0), (1, 1, 2, 1), (2, 3, 3, 2), (3, 5, 4, 1), (1, 3, 2, 0)]
)
def test_coupling_matches_angular_quadrature(la, lb, L, m):
    # <la m| P_L(cos theta) |lb m> by Gauss-Legendre quadrature
    x, w = np.polynomial.legendre.leggauss(64)
    ref = 2 * np.pi * np.sum(w * _ylm_theta(la, m, x) * eval_legendre(L, x) * _ylm_theta(lb, m, x))
    assert angular_coupling(la, lb, L, m) == pytest.approx(ref, abs=1e-13)


def test_dipole_coupling_p_to_s():
    assert angular_coupling(1, 0, 1, 0) == pytest.approx(1 / np.sqrt(3))


@given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 16))
def test_coupling_symmetric_and_parity(la, lb, L):
    c = angular_coupling(la, lb, L, 0)
    assert c == pytest.approx(angular_coupling(lb, la, L, 0), abs=1e-15)
    if (la + lb + L) % 2 or L > la + lb or L < abs(la - lb):
        assert c == 0.0
