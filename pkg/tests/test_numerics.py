import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils import numerics
from utils.errors import ModelError, NoBracketError, SingularMatrixError
from utils.root_finding import all_roots, bisect_predicate, first_root, sign_change_brackets

entries = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)


def test_expm_of_zero_is_identity():
    assert np.allclose(numerics.expm(np.zeros((3, 3)), 5.0), np.eye(3))


def test_expm_diagonal():
    E = numerics.expm(np.diag([-1.0, 2.0]), 0.5)
    assert np.allclose(E, np.diag([math.exp(-0.5), math.exp(1.0)]))


def test_exponential_integral_of_singular_matrix():
    # an integrator pole at the origin needs no inverse
    Phi, Gam = numerics.expm_with_integral(np.zeros((2, 2)), 3.0)
    assert np.allclose(Phi, np.eye(2))
    assert np.allclose(Gam, 3.0 * np.eye(2))


def test_exponential_integral_scalar():
    Gam = numerics.expm_integral([[-2.0]], 1.5)
    assert Gam[0, 0] == pytest.approx((1.0 - math.exp(-3.0)) / 2.0, rel=1e-12)


def test_affine_flow_matches_closed_form():
    A = np.array([[-1.0]])
    flow = numerics.affine_flow(A, [2.0], 0.7)
    x = flow @ np.array([0.5, 1.0])
    # x' = -x + 2 from x(0) = 0.5
    assert x[0] == pytest.approx(2.0 + (0.5 - 2.0) * math.exp(-0.7), rel=1e-12)
    assert x[1] == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(entries, min_size=4, max_size=4), st.floats(min_value=0.01, max_value=1.0))
def test_expm_inverse_property(values, t):
    A = np.array(values).reshape(2, 2)
    assert np.allclose(numerics.expm(A, t) @ numerics.expm(A, -t), np.eye(2), atol=1e-9)


def test_solve_and_inv():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    assert np.allclose(A @ numerics.solve(A, b), b)
    assert np.allclose(numerics.inv(A) @ A, np.eye(2))


def test_singular_solve_carries_equation_tag():
    with pytest.raises(SingularMatrixError) as excinfo:
        numerics.solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2), "eq3")
    assert excinfo.value.equation_id == "eq3"


def test_non_square_is_rejected():
    with pytest.raises(ModelError):
        numerics.as_square(np.ones((2, 3)))


def test_non_finite_is_rejected():
    with pytest.raises(ModelError):
        numerics.eig([[np.nan, 0.0], [0.0, 1.0]])


def test_eig_returns_complex_pair():
    values = numerics.eig([[0.0, -1.0], [1.0, 0.0]])
    assert values.dtype == complex
    assert sorted(values.imag) == pytest.approx([-1.0, 1.0])


def test_sign_change_brackets_skip_non_finite():
    assert sign_change_brackets(np.array([1.0, np.nan, -1.0, -2.0, 3.0])) == [3]


def test_first_root_picks_smallest():
    grid = np.linspace(0.1, 7.0, 200)
    assert first_root(math.sin, grid) == pytest.approx(math.pi, abs=1e-10)


def test_first_root_none_without_sign_change():
    assert first_root(lambda x: x * x + 1.0, np.linspace(-1.0, 1.0, 11)) is None


def test_all_roots_finds_every_crossing():
    roots = all_roots(math.sin, 0.5, 10.0, 300)
    assert roots == pytest.approx([math.pi, 2.0 * math.pi, 3.0 * math.pi], abs=1e-9)


def test_bisect_predicate():
    value = bisect_predicate(lambda x: x > 2.5, 0.0, 10.0, rtol=1e-8)
    assert value == pytest.approx(2.5, rel=1e-6)


def test_bisect_predicate_without_bracket():
    with pytest.raises(NoBracketError):
        bisect_predicate(lambda x: True, 0.0, 1.0)
