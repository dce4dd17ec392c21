import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwlecam.errors import DegenerateCoin, MarginViolation, RangeError
from qwlecam.params import (
    ANGLE_FIELDS,
    build_params,
    hadamard,
    params_from_json,
    params_to_json,
    theta0,
)

HALF = math.pi / 2


def valid_angles():
    side = st.floats(-HALF, HALF)
    return st.tuples(
        side, side, st.floats(0.0, HALF), side, side, st.floats(0.06, HALF - 0.06)
    )


def test_hadamard_matrix_and_coin():
    p = build_params((0, 0, 0, 0, 0, math.pi / 4), 0.1)
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(p.coin, [[s, s], [s, -s]], atol=1e-15)
    np.testing.assert_allclose(p.coin_state, [1, 0], atol=1e-15)


def test_theta0_values():
    p = theta0()
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(p.coin_state, [s, 1j * s], atol=1e-15)
    d = p.derived()
    assert abs(d.varpi) <= 1e-14
    assert d.abs_u11 == pytest.approx(s, abs=1e-15)


def test_phi_zero_is_degenerate():
    with pytest.raises(DegenerateCoin):
        build_params((0, 0, 0, 0, 0, 0.0), 0.05)


def test_margin_violation():
    with pytest.raises(MarginViolation):
        build_params((0, 0, 0, 0, 0, 0.01), 0.05)


@pytest.mark.parametrize("i,bad", [(0, 2.0), (1, -1.6), (2, -0.1), (3, 1.6), (4, -2.0), (5, 1.7)])
def test_range_error_names_field(i, bad):
    angles = [0.0, 0.0, 0.3, 0.0, 0.0, 0.7]
    angles[i] = bad
    with pytest.raises(RangeError) as exc:
        build_params(angles)
    assert exc.value.field == ANGLE_FIELDS[i]


def test_mapping_input_and_json_round_trip():
    p = theta0()
    q = params_from_json(params_to_json(p))
    assert p == q
    assert build_params(p.to_dict(), p.kappa_margin) == p


@given(valid_angles())
def test_unitarity_and_invariants(angles):
    p = build_params(angles)
    U = p.coin
    np.testing.assert_allclose(U.conj().T @ U, np.eye(2), atol=1e-12)
    assert abs(abs(np.linalg.det(U)) - 1) < 1e-12
    assert abs(np.linalg.norm(p.coin_state) - 1) < 1e-12
    assert np.all(np.abs(U) >= 1e-9)
    d = p.derived()
    assert 0 < d.abs_u11 < 1
    assert -1 - 1e-12 <= d.varpi <= 1 + 1e-12


@given(valid_angles())
def test_varpi_matches_definition(angles):
    p = build_params(angles)
    (u11, u12), _ = p.coin
    a0, a1 = p.a0, p.a1
    cross = a0 * a1.conjugate() * u11 * u12.conjugate()
    cross = cross + cross.conjugate()
    ref = (abs(a0) ** 2 - abs(a1) ** 2 + cross.real / abs(u11) ** 2) * abs(u11)
    assert p.derived().varpi == pytest.approx(ref, abs=1e-12)


@given(valid_angles())
def test_build_is_deterministic(angles):
    assert build_params(angles) == build_params(angles)


def test_hadamard_helper():
    assert hadamard().coin_state[0] == 1
