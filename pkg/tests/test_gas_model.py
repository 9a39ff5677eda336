import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmflow.errors import DomainError, VacuumError
from pmflow.gas_model import GasModel


def test_enthalpy_reference_values():
    # h(1) = 0 for every gamma.
    for gamma in (1.0, 1.1, 1.4, 2.0, 3.0):
        h, _ = GasModel(gamma).enthalpy_and_sound(1.0)
        assert h == 0.0
    # Closed form at gamma = 2: h = rho - 1, c^2 = rho.
    h, c2 = GasModel(2.0).enthalpy_and_sound(3.0)
    assert h == pytest.approx(2.0, abs=1e-15)
    assert c2 == pytest.approx(3.0, abs=1e-15)
    # Isothermal branch: h = ln rho, c^2 = 1.
    h, c2 = GasModel(1.0).enthalpy_and_sound(math.e)
    assert h == pytest.approx(1.0, abs=1e-15)
    assert c2 == 1.0


def test_enthalpy_rejects_nonpositive_density():
    with pytest.raises(DomainError):
        GasModel(1.4).enthalpy_and_sound(0.0)
    with pytest.raises(DomainError):
        GasModel(1.4).enthalpy_and_sound(-1.0)


def test_gamma_below_one_rejected():
    with pytest.raises(DomainError):
        GasModel(0.9)


def test_density_reference_values():
    # Normalization: speed2/2 + z = B gives rho = 1 for any gamma, B.
    gas = GasModel(1.4, bernoulli=0.125)
    assert gas.density_from_bernoulli(0.25, 0.0) == pytest.approx(1.0, abs=1e-15)
    # Closed form at gamma = 2: argument 1 + (B - s/2 - z) with B-s/2-z = 1.
    gas = GasModel(2.0, bernoulli=1.0)
    assert gas.density_from_bernoulli(0.0, 0.0) == pytest.approx(2.0, abs=1e-15)
    # Vacuum boundary.
    gas = GasModel(1.4, bernoulli=0.0)
    with pytest.raises(VacuumError):
        gas.density_from_bernoulli(0.0, 1.0 / 0.4 + 1e-12)


def test_pseudo_mach_reference_values():
    gas = GasModel(1.4, bernoulli=0.125)
    assert gas.pseudo_mach([0.0, 0.0], 0.125) == 0.0
    # A state with |grad| = c is exactly sonic: pick z so that c = |grad|.
    # c^2 = 1 + 0.4*(B - q^2/2 - z); choose q = 1, z = B - 1/2 - 0 => c = 1.
    z = gas.bernoulli - 0.5
    assert gas.pseudo_mach([1.0, 0.0], z) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(
    rho=st.floats(0.5, 5.0),
    gamma=st.sampled_from([1.0, 1.1, 1.4, 2.0, 3.0]),
)
def test_sound_speed_closed_form(rho, gamma):
    _, c2 = GasModel(gamma).enthalpy_and_sound(rho)
    assert c2 == pytest.approx(rho ** (gamma - 1.0), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(
    gamma=st.sampled_from([1.0, 1.1, 1.4, 2.0, 3.0]),
    r1=st.floats(0.5, 5.0),
    r2=st.floats(0.5, 5.0),
)
def test_enthalpy_strictly_increasing(gamma, r1, r2):
    if r1 == r2:
        return
    lo, hi = sorted((r1, r2))
    gas = GasModel(gamma)
    assert gas.enthalpy_and_sound(lo)[0] < gas.enthalpy_and_sound(hi)[0]


@settings(max_examples=100, deadline=None)
@given(rho=st.floats(0.5, 5.0))
def test_isothermal_limit_continuity(rho):
    h_eps, _ = GasModel(1.0 + 1e-6).enthalpy_and_sound(rho)
    assert abs(h_eps - math.log(rho)) <= 1e-4


@settings(max_examples=200, deadline=None)
@given(
    gamma=st.sampled_from([1.0, 1.1, 1.4, 2.0, 3.0]),
    b=st.floats(0.0, 2.0),
    speed2=st.floats(0.0, 1.0),
    z=st.floats(-1.0, 0.5),
)
def test_bernoulli_inversion(gamma, b, speed2, z):
    gas = GasModel(gamma, bernoulli=b)
    try:
        rho = gas.density_from_bernoulli(speed2, z)
    except VacuumError:
        assert gamma > 1.0
        return
    h, _ = gas.enthalpy_and_sound(rho)
    total = h + 0.5 * speed2 + z
    assert total == pytest.approx(b, abs=1e-12 * max(1.0, abs(b)) + 1e-13)


def test_array_broadcasting():
    gas = GasModel(1.4, bernoulli=0.125)
    rho = gas.density_from_bernoulli(np.array([0.25, 0.1]), np.array([0.0, 0.0]))
    assert rho.shape == (2,)
    assert rho[0] == pytest.approx(1.0, abs=1e-15)
