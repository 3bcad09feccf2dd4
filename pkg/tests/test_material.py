import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrvem.material import (isotropic_compliance, isotropic_voigt, kappa, plane_strain_isotropic,
                            variable_field_test_c)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1e3), st.floats(1e-2, 1e3))
def test_compliance_inverts_stiffness(lam, mu):
    C = isotropic_voigt(lam, mu)
    D = isotropic_compliance(lam, mu)
    np.testing.assert_allclose(C @ D, np.eye(3), atol=1e-10)


def test_voigt_energy_convention():
    # sigma : eps with engineering shear strain equals s_V . e_V
    lam, mu = 0.7, 1.3
    eps = np.array([[0.1, 0.25], [0.25, -0.3]])
    sig = 2 * mu * eps + lam * np.trace(eps) * np.eye(2)
    eV = np.array([eps[0, 0], eps[1, 1], 2 * eps[0, 1]])
    sV = isotropic_voigt(lam, mu) @ eV
    np.testing.assert_allclose(sV, [sig[0, 0], sig[1, 1], sig[0, 1]])
    assert sV @ eV == pytest.approx(np.sum(sig * eps))


def test_kappa_unit_moduli():
    # D = [[3/8, -1/8, 0], [-1/8, 3/8, 0], [0, 0, 1]] for lambda = mu = 1
    assert kappa(plane_strain_isotropic(1, 1), np.array([0.2, 0.3])) == pytest.approx(0.875)


def test_variable_field_values():
    f = variable_field_test_c()
    pts = np.array([[0.5, 0.5], [0.0, 0.0], [1.0, 0.5]])
    C = f.stiffness(pts)
    np.testing.assert_allclose(C[:, 2, 2], [1.0, 0.5, 0.75])
    np.testing.assert_allclose(C[:, 0, 0], 3 * C[:, 2, 2])
    assert not f.constant


def test_scaling():
    f = plane_strain_isotropic(2.0, 3.0).scaled(10.0)
    np.testing.assert_allclose(f.stiffness(np.zeros((1, 2)))[0], 10 * isotropic_voigt(2.0, 3.0))
    assert f.constant


@pytest.mark.parametrize("lam,mu", [(1.0, 0.0), (-1.0, 1.0), (1.0, -2.0)])
def test_nonphysical_moduli_rejected(lam, mu):
    with pytest.raises(ValueError):
        plane_strain_isotropic(lam, mu)
