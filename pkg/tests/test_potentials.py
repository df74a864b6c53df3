import numpy as np
import pytest

from carlab import BoxDiscretization, ConstructionError, catalog_potential, catalog_radial


def test_zero_is_trivially_admissible():
    r = np.linspace(0.0, 5.0, 100)
    s = catalog_radial("zero", 0.4, r)
    assert s.envelope_ok
    assert np.all(s.values == 0.0)
    assert np.all(s.radial_derivative == 0.0)


def test_radial_decay_envelope_on_grid():
    r = np.linspace(0.0, 20.0, 5000)
    s = catalog_radial("radial_decay", 0.4, r, c=1.0)
    assert s.envelope_ok
    rho = 1.0 + r
    assert np.all(s.values <= rho ** (-0.4) + 1e-15)
    # |dV| = (c/2) d0 r (1+r^2)^(-d0/2-1) stays under the gradient envelope
    assert np.all(np.abs(s.radial_derivative) <= rho ** (-1.4) + 1e-15)


def test_trapping_ring_reports_fitted_c():
    r = np.linspace(0.0, 6.0, 4000)
    s = catalog_radial("trapping_ring", 0.4, r, E=1.0, A=2.0, rho=1.0, sigma=0.25)
    assert s.envelope_ok
    rho_env = (1.0 + r) ** 0.4
    assert s.c == pytest.approx(
        max((s.values * rho_env).max(), (np.abs(s.radial_derivative) * (1.0 + r) ** 1.4).max())
    )
    assert s.values.max() > 1.0  # barrier tops the energy


def test_trapping_ring_requires_barrier_above_energy():
    r = np.linspace(0.0, 6.0, 100)
    with pytest.raises(ConstructionError, match="A > E"):
        catalog_radial("trapping_ring", 0.4, r, E=3.0, A=2.0, rho=1.0, sigma=0.25)


def test_unknown_id_rejected():
    with pytest.raises(ConstructionError, match="unknown potential id"):
        catalog_radial("bogus", 0.4, np.linspace(0, 1, 10))


def test_field2d_radial_derivative_matches_exact():
    disc = BoxDiscretization(L=3.0, n=129)
    s = catalog_potential("radial_decay", 0.4, disc, c=1.0)
    r = s.r
    exact = -0.5 * 0.4 * r * (1.0 + r**2) ** (-0.4 / 2.0 - 1.0)
    # finite-difference gradients projected onto the radial direction
    err = np.abs(s.radial_derivative - exact)
    assert err.max() <= 5e-4
    assert s.envelope_ok


def test_field2d_zero_at_origin_node():
    disc = BoxDiscretization(L=2.0, n=25)
    s = catalog_potential("radial_decay", 0.4, disc, c=1.0)
    i0 = int(np.argmin(s.r))
    assert s.r[i0] == 0.0
    assert s.radial_derivative[i0] == 0.0
