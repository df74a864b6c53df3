import numpy as np
import pytest

from carlab import (
    BoxDiscretization,
    PowerIterationError,
    assemble,
    catalog_potential,
    dense_resolvent_norm,
    weight_diag,
    weighted_resolvent_norm,
)


def _operator(disc, name, h, E=1.0, **params):
    V = catalog_potential(name, 0.4, disc, E=E, **params)
    return assemble(V, E, h, disc, check_resolution=False)


def test_unweighted_respects_spectral_bound(small_box):
    # with all-ones weights the estimate cannot exceed the resolvent bound 1/eps
    op = _operator(small_box, "zero", 0.25)
    ones = weight_diag(small_box, 0.0)
    assert np.all(ones.values == 1.0)
    eps, tol = 5e-2, 1e-8
    est = weighted_resolvent_norm(op, eps, ones, ones, tol=tol)
    assert est.value <= (1.0 + tol) / eps
    assert est.converged


def test_matches_dense_svd_over_random_draws(small_box, rng):
    w = weight_diag(small_box, 0.6)
    cases = []
    for _ in range(5):
        name = rng.choice(["zero", "radial_decay", "trapping_ring"])
        h = rng.uniform(0.15, 0.35)
        eps = 10.0 ** rng.uniform(-6, -2)
        params = {"A": 2.0, "rho": 1.0, "sigma": 0.25} if name == "trapping_ring" else {}
        cases.append((str(name), h, eps, params))
    for name, h, eps, params in cases:
        op = _operator(small_box, name, h, **params)
        est = weighted_resolvent_norm(op, eps, w, w, tol=1e-9, seed=11)
        oracle = dense_resolvent_norm(op, eps, w, w)
        assert abs(est.value - oracle) / oracle <= 1e-6
        assert est.value <= (1.0 + 1e-9) / eps


def test_exterior_weight_beyond_box_gives_zero(small_box):
    op = _operator(small_box, "zero", 0.25)
    w = weight_diag(small_box, 0.6, R=10.0 * small_box.L)
    assert np.all(w.values == 0.0)
    est = weighted_resolvent_norm(op, 1e-3, w, w)
    assert est.value == 0.0


def test_adjoint_swap_invariance(small_box):
    op = _operator(small_box, "radial_decay", 0.25, c=1.0)
    w = weight_diag(small_box, 0.6)
    a = weighted_resolvent_norm(op, 1e-4, w, w, tol=1e-10, seed=5)
    b = weighted_resolvent_norm(op, 1e-4, w, w, tol=1e-10, seed=5, swap_adjoint=True)
    assert abs(a.value - b.value) / a.value <= 1e-8


def test_monotone_in_exterior_radius(small_box):
    op = _operator(small_box, "trapping_ring", 0.25, A=2.0, rho=1.0, sigma=0.25)
    values = []
    for R in (0.8, 1.3, 1.8):
        w = weight_diag(small_box, 0.6, R=R)
        values.append(weighted_resolvent_norm(op, 1e-4, w, w, tol=1e-10, seed=2).value)
    assert values[0] >= values[1] - 1e-8
    assert values[1] >= values[2] - 1e-8


def test_max_iter_carries_estimate(small_box):
    op = _operator(small_box, "zero", 0.25)
    w = weight_diag(small_box, 0.6)
    with pytest.raises(PowerIterationError) as err:
        weighted_resolvent_norm(op, 1e-4, w, w, tol=1e-16, max_iter=2)
    assert err.value.estimate is not None
    assert err.value.estimate > 0.0
    assert err.value.iterations == 2


@pytest.mark.parametrize("name,params", [
    ("zero", {}),
    ("trapping_ring", {"A": 2.0, "rho": 1.0, "sigma": 0.25}),
])
def test_eps_ladder_saturates(name, params):
    # limiting-absorption echo: once eps drops below the spectral distance
    # the weighted norm freezes at its eps -> 0 value instead of growing
    # like 1/eps (a factor 1e4 over this ladder)
    disc = BoxDiscretization(L=2.5, n=64)
    V = catalog_potential(name, 0.4, disc, E=1.0, **params)
    w = weight_diag(disc, 0.6)
    op = assemble(V, 1.0, 0.4, disc, check_resolution=False)
    vals = np.array([weighted_resolvent_norm(op, eps, w, w, tol=1e-9, seed=3).value
                     for eps in (1e-2, 1e-4, 1e-6)])
    assert vals.max() <= 2.5 * vals.min()


def test_grid_convergence_at_largest_h():
    # truncation/resolution control: doubling n moves the estimate by < 5%.
    # eps sits above the box level spacing so the check measures the
    # discretization, not the drift of individual box resonances.
    h, eps = 0.4, 0.2
    vals = []
    for n in (64, 128):
        disc = BoxDiscretization(L=2.5, n=n)
        op = _operator(disc, "zero", h)
        w = weight_diag(disc, 0.6)
        vals.append(weighted_resolvent_norm(op, eps, w, w, tol=1e-9, seed=1).value)
    assert abs(vals[1] - vals[0]) / vals[0] <= 0.05
