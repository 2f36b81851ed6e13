import numpy as np
import pytest

from gibbscert.lattice import periodic_grid
from gibbscert.model import (
    GibbsModel,
    cosine_potential,
    gaussian_potential,
    nearest_neighbor_coupling,
)
from gibbscert.oracles.gaussian import (
    GaussianModel,
    gaussian_exact_covariance,
    gaussian_from_model,
)


def test_identity_precision():
    gm = GaussianModel(precision=np.eye(3))
    assert np.allclose(gaussian_exact_covariance(gm), np.eye(3))


def test_two_by_two_closed_form():
    gm = GaussianModel(precision=np.array([[1.0, -0.5], [-0.5, 1.0]]))
    cov = gaussian_exact_covariance(gm)
    assert np.allclose(cov, [[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]])


def test_covariance_independent_of_linear_term():
    p = np.array([[2.0, -0.3], [-0.3, 1.5]])
    cov0 = gaussian_exact_covariance(GaussianModel(precision=p))
    cov1 = gaussian_exact_covariance(GaussianModel(precision=p, linear=np.array([3.0, -7.0])))
    assert np.array_equal(cov0, cov1)


def test_rejects_indefinite_precision():
    with pytest.raises(ValueError, match="positive definite"):
        gaussian_exact_covariance(GaussianModel(precision=np.array([[1.0, 2.0], [2.0, 1.0]])))


def test_ferromagnetic_flag():
    assert GaussianModel(precision=np.array([[1.0, -0.1], [-0.1, 1.0]])).ferromagnetic
    assert not GaussianModel(precision=np.array([[1.0, 0.1], [0.1, 1.0]])).ferromagnetic


def test_from_model_uses_the_hessian():
    geom = periodic_grid([4])
    model = GibbsModel(geom, gaussian_potential(2.0), nearest_neighbor_coupling(0.3))
    gm = gaussian_from_model(model)
    assert np.allclose(gm.precision, model.quadratic_part())
    assert gm.ferromagnetic


def test_from_model_rejects_perturbed():
    geom = periodic_grid([2])
    model = GibbsModel(geom, cosine_potential(1.0, 0.1, 1.0), nearest_neighbor_coupling(0.1))
    with pytest.raises(ValueError, match="Gaussian"):
        gaussian_from_model(model)
