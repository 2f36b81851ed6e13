import math

import numpy as np
import pytest

from gibbscert.bounds import (
    affine,
    baseline_bound,
    coordinate,
    covariance_bound,
    disjoint_support_bound,
    exponential_decay_bound,
    nearest_neighbor_certificate,
    single_site_function,
    weighted_bound,
)
from gibbscert.interaction import (
    build_interaction_matrix,
    build_tilted_matrix,
    interaction_from_model,
    pi_criterion,
)
from gibbscert.lattice import graph_distance, periodic_grid
from gibbscert.model import GibbsModel, cosine_potential, gaussian_potential, nearest_neighbor_coupling
from gibbscert.oracles.gaussian import gaussian_exact_covariance, gaussian_from_model


def im2(k, rho=(1.0, 1.0)):
    kappa = np.array([[0.0, k], [k, 0.0]])
    return build_interaction_matrix(np.asarray(rho, float), kappa)


def test_baseline_examples():
    f0, f1 = coordinate(0, 2), coordinate(1, 2)
    assert baseline_bound(1.0, f0, f0).bound_value == pytest.approx(1.0)
    assert baseline_bound(2.0, f0, f1).bound_value == pytest.approx(0.5)
    w = affine([1.0, 1.0])
    assert baseline_bound(1.0, w, w).bound_value == pytest.approx(2.0)


def test_covariance_bound_examples():
    f0, f1 = coordinate(0, 2), coordinate(1, 2)
    assert covariance_bound(im2(0.0), f0, f0).bound_value == pytest.approx(1.0)
    assert covariance_bound(im2(0.5), f0, f1).bound_value == pytest.approx(2.0 / 3.0)
    with pytest.raises(ValueError, match="positive definite"):
        covariance_bound(im2(1.0), f0, f1)


def test_covariance_bound_gaussian_sharpness():
    geom = periodic_grid([8])
    model = GibbsModel(geom, gaussian_potential(1.0), nearest_neighbor_coupling(0.2))
    im = interaction_from_model(model)
    cov = gaussian_exact_covariance(gaussian_from_model(model))
    for i in range(8):
        for j in range(8):
            b = covariance_bound(im, coordinate(i, 8), coordinate(j, 8))
            assert b.bound_value == pytest.approx(cov[i, j], rel=1e-10)


def test_bound_symmetry():
    rng = np.random.default_rng(7)
    im = im2(0.4, rho=(1.5, 2.0))
    for _ in range(5):
        f = affine(rng.normal(size=2))
        g = affine(rng.normal(size=2))
        assert covariance_bound(im, f, g).bound_value == pytest.approx(
            covariance_bound(im, g, f).bound_value
        )
        assert baseline_bound(1.2, f, g).bound_value == pytest.approx(
            baseline_bound(1.2, g, f).bound_value
        )


def test_weighted_bound_examples():
    im = im2(0.5)
    f0, f1 = coordinate(0, 2), coordinate(1, 2)
    # D = Id reduces to the baseline with rho = lambda_min(A)
    b = weighted_bound(im, [1.0, 1.0], 0.5, f0, f1)
    assert b.bound_value == pytest.approx(2.0)  # weaker than full-matrix 2/3
    assert covariance_bound(im, f0, f1).bound_value < b.bound_value
    with pytest.raises(ValueError, match="certify"):
        weighted_bound(im, [1.0, 1.0], 0.75, f0, f1)


def test_weighted_bound_exponential_weights_triangle_factor():
    geom = periodic_grid([8])
    model = GibbsModel(geom, gaussian_potential(1.0), nearest_neighbor_coupling(0.05))
    im = interaction_from_model(model)
    i, j = 0, 3
    d = np.array([math.exp(-graph_distance(geom, k, j)) for k in range(8)])
    from gibbscert.interaction import weighted_similarity_check

    check = weighted_similarity_check(im.A, d)
    assert check.passed
    b = weighted_bound(im, d, check.rho, coordinate(i, 8), coordinate(j, 8))
    # weights contribute exactly e^{-delta(i,j)}: d_i / d_j = e^{-3}
    assert b.bound_value == pytest.approx(math.exp(-3.0) / check.rho)


def test_exponential_decay_bound_examples():
    im = im2(0.1)
    rho_tilde = 0.7282
    geom = periodic_grid([2])
    f0, f1 = coordinate(0, 2), coordinate(1, 2)
    same = exponential_decay_bound(im, geom, rho_tilde, 0, 0, f0, f0)
    assert same.bound_value == pytest.approx(1.0 / rho_tilde)
    b = exponential_decay_bound(im, geom, rho_tilde, 0, 1, f0, f1)
    assert b.bound_value == pytest.approx(math.exp(-1.0) / rho_tilde)
    with pytest.raises(ValueError, match="rho_tilde"):
        exponential_decay_bound(im, geom, 0.0, 0, 1, f0, f1)
    with pytest.raises(ValueError, match="site"):
        exponential_decay_bound(im, geom, rho_tilde, 0, 1, f0, affine([1.0, 1.0]))


def test_exponential_decay_bound_distance_three():
    geom = periodic_grid([8])
    model = GibbsModel(geom, gaussian_potential(1.0), nearest_neighbor_coupling(0.05))
    im = interaction_from_model(model)
    tm = build_tilted_matrix(im, geom)
    b = exponential_decay_bound(
        im, geom, 0.7282, 0, 3, coordinate(0, 8), coordinate(3, 8)
    )
    assert b.bound_value == pytest.approx(math.exp(-3.0) / 0.7282, rel=1e-4)
    assert b.bound_value == pytest.approx(0.0684, abs=2e-4)
    assert tm.rho_tilde is not None  # the 0.05-coupling ring is certifiable


def test_product_measure_bound_vs_zero_covariance():
    # kappa = 0: bound is e^{-delta}/min rho while the true covariance vanishes
    im = build_interaction_matrix([2.0, 3.0], np.zeros((2, 2)))
    geom = periodic_grid([2])
    tm = build_tilted_matrix(im, geom)
    b = exponential_decay_bound(
        im, geom, tm.rho_tilde, 0, 1, coordinate(0, 2), coordinate(1, 2)
    )
    assert b.bound_value == pytest.approx(math.exp(-1.0) / 2.0)
    cov = gaussian_exact_covariance(gaussian_from_model(
        GibbsModel(periodic_grid([2]), gaussian_potential(2.0), nearest_neighbor_coupling(0.0))
    ))
    assert cov[0, 1] == 0.0


def test_disjoint_support_extension_flagged():
    geom = periodic_grid([4])
    model = GibbsModel(geom, gaussian_potential(1.0), nearest_neighbor_coupling(0.05))
    im = interaction_from_model(model)
    tm = build_tilted_matrix(im, geom)
    f = affine([1.0, 1.0, 0.0, 0.0])
    g = affine([0.0, 0.0, 1.0, 1.0])
    b = disjoint_support_bound(im, geom, tm.rho_tilde, f, g)
    assert b.extension
    expected = sum(
        math.exp(-graph_distance(geom, i, j)) for i in (0, 1) for j in (2, 3)
    ) / tm.rho_tilde
    assert b.bound_value == pytest.approx(expected)
    with pytest.raises(ValueError, match="disjoint"):
        disjoint_support_bound(im, geom, tm.rho_tilde, f, affine([1.0, 0, 0, 0]))


def test_bound_hierarchy_full_below_weighted_and_baseline():
    geom = periodic_grid([8])
    model = GibbsModel(geom, cosine_potential(1.0, 0.05, 2.0), nearest_neighbor_coupling(0.05))
    im = interaction_from_model(model)
    lam = pi_criterion(im.A)
    from gibbscert.interaction import weighted_similarity_check

    for i in range(8):
        for j in range(8):
            f, g = coordinate(i, 8), coordinate(j, 8)
            full = covariance_bound(im, f, g).bound_value
            base = baseline_bound(lam, f, g).bound_value
            assert full <= base + 1e-12
            d = np.array([math.exp(-graph_distance(geom, k, j)) for k in range(8)])
            check = weighted_similarity_check(im.A, d)
            assert check.passed
            wtd = weighted_bound(im, d, check.rho, f, g).bound_value
            assert full <= wtd + 1e-12


def test_bli_coincidence_ferromagnetic_affine():
    # for ferromagnetic Gaussians and affine f = g with nonnegative weights the
    # bound equals the Brascamp-Lieb right side w . Hess(H)^-1 w
    geom = periodic_grid([8])
    model = GibbsModel(geom, gaussian_potential(1.0), nearest_neighbor_coupling(0.2))
    im = interaction_from_model(model)
    hess_inv = np.linalg.inv(model.quadratic_part())
    rng = np.random.default_rng(11)
    for _ in range(20):
        w = rng.uniform(0.0, 1.0, size=8)
        f = affine(w, offset=float(rng.normal()))
        b = covariance_bound(im, f, f).bound_value
        assert b == pytest.approx(w @ hess_inv @ w, rel=1e-10)


def nn_model_2d(eps, q=1.0, a=0.0):
    pot = cosine_potential(q, a, 1.0) if a else gaussian_potential(q)
    return GibbsModel(periodic_grid([4, 4]), pot, nearest_neighbor_coupling(eps))


def test_nearest_neighbor_certificate_examples():
    cert = nearest_neighbor_certificate(nn_model_2d(0.05))
    assert cert.passed
    assert cert.threshold == pytest.approx(math.exp(-1.0) / 4.0)
    assert cert.prefactor == pytest.approx(1.0 / (1.0 - 0.2 * math.e))
    assert cert.checks["A_lower_bound_holds"]
    assert cert.checks["A_tilde_lower_bound_holds"]

    refused = nearest_neighbor_certificate(nn_model_2d(0.1))
    assert not refused.passed
    assert refused.margin < 0
    assert refused.prefactor is None


def test_nearest_neighbor_certificate_product_case():
    cert = nearest_neighbor_certificate(nn_model_2d(0.0))
    assert cert.passed
    assert cert.prefactor == pytest.approx(1.0)  # 1/Delta with Delta = 1


def test_nearest_neighbor_certificate_requires_2d_nn():
    geom = periodic_grid([8])
    model = GibbsModel(geom, gaussian_potential(1.0), nearest_neighbor_coupling(0.05))
    with pytest.raises(ValueError, match="2D"):
        nearest_neighbor_certificate(model)


def test_single_site_function_bound_factor():
    f = single_site_function(1, 3, np.sin, 1.0)
    assert np.allclose(f.grad_norms, [0.0, 1.0, 0.0])
    assert f.fn(np.array([0.0, math.pi / 2.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        single_site_function(0, 2, np.sin, -1.0)
