"""Hamiltonians on the lattice: single-site potentials plus bilinear couplings.

A model is H(x) = sum_i psi_i(x_i) - sum_{i<j} J_ij x_i x_j at unit
temperature.  Everything downstream (interaction matrix, samplers, grid
oracles) only needs psi, its derivatives, and the coupling matrix J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .lattice import LatticeGeometry, distance_matrix


@dataclass(frozen=True)
class SingleSitePotential:
    """psi(x) = (q/2) x^2 + delta_psi(x) with a certified oscillation bound.

    Built-in perturbations keep osc(delta_psi) exactly computable:
    ``none`` has osc 0 and ``cosine`` (a*cos(b*x)) has osc 2|a|.  A ``custom``
    perturbation carries user callables plus a user-certified osc bound; the
    certificates are only as sound as that bound.
    """

    q: float
    perturbation: str = "none"
    amplitude: float = 0.0
    frequency: float = 0.0
    delta_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    delta_prime_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    delta_second_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    certified_osc: float | None = None

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("quadratic coefficient q must be positive")
        if self.perturbation not in ("none", "cosine", "custom"):
            raise ValueError(f"unknown perturbation {self.perturbation!r}")
        if self.perturbation == "custom":
            if self.delta_fn is None or self.delta_prime_fn is None:
                raise ValueError("custom perturbation needs value and derivative callables")
            if self.certified_osc is None or self.certified_osc < 0:
                raise ValueError("custom perturbation needs a certified osc bound >= 0")

    @property
    def osc_bound(self) -> float:
        if self.perturbation == "none":
            return 0.0
        if self.perturbation == "cosine":
            return 2.0 * abs(self.amplitude)
        return float(self.certified_osc)

    def delta(self, x):
        if self.perturbation == "none":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.perturbation == "cosine":
            return self.amplitude * np.cos(self.frequency * np.asarray(x, dtype=float))
        return self.delta_fn(np.asarray(x, dtype=float))

    def delta_prime(self, x):
        if self.perturbation == "none":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.perturbation == "cosine":
            x = np.asarray(x, dtype=float)
            return -self.amplitude * self.frequency * np.sin(self.frequency * x)
        return self.delta_prime_fn(np.asarray(x, dtype=float))

    def delta_second(self, x):
        if self.perturbation == "none":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.perturbation == "cosine":
            x = np.asarray(x, dtype=float)
            return -self.amplitude * self.frequency**2 * np.cos(self.frequency * x)
        if self.delta_second_fn is None:
            raise ValueError("custom perturbation has no second derivative callable")
        return self.delta_second_fn(np.asarray(x, dtype=float))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.q * x**2 + self.delta(x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.q * x + self.delta_prime(x)

    def second(self, x):
        x = np.asarray(x, dtype=float)
        return self.q + self.delta_second(x)


def gaussian_potential(q: float = 1.0) -> SingleSitePotential:
    return SingleSitePotential(q=q)


def cosine_potential(q: float, amplitude: float, frequency: float) -> SingleSitePotential:
    return SingleSitePotential(
        q=q, perturbation="cosine", amplitude=amplitude, frequency=frequency
    )


@dataclass(frozen=True)
class Coupling:
    """Bilinear coupling rule producing the symmetric matrix J with zero diagonal."""

    kind: str  # nearest_neighbor | algebraic | explicit
    epsilon: float = 0.0
    c: float = 0.0
    alpha: float = 0.0
    d: int = 0
    matrix: np.ndarray | None = field(default=None, repr=False)

    def build(self, geom: LatticeGeometry) -> np.ndarray:
        n = geom.n_sites
        if self.kind == "nearest_neighbor":
            delta = distance_matrix(geom)
            J = np.where(delta == 1.0, self.epsilon, 0.0)
        elif self.kind == "algebraic":
            r = distance_matrix(geom, euclidean=True)
            J = self.c / (r ** (self.d + self.alpha) + 1.0)
            np.fill_diagonal(J, 0.0)
        elif self.kind == "explicit":
            J = np.asarray(self.matrix, dtype=float)
            if J.shape != (n, n):
                raise ValueError("explicit coupling matrix has wrong shape")
            if not np.array_equal(J, J.T):
                raise ValueError("coupling matrix must be symmetric")
            if np.any(np.diag(J) != 0.0):
                raise ValueError("coupling matrix must have zero diagonal")
            J = J.copy()
        else:
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        return J


def nearest_neighbor_coupling(epsilon: float) -> Coupling:
    return Coupling(kind="nearest_neighbor", epsilon=epsilon)


def algebraic_coupling(c: float, alpha: float, d: int) -> Coupling:
    if c <= 0 or alpha <= 0:
        raise ValueError("algebraic coupling needs c > 0 and alpha > 0")
    return Coupling(kind="algebraic", c=c, alpha=alpha, d=d)


def explicit_coupling(J) -> Coupling:
    return Coupling(kind="explicit", matrix=np.asarray(J, dtype=float))


@dataclass
class GibbsModel:
    """Gibbs measure Z^-1 exp(-H) dx; immutable after construction."""

    geometry: LatticeGeometry
    potentials: SingleSitePotential | tuple[SingleSitePotential, ...]
    coupling: Coupling

    def __post_init__(self):
        if isinstance(self.potentials, SingleSitePotential):
            self.potentials = (self.potentials,) * self.geometry.n_sites
        else:
            self.potentials = tuple(self.potentials)
        if len(self.potentials) != self.geometry.n_sites:
            raise ValueError("need one potential per site (or one shared)")
        self._J = self.coupling.build(self.geometry)

    @property
    def n_sites(self) -> int:
        return self.geometry.n_sites

    def potential(self, i: int) -> SingleSitePotential:
        return self.potentials[i]

    def coupling_matrix(self) -> np.ndarray:
        return self._J.copy()

    def _psi_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([pot.value(xi) for pot, xi in zip(self.potentials, x)])

    def psi_grad(self, x: np.ndarray) -> np.ndarray:
        return np.array([pot.grad(xi) for pot, xi in zip(self.potentials, x)])

    def quadratic_part(self) -> np.ndarray:
        """Hessian of the Gaussian part: diag(q) - J."""
        return np.diag([pot.q for pot in self.potentials]) - self._J


def hamiltonian(model: GibbsModel, x) -> float:
    """H(x) = sum_i psi_i(x_i) - sum_{i<j} J_ij x_i x_j."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_sites,):
        raise ValueError(f"configuration must have length {model.n_sites}")
    J = model._J
    return float(np.sum(model._psi_values(x)) - 0.5 * x @ J @ x)


def grad_hamiltonian(model: GibbsModel, x) -> np.ndarray:
    """(grad H)_i = psi_i'(x_i) - sum_j J_ij x_j."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_sites,):
        raise ValueError(f"configuration must have length {model.n_sites}")
    return model.psi_grad(x) - model._J @ x


def kappa_matrix(model: GibbsModel) -> np.ndarray:
    """Uniform mixed-Hessian bounds kappa_ij = |J_ij| (exact for bilinear couplings)."""
    kappa = np.abs(model._J)
    np.fill_diagonal(kappa, 0.0)
    return kappa


def single_site_pi_constant(pot: SingleSitePotential) -> float:
    """Certified spectral-gap lower bound for one conditional measure.

    The conditional Hamiltonian at a site is psi(x) minus a linear tilt, so
    its convex part has curvature q (Bakry-Emery) and the bounded perturbation
    costs a Holley-Stroock factor exp(-osc):  rho = q * exp(-osc_bound).
    """
    return pot.q * math.exp(-pot.osc_bound)


def rho_vector(model: GibbsModel) -> np.ndarray:
    return np.array([single_site_pi_constant(pot) for pot in model.potentials])


class RelaxedCheck(NamedTuple):
    passed: bool
    min_eigenvalue: float


def pointwise_relaxed_check(
    model: GibbsModel, weights, points, rho_target: float
) -> RelaxedCheck:
    """Sampled check of the relaxed weighted condition.

    At each supplied configuration x builds the matrix with diagonal rho_i and
    signed off-diagonal mixed Hessian entries, symmetrizes D M D^-1 and tracks
    the smallest eigenvalue across points.  For bilinear couplings the matrix
    does not depend on x.  This is a sampled diagnostic, not a uniform-in-x
    certificate.
    """
    d = np.asarray(weights, dtype=float)
    if np.any(d <= 0):
        raise ValueError("weights must be positive")
    points = list(points)
    if not points:
        raise ValueError("need at least one configuration to check")
    rho = rho_vector(model)
    min_eig = np.inf
    for x in points:
        x = np.asarray(x, dtype=float)
        mixed = -model._J  # d_i d_j H for i != j, constant in x for bilinear J
        m = mixed.copy()
        np.fill_diagonal(m, rho)
        similar = (d[:, None] * m) / d[None, :]
        sym = 0.5 * (similar + similar.T)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(sym)[0]))
    return RelaxedCheck(passed=bool(min_eig >= rho_target), min_eigenvalue=min_eig)
