"""Multivariate q-Gaussian distribution with q-mean 0 and q-covariance beta^2 I.

The family interpolates between a uniform law on a shrinking ball
(q -> -inf), the Gaussian (q = 1) and heavy power-law tails
(1 < q < 1 + 2/N, Cauchy at q = 1 + 2/(N+1)).  Everything here works in
terms of the *standard* member (unit q-variance per coordinate); the
kernel's ``beta`` enters only as an affine scale.

All Gamma-ratio constants are evaluated as log-gamma differences: the
naive Gamma quotients overflow long before q reaches 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .rng import RngStream

# Constructions this close to the q = 1 + 2/dim boundary are rejected: the
# normalizing constant diverges there and nothing finite can be computed.
_BOUNDARY_GUARD = 1e-9

_LOG_2PI = math.log(2.0 * math.pi)


class QGaussianDomainError(ValueError):
    """q is outside (-inf, 1 + 2/N), where the distribution is undefined."""


class MomentDoesNotExistError(ValueError):
    """The requested generalized moment is infinite for this (q, N)."""


def _check_q_domain(q: float, dim: int) -> None:
    if not q < 1.0 + 2.0 / dim - _BOUNDARY_GUARD:
        raise QGaussianDomainError(
            f"q={q} not admissible for dim={dim}; need q < 1 + 2/dim = {1.0 + 2.0 / dim}"
        )


def tail_coefficient(q: float, dim: int) -> float:
    """The recurring constant N + 2 - N*q (exactly 2 at q = 1)."""
    return dim + 2.0 - dim * q


@dataclass(frozen=True)
class QKernel:
    """Perturbation-distribution parameters: shape q, scale beta, dimension."""

    q: float
    beta: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        _check_q_domain(self.q, self.dim)

    @property
    def is_gaussian(self) -> bool:
        return self.q == 1.0

    @property
    def tail_coefficient(self) -> float:
        return tail_coefficient(self.q, self.dim)


@dataclass(frozen=True)
class Perturbation:
    """A standard draw together with its cached correction factor."""

    eta: np.ndarray
    rho: float


@dataclass(frozen=True)
class MomentSpec:
    """Powers for E[prod_i X_i^{powers[i]} / rho(X)^b]."""

    b: int
    powers: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.b < 0 or any(p < 0 for p in self.powers):
            raise ValueError("moment powers must be nonnegative integers")
        object.__setattr__(self, "powers", tuple(int(p) for p in self.powers))


def rho(eta: np.ndarray, q: float, dim: int) -> float:
    """Correction factor 1 - ((1-q)/(N+2-Nq)) * ||eta||^2; exactly 1 at q = 1."""
    if q == 1.0:
        return 1.0
    eta = np.asarray(eta, dtype=float)
    return float(1.0 - ((1.0 - q) / tail_coefficient(q, dim)) * np.dot(eta, eta))


def log_normalizing_constant(q: float, dim: int) -> float:
    """log K_{q,N}, the normalizer of the standard (beta = 1) density."""
    _check_q_domain(q, dim)
    n = dim
    if q == 1.0:
        return 0.5 * n * _LOG_2PI
    c = tail_coefficient(q, n)
    if q < 1.0:
        u = (2.0 - q) / (1.0 - q)
        return (
            0.5 * n * (math.log(c) - math.log(1.0 - q))
            + 0.5 * n * math.log(math.pi)
            + gammaln(u)
            - gammaln(u + 0.5 * n)
        )
    v = 1.0 / (q - 1.0)
    return (
        0.5 * n * (math.log(c) - math.log(q - 1.0))
        + 0.5 * n * math.log(math.pi)
        + gammaln(v - 0.5 * n)
        - gammaln(v)
    )


def normalizing_constant(q: float, dim: int) -> float:
    """K_{q,N}; the Gaussian value (2*pi)^{N/2} at q = 1."""
    return math.exp(log_normalizing_constant(q, dim))


def support_radius_sq(q: float, dim: int) -> float:
    """Squared support radius of the standard density: finite iff q < 1."""
    if q < 1.0:
        return tail_coefficient(q, dim) / (1.0 - q)
    return math.inf


def support_contains(x: np.ndarray, kernel: QKernel) -> bool:
    """Strict membership in the support (the boundary itself is excluded)."""
    if kernel.q >= 1.0:
        return True
    x = np.asarray(x, dtype=float)
    r2 = float(np.dot(x, x)) / (kernel.beta * kernel.beta)
    return r2 < support_radius_sq(kernel.q, kernel.dim)


def density(x: np.ndarray, kernel: QKernel) -> float:
    """Density of the kernel's law (q-mean 0, q-covariance beta^2 I) at x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (kernel.dim,):
        raise ValueError(f"x must have shape ({kernel.dim},), got {x.shape}")
    q, beta, n = kernel.q, kernel.beta, kernel.dim
    r2 = float(np.dot(x, x)) / (beta * beta)
    if q == 1.0:
        return math.exp(-0.5 * r2 - 0.5 * n * _LOG_2PI - n * math.log(beta))
    base = 1.0 - (1.0 - q) / tail_coefficient(q, n) * r2
    if base <= 0.0:  # Tsallis cut-off; only reachable for q < 1
        return 0.0
    log_dens = (
        math.log(base) / (1.0 - q)
        - log_normalizing_constant(q, n)
        - n * math.log(beta)
    )
    return math.exp(log_dens)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _chi2_df(q: float, dim: int) -> float:
    """Degrees of freedom of the mixing chi-squared in the exact sampler."""
    if q < 1.0:
        return 2.0 * (2.0 - q) / (1.0 - q)
    return tail_coefficient(q, dim) / (q - 1.0)


def sample_standard(q: float, dim: int, stream: RngStream) -> Perturbation:
    """One draw of the standard q-Gaussian (unit q-variance per coordinate).

    Uses the exact chi-squared mixture representation: a Gaussian vector Z
    is shrunk onto the finite support for q < 1 and scaled by an inverse
    chi-squared factor for q > 1; q = 1 returns Z itself (no chi-squared
    variate is consumed).
    """
    _check_q_domain(q, dim)
    z = stream.standard_normal(dim)
    if q == 1.0:
        return Perturbation(eta=z, rho=1.0)
    c = tail_coefficient(q, dim)
    a = stream.chi_squared(_chi2_df(q, dim))
    if q < 1.0:
        y = math.sqrt(c / (1.0 - q)) * z / math.sqrt(a + float(np.dot(z, z)))
    else:
        y = math.sqrt(c / (q - 1.0)) * z / math.sqrt(a)
    return Perturbation(eta=y, rho=rho(y, q, dim))


def sample_standard_many(
    q: float, dim: int, count: int, stream: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized standard draws: (count, dim) samples and their rho values."""
    _check_q_domain(q, dim)
    z = stream.standard_normal(count * dim).reshape(count, dim)
    if q == 1.0:
        return z, np.ones(count)
    c = tail_coefficient(q, dim)
    a = stream.chi_squared(_chi2_df(q, dim), size=count)
    norm_sq = np.einsum("ij,ij->i", z, z)
    if q < 1.0:
        y = math.sqrt(c / (1.0 - q)) * z / np.sqrt(a + norm_sq)[:, None]
    else:
        y = math.sqrt(c / (q - 1.0)) * z / np.sqrt(a)[:, None]
    rho_vals = 1.0 - ((1.0 - q) / c) * np.einsum("ij,ij->i", y, y)
    return y, rho_vals


def sample(kernel: QKernel, mean: np.ndarray, stream: RngStream) -> np.ndarray:
    """Draw from the kernel's law shifted to the given mean."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (kernel.dim,):
        raise ValueError(f"mean must have shape ({kernel.dim},), got {mean.shape}")
    pert = sample_standard(kernel.q, kernel.dim, stream)
    return mean + kernel.beta * pert.eta


# ---------------------------------------------------------------------------
# analytic moments
# ---------------------------------------------------------------------------

def moment_exists(spec: MomentSpec, q: float, dim: int) -> bool:
    """Existence condition for E[prod X_i^{b_i} / rho^b] (always true at q=1)."""
    if q == 1.0:
        return True
    if q < 1.0:
        return spec.b < 1.0 + 1.0 / (1.0 - q)
    return 1.0 / (q - 1.0) - 0.5 * dim > 0.5 * sum(spec.powers) - spec.b


def _even_gaussian_moment(p: int) -> float:
    # E[Z^p] for standard normal Z and even p: p! / (2^{p/2} (p/2)!)
    return math.factorial(p) / (2 ** (p // 2) * math.factorial(p // 2))


def analytic_moment(spec: MomentSpec, q: float, dim: int) -> float:
    """Closed form of E[prod_i X_i^{powers[i]} / rho(X)^b] for standard draws.

    Zero whenever any power is odd.  At q = 1 the value is the product of
    independent standard-normal moments (rho is identically 1 there).
    Raises :class:`MomentDoesNotExistError` when the defining integral is
    infinite, which is a property of (spec, q, dim) jointly -- the same
    spec can be valid for one shape and not another.
    """
    if len(spec.powers) != dim:
        raise ValueError(f"powers must have length dim={dim}, got {len(spec.powers)}")
    _check_q_domain(q, dim)
    if not moment_exists(spec, q, dim):
        raise MomentDoesNotExistError(
            f"moment b={spec.b}, powers={spec.powers} does not exist at q={q}, dim={dim}"
        )
    if any(p % 2 == 1 for p in spec.powers):
        return 0.0
    if spec.b == 0 and not any(spec.powers):
        return 1.0  # total probability
    if q == 1.0:
        return math.prod(_even_gaussian_moment(p) for p in spec.powers)

    half_sum = 0.5 * sum(spec.powers)
    c = tail_coefficient(q, dim)
    if q < 1.0:
        u = 1.0 / (1.0 - q)
        log_kbar = (
            gammaln(u - spec.b + 1.0)
            + gammaln(u + 1.0 + 0.5 * dim)
            - gammaln(u + 1.0)
            - gammaln(u - spec.b + 1.0 + 0.5 * dim + half_sum)
        )
    else:
        v = 1.0 / (q - 1.0)
        log_kbar = (
            gammaln(v)
            + gammaln(v + spec.b - 0.5 * dim - half_sum)
            - gammaln(v + spec.b)
            - gammaln(v - 0.5 * dim)
        )
    scale = half_sum * (math.log(c) - math.log(abs(1.0 - q)))
    parity_prod = math.prod(
        math.factorial(p) / (2**p * math.factorial(p // 2)) for p in spec.powers
    )
    return math.exp(log_kbar + scale) * parity_prod
