import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import betainc

from qsmooth.qgaussian import (
    MomentDoesNotExistError,
    MomentSpec,
    QGaussianDomainError,
    QKernel,
    analytic_moment,
    density,
    moment_exists,
    normalizing_constant,
    rho,
    sample,
    sample_standard,
    sample_standard_many,
    support_contains,
    support_radius_sq,
)
from qsmooth.rng import RngStream


# -- independent oracles, built from the defining integrals -------------------

def _pdf_1d_unnormalized(q):
    """Standard 1-D shape written out from its definition."""
    c = 3.0 - q

    def f(x):
        if q == 1.0:
            return math.exp(-0.5 * x * x)
        base = 1.0 - (1.0 - q) * x * x / c
        if base <= 0.0:
            return 0.0
        return base ** (1.0 / (1.0 - q))

    return f


def _support_1d(q):
    if q < 1.0:
        r = math.sqrt((3.0 - q) / (1.0 - q))
        return -r, r
    return -np.inf, np.inf


def quad_normalizer_1d(q):
    lo, hi = _support_1d(q)
    val, err = integrate.quad(_pdf_1d_unnormalized(q), lo, hi, limit=200)
    assert err < 1e-7 * max(1.0, val)
    return val


def quad_moment_1d(q, b, power):
    """E[x^power / rho(x)^b] by numerical integration of the definition."""
    c = 3.0 - q
    shape = _pdf_1d_unnormalized(q)
    norm = quad_normalizer_1d(q)

    def integrand(x):
        base = 1.0 - (1.0 - q) * x * x / c
        return shape(x) * x**power / base**b

    lo, hi = _support_1d(q)
    val, err = integrate.quad(integrand, lo, hi, limit=400)
    assert err < 1e-6 * max(1.0, abs(val))
    return val / norm


def quadrature_cdf_1d(q, n_core=4001):
    """Tabulated CDF of the standard 1-D density, for KS testing."""
    kernel = QKernel(q=q, beta=1.0, dim=1)

    def pdf(x):
        return density(np.array([x]), kernel)

    if q < 1.0:
        r = math.sqrt(support_radius_sq(q, 1))
        nodes = np.linspace(-r * (1 - 1e-12), r * (1 - 1e-12), n_core)
        start = 0.0
    else:
        x_max = 20.0
        while integrate.quad(pdf, x_max, np.inf, limit=200)[0] > 1e-10:
            x_max *= 2.0
        core = np.linspace(-20.0, 20.0, n_core)
        if x_max > 20.0:
            tail = np.geomspace(20.0, x_max, 200)[1:]
            nodes = np.concatenate([-tail[::-1], core, tail])
        else:
            nodes = core
        start = integrate.quad(pdf, -np.inf, nodes[0], limit=200)[0]

    segs = [
        integrate.quad(pdf, a, b_)[0] for a, b_ in zip(nodes[:-1], nodes[1:])
    ]
    cdf_vals = start + np.concatenate([[0.0], np.cumsum(segs)])
    cdf_vals = np.minimum(np.maximum.accumulate(cdf_vals), 1.0)

    def cdf(x):
        return np.interp(x, nodes, cdf_vals, left=0.0, right=1.0)

    return cdf


def closed_form_cdf_1d(q):
    """Cross-oracle: Beta law of x^2 for q<1, scaled Student-t for q>1."""
    c = 3.0 - q
    if q < 1.0:
        r2 = c / (1.0 - q)
        shape2 = (2.0 - q) / (1.0 - q)

        def cdf(x):
            x = np.asarray(x, dtype=float)
            frac = np.clip(x * x / r2, 0.0, 1.0)
            return 0.5 * (1.0 + np.sign(x) * betainc(0.5, shape2, frac))

        return cdf
    if q == 1.0:
        return stats.norm.cdf
    dof = c / (q - 1.0)
    return stats.t(df=dof).cdf


# -- normalizing constant ------------------------------------------------------

def test_normalizing_constant_q0():
    assert normalizing_constant(0.0, 1) == pytest.approx(4 * math.sqrt(3) / 3, rel=1e-12)
    assert normalizing_constant(0.0, 2) == pytest.approx(2 * math.pi, rel=1e-12)


@pytest.mark.parametrize("q", [-1.0, 0.0, 0.5, 1.2, 1.4])
def test_normalizing_constant_matches_quadrature(q):
    assert normalizing_constant(q, 1) == pytest.approx(quad_normalizer_1d(q), rel=1e-8)


def test_normalizing_constant_gaussian_limit():
    assert normalizing_constant(1.0 - 1e-6, 1) == pytest.approx(
        math.sqrt(2 * math.pi), rel=1e-4
    )
    assert normalizing_constant(1.0, 3) == pytest.approx((2 * math.pi) ** 1.5, rel=1e-12)


def test_normalizing_constant_domain_error():
    with pytest.raises(QGaussianDomainError):
        normalizing_constant(1.5, 4)  # boundary q = 1 + 2/4
    with pytest.raises(QGaussianDomainError):
        normalizing_constant(3.1, 1)


# -- density -------------------------------------------------------------------

def test_density_cutoff_outside_support():
    kernel = QKernel(q=0.5, beta=1.0, dim=2)
    r = math.sqrt(support_radius_sq(0.5, 2))
    assert density(np.array([r + 0.1, 0.0]), kernel) == 0.0


@pytest.mark.parametrize("q,n", [(0.0, 1), (1.2, 3), (1.0, 2)])
def test_density_at_mode(q, n):
    beta = 0.31
    kernel = QKernel(q=q, beta=beta, dim=n)
    expected = 1.0 / (normalizing_constant(q, n) * beta**n)
    assert density(np.zeros(n), kernel) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("q", [-1.0, 0.0, 0.5, 1.0, 1.2])
def test_density_integrates_to_one_1d(q):
    kernel = QKernel(q=q, beta=1.0, dim=1)
    lo, hi = _support_1d(q)
    val, _ = integrate.quad(lambda x: density(np.array([x]), kernel), lo, hi, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_density_scale_property():
    # G_beta(x) = beta^-N G_1(x / beta)
    q, n, beta = 0.6, 3, 0.17
    x = np.array([0.05, -0.03, 0.08])
    scaled = QKernel(q=q, beta=beta, dim=n)
    unit = QKernel(q=q, beta=1.0, dim=n)
    assert density(x, scaled) == pytest.approx(
        density(x / beta, unit) / beta**n, rel=1e-12
    )


def test_density_continuity_at_q1():
    x = np.array([0.4, -0.2])
    for q in (1.0 - 1e-5, 1.0 + 1e-5):
        a = density(x, QKernel(q=q, beta=0.7, dim=2))
        b = density(x, QKernel(q=1.0, beta=0.7, dim=2))
        assert abs(a - b) / b < 1e-3


# -- rho and support -------------------------------------------------------------

def test_rho_values():
    assert rho(np.zeros(3), 0.4, 3) == 1.0
    assert rho(np.array([5.0, -2.0]), 1.0, 2) == 1.0
    assert rho(np.array([1.0, 1.0]), 0.0, 2) == pytest.approx(0.5)


def test_support_contains():
    assert support_contains(np.array([100.0, -50.0]), QKernel(q=1.2, beta=0.1, dim=2))
    assert not support_contains(np.array([2.0]), QKernel(q=0.0, beta=1.0, dim=1))
    assert support_contains(np.array([1.7]), QKernel(q=0.0, beta=1.0, dim=1))
    for q in (-1.0, 0.5, 1.0, 1.2):
        assert support_contains(np.zeros(2), QKernel(q=q, beta=0.01, dim=2))


def test_qkernel_validation():
    with pytest.raises(QGaussianDomainError):
        QKernel(q=1.5, beta=0.1, dim=4)
    with pytest.raises(ValueError):
        QKernel(q=0.5, beta=0.0, dim=2)
    with pytest.raises(ValueError):
        QKernel(q=0.5, beta=0.1, dim=0)


# -- sampler ---------------------------------------------------------------------

def test_sample_standard_gaussian_branch_consumes_no_chi2():
    s1 = RngStream(3, 1)
    s2 = RngStream(3, 1)
    pert = sample_standard(1.0, 3, s1)
    np.testing.assert_array_equal(pert.eta, s2.standard_normal(3))
    assert pert.rho == 1.0
    # both streams must now be in the same state
    assert s1.uniform01() == s2.uniform01()


def test_sample_standard_support_bound():
    q, n = 0.3, 2
    bound = support_radius_sq(q, n)
    s = RngStream(8, 0)
    for _ in range(2000):
        pert = sample_standard(q, n, s)
        assert float(pert.eta @ pert.eta) < bound
        assert 0.0 < pert.rho <= 1.0


def test_sample_standard_rho_sign_for_heavy_tails():
    _, rhos = sample_standard_many(1.2, 2, 5000, RngStream(9, 0))
    assert np.all(rhos >= 1.0)


def test_sample_standard_many_matches_density_ks():
    # spec-level bound for 1e6 draws is 1.95/sqrt(n); module test uses a
    # smaller n with the same form
    n = 200_000
    draws, _ = sample_standard_many(0.5, 1, n, RngStream(31, 4))
    cdf = quadrature_cdf_1d(0.5)
    d = stats.kstest(draws[:, 0], cdf).statistic
    assert d < 1.95 / math.sqrt(n)


@pytest.mark.parametrize("q", [-1.0, 0.0, 0.5, 1.2, 1.4])
def test_quadrature_cdf_agrees_with_closed_form(q):
    # the KS oracle itself is cross-checked against the Beta / Student-t laws
    xs = np.linspace(-4.0, 4.0, 41)
    got = quadrature_cdf_1d(q)(xs)
    expected = closed_form_cdf_1d(q)(xs)
    np.testing.assert_allclose(got, expected, atol=5e-7)


def test_sample_shift_and_scale():
    kernel = QKernel(q=0.5, beta=0.2, dim=3)
    mean = np.array([1.0, -2.0, 0.5])
    s1 = RngStream(12, 0)
    s2 = RngStream(12, 0)
    x = sample(kernel, mean, s1)
    pert = sample_standard(0.5, 3, s2)
    np.testing.assert_allclose(x, mean + 0.2 * pert.eta, rtol=0, atol=0)
    # affine image of the support ellipsoid
    r2 = support_radius_sq(0.5, 3) * 0.2**2
    for _ in range(1000):
        d = sample(kernel, mean, s1) - mean
        assert float(d @ d) < r2


def test_sample_mean_clt():
    kernel = QKernel(q=0.5, beta=1.0, dim=2)
    s = RngStream(77, 1)
    draws, _ = sample_standard_many(0.5, 2, 1_000_000, s)
    assert np.all(np.abs(draws.mean(axis=0)) < 0.005)


# -- analytic moments --------------------------------------------------------------

def test_moment_odd_is_zero():
    assert analytic_moment(MomentSpec(b=1, powers=(1, 2)), 0.5, 2) == 0.0
    assert analytic_moment(MomentSpec(b=0, powers=(3,)), 1.1, 1) == 0.0


@pytest.mark.parametrize("q,n", [(0.0, 2), (0.5, 2), (0.5, 4), (1.1, 3), (1.3, 1)])
def test_moment_second_over_rho_closed_form(q, n):
    # E[x_j^2 / rho] = (N + 2 - N q) / 2, exactly
    powers = tuple(2 if i == 0 else 0 for i in range(n))
    expected = (n + 2 - n * q) / 2.0
    assert analytic_moment(MomentSpec(b=1, powers=powers), q, n) == pytest.approx(
        expected, rel=1e-12
    )


def test_moment_total_probability():
    assert analytic_moment(MomentSpec(b=0, powers=(0, 0, 0)), 0.7, 3) == 1.0


@pytest.mark.parametrize(
    "q,b,power",
    [(0.5, 0, 2), (0.5, 1, 2), (0.5, 2, 4), (0.0, 1, 2), (-1.0, 0, 4), (1.2, 1, 4), (1.1, 2, 2)],
)
def test_moment_matches_quadrature_1d(q, b, power):
    spec = MomentSpec(b=b, powers=(power,))
    assert analytic_moment(spec, q, 1) == pytest.approx(
        quad_moment_1d(q, b, power), rel=1e-7
    )


def test_moment_existence_boundary():
    # q < 1 requires b < 1 + 1/(1-q); at q = 0 that bound is exactly 2
    assert not moment_exists(MomentSpec(b=2, powers=(2, 2)), 0.0, 2)
    with pytest.raises(MomentDoesNotExistError):
        analytic_moment(MomentSpec(b=2, powers=(2, 2)), 0.0, 2)
    # q > 1 requires 1/(q-1) - N/2 > sum(b_i)/2 - b
    assert not moment_exists(MomentSpec(b=0, powers=(8, 0)), 1.4, 2)
    with pytest.raises(MomentDoesNotExistError):
        analytic_moment(MomentSpec(b=0, powers=(8, 0)), 1.4, 2)
    # the same spec can be fine at another shape
    assert moment_exists(MomentSpec(b=2, powers=(2, 2)), 0.5, 2)
    assert moment_exists(MomentSpec(b=2, powers=(2, 2)), 1.0, 2)


def test_moment_gaussian_limit_continuity():
    spec = MomentSpec(b=2, powers=(2, 0, 2))
    at_one = analytic_moment(spec, 1.0, 3)
    assert at_one == pytest.approx(1.0)  # product of two second moments
    for q in (1.0 - 1e-5, 1.0 + 1e-5):
        val = analytic_moment(spec, q, 3)
        assert abs(val - at_one) / at_one < 1e-3


def test_moment_vs_monte_carlo_quick():
    q, n, count = 1.1, 2, 300_000
    draws, rhos = sample_standard_many(q, n, count, RngStream(15, 6))
    for spec in (MomentSpec(1, (2, 0)), MomentSpec(0, (2, 2)), MomentSpec(2, (0, 2))):
        vals = np.prod(draws ** np.asarray(spec.powers), axis=1) / rhos**spec.b
        se = vals.std(ddof=1) / math.sqrt(count)
        assert abs(vals.mean() - analytic_moment(spec, q, n)) < 5 * se


@pytest.mark.parametrize("q", [0.0, 0.5, 1.1])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_moment_grid_full_mc(q, n):
    # every b <= 2, total power <= 4 moment that exists, against 2e5 draws
    import itertools

    count = 200_000
    draws, rhos = sample_standard_many(q, n, count, RngStream(16, n * 10 + int(q * 10)))
    checked = 0
    for b in range(3):
        for powers in itertools.product(range(5), repeat=n):
            if sum(powers) > 4:
                continue
            spec = MomentSpec(b, powers)
            if not moment_exists(spec, q, n):
                with pytest.raises(MomentDoesNotExistError):
                    analytic_moment(spec, q, n)
                continue
            ref = analytic_moment(spec, q, n)
            vals = np.prod(draws ** np.asarray(powers), axis=1) / rhos**b
            se = vals.std(ddof=1) / math.sqrt(count)
            if se == 0.0:  # the constant b=0, all-zero-powers case
                assert vals.mean() == ref == 1.0
            else:
                assert abs(vals.mean() - ref) < 5 * se, (spec, vals.mean(), ref)
            checked += 1
    assert checked >= 10


def test_sampler_rejects_bad_domain():
    with pytest.raises(QGaussianDomainError):
        sample_standard(1.6, 4, RngStream(0, 0))
