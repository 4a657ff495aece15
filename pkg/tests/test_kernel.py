import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from scipy.stats import multivariate_normal

from oulab import (
    admissible_rate,
    calibrate_bound,
    conv_kernel,
    covariance_qt,
    count_kdot_zeros,
    count_kdot_zeros_batch,
    far_field_decay_check,
    ftc_variation_bound,
    kernel,
    kernel_dt,
    kernel_tilde,
    log_kernel,
    natural_rate,
    quadratic_r,
    singular_integral_check,
    space_derivative_residual,
)
from oulab.kernel import kernel_dt_raw
from oulab.errors import (
    CoincidentPointsError,
    EtaZeroError,
    NonPositiveTimeError,
    RateTooLargeError,
    TailNotConvergedError,
)


def mehler_1d(t, x, u):
    """Independent route for the standard 1-d model: the classical
    transition density against the invariant Gaussian, q = e^(-t)."""
    q = np.exp(-t)
    s = 1.0 - q * q
    return s ** -0.5 * np.exp(
        -(q * q * x * x - 2.0 * q * x * u + q * q * u * u) / (2.0 * s))


# ---------------------------------------------------------------------------
# kernel values


def test_kernel_closed_point(std1):
    got = kernel(std1, np.log(2.0), np.array([0.0]), np.array([0.0]))
    assert got == pytest.approx(2.0 / np.sqrt(3.0), rel=1e-14)


def test_kernel_matches_independent_formula(std1):
    gen = np.random.default_rng(0)
    for _ in range(30):
        t = float(np.exp(gen.uniform(np.log(1e-4), np.log(30.0))))
        x, u = gen.standard_normal(2) * 2.0
        got = kernel(std1, t, np.array([x]), np.array([u]))
        assert got == pytest.approx(mehler_1d(t, x, u), rel=1e-11)


def test_kernel_long_time_limit(std1):
    got = kernel(std1, 50.0, np.array([0.7]), np.array([-1.2]))
    assert got == pytest.approx(1.0, rel=1e-10)


def test_kernel_symmetric_in_its_arguments(std2):
    # self-adjointness against the invariant measure: K_t(x, u) = K_t(u, x)
    gen = np.random.default_rng(1)
    for t in (0.05, 1.0, 4.0):
        x = gen.standard_normal(2)
        u = gen.standard_normal(2)
        assert kernel(std2, t, x, u) == pytest.approx(
            kernel(std2, t, u, x), rel=1e-9)


def test_kernel_reproduces_the_transition_density(std1):
    # int K_t(x, u) dgamma_inf(u) = 1 for every x, t
    from oulab.model import gamma_density
    for t, x in ((0.3, 0.5), (2.0, -1.0)):
        val, _ = scipy.integrate.quad(
            lambda u: kernel(std1, t, np.array([x]), np.array([u]))
            * gamma_density(std1, np.inf, np.array([u])), -12, 12)
        assert val == pytest.approx(1.0, rel=1e-9)


def test_log_kernel_consistency(std2):
    x = np.array([0.4, -0.6])
    u = np.array([1.0, 0.2])
    assert np.exp(log_kernel(std2, 0.7, x, u)) == pytest.approx(
        kernel(std2, 0.7, x, u), rel=1e-13)


def test_kernel_rejects_nonpositive_time(std1):
    with pytest.raises(NonPositiveTimeError):
        kernel(std1, 0.0, np.array([0.0]), np.array([0.0]))


def test_stripped_kernel_relation(std1):
    x, u, t = np.array([0.8]), np.array([-0.3]), 0.6
    expect = kernel(std1, t, x, u) * np.exp(-quadratic_r(std1, x))
    assert kernel_tilde(std1, t, x, u) == pytest.approx(expect, rel=1e-12)


# ---------------------------------------------------------------------------
# the short-time convolution approximant


def test_conv_kernel_at_origin(std1):
    got = conv_kernel(std1, 0.01, np.array([0.0]))
    assert got == pytest.approx(7.0710678118654755, rel=1e-14)


def test_conv_kernel_normalized_mass(std1):
    val, _ = scipy.integrate.quad(
        lambda y: conv_kernel(std1, 0.05, np.array([y]), normalized=True),
        -6, 6)
    assert val == pytest.approx(1.0, rel=1e-10)


def test_kernel_matches_transition_density(std1, std2):
    # K_t(x, u) gamma(u) is the Gaussian law of the process started at x
    from oulab.model import gamma_density
    cases = [
        (std1, np.array([0.3]), np.array([0.33])),
        (std1, np.array([-1.2]), np.array([0.5])),
        (std2, np.array([0.4, -0.2]), np.array([0.37, -0.16])),
    ]
    for m, x, u in cases:
        for t in (0.01, 0.3, 2.0):
            lhs = float(kernel(m, t, x, u)) * float(gamma_density(m, np.inf, u))
            mean = scipy.linalg.expm(t * m.B) @ x
            rhs = multivariate_normal.pdf(u, mean=mean, cov=covariance_qt(m, t))
            assert lhs == pytest.approx(rhs, rel=1e-12)


def test_conv_kernel_approximates_kernel_at_short_times(std1, std2):
    # transition density ~ flat kernel at u - x weighted by the half
    # difference of the stationary exponents, with O(t) relative error
    from oulab.model import gamma_density
    cases = [
        (std1, np.array([0.3]), np.array([0.33])),
        (std2, np.array([0.4, -0.2]), np.array([0.37, -0.16])),
    ]
    for m, x, u in cases:
        for t in (1e-2, 1e-3, 1e-4):
            dens = float(kernel(m, t, x, u)) * float(gamma_density(m, np.inf, u))
            split = np.exp(float(quadratic_r(m, x)) - float(quadratic_r(m, u)))
            flat = float(conv_kernel(m, t, u - x, normalized=True)) * np.sqrt(split)
            assert flat == pytest.approx(dens, rel=20 * t)


# ---------------------------------------------------------------------------
# time derivative


def test_kernel_dt_closed_point(std1):
    # at x = u = 0: K = (1 - q^2)^(-1/2), dK/dt = -q^2 (1 - q^2)^(-3/2)
    got, err = kernel_dt(std1, np.log(2.0), np.array([0.0]),
                         np.array([0.0]))
    exact = -0.25 * (0.75 ** -1.5)
    assert got == pytest.approx(exact, abs=1e-8)
    assert err < 1e-6
    assert abs(got - exact) < 10 * max(err, 1e-12)


def test_kernel_dt_raw_converges_second_order(std1):
    x, u = np.array([0.0]), np.array([0.0])
    t = np.log(2.0)
    exact = -0.25 * (0.75 ** -1.5)
    hs = (1e-2, 3e-3, 1e-3)
    errs = [abs(kernel_dt_raw(std1, t, x, u, h) - exact) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 1.8


def test_kernel_dt_matches_quadrature_of_ftc(std1):
    # int_eps^1 dK/dt dt = K_1 - K_eps
    x, u = np.array([0.2]), np.array([1.1])
    eps = 1e-3
    val, _ = scipy.integrate.quad(
        lambda t: kernel_dt(std1, t, x, u)[0], eps, 1.0, limit=300)
    assert val == pytest.approx(
        kernel(std1, 1.0, x, u) - kernel(std1, eps, x, u), rel=1e-6)


# ---------------------------------------------------------------------------
# space derivative identity


def test_space_derivative_residuals_small(std1, std2):
    gen = np.random.default_rng(2)
    for m in (std1, std2):
        for _ in range(10):
            t = float(np.exp(gen.uniform(np.log(0.01), np.log(5.0))))
            x = gen.standard_normal(m.n)
            u = gen.standard_normal(m.n)
            ell = int(gen.integers(m.n))
            assert space_derivative_residual(m, t, x, u, ell) < 1e-5


# ---------------------------------------------------------------------------
# critical points of t -> K_t(x, u)


def brute_zero_count(model, x, u, t_lo, t_hi, grid=20000):
    """Sign flips of the finite differences of the kernel itself."""
    ts = np.geomspace(t_lo, t_hi, grid)
    ks = np.array([kernel(model, float(t), x, u) for t in ts])
    d = np.diff(ks)
    s = np.sign(d[np.abs(d) > 1e-13])
    return int(np.sum(s[1:] * s[:-1] < 0))


def test_zero_counts_match_dense_scan(std1):
    for xv, uv in ((1.0, 2.0), (1.0, 3.0), (0.5, 0.1)):
        x, u = np.array([xv]), np.array([uv])
        zc = count_kdot_zeros(std1, x, u)
        assert zc.stable
        assert zc.count == brute_zero_count(std1, x, u, 1e-8, 1.0)


def test_monotone_pair_has_no_critical_point(std1):
    zc = count_kdot_zeros(std1, np.array([0.0]), np.array([0.0]))
    assert zc.count == 0 and zc.stable


def test_far_pair_is_monotone_on_the_unit_interval(std1):
    # the peak of t -> K_t(1, 5) sits near t = 1.57, outside (0, 1]
    zc = count_kdot_zeros(std1, np.array([1.0]), np.array([5.0]))
    assert zc.count == 0 and zc.stable
    wide = count_kdot_zeros(std1, np.array([1.0]), np.array([5.0]),
                            t_interval=(1e-8, 50.0))
    assert wide.count == 1
    assert wide.zeros[0] == pytest.approx(1.5687, abs=2e-3)


def test_interior_critical_points(std1):
    for uv, t_star in ((1.5, 0.128), (2.0, 0.448), (2.5, 0.750),
                       (3.0, 0.983)):
        zc = count_kdot_zeros(std1, np.array([1.0]), np.array([uv]))
        assert zc.count == 1, uv
        assert zc.zeros[0] == pytest.approx(t_star, abs=5e-3)


def test_zero_count_batch_matches_single(std1):
    X = np.array([[1.0], [1.0], [0.0]])
    U = np.array([[2.0], [5.0], [0.0]])
    counts, stable = count_kdot_zeros_batch(std1, X, U)
    assert list(counts) == [1, 0, 0]
    assert stable.all()


def test_zero_count_interval_validation(std1):
    with pytest.raises(NonPositiveTimeError):
        count_kdot_zeros(std1, np.array([0.0]), np.array([1.0]),
                         t_interval=(0.0, 1.0))


# ---------------------------------------------------------------------------
# the total-variation/critical-value comparison


def test_ftc_bound_for_monotone_path(std1):
    x, u = np.array([0.0]), np.array([3.0])
    rep = ftc_variation_bound(std1, x, u)
    assert rep["count"] == 0 and rep["stable"]
    # no interior critical point: the variation equals K at the endpoint
    k1 = kernel(std1, 1.0, x, u)
    assert rep["lhs"] == pytest.approx(k1, rel=1e-6)
    assert rep["rhs"] == pytest.approx(2.0 * k1, rel=1e-12)
    assert rep["lhs"] <= rep["rhs"]
    assert rep["sup_bound"] >= rep["rhs"] - 1e-12


def test_ftc_bound_with_critical_point(std1):
    x, u = np.array([1.0]), np.array([2.0])
    rep = ftc_variation_bound(std1, x, u)
    assert rep["count"] == 1
    assert rep["lhs"] <= rep["rhs"] + 1e-12
    assert rep["sup_bound"] >= rep["lhs"] - 1e-12


def test_ftc_rejects_coincident_points(std1):
    with pytest.raises(CoincidentPointsError):
        ftc_variation_bound(std1, np.array([1.0]), np.array([1.0]))


# ---------------------------------------------------------------------------
# rate calibration


def test_reference_rates(std1):
    assert natural_rate(std1) == pytest.approx(0.25)
    assert admissible_rate(std1, "kernel-small-t") == pytest.approx(
        0.07043293923734958, rel=1e-9)
    assert admissible_rate(std1, "dkernel-large-t") == pytest.approx(0.25)


def test_calibration_rejects_the_natural_rate(std1):
    # c = 0.25 exceeds what the kernel's quadratic form supports near t = 1
    with pytest.raises(RateTooLargeError):
        calibrate_bound(std1, "kernel-small-t", n_samples=2000, c=0.25)


def test_calibration_accepts_admissible_rate(std1):
    cal = calibrate_bound(std1, "kernel-small-t", n_samples=2000, c=0.06)
    assert cal.stable
    assert cal.exponent_rate == 0.06
    assert 1.0 <= cal.max_ratio < 3.0


def test_calibration_ratio_monotone_in_rate(std1):
    lo = calibrate_bound(std1, "kernel-small-t", n_samples=2000, c=0.02)
    hi = calibrate_bound(std1, "kernel-small-t", n_samples=2000, c=0.05)
    assert lo.max_ratio <= hi.max_ratio + 1e-12


@pytest.mark.parametrize("which", ["kernel-small-t", "dkernel-small-t",
                                   "dkernel-large-t", "tail-integral"])
def test_auto_calibration_is_stable(std1, which):
    cal = calibrate_bound(std1, which, n_samples=2000)
    assert cal.stable
    assert cal.exponent_rate > 0
    assert np.isfinite(cal.max_ratio)
    assert cal.which == which


def test_calibration_validation(std1):
    with pytest.raises(RateTooLargeError):
        calibrate_bound(std1, "kernel-small-t", n_samples=2000, c=-0.1)
    with pytest.raises(ValueError):
        calibrate_bound(std1, "no-such-bound", n_samples=2000)


# ---------------------------------------------------------------------------
# singular time integrals


def test_singular_integral_plateau_1d(std1):
    # small-separation limit of the ratio is sqrt(pi / delta)
    x = np.array([0.3])
    lhs, rhs = singular_integral_check(std1, 1.5, 0.0, 0.25, x, x + 1e-4)
    assert lhs > 0
    assert lhs / rhs == pytest.approx(np.sqrt(4.0 * np.pi), rel=1e-3)


def test_singular_integral_plateau_2d(std2):
    x = np.array([0.2, -0.1])
    u = x + 1e-4 / np.sqrt(2.0)
    lhs, rhs = singular_integral_check(std2, 2.0, 0.0, 0.25, x, u)
    # Gamma(p - 1) / delta^(p - 1) at p = 2, delta = 1/4
    assert lhs / rhs == pytest.approx(4.0, rel=1e-3)


def test_singular_integral_ratio_bounded_over_separations(std1):
    x = np.array([0.3])
    for p, r in ((1.5, 0.0), (1.0, 1.0)):
        for sep in (2.0, 0.1, 1e-2, 1e-3, 1e-4):
            lhs, rhs = singular_integral_check(std1, p, r, 0.25, x, x + sep)
            assert lhs > 0
            assert lhs / rhs < 5.0


def test_singular_integral_validation(std1):
    x, u = np.array([0.3]), np.array([0.5])
    with pytest.raises(ValueError):
        singular_integral_check(std1, 0.5, 1.0, 0.25, x, u)
    with pytest.raises(ValueError):
        singular_integral_check(std1, 1.5, 0.0, -1.0, x, u)
    with pytest.raises(CoincidentPointsError):
        singular_integral_check(std1, 1.5, 0.0, 0.25, x, x)
    with pytest.raises(EtaZeroError):
        singular_integral_check(std1, 1.5, 0.0, 0.25, np.array([1.0]),
                                np.array([4.0]))


# ---------------------------------------------------------------------------
# far-field decay integral


def test_far_field_closed_form(std1):
    # substituting w = e^{-t} turns the integral into int_0^{ 1/e} e^{-w^2} dw
    from scipy.special import erf
    got = far_field_decay_check(std1, 1.0, np.array([0.0]), np.array([1.0]))
    assert got == pytest.approx(0.5 * np.sqrt(np.pi) * erf(1.0 / np.e),
                                rel=1e-9)


def test_far_field_zero_target(std1):
    assert far_field_decay_check(std1, 1.0, np.array([1.0]),
                                 np.array([0.0])) == 0.0


def test_far_field_tail_certificate(std1):
    with pytest.raises(TailNotConvergedError):
        far_field_decay_check(std1, 1.0, np.array([0.0]), np.array([1.0]),
                              t_max=5.0)
