import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from oulab import (
    apply_generator,
    build_model,
    covariance_qt,
    gamma_log_density,
    model_from_dict,
    propagators,
    quadratic_r,
)
from oulab.model import gamma_density, group_dt, norm_q  # noqa: F401
from oulab.errors import (
    DimensionError,
    NonPositiveTimeError,
    NotSPDError,
    NotStableError,
)


# ---------------------------------------------------------------------------
# construction and validation


def test_standard_model_invariant_covariance(std1):
    assert std1.Q == pytest.approx(np.array([[2.0]]))
    assert std1.B == pytest.approx(np.array([[-1.0]]))
    assert std1.Qinf == pytest.approx(np.array([[1.0]]))


def test_unstable_drift_rejected():
    with pytest.raises(NotStableError):
        build_model(np.eye(1), np.array([[1.0]]))
    with pytest.raises(NotStableError):
        build_model(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_bad_diffusion_rejected():
    with pytest.raises(NotSPDError):
        build_model(np.array([[-1.0]]), np.array([[-1.0]]))
    with pytest.raises(NotSPDError):
        build_model(np.array([[1.0, 2.0], [0.0, 1.0]]), -np.eye(2))


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionError):
        build_model(np.eye(2), -np.eye(3))


def test_model_is_frozen(std1):
    with pytest.raises(Exception):
        std1.n = 5


def test_model_from_dict_roundtrip(std2):
    m = model_from_dict({"n": 2, "Q": std2.Q.tolist(), "B": std2.B.tolist()})
    assert m.Qinf == pytest.approx(std2.Qinf)


# ---------------------------------------------------------------------------
# the invariant covariance solves the Lyapunov integral


@pytest.mark.parametrize("seed,n", [(0, 1), (1, 2), (2, 3), (3, 2)])
def test_qinf_matches_defining_integral(seed, n, model_factory):
    m = model_factory(seed, n)

    def integrand(s):
        e = scipy.linalg.expm(s * m.B)
        return (e @ m.Q @ e.T).ravel()

    val, _ = scipy.integrate.quad_vec(integrand, 0.0, 200.0)
    assert m.Qinf == pytest.approx(val.reshape(n, n), rel=1e-8, abs=1e-10)


def test_qinf_solves_lyapunov_equation(std2, model_factory):
    for m in (std2, model_factory(5, 3)):
        resid = m.B @ m.Qinf + m.Qinf @ m.B.T + m.Q
        assert np.max(np.abs(resid)) < 1e-12


# ---------------------------------------------------------------------------
# finite-time covariance


def test_qt_closed_form_value(std1):
    # 1 - e^(-2 ln 2) = 3/4
    assert covariance_qt(std1, np.log(2.0))[0, 0] == pytest.approx(0.75)


def test_qt_at_infinity_is_invariant(std2):
    assert covariance_qt(std2, np.inf) == pytest.approx(std2.Qinf)


def test_qt_short_time_linearization(std2, model_factory):
    for m in (std2, model_factory(7, 2)):
        for t, tol in ((1e-3, 1e-2), (1e-4, 1e-3)):
            qt = covariance_qt(m, t)
            rel = np.max(np.abs(qt / t - m.Q)) / np.max(np.abs(m.Q))
            assert rel < tol


def test_qt_series_branch_continuous(std2, model_factory):
    # the series branch below 1e-3 must join the direct branch smoothly
    for m in (std2, model_factory(11, 3)):
        lo = covariance_qt(m, 1e-3 * (1 - 1e-9))
        hi = covariance_qt(m, 1e-3 * (1 + 1e-9))
        assert lo == pytest.approx(hi, rel=1e-8)


def test_qt_positive_and_monotone(model_factory):
    m = model_factory(13, 2)
    prev = np.zeros((2, 2))
    for t in (0.01, 0.1, 0.5, 1.0, 3.0, 10.0):
        qt = covariance_qt(m, t)
        w = np.linalg.eigvalsh(qt - prev)
        assert w.min() > -1e-12
        prev = qt
    w = np.linalg.eigvalsh(m.Qinf - prev)
    assert w.min() > -1e-10


def test_qt_rejects_nonpositive_time(std1):
    with pytest.raises(NonPositiveTimeError):
        covariance_qt(std1, 0.0)
    with pytest.raises(NonPositiveTimeError):
        covariance_qt(std1, -1.0)


# ---------------------------------------------------------------------------
# the scaling flow


def test_flow_closed_form(std1):
    assert group_dt(std1, 1.0)[0, 0] == pytest.approx(np.e)
    assert group_dt(std1, 0.0) == pytest.approx(np.eye(1))


def test_flow_group_law(model_factory):
    m = model_factory(17, 3)
    for s, t in ((0.2, 0.7), (1.0, -0.4), (2.5, 2.5)):
        left = group_dt(m, s) @ group_dt(m, t)
        assert left == pytest.approx(group_dt(m, s + t), abs=1e-10)


def test_flow_inverse(model_factory):
    m = model_factory(19, 2)
    prod = group_dt(m, 1.3) @ group_dt(m, -1.3)
    assert prod == pytest.approx(np.eye(2), abs=1e-12)


# ---------------------------------------------------------------------------
# the quadratic level function and norms


def test_quadratic_level_values(std1):
    assert quadratic_r(std1, np.array([2.0])) == pytest.approx(2.0)
    assert quadratic_r(std1, np.array([0.0])) == pytest.approx(0.0)


def test_anisotropic_norm_and_level():
    m = build_model(np.diag([2.0, 8.0]), -np.eye(2))
    assert m.Qinf == pytest.approx(np.diag([1.0, 4.0]))
    x = np.array([0.0, 2.0])
    assert norm_q(m, x) == pytest.approx(1.0)
    assert quadratic_r(m, x) == pytest.approx(0.5)


def test_norm_equivalence_with_euclidean(model_factory):
    m = model_factory(23, 3)
    w = np.linalg.eigvalsh(m.Qinf)
    gen = np.random.default_rng(0)
    xs = gen.standard_normal((50, 3))
    nq = norm_q(m, xs)
    ne = np.linalg.norm(xs, axis=1)
    assert np.all(nq <= ne / np.sqrt(w.min()) + 1e-12)
    assert np.all(nq >= ne / np.sqrt(w.max()) - 1e-12)


def test_quadratic_r_batch_shapes(std2):
    xs = np.zeros((4, 5, 2))
    assert quadratic_r(std2, xs).shape == (4, 5)
    with pytest.raises(DimensionError):
        quadratic_r(std2, np.zeros((4, 3)))


# ---------------------------------------------------------------------------
# invariant density


def test_invariant_density_at_origin(std1):
    assert gamma_density(std1, np.inf, np.array([0.0])) == pytest.approx(
        1.0 / np.sqrt(2.0 * np.pi))


def test_density_is_gaussian_in_level_function(std2):
    gen = np.random.default_rng(1)
    xs = gen.standard_normal((20, 2)) * 2.0
    logd = gamma_log_density(std2, np.inf, xs)
    # log density + R(x) is the same constant at every point
    c = logd + quadratic_r(std2, xs)
    assert np.ptp(c) < 1e-12


def test_invariant_density_integrates_to_one(std1):
    val, _ = scipy.integrate.quad(
        lambda x: gamma_density(std1, np.inf, np.array([x])), -12, 12)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_finite_time_density_uses_qt(std1):
    t = np.log(2.0)
    d = gamma_density(std1, t, np.array([0.0]))
    assert d == pytest.approx(1.0 / np.sqrt(2.0 * np.pi * 0.75))


# ---------------------------------------------------------------------------
# the generator


def test_generator_kills_constants(std2):
    assert apply_generator(std2, lambda x: 1.0, np.array([0.3, -0.2])) == (
        pytest.approx(0.0, abs=1e-6))


def test_generator_on_square(std1):
    # L f = (1/2) Q f'' + B x f' = 2 - 2 x^2 for f = x^2
    for xv in (0.0, 0.7, -1.3):
        got = apply_generator(std1, lambda x: float(x[0] ** 2),
                              np.array([xv]))
        assert got == pytest.approx(2.0 - 2.0 * xv ** 2, abs=1e-5)


def test_generator_exact_derivatives_match_fd(std2):
    A = np.array([[1.0, 0.3], [0.3, 2.0]])

    def f(x):
        return float(x @ A @ x)

    def grad(x):
        return 2.0 * A @ x

    def hess(x):
        return 2.0 * A

    x = np.array([0.4, -0.9])
    exact = apply_generator(std2, f, x, grad=grad, hess=hess)
    fd = apply_generator(std2, f, x)
    assert exact == pytest.approx(np.trace(std2.Q @ A)
                                  + 2.0 * (std2.B @ x) @ (A @ x))
    assert fd == pytest.approx(exact, abs=1e-5)


# ---------------------------------------------------------------------------
# the stacked propagators agree with the single-time functions


def test_propagator_stack_consistency(model_factory):
    m = model_factory(29, 2)
    ts = np.array([1e-4, 0.01, 0.5, 1.0, 2.0, 10.0])
    pr = propagators(m, ts)
    for i, t in enumerate(ts):
        assert pr.exp_tB[i] == pytest.approx(scipy.linalg.expm(t * m.B))
        assert pr.Qt[i] == pytest.approx(covariance_qt(m, t), rel=1e-12)
        assert pr.Dt[i] == pytest.approx(group_dt(m, t), rel=1e-10)
        assert pr.Dmt[i] == pytest.approx(group_dt(m, -t), rel=1e-10)
        assert pr.Qt_inv[i] @ pr.Qt[i] == pytest.approx(np.eye(2), abs=1e-8)
        assert pr.sqrt_Qt[i] @ pr.sqrt_Qt[i] == pytest.approx(
            pr.Qt[i], rel=1e-10)
        _, logdet = np.linalg.slogdet(pr.Qt[i])
        assert pr.logdet_Qt[i] == pytest.approx(logdet)


def test_propagator_quadratic_forms(model_factory):
    m = model_factory(31, 2)
    ts = np.array([0.05, 0.5, 2.0, 20.0])
    pr = propagators(m, ts)
    for i, t in enumerate(ts):
        a = pr.Qt_inv[i] - m.Qinf_inv
        assert pr.A_small[i] == pytest.approx(a, rel=1e-8, abs=1e-10)
        if t > 1.0:
            direct = pr.Dt[i].T @ a @ pr.Dt[i]
            assert pr.M_large[i] == pytest.approx(direct, rel=1e-6)


def test_propagator_large_t_form_beats_cancellation(std1):
    # at t = 40 the direct difference loses all digits; the resolvent form
    # must still produce the analytic limit Qinf^-1 / (1 - e^(-2t)) ~ 1
    pr = propagators(std1, np.array([40.0]))
    q = np.exp(-40.0)
    exact = (1.0 + q ** 2 / (1.0 - q ** 2)) / 1.0
    assert pr.M_large[0, 0, 0] == pytest.approx(exact, rel=1e-12)


def test_propagators_reject_nonpositive_times(std1):
    with pytest.raises(NonPositiveTimeError):
        propagators(std1, np.array([0.5, 0.0]))
