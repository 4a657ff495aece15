import numpy as np
import pytest

from oulab import (
    SampledPath,
    discrete_variation,
    variation_batch,
    variation_exhaustive,
    variation_properties,
    variation_values,
)
from oulab.variation import (
    derivative_bound_check,
    variation,
    variation_exhaustive_slow,
)
from oulab.errors import (
    BadOrderError,
    BadSplitError,
    EmptyPathError,
    TooLongError,
)


# ---------------------------------------------------------------------------
# exact values


def test_single_point_is_zero():
    assert variation_values(np.array([5.0]), 2.0) == 0.0


@pytest.mark.parametrize("rho", [1.0, 1.5, 2.0, 3.0])
def test_two_points_is_increment(rho):
    assert variation_values(np.array([1.0, -2.5]), rho) == pytest.approx(3.5)


def test_zigzag_rho1_sums_all_jumps():
    vals = np.array([0.0, 1.0, 0.0, 1.0, 0.0])
    assert variation_values(vals, 1.0) == pytest.approx(4.0)


def test_zigzag_rho2_takes_root_of_square_sum():
    vals = np.array([0.0, 1.0, 0.0, 1.0, 0.0])
    assert variation_values(vals, 2.0) == pytest.approx(2.0)


def test_updownup_rho2_exact():
    # jumps 3, -2, 3: all three survive, (9 + 4 + 9)^(1/2)
    vals = np.array([0.0, 3.0, 1.0, 4.0])
    assert variation_values(vals, 2.0) == pytest.approx(np.sqrt(22.0))


@pytest.mark.parametrize("rho", [1.0, 2.0, 4.0])
def test_monotone_path_gives_span(rho):
    vals = np.array([0.3, 0.9, 2.2, 2.2, 5.0])
    assert variation_values(vals, rho) == pytest.approx(4.7)


def test_discrete_variation_sign_flip():
    assert discrete_variation(np.array([1.0, -1.0]), 2.0) == pytest.approx(2.0)


def test_discrete_variation_l2_bound_flag():
    # v2 of a two-point path equals its l2 bound exactly
    assert discrete_variation(np.array([1.0, -1.0]), 2.0,
                              check_l2_bound=True) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# dynamic program vs exhaustive search


@pytest.mark.parametrize("rho", [1.0, 1.5, 2.0, 3.0])
def test_dp_matches_exhaustive_on_random_paths(rho):
    gen = np.random.default_rng(42)
    for _ in range(40):
        n = int(gen.integers(2, 15))
        vals = gen.standard_normal(n) * gen.uniform(0.1, 10.0)
        fast = variation_values(vals, rho)
        slow = variation_exhaustive(vals, rho)
        assert fast == pytest.approx(slow, rel=1e-12, abs=1e-12)


def test_exhaustive_agrees_with_slow_reference():
    gen = np.random.default_rng(7)
    for _ in range(10):
        vals = gen.standard_normal(int(gen.integers(2, 11)))
        assert variation_exhaustive(vals, 2.0) == pytest.approx(
            variation_exhaustive_slow(vals, 2.0), rel=1e-12)


def test_exhaustive_rejects_long_paths():
    with pytest.raises(TooLongError):
        variation_exhaustive(np.zeros(21), 2.0)


# ---------------------------------------------------------------------------
# structural properties


def test_seminorm_scaling_and_translation():
    gen = np.random.default_rng(3)
    vals = gen.standard_normal(12)
    v = variation_values(vals, 2.0)
    assert variation_values(3.5 * vals, 2.0) == pytest.approx(3.5 * v)
    assert variation_values(vals + 17.0, 2.0) == pytest.approx(v)
    assert variation_values(-vals, 2.0) == pytest.approx(v)


def test_subadditive_in_values():
    gen = np.random.default_rng(11)
    for _ in range(20):
        a = gen.standard_normal(10)
        b = gen.standard_normal(10)
        va = variation_values(a, 2.0)
        vb = variation_values(b, 2.0)
        assert variation_values(a + b, 2.0) <= va + vb + 1e-12


def test_monotone_under_subsampling():
    gen = np.random.default_rng(5)
    for _ in range(20):
        vals = gen.standard_normal(14)
        keep = np.sort(gen.choice(14, size=8, replace=False))
        sub = variation_values(vals[keep], 2.0)
        assert sub <= variation_values(vals, 2.0) + 1e-12


def test_decreasing_in_rho():
    gen = np.random.default_rng(9)
    vals = gen.standard_normal(12)
    v = [variation_values(vals, r) for r in (1.0, 1.5, 2.0, 3.0, 6.0)]
    assert all(v[i] >= v[i + 1] - 1e-12 for i in range(len(v) - 1))


def test_variation_properties_report():
    gen = np.random.default_rng(15)
    path = SampledPath(np.linspace(0.1, 1.0, 12), gen.standard_normal(12))
    rep = variation_properties(path, 1.0, 2.0, split=6)
    assert rep["rho1"] >= rep["rho2"] - 1e-12
    assert rep["monotone_ok"] and rep["subadditive_ok"]
    assert rep["superadditive_ok"]
    # the halves at rho1 recombine both ways around the shared point
    assert rep["left"] + rep["right"] == pytest.approx(rep["rho1"])
    assert max(rep["left"], rep["right"]) <= rep["rho1"] + 1e-12


@pytest.mark.parametrize("split", [0, 11, -1])
def test_variation_properties_rejects_bad_split(split):
    path = SampledPath(np.linspace(0.1, 1.0, 12), np.zeros(12))
    with pytest.raises(BadSplitError):
        variation_properties(path, 1.0, 2.0, split=split)


# ---------------------------------------------------------------------------
# sampled paths and validation


def test_sampled_path_variation_matches_values():
    gen = np.random.default_rng(21)
    vals = gen.standard_normal(9)
    path = SampledPath(np.linspace(0.0, 1.0, 9), vals)
    assert variation(path, 2.0) == pytest.approx(
        variation_values(vals, 2.0))


def test_sampled_path_rejects_malformed_inputs():
    with pytest.raises(EmptyPathError):
        SampledPath(np.array([]), np.array([]))
    with pytest.raises(EmptyPathError):
        SampledPath(np.array([1.0, 0.5]), np.array([1.0, 2.0]))
    with pytest.raises(EmptyPathError):
        SampledPath(np.array([1.0]), np.array([1.0, 2.0]))
    with pytest.raises(EmptyPathError):
        SampledPath(np.array([0.0, 1.0]), np.array([np.nan, 1.0]))


def test_order_below_one_rejected():
    with pytest.raises(BadOrderError):
        variation_values(np.array([1.0, 2.0]), 0.5)


def test_variation_batch_matches_rowwise():
    gen = np.random.default_rng(33)
    rows = gen.standard_normal((6, 11))
    batch = variation_batch(rows, 2.0)
    for i in range(rows.shape[0]):
        assert batch[i] == pytest.approx(variation_values(rows[i], 2.0))


# ---------------------------------------------------------------------------
# variation against the derivative integral


def test_derivative_bound_identity_path():
    v, integral = derivative_bound_check(
        lambda t: t, lambda t: np.ones_like(t), (0.0, 1.0), 1.0)
    assert v == pytest.approx(1.0)
    assert integral == pytest.approx(1.0)


def test_derivative_bound_sine_rho1():
    two_pi = 2.0 * np.pi
    v, integral = derivative_bound_check(
        lambda t: np.sin(two_pi * t),
        lambda t: two_pi * np.cos(two_pi * t),
        (0.0, 1.0), 1.0)
    assert integral == pytest.approx(4.0, rel=1e-6)
    assert v <= integral + 1e-12
    assert v == pytest.approx(4.0, rel=1e-3)


def test_derivative_bound_sine_rho2():
    two_pi = 2.0 * np.pi
    v, integral = derivative_bound_check(
        lambda t: np.sin(two_pi * t),
        lambda t: two_pi * np.cos(two_pi * t),
        (0.0, 1.0), 2.0)
    # best partition keeps the three extreme swings: 1, 2, 1
    assert v == pytest.approx(np.sqrt(6.0), rel=1e-3)
    assert v <= integral + 1e-12
