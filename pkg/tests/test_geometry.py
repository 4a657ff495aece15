import numpy as np
import pytest

from oulab import (
    annulus_indicator,
    build_model,
    local_weight,
    polar_decompose,
    quadratic_r,
    ring_euclidean_width,
    ring_weight,
    smooth_step,
)
from oulab.geometry import (
    annulus_mass,
    eta_gradient_bound,
    group_apply,
    in_ring,
    level_set_mass,
    ring_gradient_bound,
    ring_masses,
    ring_of,
    ring_plateau,
)
from oulab.errors import (
    AlphaTooSmallError,
    DimensionError,
    ZeroPointError,
)


# ---------------------------------------------------------------------------
# the smooth ramp


def test_smooth_step_is_exact_outside_the_ramp():
    s = np.array([-3.0, -1e-12, 0.0, 1.0, 1.0 + 1e-12, 7.0])
    out = smooth_step(s)
    assert out[0] == 0.0 and out[1] == 0.0 and out[2] == 0.0
    assert out[3] == 1.0 and out[4] == 1.0 and out[5] == 1.0


def test_smooth_step_monotone_and_symmetric():
    s = np.linspace(-0.5, 1.5, 401)
    out = smooth_step(s)
    assert np.all(np.diff(out) >= 0)
    assert smooth_step(0.5) == pytest.approx(0.5)
    assert np.allclose(smooth_step(s) + smooth_step(1.0 - s), 1.0, atol=1e-15)


# ---------------------------------------------------------------------------
# ring partition of unity


def test_rings_sum_to_one_everywhere(std2):
    gen = np.random.default_rng(0)
    xs = gen.standard_normal((200, 2)) * 3.0
    jmax = int(np.ceil(quadratic_r(std2, xs).max())) + 2
    total = sum(ring_weight(std2, j, xs) for j in range(jmax + 1))
    assert np.allclose(total, 1.0, atol=1e-14)


def test_ring_support_is_exact(std1):
    # r_j vanishes identically outside {j <= R <= j + 2}
    x_low = np.array([[np.sqrt(2.0 * 2.9)]])     # R = 2.9 < 3
    x_high = np.array([[np.sqrt(2.0 * 5.1)]])    # R = 5.1 > 5
    assert ring_weight(std1, 3, x_low)[0] == 0.0
    assert ring_weight(std1, 3, x_high)[0] == 0.0
    x_in = np.array([[np.sqrt(2.0 * 4.0)]])      # R = 4 inside (3, 5)
    assert ring_weight(std1, 3, x_in)[0] > 0.0


def test_base_ring_absorbs_the_origin(std1):
    xs = np.array([[0.0], [0.5], [1.0]])
    w = ring_weight(std1, 0, xs)
    assert w[0] == 1.0                 # R = 0
    assert w[1] == 1.0                 # R = 0.125 < 1
    assert 0.0 < w[2] <= 1.0           # R = 0.5


def test_at_most_two_rings_overlap(std2):
    gen = np.random.default_rng(1)
    xs = gen.standard_normal((100, 2)) * 3.0
    jmax = int(np.ceil(quadratic_r(std2, xs).max())) + 2
    stacked = np.stack([ring_weight(std2, j, xs) for j in range(jmax + 1)])
    assert int((stacked > 0).sum(axis=0).max()) <= 2


def test_plateau_is_one_on_ring_support(std2):
    gen = np.random.default_rng(2)
    xs = gen.standard_normal((200, 2)) * 3.0
    for j in (0, 1, 3, 6):
        r = ring_weight(std2, j, xs)
        rt = ring_plateau(std2, j, xs)
        live = r > 0
        assert np.all(rt[live] == 1.0)
        assert np.all((rt >= 0) & (rt <= 1))


def test_ring_index_and_membership(std1):
    x = np.array([2.0])                          # R = 2 exactly
    assert ring_of(std1, x) == 2
    assert in_ring(std1, 2, x)
    assert in_ring(std1, 1, x)                   # boundary joins both shells
    assert not in_ring(std1, 3, x)
    assert ring_of(std1, np.array([np.sqrt(2.0 * 3.2)])) == 3


def test_negative_ring_index_rejected(std1):
    with pytest.raises(DimensionError):
        ring_weight(std1, -1, np.array([0.5]))


# ---------------------------------------------------------------------------
# shell widths


def test_shell_width_standard_model(std1):
    # {1 <= R <= 2} along the axis: sqrt(4) - sqrt(2)
    w = ring_euclidean_width(std1, 1, np.array([1.0]))
    assert w == pytest.approx(2.0 - np.sqrt(2.0))
    # the direction vector's length must not matter
    assert ring_euclidean_width(std1, 1, np.array([2.0])) == pytest.approx(w)


def test_shell_width_anisotropic():
    m = build_model(np.diag([2.0, 8.0]), -np.eye(2))
    w = ring_euclidean_width(m, 0, np.array([0.0, 1.0]))
    assert w == pytest.approx(2.0 * np.sqrt(2.0))
    assert ring_euclidean_width(m, 0, np.array([1.0, 0.0])) == (
        pytest.approx(np.sqrt(2.0)))


def test_shell_widths_shrink(std1):
    ws = [ring_euclidean_width(std1, j, np.array([1.0])) for j in range(8)]
    assert all(ws[i] > ws[i + 1] for i in range(7))


# ---------------------------------------------------------------------------
# the local/global splitting weight


def test_local_weight_is_one_on_the_diagonal(std2):
    gen = np.random.default_rng(3)
    xs = gen.standard_normal((50, 2)) * 2.5
    eta = local_weight(std2, xs, xs)
    assert np.all(eta == 1.0)


def test_local_weight_vanishes_far_off_diagonal(std1):
    x = np.array([[1.0]])                        # R = 0.5
    u = np.array([[4.0]])                        # R = 8
    assert local_weight(std1, x, u)[0] == 0.0
    assert local_weight(std1, u, x)[0] == 0.0


def test_local_weight_range_and_broadcast(std2):
    gen = np.random.default_rng(4)
    x = gen.standard_normal((40, 2))
    u = x + gen.standard_normal((40, 2)) * 1.5
    eta = local_weight(std2, x, u)
    assert np.all((eta >= 0.0) & (eta <= 1.0))
    one = local_weight(std2, x[0], u[0])
    assert eta[0] == pytest.approx(one)


def test_split_gradient_bounds_are_moderate(std1, std2):
    assert eta_gradient_bound(std1, samples=2048) < 20.0
    assert eta_gradient_bound(std2, samples=2048) < 20.0
    assert ring_gradient_bound(std1, samples=1024) < 10.0
    assert ring_gradient_bound(std2, samples=1024) < 10.0


# ---------------------------------------------------------------------------
# invariant masses


def test_ring_masses_partition_the_mass(std1, std2):
    # rings j <= 10 cover everything except a sliver of the band
    # 11 <= R <= 12, so the deficit sits between the two level tails
    for m in (std1, std2):
        rm = ring_masses(m, 10)
        assert np.all(rm >= 0)
        deficit = 1.0 - rm.sum()
        assert level_set_mass(m, 12.0) - 1e-9 <= deficit
        assert deficit <= level_set_mass(m, 11.0) + 1e-9


def test_ring_masses_bounded_by_level_tails(std1):
    rm = ring_masses(std1, 8)
    for j in range(1, 9):
        assert rm[j] <= level_set_mass(std1, float(j)) + 1e-12


def test_level_set_mass_closed_form(std1):
    import scipy.stats
    assert level_set_mass(std1, 2.0) == pytest.approx(
        scipy.stats.chi2.sf(4.0, 1))
    assert level_set_mass(std1, -1.0) == 1.0


# ---------------------------------------------------------------------------
# polar decomposition along the flow


def test_polar_fixed_point(std1):
    s, z = polar_decompose(std1, np.array([[2.0]]), beta=2.0)
    assert s[0] == pytest.approx(0.0, abs=1e-12)
    assert z[0, 0] == pytest.approx(2.0)


def test_polar_known_shift(std1):
    s, z = polar_decompose(std1, np.array([[2.0 * np.e]]), beta=2.0)
    assert s[0] == pytest.approx(1.0, abs=1e-10)
    assert z[0, 0] == pytest.approx(2.0, abs=1e-10)


def test_polar_roundtrip_random(std2, model_factory):
    for m in (std2, model_factory(37, 2)):
        gen = np.random.default_rng(5)
        xs = gen.standard_normal((20, 2)) * 3.0 + 0.1
        beta = 1.7
        s, z = polar_decompose(m, xs, beta)
        assert quadratic_r(m, z) == pytest.approx(
            np.full(20, beta), abs=1e-9)
        back = group_apply(m, z, s)
        assert back == pytest.approx(xs, abs=1e-8)


def test_polar_rejects_origin_and_bad_level(std1):
    with pytest.raises(ZeroPointError):
        polar_decompose(std1, np.zeros((1, 1)), beta=1.0)
    with pytest.raises(AlphaTooSmallError):
        polar_decompose(std1, np.ones((1, 1)), beta=0.0)


# ---------------------------------------------------------------------------
# the weak-type annulus


def test_annulus_boundary_membership(std1):
    alpha = float(np.exp(2.0))                   # tau = 2, shell 1 <= R <= 4
    assert annulus_indicator(std1, alpha, np.array([np.sqrt(2.0)]))
    assert annulus_indicator(std1, alpha, np.array([np.sqrt(7.8)]))
    assert not annulus_indicator(std1, alpha, np.array([0.5]))
    assert not annulus_indicator(std1, alpha, np.array([3.1]))


def test_annulus_rejects_small_levels(std1):
    with pytest.raises(AlphaTooSmallError):
        annulus_indicator(std1, 2.0, np.array([1.0]))
    with pytest.raises(AlphaTooSmallError):
        annulus_mass(std1, 1.5)


def test_annulus_mass_decays(std1):
    masses = [annulus_mass(std1, a) for a in (3.0, 10.0, 100.0, 1e4)]
    assert all(m > 0 for m in masses)
    assert all(masses[i] > masses[i + 1] for i in range(3))
    # the shell mass is dominated by its inner boundary tail
    for a, m in zip((3.0, 10.0, 100.0, 1e4), masses):
        assert m <= level_set_mass(std1, 0.5 * np.log(a))


def test_annulus_mass_against_direct_integral(std1):
    import scipy.integrate
    from oulab.model import gamma_density
    alpha = 10.0
    tau = np.log(alpha)
    lo, hi = np.sqrt(tau), 2.0 * np.sqrt(tau)

    def dens(x):
        return gamma_density(std1, np.inf, np.array([x]))

    val, _ = scipy.integrate.quad(dens, lo, hi)
    val2, _ = scipy.integrate.quad(dens, -hi, -lo)
    assert annulus_mass(std1, alpha) == pytest.approx(val + val2, rel=1e-9)
