"""Applying the semigroup to test functions: direct quadrature, the
local/global splitting, time-grid variation, maximal and singular-kernel
statistics, and the weak-type Monte Carlo probes.

Quadrature strategy.  Every integral is anchored on an explicitly known
Gaussian; for Gaussian bumps the anchor is the exact product of the bump
with the relevant transition Gaussian, so node placement follows the
integrand mass at every (x, t).  Gaussian bumps also admit closed-form
semigroup values, used as the fast path for Monte Carlo probes and
cross-checked against quadrature in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (AlphaTooSmallError, BadOrderError, BudgetExceededError,
                     CoincidentPointsError, DimensionError, EtaZeroError,
                     NonPositiveTimeError)
from .geometry import (annulus_indicator, local_weight, polar_decompose)
from .kernel import (kernel_space_slope, kernel_space_slope_dt,
                     log_kernel_grid, log_kernel_pairs, logk_time_slope)
from .model import (OUModel, Propagators, covariance_qt, gamma_log_density,
                    propagators, quadratic_r)
from .quadrature import (DEFAULT_ORDER, GaussianMeasure, adaptive_integral,
                         gauss_hermite_rule, gaussian_measure,
                         product_gaussian)
from .rng import substream
from .variation import variation_batch, variation_values

_TINY = 1e-300


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals should be computed: tensor Gauss-Hermite by default,
    scipy adaptive quadrature for non-smooth integrands."""

    kind: str = "gauss-hermite-tensor"
    order: int | None = None
    target_accuracy: float = 1e-8

    def resolve_order(self, n: int) -> int:
        if self.order is not None:
            return self.order
        if n not in DEFAULT_ORDER:
            raise BadOrderError(f"no default quadrature order for n={n}")
        return DEFAULT_ORDER[n]


@dataclass(frozen=True)
class TestFunction:
    """A scalar field on R^n together with its L^1 norm against the
    invariant measure."""

    fn: object                  # callable (m, n) -> (m,)
    kind: str
    params: dict = field(default_factory=dict)
    l1_gamma: float = float("nan")

    def __call__(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.asarray(self.fn(u), dtype=float)


def gaussian_bump(model: OUModel, center, width: float,
                  normalize: bool = True) -> TestFunction:
    """f(u) = A exp(-|u - center|^2 / (2 width^2)); A chosen so that the
    L^1(gamma_inf) norm is 1 when normalize is set."""
    if width <= 0:
        raise DimensionError("bump width must be positive")
    m = np.asarray(center, dtype=float).reshape(model.n)
    ginf = gaussian_measure(np.zeros(model.n), model.Qinf)
    prec = np.eye(model.n) / width ** 2
    _, log_mass = product_gaussian(ginf, prec, m)
    amp = math.exp(-log_mass) if normalize else 1.0
    l1 = 1.0 if normalize else math.exp(log_mass)

    def fn(u, _m=m, _w=width, _a=amp):
        d = u - _m
        return _a * np.exp(-0.5 * np.einsum("mi,mi->m", d, d) / _w ** 2)

    return TestFunction(fn=fn, kind="gaussian-bump",
                        params={"center": m, "width": float(width),
                                "amplitude": float(amp)},
                        l1_gamma=l1)


def constant_function(model: OUModel, value: float = 1.0) -> TestFunction:
    def fn(u, _v=value):
        return np.full(u.shape[0], _v)
    return TestFunction(fn=fn, kind="custom", params={"value": value},
                        l1_gamma=abs(value))


def coordinate_function(model: OUModel, k: int = 0) -> TestFunction:
    """f(u) = u_k, an eigenfunction direction of the generator."""
    if not 0 <= k < model.n:
        raise DimensionError("coordinate index out of range")
    # E|u_k| under a centered Gaussian with variance Qinf_kk
    l1 = math.sqrt(2.0 * model.Qinf[k, k] / math.pi)

    def fn(u, _k=k):
        return u[:, _k]

    return TestFunction(fn=fn, kind="polynomial-times-gaussian",
                        params={"coordinate": k}, l1_gamma=l1)


def gaussian_polynomial(model: OUModel, coeffs, decay: float = 0.5,
                        seed_norm: int = 0) -> TestFunction:
    """f(u) = (c_0 + sum c_i u_i + c_{n+1} |u|^2) exp(-decay |u|^2 / 2)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size != model.n + 2:
        raise DimensionError(f"need {model.n + 2} coefficients")

    def fn(u, _c=coeffs, _d=decay):
        poly = _c[0] + u @ _c[1:-1] + _c[-1] * np.einsum("mi,mi->m", u, u)
        return poly * np.exp(-0.5 * _d * np.einsum("mi,mi->m", u, u))

    tf = TestFunction(fn=fn, kind="polynomial-times-gaussian",
                      params={"coeffs": coeffs, "decay": decay})
    ginf = gaussian_measure(np.zeros(model.n), model.Qinf)
    rule = gauss_hermite_rule(ginf)
    l1 = rule.integrate(lambda v: np.abs(fn(v)))
    return TestFunction(fn=fn, kind=tf.kind, params=tf.params, l1_gamma=l1)


def smoothed_indicator(model: OUModel, center, radius: float,
                       scale: float | None = None) -> TestFunction:
    """Smoothed indicator of a ball: 1 inside radius - scale, 0 outside
    radius, a smooth ramp between (scale defaults to radius / 10)."""
    from .geometry import smooth_step
    m = np.asarray(center, dtype=float).reshape(model.n)
    if scale is None:
        scale = radius / 10.0

    def fn(u, _m=m, _r=radius, _s=scale):
        d = np.linalg.norm(u - _m, axis=1)
        return np.asarray(smooth_step((_r - d) / _s))

    tf = TestFunction(fn=fn, kind="indicator-smoothed",
                      params={"center": m, "radius": radius, "scale": scale})
    ginf = gaussian_measure(np.zeros(model.n), model.Qinf)
    rule = gauss_hermite_rule(ginf, order=96 if model.n == 1 else 64)
    l1 = rule.integrate(lambda v: np.abs(fn(v)))
    return TestFunction(fn=fn, kind=tf.kind, params=tf.params, l1_gamma=l1)


# ---------------------------------------------------------------------------
# time grids


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise NonPositiveTimeError("grid needs at least two points")
        if pts[0] <= 0 or np.any(np.diff(pts) <= 0):
            raise NonPositiveTimeError(
                "grid must be strictly increasing and positive")
        object.__setattr__(self, "points", pts)

    @classmethod
    def geometric(cls, t_min: float, t_max: float,
                  points_per_decade: int = 64) -> "TimeGrid":
        if not 0 < t_min < t_max:
            raise NonPositiveTimeError("need 0 < t_min < t_max")
        decades = math.log10(t_max / t_min)
        count = max(2, int(math.ceil(decades * points_per_decade)) + 1)
        return cls(np.geomspace(t_min, t_max, count))

    def refine(self) -> "TimeGrid":
        """Insert the geometric midpoint of every gap; the old points stay,
        so any variation along the grid can only grow."""
        p = self.points
        mids = np.sqrt(p[:-1] * p[1:])
        return TimeGrid(np.sort(np.concatenate([p, mids])))

    def __len__(self):
        return self.points.size


def t_max_for_tail(model: OUModel, tol: float = 1e-9,
                   cap: float = 50.0) -> float:
    """Truncation point for [1, inf) grids: past it the kernel sits within
    tol of its limit, since deviations decay like exp(2 t x abscissa)."""
    sigma = -model.spectral_abscissa
    return float(min(cap, max(10.0, math.log(1.0 / tol) / (2.0 * sigma))))


# ---------------------------------------------------------------------------
# closed-form semigroup action on Gaussian bumps


def _bump_stacks(model: OUModel, bump: TestFunction, props: Propagators):
    w2 = bump.params["width"] ** 2
    cov = props.Qt + w2 * np.eye(model.n)[None]
    sinv = np.linalg.inv(cov)
    sign, ld = np.linalg.slogdet(cov)
    if np.any(sign <= 0):
        raise NonPositiveTimeError("degenerate bump covariance")
    # det(I + Qt / w2) = det(Qt + w2 I) / w2^n
    log_detfac = -0.5 * (ld - model.n * math.log(w2))
    return sinv, log_detfac


def bump_semigroup_grid(model: OUModel, bump: TestFunction,
                        props: Propagators, x) -> np.ndarray:
    """Closed-form H_t f for a Gaussian bump, over points x grid times, (p, m).

    The semigroup of a Gaussian is the Gaussian of the broadened
    covariance: H_t f(x) = A det(I + Qt/w^2)^{-1/2}
    exp(-<(Qt + w^2 I)^{-1} z, z>/2), z = e^{tB} x - center.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sinv, log_detfac = _bump_stacks(model, bump, props)
    z = np.einsum("mij,pj->pmi", props.exp_tB, x) \
        - bump.params["center"][None, None, :]
    q = np.einsum("pmi,mij,pmj->pm", z, sinv, z)
    return bump.params["amplitude"] * np.exp(log_detfac[None, :] - 0.5 * q)


def bump_semigroup_value(model: OUModel, bump: TestFunction, t: float,
                         x) -> float:
    pr = propagators(model, np.array([float(t)]))
    return float(bump_semigroup_grid(model, bump, pr, x)[0, 0])


# ---------------------------------------------------------------------------
# quadrature application


def _kernel_form_weights(model: OUModel, f: TestFunction, x: np.ndarray,
                         t: float, rule):
    """Quadrature weights W_i with sum_i W_i h(u_i) ~ int K_t(x,u) h(u) f(u)
    dgamma_inf(u); evaluates the kernel through its quadratic form so the
    cancellation against the anchor density is a real consistency check."""
    nodes = rule.nodes
    lk = log_kernel_pairs(model, np.full(nodes.shape[0], float(t)),
                          np.broadcast_to(x, nodes.shape), nodes)
    log_ratio = lk + gamma_log_density(model, np.inf, nodes) \
        - rule.anchor.log_density(nodes)
    return rule.weights * f(nodes) * np.exp(log_ratio), nodes


def _anchor_for(model: OUModel, f: TestFunction, x: np.ndarray, t: float):
    mean = None
    exp_tB = propagators(model, np.array([float(t)])).exp_tB[0]
    mu_t = gaussian_measure(exp_tB @ x, covariance_qt(model, t))
    if f.kind == "gaussian-bump":
        prec = np.eye(model.n) / f.params["width"] ** 2
        prod, _ = product_gaussian(mu_t, prec, f.params["center"])
        return prod
    return mu_t


def apply_semigroup(model: OUModel, spec: QuadratureSpec, f: TestFunction,
                    x, t: float, form: str = "kernel") -> float:
    """H_t f(x) by quadrature.

    kernel form integrates K_t(x, u) f(u) against gamma_inf; the transition
    form integrates f(e^{tB} x - y) against the t-covariance Gaussian.  The
    two routes share nodes but exercise independent formulas.
    """
    if t <= 0:
        raise NonPositiveTimeError("semigroup time must be positive")
    x = np.asarray(x, dtype=float).reshape(model.n)
    if form not in ("kernel", "kolmogorov"):
        raise BadOrderError(f"unknown form {form!r}")
    n = model.n
    if form == "kolmogorov":
        gt = gaussian_measure(np.zeros(n), covariance_qt(model, t))
        exp_tB = propagators(model, np.array([float(t)])).exp_tB[0]
        if spec.kind == "adaptive":
            val = adaptive_integral(
                lambda y: f(exp_tB @ x - y), gt)
            return float(val)
        rule = gauss_hermite_rule(gt, spec.resolve_order(n))
        vals = f(exp_tB @ x - rule.nodes)
        return float(rule.weights @ vals)
    if spec.kind == "adaptive":
        raise BudgetExceededError(
            "adaptive quadrature supports the transition form only")
    anchor = _anchor_for(model, f, x, t)
    rule = gauss_hermite_rule(anchor, spec.resolve_order(n))
    weights, _ = _kernel_form_weights(model, f, x, t, rule)
    return float(weights.sum())


def apply_semigroup_path(model: OUModel, spec: QuadratureSpec,
                         f: TestFunction, x, grid: TimeGrid,
                         form: str = "auto") -> np.ndarray:
    """H_t f(x) along a time grid; closed form for Gaussian bumps, per-time
    quadrature otherwise.  Returns (p, m) for x of shape (p, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if f.kind == "gaussian-bump" and form == "auto":
        props = propagators(model, grid.points)
        return bump_semigroup_grid(model, f, props, x)
    use_form = "kolmogorov" if form == "auto" else form
    out = np.empty((x.shape[0], len(grid)))
    for i in range(x.shape[0]):
        for j, t in enumerate(grid.points):
            out[i, j] = apply_semigroup(model, spec, f, x[i], float(t),
                                        form=use_form)
    return out


def apply_local_global(model: OUModel, spec: QuadratureSpec, f: TestFunction,
                       x, t: float) -> tuple[float, float]:
    """(near part, far part) of H_t f(x): the kernel integral split by the
    ring cutoff and its complement.  The parts add to the kernel-form
    semigroup value on the same nodes."""
    if t <= 0:
        raise NonPositiveTimeError("semigroup time must be positive")
    x = np.asarray(x, dtype=float).reshape(model.n)
    anchor = _anchor_for(model, f, x, t)
    rule = gauss_hermite_rule(anchor, spec.resolve_order(model.n))
    weights, nodes = _kernel_form_weights(model, f, x, t, rule)
    eta = np.asarray(local_weight(model, x[None, :], nodes))
    loc = float((weights * eta).sum())
    glob = float((weights * (1.0 - eta)).sum())
    return loc, glob


def local_global_grid(model: OUModel, bump: TestFunction,
                      props: Propagators, x, order: int | None = None,
                      chunk: int = 64):
    """(near, far) parts of H_t f over points x grid, (p, m) each, for a
    Gaussian bump.

    For each t the integrand K_t(x,u) f(u) gamma_inf(u) is exactly
    mass(x,t) times a Gaussian in u, with mass the closed-form semigroup
    value; the split weight is then averaged under that Gaussian by a
    Gauss-Hermite rule, so the only quadrature error comes from the smooth
    cutoff itself.
    """
    from numpy.polynomial.hermite_e import hermegauss
    n = model.n
    if order is None:
        order = DEFAULT_ORDER.get(n, 32)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p, mt = x.shape[0], len(props)
    w2 = bump.params["width"] ** 2
    m_ctr = bump.params["center"]
    # product covariance (Qt^-1 + I/w2)^-1 and its square root, per time
    prec = props.Qt_inv + np.eye(n)[None] / w2
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    wv, vv = np.linalg.eigh(cov)
    if np.min(wv) <= 0:
        raise NonPositiveTimeError("degenerate product covariance")
    L = np.einsum("mij,mj,mkj->mik", vv, np.sqrt(wv), vv)
    x1, w1 = hermegauss(order)
    w1 = w1 / np.sqrt(2 * np.pi)
    grids = np.meshgrid(*([x1] * n), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=-1)        # (q, n)
    wq = np.ones(order ** n)
    for g in np.meshgrid(*([w1] * n), indexing="ij"):
        wq = wq * g.ravel()
    mass = bump_semigroup_grid(model, bump, props, x)        # (p, mt)
    loc = np.empty((p, mt))
    base_mean = np.einsum("mij,j->mi", cov, m_ctr / w2)      # (mt, n)
    for lo in range(0, p, chunk):
        hi = min(lo + chunk, p)
        xs = x[lo:hi]
        mean = _product_means(props, cov, xs) + base_mean[None, :, :]
        nodes = mean[:, :, None, :] + np.einsum("mij,qj->mqi", L, z)[None]
        eta = local_weight(model, xs[:, None, None, :], nodes)
        loc[lo:hi] = (eta * wq[None, None, :]).sum(axis=2)
    loc = mass * loc
    return loc, mass - loc


def _product_means(props: Propagators, cov: np.ndarray,
                   xs: np.ndarray) -> np.ndarray:
    """cov_t Qt^-1 e^{tB} x per (point, time), (p, mt, n)."""
    ex = np.einsum("mij,pj->pmi", props.exp_tB, xs)
    return np.einsum("mij,mjk,pmk->pmi", cov, props.Qt_inv, ex)


# ---------------------------------------------------------------------------
# variation along time grids


@dataclass(frozen=True)
class VariationResult:
    value: float
    converged: bool
    refinements: int
    grid_size: int
    rel_change: float


def _part_values(model: OUModel, f: TestFunction, grid: TimeGrid, x,
                 part: str, order: int | None = None) -> np.ndarray:
    """Semigroup path values (p, m) for the requested part of the split.

    Gaussian bumps run through the closed form; any other test function
    falls back to per-time transition quadrature for the full path, while
    the near/far split stays bump-only."""
    if part not in ("full", "local", "global"):
        raise BadOrderError(f"unknown part {part!r}")
    if f.kind != "gaussian-bump":
        if part != "full":
            raise BadOrderError("near/far split paths need a Gaussian bump")
        spec = QuadratureSpec(order=order)
        return apply_semigroup_path(model, spec, f, x, grid,
                                    form="kolmogorov")
    props = propagators(model, grid.points)
    if part == "full":
        return bump_semigroup_grid(model, f, props, x)
    loc, glob = local_global_grid(model, f, props, x, order=order)
    return loc if part == "local" else glob


def variation_operator(model: OUModel, f: TestFunction, x, rho: float,
                       grid: TimeGrid, part: str = "full",
                       tol: float = 1e-3, max_refine: int = 6,
                       order: int | None = None) -> VariationResult:
    """rho-variation of t -> H_t f(x) (or its near/far part) along nested
    refinements of the grid, stopping once the value stabilizes.

    Nested grids keep all earlier points, so the value is nondecreasing in
    the refinement index; convergence is a relative-increment test.
    """
    x = np.asarray(x, dtype=float).reshape(1, model.n)
    g = grid
    vals = _part_values(model, f, g, x, part, order)[0]
    # the convergence test is relative to the path scale, so a flat path
    # (variation at rounding level) converges instead of chasing noise
    floor = 1e-9 * max(1.0, float(np.max(np.abs(vals))))
    prev = variation_values(vals, rho)
    rel = math.inf
    for k in range(1, max_refine + 1):
        g = g.refine()
        cur = variation_values(_part_values(model, f, g, x, part, order)[0],
                               rho)
        rel = abs(cur - prev) / max(abs(cur), floor)
        prev = cur
        if rel < tol:
            return VariationResult(value=prev, converged=True,
                                   refinements=k, grid_size=len(g),
                                   rel_change=rel)
    return VariationResult(value=prev, converged=False,
                           refinements=max_refine, grid_size=len(g),
                           rel_change=rel)


def variation_batch_paths(model: OUModel, f: TestFunction, x, rho: float,
                          grid: TimeGrid, part: str = "full",
                          tol: float = 1e-3, max_refine: int = 3,
                          order: int | None = None):
    """Batched variation over many starting points; refinement is applied to
    the whole batch until the largest relative increment drops below tol.
    Returns (values, converged_flag, grid_size)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = grid
    vals = _part_values(model, f, g, x, part, order)
    floor = 1e-9 * max(1.0, float(np.max(np.abs(vals))))
    prev = variation_batch(vals, rho)
    rel = math.inf
    for _ in range(max_refine):
        g = g.refine()
        cur = variation_batch(_part_values(model, f, g, x, part, order), rho)
        rel = float(np.max(np.abs(cur - prev) /
                           np.maximum(np.abs(cur), floor)))
        prev = cur
        if rel < tol:
            return prev, True, len(g)
    return prev, False, len(g)


# ---------------------------------------------------------------------------
# far-part maximal value


def maximal_global(model: OUModel, f: TestFunction, x, grid: TimeGrid,
                   order: int | None = None) -> float:
    """sup over the grid of the far part of H_t |f|(x), evaluated with a
    time-independent node set so the supremum is a plain max over rows.

    Nodes come from the product of |f| with the invariant density, and each
    node u contributes weight w_u |f|(u) against sup_t K_t(x, u) (1 - eta).
    """
    if f.kind != "gaussian-bump":
        raise BadOrderError("maximal statistics need a Gaussian bump")
    if grid.points[-1] > 1.0 + 1e-12:
        raise NonPositiveTimeError("maximal statistic grid must lie in (0, 1]")
    x = np.asarray(x, dtype=float).reshape(model.n)
    ginf = gaussian_measure(np.zeros(model.n), model.Qinf)
    prec = np.eye(model.n) / f.params["width"] ** 2
    anchor, log_mass = product_gaussian(ginf, prec, f.params["center"])
    rule = gauss_hermite_rule(anchor, order)
    # w_i f(u_i) gamma(u_i) / anchor(u_i) = w_i amplitude exp(log_mass)
    wf = rule.weights * f.params["amplitude"] * math.exp(log_mass)
    props = propagators(model, grid.points)
    xs = np.broadcast_to(x, rule.nodes.shape)
    lk = log_kernel_grid(model, props, xs, rule.nodes)     # (q, m)
    kmax = np.exp(lk.max(axis=1))
    eta = np.asarray(local_weight(model, x[None, :], rule.nodes))
    return float(np.sum(wf * (1.0 - eta) * kmax))


# ---------------------------------------------------------------------------
# singular-kernel statistics for the near part


def _eta_kernel_paths(model: OUModel, props: Propagators, x: np.ndarray,
                      u: np.ndarray) -> np.ndarray:
    """(pairs, m) values of eta(x, u) K_t(x, u) exp(-R(x)); the invariant
    prefactor is removed so far points stay in floating range."""
    lk = log_kernel_grid(model, props, x, u)
    rx = quadratic_r(model, x)
    eta = np.asarray(local_weight(model, x, u))
    return eta[:, None] * np.exp(lk - rx[:, None])


def cz_kernel_norm(model: OUModel, x, u, rho: float,
                   grid: TimeGrid | None = None, tol: float = 1e-3,
                   max_refine: int = 5) -> float:
    """rho-variation in t of the near-part kernel at one off-diagonal pair,
    with the exp(R(x)) amplification removed; infinite on the diagonal."""
    x = np.asarray(x, dtype=float).reshape(1, model.n)
    u = np.asarray(u, dtype=float).reshape(1, model.n)
    if np.allclose(x, u):
        raise CoincidentPointsError("variation norm diverges on the diagonal")
    if grid is None:
        grid = TimeGrid.geometric(1e-8, 1.0, 48)
    g = grid
    prev = variation_values(
        _eta_kernel_paths(model, propagators(model, g.points), x, u)[0], rho)
    for _ in range(max_refine):
        g = g.refine()
        cur = variation_values(
            _eta_kernel_paths(model, propagators(model, g.points), x, u)[0],
            rho)
        if abs(cur - prev) <= tol * max(abs(cur), _TINY):
            return cur
        prev = cur
    return prev


def cz_difference_norm(model: OUModel, x, u, u2, rho: float,
                       grid: TimeGrid | None = None) -> float:
    """rho-variation in t of the difference of near-part kernel paths at u
    and u2, the regularity half of the standard kernel estimates."""
    x = np.asarray(x, dtype=float).reshape(1, model.n)
    u = np.asarray(u, dtype=float).reshape(1, model.n)
    u2 = np.asarray(u2, dtype=float).reshape(1, model.n)
    if grid is None:
        grid = TimeGrid.geometric(1e-8, 1.0, 96)
    props = propagators(model, grid.points)
    pa = _eta_kernel_paths(model, props, x, u)[0]
    pb = _eta_kernel_paths(model, props, x, u2)[0]
    return variation_values(pa - pb, rho)


def _pair_cloud(model: OUModel, radii: np.ndarray, n_dirs: int, seed: int):
    """Base points near the bulk of gamma_inf and offsets of prescribed
    Euclidean length, one block of directions per radius."""
    n = model.n
    total = radii.size * n_dirs
    rng_x = substream(seed, 1).standard_normal((total, n))
    dirs = substream(seed, 2).standard_normal((total, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x = 0.8 * rng_x
    r = np.repeat(radii, n_dirs)
    return x, x + r[:, None] * dirs, r


def cz_size_sweep(model: OUModel, rho: float, radii=None, n_dirs: int = 8,
                  seed: int = 0, grid: TimeGrid | None = None) -> dict:
    """Sweep of |x-u|^n times the near-part variation norm over pair
    separations; bounded profiles back the size half of the kernel
    estimates.

    The fine pass extends the base pass: the time grid is refined (nested,
    so each path's variation can only grow) and the direction count is
    doubled keeping the original pairs.  Small drift therefore certifies
    that the per-radius maximum has saturated in both grid and sample."""
    if radii is None:
        radii = np.geomspace(1e-3, 0.4, 16)
    radii = np.asarray(radii, dtype=float)
    if grid is None:
        grid = TimeGrid.geometric(1e-8, 1.0, 48)
    x, u, r = _pair_cloud(model, radii, 2 * n_dirs, seed)

    def stat(g: TimeGrid, sub) -> np.ndarray:
        paths = _eta_kernel_paths(model, propagators(model, g.points),
                                  x[sub], u[sub])
        v = variation_batch(paths, rho)
        return (v * r[sub] ** model.n).reshape(radii.size, -1).max(axis=1)

    cols = np.arange(r.size).reshape(radii.size, 2 * n_dirs)
    base = stat(grid, cols[:, :n_dirs].ravel())
    fine = stat(grid.refine(), slice(None))
    drift = float(np.max(np.abs(fine - base) / np.maximum(base, _TINY)))
    return {"radii": radii, "profile": fine, "max_stat": float(fine.max()),
            "drift": drift, "stable": bool(drift <= 0.10)}


def cz_smoothness_sweep(model: OUModel, rho: float, n_triples: int = 64,
                        seed: int = 0, grid: TimeGrid | None = None) -> dict:
    """Sweep of |x-u|^{n+1} / |u-u2| times the variation norm of the
    difference path over triples with |x-u| > 2 |u-u2|."""
    if grid is None:
        grid = TimeGrid.geometric(1e-8, 1.0, 96)
    n = model.n
    r = np.geomspace(2e-3, 0.4, n_triples)
    dirs = substream(seed, 3).standard_normal((n_triples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs2 = substream(seed, 4).standard_normal((n_triples, n))
    dirs2 /= np.linalg.norm(dirs2, axis=1, keepdims=True)
    x = 0.8 * substream(seed, 5).standard_normal((n_triples, n))
    u = x + r[:, None] * dirs
    u2 = u + 0.25 * r[:, None] * dirs2

    def stat(g: TimeGrid) -> np.ndarray:
        props = propagators(model, g.points)
        pa = _eta_kernel_paths(model, props, x, u)
        pb = _eta_kernel_paths(model, props, x, u2)
        v = variation_batch(pa - pb, rho)
        sep = np.linalg.norm(u - u2, axis=1)
        return v * r ** (n + 1) / sep

    base = stat(grid)
    fine = stat(grid.refine())
    drift = float(np.max(np.abs(fine - base) / np.maximum(base, _TINY)))
    return {"radii": r, "profile": fine, "max_stat": float(fine.max()),
            "drift": drift, "stable": bool(drift <= 0.10)}


def mixed_derivative_bound(model: OUModel, x, u, ell: int = 0,
                           grid_size: int = 512, t_lo: float = 1e-6) -> dict:
    """integral over (0, 1] of |d/dt d/du_ell K_t(x, u)| compared against
    |u - x|^{-n-1}.

    The mixed derivative is assembled from the two analytic factors of
    d/du K = -K s(t): d/dt d/du K = -(dK/dt s + K ds/dt); a second-difference
    stencil cross-checks the assembly at spot times.
    """
    x = np.asarray(x, dtype=float).reshape(model.n)
    u = np.asarray(u, dtype=float).reshape(model.n)
    sep = float(np.linalg.norm(u - x))
    if sep == 0.0:
        raise CoincidentPointsError("mixed derivative bound needs x != u")
    if local_weight(model, x[None], u[None])[0] == 0.0:
        raise EtaZeroError("pair lies outside the near region")

    def integral(m: int) -> tuple[float, np.ndarray, np.ndarray]:
        ts = np.geomspace(t_lo, 1.0, m)
        xs = np.broadcast_to(x, (m, model.n))
        us = np.broadcast_to(u, (m, model.n))
        slope, _, g0 = logk_time_slope(model, ts, xs, us)
        k = np.exp(g0)
        kdot = k * slope
        s_ell = np.empty(m)
        sdot_ell = np.empty(m)
        for i, t in enumerate(ts):
            s_ell[i] = kernel_space_slope(model, float(t), x, u)[ell]
            sdot_ell[i] = kernel_space_slope_dt(model, float(t), x, u)[ell]
        mixed = -(kdot * s_ell + k * sdot_ell)
        return float(np.trapezoid(np.abs(mixed), ts)), ts, mixed

    val, ts, mixed = integral(grid_size)
    val2, _, _ = integral(2 * grid_size)
    drift = abs(val2 - val) / max(abs(val2), _TINY)

    # spot check the analytic assembly with a centered 2d-difference stencil
    idx = np.linspace(grid_size // 8, grid_size - 1, 8).astype(int)
    dev = 0.0
    for i in idx:
        t = float(ts[i])
        h = 1e-4 * t
        e = 1e-5 * max(1.0, float(np.abs(u).max()))
        vals = np.empty((2, 2))
        for a, tt in enumerate((t + h, t - h)):
            for b, du in enumerate((e, -e)):
                uu = u.copy()
                uu[ell] += du
                vals[a, b] = math.exp(log_kernel_pairs(
                    model, np.array([tt]), x[None], uu[None])[0])
        fd = (vals[0, 0] - vals[0, 1] - vals[1, 0] + vals[1, 1]) / (4 * h * e)
        ref = float(mixed[i])
        dev = max(dev, abs(fd - ref) / max(abs(ref), 1e-12))
    return {"integral": val2, "bound": sep ** (-model.n - 1),
            "ratio": val2 * sep ** (model.n + 1), "drift": float(drift),
            "stable": bool(drift <= 0.10), "fd_deviation": float(dev)}


# ---------------------------------------------------------------------------
# Monte Carlo probes


_REGIMES = {
    "full": ("full", "all"),
    "large-t": ("full", "tail"),
    "global-small-t": ("global", "unit"),
    "local-small-t": ("local", "unit"),
}


def _regime_grid(model: OUModel, regime: str,
                 points_per_decade: int) -> TimeGrid:
    tmax = t_max_for_tail(model)
    if regime == "large-t":
        return TimeGrid.geometric(1.0, tmax, points_per_decade)
    if regime in ("global-small-t", "local-small-t"):
        return TimeGrid.geometric(1e-6, 1.0, points_per_decade)
    return TimeGrid.geometric(1e-6, tmax, points_per_decade)


def _sup_weighted_tail(alphas: np.ndarray, lam: np.ndarray,
                       weighted: bool) -> float:
    w = alphas * lam
    if weighted:
        mask = alphas > math.e
        if not mask.any():
            return 0.0
        w = alphas[mask] * np.sqrt(np.log(alphas[mask])) * lam[mask]
    return float(w.max()) if w.size else 0.0


def weak_type_probe(model: OUModel, rho: float, regime: str = "full",
                    width: float = 0.5, center=None,
                    sample_size: int = 2000, seed: int = 0,
                    n_alphas: int = 48, points_per_decade: int = 16,
                    max_refine: int = 3,
                    order: int | None = None) -> "ProbeReport":
    """Monte Carlo estimate of sup_a a * measure{ v_rho(t -> H_t f) > a }
    against the invariant measure, per time regime.

    The distribution-function curve should stay bounded by a multiple of
    the L^1 norm of f; over the tail regime the same holds with an extra
    sqrt(log a) factor.  Partial regimes probe the near and far parts of
    the kernel split separately on times up to one.
    """
    from .report import ProbeReport
    if regime not in _REGIMES:
        raise BadOrderError(f"unknown regime {regime!r}")
    if rho < 2:
        raise BadOrderError("variation exponent below two is not handled")
    if regime in ("full", "local-small-t") and rho <= 2:
        raise BadOrderError(f"regime {regime!r} needs rho > 2")
    if sample_size < 1000:
        raise DimensionError("weak-type probe needs >= 1000 sample points")
    part, _ = _REGIMES[regime]
    n = model.n
    if center is None:
        center = substream(seed, 100).standard_normal(n) @ model.Qinf_sqrt.T
    f = gaussian_bump(model, center, width)
    grid = _regime_grid(model, regime, points_per_decade)
    xs = substream(seed, 200).standard_normal((sample_size, n)) \
        @ model.Qinf_sqrt.T
    v, converged, grid_size = variation_batch_paths(
        model, f, xs, rho, grid, part=part, max_refine=max_refine,
        order=order)
    vpos = v[v > 0]
    lo = float(np.quantile(vpos, 0.5)) if vpos.size else 1e-10
    hi = max(float(v.max()) * 1.05, lo * 10.0)
    alphas = np.geomspace(max(lo, 1e-12), hi, n_alphas)
    lam = (v[None, :] > alphas[:, None]).mean(axis=1)
    weighted = regime == "large-t"
    stat = _sup_weighted_tail(alphas, lam, weighted)
    half = sample_size // 2
    lam_half = (v[None, :half] > alphas[:, None]).mean(axis=1)
    stat_half = _sup_weighted_tail(alphas, lam_half, weighted)
    growth = stat / max(stat_half, _TINY)

    boot = substream(seed, 300)
    reps = 200
    idx = boot.integers(0, sample_size, size=(reps, sample_size))
    stats_b = np.empty(reps)
    for r in range(reps):
        lam_b = (v[idx[r]][None, :] > alphas[:, None]).mean(axis=1)
        stats_b[r] = _sup_weighted_tail(alphas, lam_b, weighted)
    ci_lo, ci_hi = np.percentile(stats_b, [2.5, 97.5])

    rows = [{"alpha": float(a), "lambda": float(l),
             "alpha_lambda": float(a * l)}
            for a, l in zip(alphas, lam)]
    label = "a*sqrt(log a)*lambda(a)" if weighted else "a*lambda(a)"
    return ProbeReport(
        name=f"weak-type-{regime}",
        claim=(f"sup over a of {label} for the {part} part of the "
               f"{rho}-variation of t -> H_t f stays bounded by a fixed "
               "multiple of the L1 mass of f"),
        inputs={"rho": rho, "regime": regime, "width": width,
                "center": np.asarray(center).tolist(),
                "sample_size": sample_size, "n_alphas": n_alphas,
                "points_per_decade": points_per_decade,
                "time_grid_size": grid_size},
        statistics={"statistic": stat, "half_sample_statistic": stat_half,
                    "growth": float(growth),
                    "variation_unconverged": not converged,
                    "v_max": float(v.max()), "v_mean": float(v.mean()),
                    "l1_mass": f.l1_gamma},
        tables={"alpha_lambda": rows},
        pass_flags={"finite": bool(np.isfinite(stat)),
                    "stable": bool(growth <= 1.1)},
        ci={"statistic": [float(ci_lo), float(ci_hi)]},
        seed=seed)


def annulus_superlevel_probe(model: OUModel, alphas, delta_rate: float,
                             width: float = 0.5, center=None,
                             sample_size: int = 4000, seed: int = 0,
                             order: int | None = None) -> "ProbeReport":
    """Measure of the superlevel set, inside the matching annulus, of the
    amplified Gaussian average

        g(x) = e^{R(x)} int exp(-delta_rate |x~ - u~|^2) f(u) dgamma_inf(u),

    where x~, u~ project x and u along the flow onto the level set
    R = log(alpha).  The product alpha sqrt(log alpha) measure{g > alpha}
    should stay bounded, uniformly in alpha, by the L1 mass of f.
    """
    from .report import ProbeReport
    alphas = [float(a) for a in np.atleast_1d(alphas)]
    for a in alphas:
        if a <= 2.0:
            raise AlphaTooSmallError("levels must exceed 2")
    n = model.n
    if center is None:
        center = substream(seed, 100).standard_normal(n) @ model.Qinf_sqrt.T
    f = gaussian_bump(model, center, width)
    ginf = gaussian_measure(np.zeros(n), model.Qinf)
    prec = np.eye(n) / width ** 2
    anchor, log_mass = product_gaussian(ginf, prec, f.params["center"])
    rule = gauss_hermite_rule(anchor, order)
    wf = rule.weights * f.params["amplitude"] * math.exp(log_mass)
    xs = substream(seed, 200).standard_normal((sample_size, n)) \
        @ model.Qinf_sqrt.T
    def exceed_count(a: float, pts: np.ndarray) -> tuple[int, int]:
        """(# of pts in the annulus with g > a, # of pts in the annulus)."""
        beta = math.log(a)
        inside = annulus_indicator(model, a, pts)
        count = int(inside.sum())
        if count == 0:
            return 0, 0
        u_proj = polar_decompose(model, rule.nodes, beta)[1]
        x_in = pts[inside]
        x_proj = polar_decompose(model, x_in, beta)[1]
        d2 = np.sum((x_proj[:, None, :] - u_proj[None, :, :]) ** 2, axis=2)
        g = np.exp(quadratic_r(model, x_in)) * \
            (np.exp(-delta_rate * d2) @ wf)
        return int(np.sum(g > a)), count

    rows = []
    worst = 0.0
    for a in alphas:
        exceeded, count = exceed_count(a, xs)
        measure = exceeded / sample_size
        statv = a * math.sqrt(math.log(a)) * measure
        worst = max(worst, statv)
        rows.append({"alpha": a, "measure": measure, "statistic": statv,
                     "points_in_annulus": count})
    half = sample_size // 2
    worst_half = 0.0
    for a in alphas:
        exceeded, _ = exceed_count(a, xs[:half])
        worst_half = max(worst_half,
                         a * math.sqrt(math.log(a)) * exceeded / half)
    growth = worst / max(worst_half, _TINY) if worst > 0 else 1.0
    stats = {"statistic": worst, "half_sample_statistic": worst_half,
             "growth": float(growth), "l1_mass": f.l1_gamma}
    return ProbeReport(
        name="annulus-superlevel",
        claim=("alpha sqrt(log alpha) times the invariant measure of the "
               "superlevel set {g > alpha} inside the annulus "
               "{log(alpha)/2 <= R <= 2 log(alpha)} stays bounded by a "
               "fixed multiple of the L1 mass of f"),
        inputs={"alphas": alphas, "delta_rate": delta_rate, "width": width,
                "center": np.asarray(center).tolist(),
                "sample_size": sample_size},
        statistics=stats,
        tables={"superlevel": rows},
        pass_flags={"finite": bool(np.isfinite(worst)),
                    "stable": bool(growth <= 1.25 or worst == 0.0)},
        ci={},
        seed=seed)
