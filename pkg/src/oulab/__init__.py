"""Numerical laboratory for the Ornstein-Uhlenbeck semigroup.

The package builds degenerate-diffusion models (Q, B), evaluates their
transition kernels in log form, applies the semigroup by independent
quadrature routes, measures rho-variation along time paths, and runs
Monte Carlo probes of weak-type and Calderon-Zygmund behavior, plus a
dyadic oscillation laboratory on the circle where the variation bound
provably degrades.

Submodules are imported lazily so the command line front end can
configure threading before the numerics stack loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    # model
    "OUModel": "model", "build_model": "model", "standard_model": "model",
    "model_from_dict": "model", "covariance_qt": "model",
    "propagators": "model", "Propagators": "model",
    "apply_generator": "model", "gamma_log_density": "model",
    "quadratic_r": "model",
    # geometry
    "local_weight": "geometry", "polar_decompose": "geometry",
    "ring_euclidean_width": "geometry", "annulus_indicator": "geometry",
    "ring_weight": "geometry", "smooth_step": "geometry",
    # quadrature
    "gaussian_measure": "quadrature", "product_gaussian": "quadrature",
    "gauss_hermite_rule": "quadrature",
    # kernel
    "kernel": "kernel", "log_kernel": "kernel", "kernel_tilde": "kernel",
    "conv_kernel": "kernel", "kernel_dt": "kernel",
    "count_kdot_zeros": "kernel", "count_kdot_zeros_batch": "kernel",
    "calibrate_bound": "kernel", "BoundCalibration": "kernel",
    "admissible_rate": "kernel", "natural_rate": "kernel",
    "space_derivative_residual": "kernel",
    "far_field_decay_check": "kernel", "singular_integral_check": "kernel",
    "ftc_variation_bound": "kernel",
    # variation
    "SampledPath": "variation", "variation": "variation",
    "variation_values": "variation", "variation_batch": "variation",
    "variation_exhaustive": "variation", "discrete_variation": "variation",
    "variation_properties": "variation",
    # semigroup
    "QuadratureSpec": "semigroup", "TestFunction": "semigroup",
    "TimeGrid": "semigroup", "gaussian_bump": "semigroup",
    "constant_function": "semigroup", "coordinate_function": "semigroup",
    "gaussian_polynomial": "semigroup", "smoothed_indicator": "semigroup",
    "apply_semigroup": "semigroup", "apply_local_global": "semigroup",
    "bump_semigroup_value": "semigroup", "variation_operator": "semigroup",
    "variation_batch_paths": "semigroup", "maximal_global": "semigroup",
    "cz_kernel_norm": "semigroup", "cz_difference_norm": "semigroup",
    "cz_size_sweep": "semigroup", "cz_smoothness_sweep": "semigroup",
    "mixed_derivative_bound": "semigroup", "weak_type_probe": "semigroup",
    "annulus_superlevel_probe": "semigroup", "t_max_for_tail": "semigroup",
    # torus
    "CounterexampleConfig": "torus", "rademacher": "torus",
    "dyadic_sum": "torus", "line_sum": "torus", "chain_values": "torus",
    "apply_gauss_smoother": "torus", "apply_window_mean": "torus",
    "apply_dyadic_mean": "torus", "khinchine_check": "torus",
    "dyadic_moment": "torus", "line_moment": "torus",
    "variation_growth_experiment": "torus", "fourier_kernel_gap": "torus",
    "kernel_difference_bound": "torus", "weak_type_failure": "torus",
    "tensor_split": "torus", "tensor_residual_chain": "torus",
    # report
    "ProbeReport": "report", "write_report": "report",
    "emit_plot_data": "report", "config_fingerprint": "report",
    # rng
    "substream": "rng", "gaussian_points": "rng", "uniform_points": "rng",
    "dyadic_points": "rng",
    # errors
    "OULabError": "errors",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute "
                             f"{name!r}") from None
    value = getattr(import_module(f".{module}", __name__), name)
    # Importing a submodule binds the module object as a package attribute,
    # which would shadow the same-named exports (kernel, variation) on every
    # later lookup; pin the exports of all loaded submodules over them.
    import sys
    for n, m in _EXPORTS.items():
        sub = sys.modules.get(f"{__name__}.{m}")
        if sub is not None and hasattr(sub, n):
            globals()[n] = getattr(sub, n)
    return value


def __dir__():
    return __all__
