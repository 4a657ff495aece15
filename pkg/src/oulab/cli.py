"""Command line driver for the laboratory.

Verb tree:

    model check FILE             validate a model and print invariant data
    kernel eval                  evaluate the transition kernel at (t, x, u)
    kernel zeros                 count sign changes of the kernel time slope
    kernel bounds                calibrate one pointwise kernel bound
    variation path               rho-variation of a sampled path
    semigroup apply              apply the semigroup to a bump, three routes
    probe weak-type              distribution-function probe, per regime
    probe cz                     size and smoothness sweeps, near kernel
    probe kernel-bounds          calibrate the four kernel bounds
    probe enhanced               annulus superlevel-set probe
    torus qian                   dyadic oscillation growth experiment
    torus fourier                Gaussian vs window-mean multiplier gap
    torus failure                weak (p, p) blowup of the dyadic chain
    torus delta                  flat-kernel replacement error

Exit codes: 0 success / probe passed, 1 usage or configuration error,
2 probe ran but its statistic failed the stated criterion.  Reports and
plot CSVs land under --out and are written atomically; timing goes to
stderr so identical runs produce identical files.  OULAB_THREADS sets
the default BLAS thread count; --threads overrides it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

# Heavy imports stay inside the handlers so that `--help`, argument
# errors, and thread-count plumbing run before the numerics stack loads.

_BOUND_NAMES = ("kernel-small-t", "dkernel-small-t", "dkernel-large-t",
                "tail-integral")


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; the contract here wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# shared plumbing


def _parse_vector(text: str):
    import numpy as np
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        from .errors import ModelFileError
        raise ModelFileError(f"bad vector {text!r}: {exc}") from None


def _parse_list(text: str, cast):
    return [cast(v) for v in text.replace(",", " ").split()]


def _load_model(spec: str):
    """Builtin name (standard1 / standard2 / standard3) or a JSON or TOML
    file with keys Q and B (n optional)."""
    from .errors import ModelFileError
    from .model import build_model, model_from_dict, standard_model
    if spec.startswith("standard"):
        tail = spec[len("standard"):].rstrip("d")
        if tail.isdigit() and 1 <= int(tail) <= 6:
            return standard_model(int(tail))
        raise ModelFileError(f"unknown builtin model {spec!r}")
    if not os.path.exists(spec):
        raise ModelFileError(f"model file not found: {spec}")
    try:
        if spec.endswith(".toml"):
            try:
                import tomllib
            except ImportError:
                raise ModelFileError(
                    "TOML models need Python 3.11+; use JSON") from None
            with open(spec, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(spec) as fh:
                data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ModelFileError(f"cannot read model {spec!r}: {exc}") from None
    if not isinstance(data, dict) or "Q" not in data or "B" not in data:
        raise ModelFileError(f"model {spec!r} needs keys Q and B")
    if "n" in data:
        return model_from_dict(data)
    return build_model(data["Q"], data["B"])


def _fingerprint_inputs(args) -> dict:
    skip = {"func", "out", "threads", "budget"}
    d = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or callable(v):
            continue
        d[k] = v
    return d


def _finalize(report, args) -> int:
    """Stamp the config fingerprint, write report + plot CSVs, print the
    verdict, and map it to an exit code."""
    from .report import config_fingerprint, emit_plot_data, write_report
    out = args.out
    os.makedirs(out, exist_ok=True)
    report.inputs["config_fingerprint"] = config_fingerprint(
        _fingerprint_inputs(args))
    path = os.path.join(out, f"{report.name}.json")
    write_report(report, path)
    written = emit_plot_data(report, out)
    print(f"report {path}")
    for p in written:
        print(f"plot-data {p}")
    for key in sorted(report.pass_flags):
        print(f"  {key}: {'pass' if report.pass_flags[key] else 'FAIL'}")
    ok = report.overall_pass()
    print("overall:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# model / kernel / variation / semigroup verbs


def _cmd_model_check(args) -> int:
    import numpy as np
    model = _load_model(args.model)
    residual = float(np.abs(model.B @ model.Qinf + model.Qinf @ model.B.T
                            + model.Q).max())
    scale = max(1.0, float(np.abs(model.Q).max()))
    print(f"dimension            {model.n}")
    print(f"spectral abscissa    {model.spectral_abscissa:.6g}")
    print(f"invariant covariance {model.Qinf.tolist()}")
    print(f"lyapunov residual    {residual:.3e}")
    ok = residual <= 1e-8 * scale
    print("check:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


def _cmd_kernel_eval(args) -> int:
    from .kernel import kernel, log_kernel
    model = _load_model(args.model)
    x = _parse_vector(args.x)
    u = _parse_vector(args.u)
    lk = log_kernel(model, args.t, x, u)
    print(f"log K_t(x, u) = {lk:.12g}")
    print(f"K_t(x, u)     = {kernel(model, args.t, x, u):.12g}")
    return 0


def _cmd_kernel_zeros(args) -> int:
    from .kernel import count_kdot_zeros
    model = _load_model(args.model)
    zc = count_kdot_zeros(model, _parse_vector(args.x),
                          _parse_vector(args.u),
                          t_interval=(args.t_lo, args.t_hi),
                          n_scan=args.scan)
    print(f"sign changes of dK/dt on ({args.t_lo:g}, {args.t_hi:g}]: "
          f"{zc.count}")
    for t in zc.zeros:
        print(f"  zero near t = {t:.10g}")
    print("grid-doubling stable:", "yes" if zc.stable else "NO")
    return 0 if zc.stable else 2


def _cmd_kernel_bounds(args) -> int:
    from .kernel import calibrate_bound
    model = _load_model(args.model)
    which = _BOUND_NAMES if args.which == "all" else (args.which,)
    worst = True
    for w in which:
        cal = calibrate_bound(model, w, n_samples=args.samples,
                              seed=args.seed, c=args.rate)
        print(f"{w}: rate c = {cal.exponent_rate:.6g}, prefactor cap = "
              f"{cal.prefactor_cap:.6g}, stable = {cal.stable}")
        worst = worst and cal.stable
    return 0 if worst else 2


def _cmd_variation_path(args) -> int:
    import numpy as np
    from .errors import ModelFileError
    from .variation import variation_exhaustive, variation_values
    if args.file:
        try:
            with open(args.file) as fh:
                text = fh.read()
        except OSError as exc:
            raise ModelFileError(f"cannot read path file: {exc}") from None
        values = _parse_vector(text)
    else:
        values = _parse_vector(args.values)
    v = variation_values(np.asarray(values, dtype=float), args.rho)
    if args.check and values.size <= 16:
        ref = variation_exhaustive(np.asarray(values, dtype=float), args.rho)
        if abs(v - ref) > 1e-9 * max(1.0, abs(ref)):
            print(f"{v:.6f} (exhaustive check FAILED: {ref:.6f})")
            return 2
    print(f"{v:.6f}")
    return 0


def _cmd_semigroup_apply(args) -> int:
    import numpy as np
    from .semigroup import (QuadratureSpec, apply_semigroup,
                            bump_semigroup_value, gaussian_bump)
    model = _load_model(args.model)
    x = _parse_vector(args.x)
    center = (_parse_vector(args.center) if args.center
              else np.zeros(model.n))
    bump = gaussian_bump(model, center, args.width)
    spec = QuadratureSpec(order=args.order)
    closed = bump_semigroup_value(model, bump, args.t, x)
    via_kernel = apply_semigroup(model, spec, bump, x, args.t,
                                 form="kernel")
    via_transition = apply_semigroup(model, spec, bump, x, args.t,
                                     form="kolmogorov")
    gap = max(abs(via_kernel - closed), abs(via_transition - closed))
    rel = gap / max(abs(closed), 1e-300)
    print(f"closed form        {closed:.12g}")
    print(f"kernel quadrature  {via_kernel:.12g}")
    print(f"transition form    {via_transition:.12g}")
    print(f"max relative gap   {rel:.3e}")
    ok = rel <= 1e-6
    print("agreement:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# probe verbs


def _cmd_probe_weak_type(args) -> int:
    from .semigroup import weak_type_probe
    model = _load_model(args.model)
    center = _parse_vector(args.center) if args.center else None
    report = weak_type_probe(model, args.rho, regime=args.regime,
                             width=args.width, center=center,
                             sample_size=args.samples, seed=args.seed,
                             n_alphas=args.alphas,
                             points_per_decade=args.points_per_decade,
                             max_refine=args.refine)
    print(f"statistic {report.statistics['statistic']:.6g}  "
          f"(half sample {report.statistics['half_sample_statistic']:.6g})")
    return _finalize(report, args)


def _cmd_probe_cz(args) -> int:
    from .report import ProbeReport
    from .semigroup import cz_size_sweep, cz_smoothness_sweep
    model = _load_model(args.model)
    size = cz_size_sweep(model, args.rho, n_dirs=args.dirs, seed=args.seed)
    smooth = cz_smoothness_sweep(model, args.rho, n_triples=args.triples,
                                 seed=args.seed)
    report = ProbeReport(
        name="cz-sweeps",
        claim=("|x-u|^n times the near-part variation kernel norm and "
               "|x-u|^{n+1}/|u-u'| times the difference norm stay bounded "
               "and grid-stable over separations"),
        inputs={"rho": args.rho, "model": args.model, "n_dirs": args.dirs,
                "n_triples": args.triples},
        statistics={"size_max": size["max_stat"],
                    "size_drift": size["drift"],
                    "smooth_max": smooth["max_stat"],
                    "smooth_drift": smooth["drift"]},
        tables={"cz_size": [{"radius": float(r), "stat": float(s)}
                            for r, s in zip(size["radii"],
                                            size["profile"])],
                "cz_smooth": [{"radius": float(r), "stat": float(s)}
                              for r, s in zip(smooth["radii"],
                                              smooth["profile"])]},
        pass_flags={"size_stable": size["stable"],
                    "smooth_stable": smooth["stable"]},
        ci={},
        seed=args.seed)
    print(f"size sweep   max {size['max_stat']:.6g}  drift "
          f"{size['drift']:.3f}")
    print(f"smooth sweep max {smooth['max_stat']:.6g}  drift "
          f"{smooth['drift']:.3f}")
    return _finalize(report, args)


def _cmd_probe_kernel_bounds(args) -> int:
    from .kernel import calibrate_bound
    from .report import ProbeReport
    model = _load_model(args.model)
    rows, stats, flags = [], {}, {}
    for w in _BOUND_NAMES:
        cal = calibrate_bound(model, w, n_samples=args.samples,
                              seed=args.seed)
        rows.append({"bound": w, "rate": cal.exponent_rate,
                     "prefactor_cap": cal.prefactor_cap,
                     "stable": cal.stable})
        stats[f"{w}/rate"] = cal.exponent_rate
        stats[f"{w}/cap"] = cal.prefactor_cap
        flags[f"{w}/stable"] = cal.stable
        flags[f"{w}/finite"] = bool(cal.prefactor_cap < float("inf"))
    report = ProbeReport(
        name="kernel-bounds",
        claim=("each pointwise kernel estimate holds with a finite "
               "prefactor at its calibrated Gaussian rate, stable under "
               "sample doubling"),
        inputs={"model": args.model, "samples": args.samples},
        statistics=stats,
        tables={"calibrations": rows},
        pass_flags=flags,
        ci={},
        seed=args.seed)
    for r in rows:
        print(f"{r['bound']}: c = {r['rate']:.6g}, cap = "
              f"{r['prefactor_cap']:.6g}")
    return _finalize(report, args)


def _cmd_probe_enhanced(args) -> int:
    from .semigroup import annulus_superlevel_probe
    model = _load_model(args.model)
    center = _parse_vector(args.center) if args.center else None
    report = annulus_superlevel_probe(
        model, _parse_list(args.alphas, float), args.delta,
        width=args.width, center=center, sample_size=args.samples,
        seed=args.seed)
    print(f"statistic {report.statistics['statistic']:.6g}")
    return _finalize(report, args)


# ---------------------------------------------------------------------------
# torus verbs


def _cmd_torus_qian(args) -> int:
    from .report import ProbeReport
    from .torus import CounterexampleConfig, variation_growth_experiment
    n_list = _parse_list(args.N, int)
    reports = []
    for N in n_list:
        cfg = CounterexampleConfig(N=N, seed=args.seed,
                                   sample_size=args.samples)
        reports.append(variation_growth_experiment(cfg, args.operator))
    if len(reports) == 1:
        rep = reports[0]
        print(f"N={n_list[0]}  median v(2)/sqrt(N) = "
              f"{rep.statistics['median_scaled']:.6f}")
        return _finalize(rep, args)
    growth_rows, measure_rows, flags = [], [], {}
    medians = []
    for N, rep in zip(n_list, reports):
        medians.append(rep.statistics["median_scaled"])
        growth_rows.append({"N": N,
                            "median_scaled": rep.statistics["median_scaled"],
                            "drift": rep.statistics["drift"]})
        for row in rep.tables["threshold_measure"]:
            measure_rows.append({"N": N, **row})
        for k, v in rep.pass_flags.items():
            flags[f"N{N}/{k}"] = v
        print(f"N={N}  median v(2)/sqrt(N) = "
              f"{rep.statistics['median_scaled']:.6f}")
    diffs = [b - a for a, b in zip(medians, medians[1:])]
    flags["median_nondecreasing"] = all(d >= -1e-12 for d in diffs)
    report = ProbeReport(
        name="torus-growth",
        claim=("the median of v(2)/sqrt(N) for the scale chain does not "
               "decrease with N and the threshold exceedance curves climb"),
        inputs={"n_list": n_list, "operator": args.operator,
                "sample_size": args.samples},
        statistics={"medians_scaled": medians},
        tables={"qian_growth": growth_rows,
                "threshold_measure": measure_rows},
        pass_flags=flags,
        ci={},
        seed=args.seed)
    return _finalize(report, args)


def _cmd_torus_fourier(args) -> int:
    import numpy as np
    from .report import ProbeReport
    from .torus import fourier_kernel_gap
    xi = np.geomspace(args.xi_min, args.xi_max, args.points)
    res = fourier_kernel_gap(lmax=args.lmax, xi=xi)
    curve = res.pop("curve")
    grid_gap = abs(res["max"] - res["half_grid_max"])
    report = ProbeReport(
        name="fourier-gap",
        claim=("the summed multiplier gap between Gaussian smoothing and "
               "window means is bounded uniformly over frequencies"),
        inputs={"lmax": args.lmax, "xi_min": args.xi_min,
                "xi_max": args.xi_max, "points": args.points},
        statistics=res,
        tables={"fourier_sum": curve},
        pass_flags={"finite": bool(np.isfinite(res["max"])),
                    "grid_stable":
                        bool(grid_gap <= 1e-3 * max(1.0, res["max"]))},
        ci={},
        seed=0)
    print(f"sup of summed gap {res['max']:.6f} at xi = "
          f"{res['argmax_xi']:.6g}; truncation tail <= "
          f"{res['tail_bound']:.3e}")
    return _finalize(report, args)


def _cmd_torus_failure(args) -> int:
    from .torus import weak_type_failure
    report = weak_type_failure(p_grid=_parse_list(args.p, float),
                               n_grid=_parse_list(args.N, int),
                               sample_size=args.samples, seed=args.seed)
    for p, q in report.statistics["quotients"].items():
        print(f"p = {p}: quotients across N = "
              + ", ".join(f"{v:.4g}" for v in q))
    return _finalize(report, args)


def _cmd_torus_delta(args) -> int:
    from .torus import kernel_difference_bound
    model = _load_model(args.model)
    report = kernel_difference_bound(model,
                                     n_grid=_parse_list(args.N, int),
                                     c=args.rate,
                                     sample_size=args.samples,
                                     x_points=args.xpoints, seed=args.seed)
    return _finalize(report, args)


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(p, out=True):
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS thread count (default: OULAB_THREADS or"
                        " library default)")
    p.add_argument("--budget", type=float, default=None,
                   help="wall-clock budget in seconds; exceeding it fails"
                        " the run")
    if out:
        p.add_argument("--out", default="reports",
                       help="directory for reports and plot CSVs")


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="oulab",
                   description="numerical laboratory for the "
                               "Ornstein-Uhlenbeck semigroup, its kernel, "
                               "and variation operators")
    top = root.add_subparsers(dest="group", required=True)

    g_model = top.add_parser("model", parents=[], help="model validation")
    sub = g_model.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("check", help="validate a model file")
    p.add_argument("model", help="builtin name (standard1..standard6) or"
                                 " JSON/TOML file with Q, B")
    _add_common(p, out=False)
    p.set_defaults(func=_cmd_model_check)

    g_kernel = top.add_parser("kernel", help="transition kernel tools")
    sub = g_kernel.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("eval", help="kernel value at (t, x, u)")
    p.add_argument("--model", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--u", required=True)
    _add_common(p, out=False)
    p.set_defaults(func=_cmd_kernel_eval)
    p = sub.add_parser("zeros", help="sign changes of the time slope")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--t-lo", type=float, default=1e-8)
    p.add_argument("--t-hi", type=float, default=1.0)
    p.add_argument("--scan", type=int, default=4096)
    _add_common(p, out=False)
    p.set_defaults(func=_cmd_kernel_zeros)
    p = sub.add_parser("bounds", help="calibrate a pointwise bound")
    p.add_argument("--model", required=True)
    p.add_argument("--which", default="all",
                   choices=_BOUND_NAMES + ("all",))
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=None,
                   help="explicit Gaussian rate c (default: calibrate)")
    _add_common(p, out=False)
    p.set_defaults(func=_cmd_kernel_bounds)

    g_var = top.add_parser("variation", help="path variation tools")
    sub = g_var.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("path", help="rho-variation of a sampled path")
    p.add_argument("--rho", type=float, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--file", help="text file of path values")
    src.add_argument("--values", help="inline comma-separated values")
    p.add_argument("--check", action="store_true",
                   help="cross-check against exhaustive enumeration")
    _add_common(p, out=False)
    p.set_defaults(func=_cmd_variation_path)

    g_semi = top.add_parser("semigroup", help="semigroup application")
    sub = g_semi.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("apply", help="H_t f at x for a Gaussian bump, by "
                                     "closed form and both quadratures")
    p.add_argument("--model", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--width", type=float, default=0.5)
    p.add_argument("--center", default=None)
    p.add_argument("--order", type=int, default=None)
    _add_common(p, out=False)
    p.set_defaults(func=_cmd_semigroup_apply)

    g_probe = top.add_parser("probe", help="Monte Carlo probes")
    sub = g_probe.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("weak-type", help="distribution function of the "
                                         "variation operator")
    p.add_argument("--model", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--regime", default="full",
                   choices=("full", "large-t", "global-small-t",
                            "local-small-t"))
    p.add_argument("--width", type=float, default=0.5)
    p.add_argument("--center", default=None)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alphas", type=int, default=48)
    p.add_argument("--points-per-decade", type=int, default=16)
    p.add_argument("--refine", type=int, default=3)
    _add_common(p)
    p.set_defaults(func=_cmd_probe_weak_type)
    p = sub.add_parser("cz", help="size and smoothness kernel sweeps")
    p.add_argument("--model", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--dirs", type=int, default=8)
    p.add_argument("--triples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_probe_cz)
    p = sub.add_parser("kernel-bounds", help="calibrate all four bounds")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_probe_kernel_bounds)
    p = sub.add_parser("enhanced", help="annulus superlevel-set probe")
    p.add_argument("--model", required=True)
    p.add_argument("--alphas", default="4,8,16,32",
                   help="comma list of levels, each > 2")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--width", type=float, default=0.5)
    p.add_argument("--center", default=None)
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_probe_enhanced)

    g_torus = top.add_parser("torus", help="dyadic oscillation laboratory")
    sub = g_torus.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("qian", help="variation growth across scales")
    p.add_argument("--N", required=True,
                   help="scale count, or comma list for a combined report")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--operator", default="E",
                   choices=("A", "Dtorus", "E"))
    _add_common(p)
    p.set_defaults(func=_cmd_torus_qian)
    p = sub.add_parser("fourier", help="multiplier gap over frequencies")
    p.add_argument("--lmax", type=int, default=48)
    p.add_argument("--xi-min", type=float, default=1e-3)
    p.add_argument("--xi-max", type=float, default=1e9)
    p.add_argument("--points", type=int, default=4001)
    _add_common(p)
    p.set_defaults(func=_cmd_torus_fourier)
    p = sub.add_parser("failure", help="weak (p, p) quotients across N")
    p.add_argument("--p", default="1,2", help="comma list of exponents")
    p.add_argument("--N", default="4,6,8,10", help="comma list of scales")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_torus_failure)
    p = sub.add_parser("delta", help="flat-kernel replacement error")
    p.add_argument("--model", default="standard1")
    p.add_argument("--N", default="2,3,4", help="comma list of scales")
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--xpoints", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_torus_delta)

    return root


def _set_threads(args) -> None:
    n = args.threads
    if n is None:
        env = os.environ.get("OULAB_THREADS")
        n = int(env) if env else None
    if n is not None and n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args)
    from .errors import OULabError, RateTooLargeError
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except RateTooLargeError as exc:
        print(f"oulab: bound failed: {exc}", file=sys.stderr)
        return 2
    except OULabError as exc:
        print(f"oulab: error: {exc}", file=sys.stderr)
        return 1
    finally:
        print(f"runtime {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    if args.budget is not None:
        spent = time.perf_counter() - t0
        if spent > args.budget:
            print(f"oulab: budget exceeded: {spent:.2f}s > "
                  f"{args.budget:.2f}s", file=sys.stderr)
            return max(code, 2)
    return code


if __name__ == "__main__":
    sys.exit(main())
