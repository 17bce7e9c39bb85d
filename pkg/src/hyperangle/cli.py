"""Command-line orchestration.

Subcommands:

    orbit gen          generate an orbit file (lorentz or psl2z backend)
    orbit info         print an orbit file's metadata and counts
    paircorr           empirical vs theoretical pair correlation, CSV out
    volume-check       main-term vs direct volume of the pair regions
    asymptotics        g2(xi) / ((n-1) xi^{n-2}) over a xi sweep
    spectrum-recover   peel distances out of a density curve
    density plot-f     tabulate the kernel with one argument fixed

Configuration precedence (documented contract): values from a TOML file
given with --config override command-line flags, which override defaults.
Exit codes: 2 usage, 3 resource limits, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

try:  # py3.11+: stdlib tomllib
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__, density, empirical, lattice
from .density.kernel import DensityContext, DistanceSpectrum, QuadratureSettings
from .errors import HyperangleError, UsageError

DEFAULT_T_NORM = 200.0


def _parse_grid(spec: str) -> np.ndarray:
    """Grid specs: 'lo:hi:count' (geometric) or comma-separated values."""
    if ":" in spec:
        lo, hi, count = spec.split(":")
        return np.geomspace(float(lo), float(hi), int(count))
    return np.array([float(v) for v in spec.split(",")])


def _parse_cone(spec: str, n: int) -> lattice.Cone:
    """Cone spec 'axis=1,0;theta=1.0472'."""
    axis = None
    theta = None
    for part in spec.split(";"):
        key, _, val = part.partition("=")
        if key.strip() == "axis":
            axis = np.array([float(v) for v in val.split(",")])
        elif key.strip() == "theta":
            theta = float(val)
    if axis is None or theta is None:
        raise UsageError("cone spec must look like 'axis=1,0;theta=1.0472'")
    if axis.size != n:
        raise UsageError(f"cone axis must have {n} components")
    return lattice.Cone(axis / np.linalg.norm(axis), theta)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("HYPERANGLE_THREADS")
    return int(env) if env else 1


def _quad_from(args) -> QuadratureSettings:
    return QuadratureSettings(
        abs_tol=args.quad_abs_tol,
        rel_tol=args.quad_rel_tol,
        max_subdiv=args.quad_max_subdiv,
    )


def _emit(path: str | None, header_lines: list[str], rows: list[str]) -> None:
    text = "".join(f"# {h}\n" for h in header_lines) + "".join(r + "\n" for r in rows)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _meta(args, extra: dict) -> list[str]:
    pairs = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    pairs.update(extra)
    return [f"hyperangle {__version__}"] + [f"{k}={v}" for k, v in pairs.items()]


def _load_dataset(args) -> lattice.OrbitDataset:
    if args.orbit:
        return lattice.load_orbit(args.orbit)
    if args.backend == "psl2z":
        return lattice.psl2z_orbit(args.q, max_points=args.max_points)
    if args.backend == "lorentz":
        return lattice.enumerate_lorentz(args.n, args.q, max_points=args.max_points)
    raise UsageError("need --orbit FILE or --backend lorentz|psl2z with --q")


def _resolve_veff(ds: lattice.OrbitDataset, args) -> float:
    if getattr(args, "veff", None):
        return args.veff
    if ds.v_eff is not None:
        return ds.v_eff
    if getattr(args, "calibrate", False):
        q_hi = ds.Q
        # smallest usable lower end: the 100th point's norm, with margin
        cosh_sorted = np.sort(ds.cosh_values())
        if cosh_sorted.size < 120:
            raise UsageError(
                f"only {cosh_sorted.size} points; too few to calibrate V_eff"
            )
        q_min = math.sqrt(2.0 * float(cosh_sorted[99])) * 1.02
        q_lo = max(q_hi / 5.0, q_min)
        if q_lo >= 0.9 * q_hi:
            raise UsageError("orbit too shallow to calibrate; pass --veff")
        return lattice.effective_covolume(ds, (q_lo, q_hi))
    raise UsageError(
        "the orbit has no effective covolume; pass --veff or --calibrate"
    )


# --- subcommands ----------------------------------------------------------------


def cmd_orbit_gen(args) -> int:
    ds = _load_dataset(args)
    if args.calibrate:
        _resolve_veff(ds, args)
    lattice.save_orbit(ds, args.out)
    print(f"wrote {ds.size} points to {args.out}")
    return 0


def cmd_orbit_info(args) -> int:
    ds = lattice.load_orbit(args.orbit)
    veff = "na" if ds.v_eff is None else f"{ds.v_eff:.6g}"
    print(
        f"n={ds.n} q={ds.Q:g} points={ds.size} w={ds.w} "
        f"source={ds.source} veff={veff}"
    )
    return 0


def cmd_paircorr(args) -> int:
    ds = _load_dataset(args)
    veff = _resolve_veff(ds, args)
    ctx = DensityContext(ds.n, veff, quad=_quad_from(args))
    xi = _parse_grid(args.xi_grid)
    if ds.size < 2:
        raise UsageError("orbit has fewer than 2 points")

    full = ds
    if args.cone:
        full = lattice.cone_filter(ds, _parse_cone(args.cone, ds.n))
    t_max = min(math.acosh(args.t_norm ** 2 / 2.0), math.acosh(ds.Q * ds.Q / 2.0))
    spectrum = lattice.distance_spectrum(ds, t_max)

    curve = empirical.pair_correlation(full, xi, ctx.k, threads=_threads(args))
    g2_hist = np.diff(curve.r2q) / np.diff(xi) if xi.size > 1 else np.array([])

    rows = ["xi,r2q_empirical,r2_theory,g2_theory,g2_empirical,rel_err"]
    tail = 0.0
    for j, x in enumerate(xi):
        r2_th = density.r2_theoretical(float(x), spectrum, ctx)
        g2_th, tail = density.g2_theoretical(float(x), spectrum, ctx)
        g2_emp = g2_hist[min(j, g2_hist.size - 1)] if g2_hist.size else float("nan")
        rel = abs(curve.r2q[j] / r2_th - 1.0) if r2_th > 0 else float("inf")
        rows.append(
            f"{x:.17g},{curve.r2q[j]:.17g},{r2_th:.17g},"
            f"{g2_th:.17g},{g2_emp:.17g},{rel:.17g}"
        )
    meta = _meta(
        args,
        {
            "points": full.size,
            "k": ctx.k,
            "veff": veff,
            "mode": curve.mode,
            "spectrum_entries": len(spectrum),
            "truncation_T": args.t_norm,
            "tail_estimate": tail,
        },
    )
    _emit(args.out, meta, rows)
    return 0


def cmd_volume_check(args) -> int:
    ctx = DensityContext(args.n, args.veff, quad=_quad_from(args))
    rows = ["n,q,t,xi,main,numeric,ratio,error_scale"]
    for t in _parse_grid(args.t_grid):
        for x in _parse_grid(args.xi_grid):
            vm = density.vol_RM_main(args.q, float(x), float(t), ctx)
            vn = density.vol_RM_numeric(args.q, float(x), float(t), ctx)
            scale = density.vol_RM_error_scale(args.q, float(x), float(t), args.n)
            rows.append(
                f"{args.n},{args.q},{t:.17g},{x:.17g},"
                f"{vm:.17g},{vn:.17g},{vm / vn:.17g},{scale:.17g}"
            )
    _emit(args.out, _meta(args, {}), rows)
    return 0


def cmd_asymptotics(args) -> int:
    if args.levels:
        # integer backend via per-level representation counts: reaches far
        # deeper spectra than point enumeration would allow
        if args.backend not in (None, "lorentz"):
            raise UsageError("--levels applies to the lorentz backend only")
        n = args.n
        profile = lattice.lorentz_count_profile(n, args.levels)
        spectrum = lattice.lorentz_distance_spectrum(n, args.levels)
        if args.veff:
            veff = args.veff
        else:
            q_hi = math.sqrt(2.0 * args.levels)
            veff, _ = lattice.effective_covolume_from_profile(
                profile, (max(8.0, q_hi / 4.0), q_hi)
            )
    else:
        ds = _load_dataset(args)
        veff = _resolve_veff(ds, args)
        n = ds.n
        t_max = min(math.acosh(args.t_norm ** 2 / 2.0), math.acosh(ds.Q * ds.Q / 2.0))
        spectrum = lattice.distance_spectrum(ds, t_max)
    ctx = DensityContext(n, veff, quad=_quad_from(args))
    rows = ["xi,g2,tail_estimate,ratio"]
    for x in _parse_grid(args.xi_grid):
        g2, tail = density.g2_theoretical(float(x), spectrum, ctx)
        ref = (ctx.n - 1) * float(x) ** (ctx.n - 2)
        rows.append(f"{x:.17g},{g2:.17g},{tail:.17g},{g2 / ref:.17g}")
    _emit(args.out, _meta(args, {"k": ctx.k, "veff": veff}), rows)
    return 0


def cmd_spectrum_recover(args) -> int:
    ctx = DensityContext(args.n, args.veff, quad=_quad_from(args))
    if args.synthetic:
        entries = []
        for part in args.synthetic.split(","):
            t_str, _, m_str = part.partition(":")
            entries.append((float(t_str), int(m_str) if m_str else 1))
        spec = DistanceSpectrum.from_entries(entries, source="synthetic")

        def g2(x: float) -> float:
            return density.g2_theoretical(x, spec, ctx)[0]

        reference = entries
    elif args.from_csv:
        data = np.genfromtxt(args.from_csv, delimiter=",", names=True, comments="#")
        xs, ys = data["xi"], data["g2"]

        def g2(x: float) -> float:
            return float(np.interp(x, xs, ys))

        reference = None
    else:
        raise UsageError("need --synthetic t[:mult],... or --from-csv FILE")

    recovered = density.recover_length_spectrum(
        g2, args.veff, args.n, args.depth, xi_lo=args.xi_lo, xi_hi=args.xi_hi
    )
    rows = ["t_recovered,multiplicity,t_reference,abs_err"]
    for i, (t, m) in enumerate(recovered):
        if reference is not None and i < len(reference):
            ref_t = sorted(reference)[i][0]
            rows.append(f"{t:.17g},{m},{ref_t:.17g},{abs(t - ref_t):.3e}")
        else:
            rows.append(f"{t:.17g},{m},,")
    _emit(args.out, _meta(args, {"k": ctx.k}), rows)
    return 0


def cmd_density_plot_f(args) -> int:
    ctx = DensityContext(args.n, args.veff, quad=_quad_from(args))
    key, _, val = args.fix.partition("=")
    fixed = float(val)
    grid = _parse_grid(args.grid)
    if key == "xi":
        rows = ["l,f"] + [
            f"{l:.17g},{density.f_xi(fixed, float(l), ctx):.17g}" for l in grid
        ]
    elif key == "l":
        rows = ["xi,f"] + [
            f"{x:.17g},{density.f_xi(float(x), fixed, ctx):.17g}" for x in grid
        ]
    else:
        raise UsageError("--fix must be xi=<value> or l=<value>")
    _emit(args.out, _meta(args, {}), rows)
    return 0


# --- wiring ----------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file (overrides flags)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--quad-abs-tol", type=float, default=1e-12)
    p.add_argument("--quad-rel-tol", type=float, default=1e-10)
    p.add_argument("--quad-max-subdiv", type=int, default=200)


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--orbit", help="orbit file (v1 CSV)")
    p.add_argument("--backend", choices=["lorentz", "psl2z", "file"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--q", type=float)
    p.add_argument("--max-points", type=int, default=lattice.DEFAULT_MAX_POINTS)
    p.add_argument("--veff", type=float)
    p.add_argument("--calibrate", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperangle", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    orbit = sub.add_parser("orbit", help="generate or inspect orbit files")
    orbit_sub = orbit.add_subparsers(dest="orbit_command", required=True)
    gen = orbit_sub.add_parser("gen")
    _add_common(gen)
    _add_source(gen)
    gen.set_defaults(func=cmd_orbit_gen)
    info = orbit_sub.add_parser("info")
    info.add_argument("orbit")
    info.set_defaults(func=cmd_orbit_info)

    pc = sub.add_parser("paircorr", help="empirical vs theoretical comparison")
    _add_common(pc)
    _add_source(pc)
    pc.add_argument("--xi-grid", default="0.5:4:8")
    pc.add_argument("--cone", help="'axis=1,0;theta=1.0472'")
    pc.add_argument("--t-norm", type=float, default=DEFAULT_T_NORM,
                    help="norm truncation T for the theory sum")
    pc.set_defaults(func=cmd_paircorr)

    vc = sub.add_parser("volume-check", help="main-term vs direct volumes")
    _add_common(vc)
    vc.add_argument("--n", type=int, required=True)
    vc.add_argument("--q", type=float, required=True)
    vc.add_argument("--veff", type=float, default=1.0)
    vc.add_argument("--t-grid", default="1,2,3")
    vc.add_argument("--xi-grid", default="0.5,1,2")
    vc.set_defaults(func=cmd_volume_check)

    asym = sub.add_parser("asymptotics", help="large-xi density ratios")
    _add_common(asym)
    _add_source(asym)
    asym.add_argument("--xi-grid", default="1:50:12")
    asym.add_argument("--t-norm", type=float, default=DEFAULT_T_NORM)
    asym.add_argument("--levels", type=int,
                      help="lorentz backend: spectrum from per-level counts "
                           "up to this level (no point materialization)")
    asym.set_defaults(func=cmd_asymptotics)

    rec = sub.add_parser("spectrum-recover", help="peel distances from g2")
    _add_common(rec)
    rec.add_argument("--n", type=int, default=2)
    rec.add_argument("--veff", type=float, required=True)
    rec.add_argument("--depth", type=int, default=3)
    rec.add_argument("--synthetic", help="'t[:mult],t[:mult],...'")
    rec.add_argument("--from-csv", help="CSV with xi,g2 columns")
    rec.add_argument("--xi-lo", type=float, default=0.05)
    rec.add_argument("--xi-hi", type=float, default=25.0)
    rec.set_defaults(func=cmd_spectrum_recover)

    dens = sub.add_parser("density", help="kernel tabulation")
    dens_sub = dens.add_subparsers(dest="density_command", required=True)
    plotf = dens_sub.add_parser("plot-f")
    _add_common(plotf)
    plotf.add_argument("--n", type=int, default=2)
    plotf.add_argument("--veff", type=float, default=1.0)
    plotf.add_argument("--fix", required=True, help="xi=<v> or l=<v>")
    plotf.add_argument("--grid", default="0.05:10:200")
    plotf.set_defaults(func=cmd_density_plot_f)

    return ap


def _apply_config(args: argparse.Namespace) -> None:
    """TOML values override flags (documented precedence)."""
    if not getattr(args, "config", None):
        return
    with open(args.config, "rb") as fh:
        cfg = tomllib.load(fh)
    flat = dict(cfg)
    quad = flat.pop("quad", {})
    for key, val in quad.items():
        flat[f"quad_{key}"] = val
    for key, val in flat.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr):
            setattr(args, attr, val)
        else:
            raise UsageError(f"unknown config key {key!r}")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except HyperangleError as exc:
        print(f"hyperangle: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
